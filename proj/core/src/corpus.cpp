#include "lertlab/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "lertlab/error.hpp"

namespace lertlab {

void Vocab::append(const std::string& token) {
    auto [it, inserted] = index.emplace(token, size());
    if (!inserted) raise(ErrorKind::Schema, "duplicate vocab token '" + token + "'");
    tokens.push_back(token);
}

namespace {

void check_word(const Word& word, const TagSets& tagsets, size_t line_no) {
    auto require = [&](const TagSet& set, const std::string& label) {
        if (!set.contains(label))
            raise(ErrorKind::Schema, "line " + std::to_string(line_no) + ": unknown " + set.name() +
                                         " tag '" + label + "'");
    };
    require(tagsets.pos, word.pos);
    require(tagsets.ner, word.ner);
    require(tagsets.dep, word.dep);
}

void finish_sentence(Corpus& corpus, AnnotatedSentence& sentence, const TagSets& tagsets,
                     size_t first_line) {
    std::vector<std::string> ner;
    ner.reserve(sentence.words.size());
    for (const auto& w : sentence.words) ner.push_back(w.ner);
    auto verdict = validate_bieos(ner, tagsets.ner);
    if (!verdict.valid)
        raise(ErrorKind::Annotation, "sentence starting at line " + std::to_string(first_line) +
                                         ": BIEOS violation at token " +
                                         std::to_string(verdict.position) + " (" + verdict.reason + ")");
    corpus.push_back(std::move(sentence));
    sentence = {};
}

}  // namespace

Corpus read_corpus(std::istream& in, const TagSets& tagsets) {
    Corpus corpus;
    AnnotatedSentence sentence;
    std::string line;
    size_t line_no = 0;
    size_t sentence_first_line = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            if (!sentence.words.empty()) finish_sentence(corpus, sentence, tagsets, sentence_first_line);
            sentence_first_line = line_no + 1;
            continue;
        }
        std::vector<std::string> cols;
        size_t start = 0;
        for (;;) {
            size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                cols.push_back(line.substr(start));
                break;
            }
            cols.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (cols.size() != 4)
            raise(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected 4 tab-separated columns, got " +
                                        std::to_string(cols.size()));
        if (cols[0].empty())
            raise(ErrorKind::Parse, "line " + std::to_string(line_no) + ": empty FORM column");
        Word word{cols[0], cols[1], cols[2], cols[3]};
        check_word(word, tagsets, line_no);
        sentence.words.push_back(std::move(word));
    }
    if (!sentence.words.empty()) finish_sentence(corpus, sentence, tagsets, sentence_first_line);
    return corpus;
}

Corpus read_corpus_file(const std::string& path, const TagSets& tagsets) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open corpus file '" + path + "'");
    return read_corpus(in, tagsets);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (size_t s = 0; s < corpus.size(); ++s) {
        if (s) out << '\n';
        for (const auto& word : corpus[s].words)
            out << word.surface << '\t' << word.pos << '\t' << word.ner << '\t' << word.dep << '\n';
    }
}

void write_corpus_file(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot write corpus file '" + path + "'");
    write_corpus(out, corpus);
}

std::vector<std::string> utf8_chars(const std::string& text) {
    std::vector<std::string> chars;
    size_t i = 0;
    while (i < text.size()) {
        unsigned char lead = static_cast<unsigned char>(text[i]);
        size_t len = 1;
        if (lead >= 0xF0)
            len = 4;
        else if (lead >= 0xE0)
            len = 3;
        else if (lead >= 0xC0)
            len = 2;
        len = std::min(len, text.size() - i);
        chars.push_back(text.substr(i, len));
        i += len;
    }
    return chars;
}

std::vector<std::string> tokenize_word(const Word& word) {
    if (word.surface.empty()) raise(ErrorKind::Input, "cannot tokenize an empty surface form");
    auto chars = utf8_chars(word.surface);
    std::vector<std::string> subtokens;
    subtokens.reserve(chars.size());
    for (size_t i = 0; i < chars.size(); ++i)
        subtokens.push_back(i == 0 ? chars[i] : "##" + chars[i]);
    return subtokens;
}

Vocab build_vocab(const Corpus& corpus) {
    if (corpus.empty()) raise(ErrorKind::Data, "cannot build a vocabulary from an empty corpus");
    std::unordered_map<std::string, int64_t> counts;
    for (const auto& sentence : corpus)
        for (const auto& word : sentence.words)
            for (auto& subtoken : tokenize_word(word)) ++counts[subtoken];

    std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocab vocab;
    for (const char* special : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) vocab.append(special);
    for (auto& [token, _] : ranked) vocab.append(token);
    vocab.lmlm_begin = vocab.size();
    return vocab;
}

void write_vocab_file(const std::string& path, const Vocab& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot write vocab file '" + path + "'");
    for (const auto& token : vocab.tokens) out << token << '\n';
}

Vocab read_vocab_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open vocab file '" + path + "'");
    Vocab vocab;
    std::string line;
    while (std::getline(in, line)) vocab.append(line);
    if (vocab.size() < Vocab::kNumSpecials || vocab.tokens[0] != "[PAD]" || vocab.tokens[4] != "[MASK]")
        raise(ErrorKind::Parse, "vocab file '" + path + "' does not start with the special tokens");
    vocab.lmlm_begin = vocab.size();
    for (int32_t i = Vocab::kNumSpecials; i < vocab.size(); ++i) {
        if (vocab.tokens[i].rfind("[MASK-", 0) == 0) {
            vocab.lmlm_begin = i;
            break;
        }
    }
    return vocab;
}

EncodedSentence encode_sentence(const AnnotatedSentence& sentence, const Vocab& vocab,
                                const TagSets& tagsets, int32_t max_len) {
    if (max_len < 3) raise(ErrorKind::Config, "max_len must be at least 3");
    EncodedSentence enc;
    enc.token_ids.push_back(Vocab::kCls);
    enc.pos_ids.push_back(kNoTarget);
    enc.ner_ids.push_back(kNoTarget);
    enc.dep_ids.push_back(kNoTarget);

    for (size_t w = 0; w < sentence.words.size(); ++w) {
        const Word& word = sentence.words[w];
        auto subtokens = tokenize_word(word);
        // Truncation never splits a word span; stop before the word that
        // would cross max_len - 1 (room for SEP).
        if (enc.length() + static_cast<int32_t>(subtokens.size()) > max_len - 1) {
            if (w == 0)
                raise(ErrorKind::Input, "first word '" + word.surface + "' alone exceeds max_len - 2");
            break;
        }
        int32_t start = enc.length();
        int32_t pos_id = tagsets.pos.id_of(word.pos);
        int32_t ner_id = tagsets.ner.id_of(word.ner);
        int32_t dep_id = tagsets.dep.id_of(word.dep);
        for (const auto& subtoken : subtokens) {
            enc.token_ids.push_back(vocab.id_of(subtoken));
            enc.pos_ids.push_back(pos_id);
            enc.ner_ids.push_back(ner_id);
            enc.dep_ids.push_back(dep_id);
        }
        enc.word_spans.emplace_back(start, enc.length());
    }

    enc.token_ids.push_back(Vocab::kSep);
    enc.pos_ids.push_back(kNoTarget);
    enc.ner_ids.push_back(kNoTarget);
    enc.dep_ids.push_back(kNoTarget);
    return enc;
}

}  // namespace lertlab
