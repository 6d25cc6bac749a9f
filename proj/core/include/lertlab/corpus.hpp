#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lertlab/tags.hpp"

namespace lertlab {

// One annotated word: surface form plus its three per-word labels.
struct Word {
    std::string surface;
    std::string pos;
    std::string ner;
    std::string dep;
};

struct AnnotatedSentence {
    std::vector<Word> words;
};

using Corpus = std::vector<AnnotatedSentence>;

// Subtoken vocabulary. PAD is always id 0 and the five specials precede all
// corpus tokens; LMLM mask tokens, when present, follow the corpus tokens.
struct Vocab {
    static constexpr int32_t kPad = 0;
    static constexpr int32_t kUnk = 1;
    static constexpr int32_t kCls = 2;
    static constexpr int32_t kSep = 3;
    static constexpr int32_t kMask = 4;
    static constexpr int32_t kNumSpecials = 5;

    std::vector<std::string> tokens;
    std::unordered_map<std::string, int32_t> index;
    int32_t lmlm_begin = 0;  // first LMLM mask token id; == size() when none

    int32_t size() const { return static_cast<int32_t>(tokens.size()); }
    int32_t id_of(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? kUnk : it->second;
    }
    // Number of plain corpus tokens eligible for random replacement.
    int32_t corpus_token_count() const { return lmlm_begin - kNumSpecials; }

    void append(const std::string& token);
};

// Target sentinel for positions without a prediction target (CLS, SEP, PAD).
constexpr int32_t kNoTarget = -1;

// A sentence rendered to subtoken ids with per-position broadcast tags.
// word_spans partition the non-special range [1, 1 + n_subtokens).
struct EncodedSentence {
    std::vector<int32_t> token_ids;
    std::vector<std::pair<int32_t, int32_t>> word_spans;  // [start, end) per kept word
    std::vector<int32_t> pos_ids;  // kNoTarget at CLS/SEP
    std::vector<int32_t> ner_ids;
    std::vector<int32_t> dep_ids;

    int32_t length() const { return static_cast<int32_t>(token_ids.size()); }
    int32_t word_count() const { return static_cast<int32_t>(word_spans.size()); }
    int32_t subtoken_count() const { return length() - 2; }
    int32_t word_size(int32_t w) const { return word_spans[w].second - word_spans[w].first; }
};

// Reads the corpus TSV format: one "FORM\tPOS\tNER\tDEP" row per word,
// sentences separated by exactly one blank line, final newline required.
// Malformed rows raise Parse (with the 1-based line number), unknown tags
// raise Schema, BIEOS violations raise Annotation.
Corpus read_corpus(std::istream& in, const TagSets& tagsets);
Corpus read_corpus_file(const std::string& path, const TagSets& tagsets);

// Writes the canonical TSV form; write_corpus(read_corpus(x)) == x for
// well-formed x.
void write_corpus(std::ostream& out, const Corpus& corpus);
void write_corpus_file(const std::string& path, const Corpus& corpus);

// Splits a UTF-8 string into code-point substrings.
std::vector<std::string> utf8_chars(const std::string& text);

// Per-character split with "##" continuation for every character after the
// first: "abc" -> ["a", "##b", "##c"].
std::vector<std::string> tokenize_word(const Word& word);

// Specials get ids 0..4; corpus subtokens follow in descending frequency,
// ties broken lexicographically.
Vocab build_vocab(const Corpus& corpus);

// Vocab file: one token per line, id == line number - 1.
void write_vocab_file(const std::string& path, const Vocab& vocab);
Vocab read_vocab_file(const std::string& path);

// [CLS] subtokens [SEP], truncated at whole-word boundaries to max_len, tags
// broadcast from each word to all of its subtokens.
EncodedSentence encode_sentence(const AnnotatedSentence& sentence, const Vocab& vocab,
                                const TagSets& tagsets, int32_t max_len);

}  // namespace lertlab
