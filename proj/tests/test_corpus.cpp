#include <map>
#include <set>
#include <sstream>

#include "lertlab/corpus.hpp"
#include "lertlab/error.hpp"
#include "lertlab/synth.hpp"

#include "doctest.h"

using namespace lertlab;

TEST_SUITE_BEGIN("corpus");

namespace {
const TagSets kSets = builtin_tagsets();
}

TEST_CASE("read_corpus parses a minimal two-word block") {
    std::istringstream in("he\tr\tO\tSBV\nrun\tv\tO\tHED\n");
    Corpus corpus = read_corpus(in, kSets);
    REQUIRE(corpus.size() == 1);
    REQUIRE(corpus[0].words.size() == 2);
    CHECK(corpus[0].words[0].surface == "he");
    CHECK(corpus[0].words[1].dep == "HED");
}

TEST_CASE("read_corpus on an empty stream yields an empty corpus") {
    std::istringstream in("");
    CHECK(read_corpus(in, kSets).empty());
}

TEST_CASE("read_corpus rejects a three-column line and names it") {
    std::istringstream in("he\tr\tO\tSBV\nbad\tv\tO\n");
    try {
        read_corpus(in, kSets);
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("read_corpus rejects unknown tags and bieos violations") {
    std::istringstream bad_tag("he\tpronoun\tO\tSBV\n");
    CHECK_THROWS_AS(read_corpus(bad_tag, kSets), Error);

    std::istringstream bad_span("a\tn\tI-Ns\tSBV\nb\tv\tO\tHED\n");
    try {
        read_corpus(bad_span, kSets);
        FAIL("expected annotation error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Annotation);
    }
}

TEST_CASE("write after read reproduces well-formed input byte for byte") {
    const std::string text = "he\tr\tO\tSBV\nrun\tv\tO\tHED\n\nsky\tn\tO\tSBV\nfall\tv\tO\tHED\n";
    std::istringstream in(text);
    Corpus corpus = read_corpus(in, kSets);
    std::ostringstream out;
    write_corpus(out, corpus);
    CHECK(out.str() == text);
}

TEST_CASE("round-trip on a large synthetic corpus") {
    Corpus corpus = synth_corpus(7, 300, SynthGrammarConfig::defaults());
    std::ostringstream out;
    write_corpus(out, corpus);
    std::istringstream in(out.str());
    Corpus again = read_corpus(in, kSets);
    std::ostringstream out2;
    write_corpus(out2, again);
    CHECK(out.str() == out2.str());
    CHECK(again.size() == corpus.size());
}

TEST_CASE("tokenize_word splits per character with continuation marks") {
    CHECK(tokenize_word({"a", "n", "O", "SBV"}) == std::vector<std::string>{"a"});
    CHECK(tokenize_word({"abc", "n", "O", "SBV"}) == std::vector<std::string>{"a", "##b", "##c"});
    // Multi-byte UTF-8 code points stay intact.
    CHECK(tokenize_word({"\xe5\x8c\x97\xe4\xba\xac", "ns", "O", "SBV"}) ==
          std::vector<std::string>{"\xe5\x8c\x97", "##\xe4\xba\xac"});
    CHECK_THROWS_AS(tokenize_word({"", "n", "O", "SBV"}), Error);
}

TEST_CASE("build_vocab orders by frequency then lexicographically") {
    std::istringstream in("aaa\tn\tO\tSBV\nb\tv\tO\tHED\n\naa\tn\tO\tSBV\nb\tv\tO\tHED\n");
    Corpus corpus = read_corpus(in, kSets);
    Vocab vocab = build_vocab(corpus);
    CHECK(vocab.tokens[0] == "[PAD]");
    CHECK(vocab.tokens[4] == "[MASK]");
    // counts: "a" x2, "##a" x3, "b" x2 -> ##a first, then the a/b tie broken
    // lexicographically.
    CHECK(vocab.tokens[5] == "##a");
    CHECK(vocab.tokens[6] == "a");
    CHECK(vocab.tokens[7] == "b");
    CHECK(vocab.id_of("zzz") == Vocab::kUnk);
    CHECK_THROWS_AS(build_vocab({}), Error);
}

TEST_CASE("vocab ids are stable across rebuilds") {
    Corpus corpus = synth_corpus(11, 200, SynthGrammarConfig::defaults());
    Vocab a = build_vocab(corpus);
    Vocab b = build_vocab(corpus);
    CHECK(a.tokens == b.tokens);
}

TEST_CASE("encode_sentence lays out CLS, word spans, SEP with broadcast tags") {
    std::istringstream in("ab\ta\tO\tATT\nc\tn\tO\tSBV\nd\tv\tO\tHED\n");
    Corpus corpus = read_corpus(in, kSets);
    Vocab vocab = build_vocab(corpus);
    EncodedSentence enc = encode_sentence(corpus[0], vocab, kSets, 16);

    CHECK(enc.token_ids.front() == Vocab::kCls);
    CHECK(enc.token_ids.back() == Vocab::kSep);
    REQUIRE(enc.word_spans.size() == 3);
    CHECK(enc.word_spans[0] == std::pair<int32_t, int32_t>{1, 3});
    CHECK(enc.word_spans[1] == std::pair<int32_t, int32_t>{3, 4});
    CHECK(enc.word_spans[2] == std::pair<int32_t, int32_t>{4, 5});

    // Both subtokens of "ab" carry the word's tags.
    CHECK(enc.pos_ids[1] == kSets.pos.id_of("a"));
    CHECK(enc.pos_ids[2] == kSets.pos.id_of("a"));
    CHECK(enc.dep_ids[2] == kSets.dep.id_of("ATT"));
    // Specials carry the no-target sentinel.
    CHECK(enc.pos_ids.front() == kNoTarget);
    CHECK(enc.ner_ids.back() == kNoTarget);
}

TEST_CASE("truncation never splits a word span") {
    std::istringstream in("abc\tn\tO\tSBV\ndef\tv\tO\tHED\nghi\tn\tO\tVOB\n");
    Corpus corpus = read_corpus(in, kSets);
    Vocab vocab = build_vocab(corpus);
    // max_len 9 fits CLS + 3 + 3 + SEP but not the third word.
    EncodedSentence enc = encode_sentence(corpus[0], vocab, kSets, 9);
    CHECK(enc.word_spans.size() == 2);
    CHECK(enc.length() == 8);
    for (auto [start, end] : enc.word_spans) CHECK(start < end);

    // A first word that cannot fit at all is an error.
    CHECK_THROWS_AS(encode_sentence(corpus[0], vocab, kSets, 4), Error);
    CHECK_THROWS_AS(encode_sentence(corpus[0], vocab, kSets, 2), Error);
}

TEST_CASE("every encoded position inside a span carries its word's tags") {
    Corpus corpus = synth_corpus(3, 50, SynthGrammarConfig::defaults());
    Vocab vocab = build_vocab(corpus);
    for (const auto& sentence : corpus) {
        EncodedSentence enc = encode_sentence(sentence, vocab, kSets, 128);
        size_t covered = 0;
        for (size_t w = 0; w < enc.word_spans.size(); ++w) {
            auto [start, end] = enc.word_spans[w];
            for (int32_t p = start; p < end; ++p) {
                CHECK(enc.pos_ids[static_cast<size_t>(p)] == kSets.pos.id_of(sentence.words[w].pos));
                CHECK(enc.ner_ids[static_cast<size_t>(p)] == kSets.ner.id_of(sentence.words[w].ner));
                CHECK(enc.dep_ids[static_cast<size_t>(p)] == kSets.dep.id_of(sentence.words[w].dep));
                ++covered;
            }
        }
        // Spans partition the non-special range.
        CHECK(static_cast<int32_t>(covered) == enc.subtoken_count());
    }
}

TEST_CASE("synth_corpus is deterministic and well-formed") {
    SynthGrammarConfig grammar = SynthGrammarConfig::defaults();
    Corpus a = synth_corpus(99, 100, grammar);
    Corpus b = synth_corpus(99, 100, grammar);
    REQUIRE(a.size() == b.size());
    std::ostringstream sa, sb;
    write_corpus(sa, a);
    write_corpus(sb, b);
    CHECK(sa.str() == sb.str());

    Corpus c = synth_corpus(100, 100, grammar);
    std::ostringstream sc;
    write_corpus(sc, c);
    CHECK(sa.str() != sc.str());
}

TEST_CASE("synthetic sentences validate and carry exactly one HED") {
    SynthGrammarConfig grammar = SynthGrammarConfig::defaults();
    grammar.min_clauses = 1;
    grammar.max_clauses = 4;
    Corpus corpus = synth_corpus(5, 500, grammar);
    for (const auto& sentence : corpus) {
        std::vector<std::string> ner;
        int heds = 0;
        for (const auto& word : sentence.words) {
            ner.push_back(word.ner);
            heds += word.dep == "HED";
        }
        CHECK(validate_bieos(ner, kSets.ner).valid);
        CHECK(heds == 1);
    }
}

TEST_CASE("POS is a pure function of the surface over a large sample") {
    // The independent count: collect (surface, pos) pairs and verify each
    // surface maps to exactly one POS.
    Corpus corpus = synth_corpus(123, 10000, SynthGrammarConfig::defaults());
    std::map<std::string, std::set<std::string>> pos_of;
    for (const auto& sentence : corpus)
        for (const auto& word : sentence.words) pos_of[word.surface].insert(word.pos);
    for (const auto& [surface, tags] : pos_of) {
        CHECK_MESSAGE(tags.size() == 1, "surface '", surface, "' has ", tags.size(), " POS tags");
    }
}

TEST_CASE("grammar validation rejects overlapping inventories") {
    SynthGrammarConfig grammar = SynthGrammarConfig::defaults();
    grammar.nouns.push_back(grammar.verbs.front());
    CHECK_THROWS_AS(validate_grammar(grammar), Error);

    SynthGrammarConfig bad_bounds = SynthGrammarConfig::defaults();
    bad_bounds.min_clauses = 3;
    bad_bounds.max_clauses = 2;
    CHECK_THROWS_AS(validate_grammar(bad_bounds), Error);
}

TEST_CASE("vocab file round-trips") {
    Corpus corpus = synth_corpus(17, 60, SynthGrammarConfig::defaults());
    Vocab vocab = build_vocab(corpus);
    const std::string path = "test_vocab_roundtrip.txt";
    write_vocab_file(path, vocab);
    Vocab loaded = read_vocab_file(path);
    CHECK(loaded.tokens == vocab.tokens);
    CHECK(loaded.lmlm_begin == vocab.lmlm_begin);
    std::remove(path.c_str());
}

TEST_SUITE_END();
