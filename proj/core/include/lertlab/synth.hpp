#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lertlab/corpus.hpp"

namespace lertlab {

// Template-grammar generator with known ground-truth tags. Every surface form
// belongs to exactly one POS inventory, so POS (and, through the templates,
// NER and DEP) is a deterministic function of the sentence.
//
// Single-clause sentences use one fixed tag layout per sentence length, which
// makes every tag recoverable from (position, length) alone; multi-clause
// sentences chain clauses with comma/conjunction separators, the first verb
// keeping HED and later verbs downgraded to COO so each sentence carries
// exactly one HED.
struct SynthGrammarConfig {
    int min_clauses = 1;
    int max_clauses = 1;

    std::vector<std::string> pronouns;      // r
    std::vector<std::string> nouns;         // n
    std::vector<std::string> verbs;         // v
    std::vector<std::string> adjectives;    // a
    std::vector<std::string> adverbs;       // d
    std::vector<std::string> numbers;       // m
    std::vector<std::string> quantifiers;   // q
    std::vector<std::string> conjunctions;  // c
    std::vector<std::string> person_names;  // nh
    std::vector<std::string> place_names;   // ns
    std::vector<std::string> org_names;     // ni
    std::vector<std::string> final_puncts;  // wp, sentence end

    static SynthGrammarConfig defaults();
};

// Raises Config on empty or non-disjoint inventories or bad clause bounds.
void validate_grammar(const SynthGrammarConfig& grammar);

// Deterministic: identical (seed, n_sentences, grammar) produce byte-identical
// corpora.
Corpus synth_corpus(uint64_t seed, int64_t n_sentences, const SynthGrammarConfig& grammar);

}  // namespace lertlab
