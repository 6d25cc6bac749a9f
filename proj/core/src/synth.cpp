#include "lertlab/synth.hpp"

#include <unordered_set>

#include "lertlab/error.hpp"
#include "lertlab/rng.hpp"

namespace lertlab {

// Every inventory uses one fixed surface length per class (pronouns 2,
// verbs 3, nouns 4, ...). With the per-character tokenizer this gives each
// clause template a fixed subtoken layout and a distinct total length, so
// in single-clause sentences every tag is recoverable from position and
// sentence length alone, even when whole spans are masked.
SynthGrammarConfig SynthGrammarConfig::defaults() {
    SynthGrammarConfig g;
    g.pronouns = {"wo", "ta", "yu", "mo", "qi"};
    g.nouns = {"shan", "shui", "feng", "tian", "niao", "fang", "qiao", "deng", "zhuo", "qian",
               "lang", "song", "chen", "wang", "zhou", "yang", "ting", "kuai", "ming", "xing"};
    g.verbs = {"kan", "pao", "chi", "xie", "mai", "tui", "jia", "wen", "nao", "dai", "sou", "ban",
               "tan", "lie"};
    g.adjectives = {"da", "ho", "xi", "lu", "an", "re", "du", "po", "ke", "su"};
    g.adverbs = {"feich", "zongs", "jingr", "cengj", "zuizh", "gengx", "yiran", "caish"};
    g.numbers = {"yi", "er", "sa", "si", "wu", "ba"};
    g.quantifiers = {"zhi", "ben", "tia", "ger"};
    g.conjunctions = {"bin", "huo", "dan"};
    g.person_names = {"liwei", "wangm", "zhang", "chenj", "sunli", "zhouy", "hanme", "yangh"};
    g.place_names = {"jin", "hui", "yue", "gan", "qio", "sha"};
    g.org_names = {"yuan", "jusi", "shue", "hang", "bang", "weis"};
    g.final_puncts = {".", "!"};
    return g;
}

namespace {

struct Slot {
    const char* pos;   // POS class of the slot
    const char* ner;   // NER label emitted at the slot
    const char* dep;   // DEP label; "HED" only on the first clause's verb
};

using ClauseTemplate = std::vector<Slot>;

// One clause template per clause length, so single-clause sentences have a
// unique tag layout per total length.
const std::vector<ClauseTemplate>& clause_templates() {
    static const std::vector<ClauseTemplate> templates = {
        {{"r", "O", "SBV"}, {"v", "O", "HED"}, {"n", "O", "VOB"}},
        {{"nh", "S-Nh", "SBV"}, {"v", "O", "HED"}, {"a", "O", "ATT"}, {"n", "O", "VOB"}},
        {{"a", "O", "ATT"}, {"n", "O", "SBV"}, {"v", "O", "HED"}, {"a", "O", "ATT"}, {"n", "O", "VOB"}},
        {{"ns", "B-Ns", "ATT"}, {"ns", "E-Ns", "SBV"}, {"v", "O", "HED"},
         {"m", "O", "ATT"}, {"q", "O", "ATT"}, {"n", "O", "VOB"}},
        {{"r", "O", "SBV"}, {"d", "O", "ADV"}, {"v", "O", "HED"},
         {"ni", "B-Ni", "ATT"}, {"ni", "I-Ni", "ATT"}, {"ni", "E-Ni", "ATT"}, {"n", "O", "VOB"}},
        {{"a", "O", "ATT"}, {"n", "O", "SBV"}, {"d", "O", "ADV"}, {"v", "O", "HED"},
         {"m", "O", "ATT"}, {"q", "O", "ATT"}, {"a", "O", "ATT"}, {"n", "O", "VOB"}},
        {{"nh", "B-Nh", "ATT"}, {"nh", "I-Nh", "ATT"}, {"nh", "E-Nh", "SBV"}, {"d", "O", "ADV"},
         {"v", "O", "HED"}, {"m", "O", "ATT"}, {"q", "O", "ATT"}, {"a", "O", "ATT"}, {"n", "O", "VOB"}},
    };
    return templates;
}

const std::vector<std::string>& inventory_for(const SynthGrammarConfig& g, const std::string& pos) {
    if (pos == "r") return g.pronouns;
    if (pos == "n") return g.nouns;
    if (pos == "v") return g.verbs;
    if (pos == "a") return g.adjectives;
    if (pos == "d") return g.adverbs;
    if (pos == "m") return g.numbers;
    if (pos == "q") return g.quantifiers;
    if (pos == "c") return g.conjunctions;
    if (pos == "nh") return g.person_names;
    if (pos == "ns") return g.place_names;
    if (pos == "ni") return g.org_names;
    raise(ErrorKind::Config, "no inventory for POS class '" + pos + "'");
}

}  // namespace

void validate_grammar(const SynthGrammarConfig& g) {
    if (g.min_clauses < 1 || g.max_clauses < g.min_clauses)
        raise(ErrorKind::Config, "clause bounds must satisfy 1 <= min_clauses <= max_clauses");
    const std::vector<const std::vector<std::string>*> inventories = {
        &g.pronouns, &g.nouns, &g.verbs, &g.adjectives, &g.adverbs,  &g.numbers,
        &g.quantifiers, &g.conjunctions, &g.person_names, &g.place_names, &g.org_names, &g.final_puncts};
    std::unordered_set<std::string> seen;
    for (const auto* inv : inventories) {
        if (inv->empty()) raise(ErrorKind::Config, "grammar inventory is empty");
        for (const auto& word : *inv) {
            if (word.empty()) raise(ErrorKind::Config, "grammar inventory contains an empty word");
            if (!seen.insert(word).second)
                raise(ErrorKind::Config, "word '" + word + "' appears in two inventories");
        }
    }
}

Corpus synth_corpus(uint64_t seed, int64_t n_sentences, const SynthGrammarConfig& grammar) {
    validate_grammar(grammar);
    Rng rng(derive_seed(seed, "synth"));
    const auto& templates = clause_templates();

    Corpus corpus;
    corpus.reserve(static_cast<size_t>(n_sentences));
    for (int64_t s = 0; s < n_sentences; ++s) {
        AnnotatedSentence sentence;
        int clauses = grammar.min_clauses +
                      static_cast<int>(rng.next_index(
                          static_cast<uint64_t>(grammar.max_clauses - grammar.min_clauses + 1)));
        for (int c = 0; c < clauses; ++c) {
            if (c > 0) {
                // Clause separator: comma (WP) or coordinating conjunction (LAD).
                if (rng.next_real() < 0.7) {
                    sentence.words.push_back({",", "wp", "O", "WP"});
                } else {
                    const auto& inv = grammar.conjunctions;
                    sentence.words.push_back({inv[rng.next_index(inv.size())], "c", "O", "LAD"});
                }
            }
            const auto& tmpl = templates[rng.next_index(templates.size())];
            for (const Slot& slot : tmpl) {
                const auto& inv = inventory_for(grammar, slot.pos);
                std::string dep = slot.dep;
                if (dep == "HED" && c > 0) dep = "COO";
                sentence.words.push_back({inv[rng.next_index(inv.size())], slot.pos, slot.ner, dep});
            }
        }
        const auto& fp = grammar.final_puncts;
        sentence.words.push_back({fp[rng.next_index(fp.size())], "wp", "O", "WP"});
        corpus.push_back(std::move(sentence));
    }
    return corpus;
}

}  // namespace lertlab
