#include "lertlab/run_config.hpp"

#include <fstream>

#include "lertlab/error.hpp"

#include "json.hpp"

namespace lertlab {

struct RunConfig::Doc {
    nlohmann::json j;
};

namespace {

nlohmann::json default_doc() {
    return nlohmann::json{
        {"seed", 42},
        {"out_dir", ""},
        {"corpus",
         {
             {"train", ""},    // TSV path; empty = generate synthetically
             {"heldout", ""},  // TSV path; empty = generate synthetically
         }},
        {"grammar",
         {
             {"min_clauses", 1},
             {"max_clauses", 1},
             {"train_sentences", 512},
             {"heldout_sentences", 128},
         }},
        {"masking",
         {
             {"mask_ratio", 0.15},
             {"ngram_weights", {0.4, 0.3, 0.2, 0.1}},
             {"corruption_split", {0.8, 0.1, 0.1}},
         }},
        {"lmlm", {{"mode", "off"}}},
        {"model",
         {
             {"preset", "micro"},
             {"layers", 0},  // 0 = take the preset's value
             {"hidden", 0},
             {"heads", 0},
             {"ffn_inner", 0},
             {"max_len", 0},
         }},
        {"schedule",
         {
             {"total_steps", 2000},
             {"preset", "PND"},
             {"pos", true},
             {"ner", true},
             {"dep", true},
         }},
        {"optimizer",
         {
             {"peak_lr", 1e-4},
             {"weight_decay", 0.1},
             {"beta1", 0.9},
             {"beta2", 0.999},
             {"eps", 1e-6},
             {"warmup_steps", 100},
             {"accumulation_factor", 1},
         }},
        {"trainer",
         {
             {"batch_size", 16},
             {"checkpoint_every", 0},
             {"deterministic", true},
         }},
        {"probe",
         {
             {"train_fraction", 0.8},
             {"epochs", 30},
             {"batch_size", 16},
             {"lr", 0.05},
             {"weight_decay", 0.0},
             {"frozen", true},
         }},
    };
}

bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
    if (a.is_number() && b.is_number()) return true;
    return a.type() == b.type();
}

void merge_checked(nlohmann::json& base, const nlohmann::json& user, const std::string& path) {
    if (!user.is_object()) raise(ErrorKind::Config, "config section '" + path + "' must be an object");
    for (const auto& [key, value] : user.items()) {
        const std::string here = path.empty() ? key : path + "." + key;
        if (!base.contains(key)) raise(ErrorKind::Config, "unknown config key '" + here + "'");
        nlohmann::json& slot = base[key];
        if (slot.is_object()) {
            merge_checked(slot, value, here);
        } else {
            if (!same_kind(slot, value))
                raise(ErrorKind::Config, "config key '" + here + "' has the wrong type");
            if (value.is_array())
                for (const auto& element : value)
                    if (!element.is_number())
                        raise(ErrorKind::Config, "config key '" + here + "' must be a numeric array");
            slot = value;
        }
    }
}

}  // namespace

RunConfig::RunConfig() : doc_(std::make_unique<Doc>()) {}
RunConfig::RunConfig(const RunConfig& other) : doc_(std::make_unique<Doc>(*other.doc_)) {}
RunConfig& RunConfig::operator=(const RunConfig& other) {
    if (this != &other) doc_ = std::make_unique<Doc>(*other.doc_);
    return *this;
}
RunConfig::RunConfig(RunConfig&&) noexcept = default;
RunConfig& RunConfig::operator=(RunConfig&&) noexcept = default;
RunConfig::~RunConfig() = default;

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    cfg.doc_->j = default_doc();
    return cfg;
}

RunConfig RunConfig::from_text(const std::string& json_text) {
    nlohmann::json user;
    try {
        user = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::Parse, std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg = defaults();
    merge_checked(cfg.doc_->j, user, "");
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_text(text);
}

void RunConfig::set_override(const std::string& dotted_path, const std::string& value) {
    nlohmann::json* node = &doc_->j;
    size_t start = 0;
    for (;;) {
        const size_t dot = dotted_path.find('.', start);
        const std::string key = dotted_path.substr(start, dot - start);
        if (!node->contains(key)) raise(ErrorKind::Config, "unknown config key '" + dotted_path + "'");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (node->is_object()) raise(ErrorKind::Config, "'" + dotted_path + "' is a section, not a value");
    nlohmann::json parsed;
    if (node->is_string()) {
        parsed = value;
    } else {
        try {
            parsed = nlohmann::json::parse(value);
        } catch (const nlohmann::json::exception&) {
            raise(ErrorKind::Config, "cannot parse override value '" + value + "' for '" + dotted_path + "'");
        }
        if (!same_kind(*node, parsed))
            raise(ErrorKind::Config, "override for '" + dotted_path + "' has the wrong type");
        if (parsed.is_array())
            for (const auto& element : parsed)
                if (!element.is_number())
                    raise(ErrorKind::Config, "override for '" + dotted_path + "' must be a numeric array");
    }
    *node = parsed;
}

std::string RunConfig::echo() const { return doc_->j.dump(2); }

uint64_t RunConfig::seed() const { return doc_->j.at("seed").get<uint64_t>(); }
std::string RunConfig::out_dir() const { return doc_->j.at("out_dir").get<std::string>(); }
std::string RunConfig::corpus_train() const { return doc_->j.at("corpus").at("train").get<std::string>(); }
std::string RunConfig::corpus_heldout() const {
    return doc_->j.at("corpus").at("heldout").get<std::string>();
}
int64_t RunConfig::grammar_train_sentences() const {
    return doc_->j.at("grammar").at("train_sentences").get<int64_t>();
}
int64_t RunConfig::grammar_heldout_sentences() const {
    return doc_->j.at("grammar").at("heldout_sentences").get<int64_t>();
}

SynthGrammarConfig RunConfig::grammar() const {
    SynthGrammarConfig g = SynthGrammarConfig::defaults();
    const auto& j = doc_->j.at("grammar");
    g.min_clauses = j.at("min_clauses").get<int>();
    g.max_clauses = j.at("max_clauses").get<int>();
    return g;
}

MaskingConfig RunConfig::masking() const {
    MaskingConfig cfg;
    const auto& j = doc_->j.at("masking");
    cfg.mask_ratio = j.at("mask_ratio").get<double>();
    cfg.ngram_weights = j.at("ngram_weights").get<std::vector<double>>();
    const auto split = j.at("corruption_split").get<std::vector<double>>();
    if (split.size() != 3) raise(ErrorKind::Config, "corruption_split needs exactly three entries");
    cfg.corruption_split = {split[0], split[1], split[2]};
    cfg.lmlm_mode = lmlm_mode_from_name(doc_->j.at("lmlm").at("mode").get<std::string>());
    validate_masking(cfg);
    return cfg;
}

ModelConfig RunConfig::model(int32_t vocab) const {
    const auto& j = doc_->j.at("model");
    ModelConfig cfg = model_preset(j.at("preset").get<std::string>());
    auto maybe = [&](const char* key, int32_t& field) {
        const int32_t v = j.at(key).get<int32_t>();
        if (v > 0) field = v;
    };
    maybe("layers", cfg.layers);
    maybe("hidden", cfg.hidden);
    maybe("heads", cfg.heads);
    maybe("max_len", cfg.max_len);
    const int32_t inner = j.at("ffn_inner").get<int32_t>();
    cfg.ffn_inner = inner > 0 ? inner : 4 * cfg.hidden;
    cfg.vocab = vocab;
    if (vocab > 0) validate_model(cfg);
    return cfg;
}

ScheduleConfig RunConfig::schedule() const {
    const auto& j = doc_->j.at("schedule");
    ScheduleConfig cfg = make_schedule(j.at("total_steps").get<int64_t>(), j.at("preset").get<std::string>());
    cfg.pos_enabled = j.at("pos").get<bool>();
    cfg.ner_enabled = j.at("ner").get<bool>();
    cfg.dep_enabled = j.at("dep").get<bool>();
    return cfg;
}

OptimizerConfig RunConfig::optimizer() const {
    const auto& j = doc_->j.at("optimizer");
    OptimizerConfig cfg;
    cfg.peak_lr = j.at("peak_lr").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.beta1 = j.at("beta1").get<double>();
    cfg.beta2 = j.at("beta2").get<double>();
    cfg.eps = j.at("eps").get<double>();
    cfg.warmup_steps = j.at("warmup_steps").get<int64_t>();
    cfg.accumulation_factor = j.at("accumulation_factor").get<int64_t>();
    cfg.total_steps = doc_->j.at("schedule").at("total_steps").get<int64_t>();
    cfg.seed = seed();
    validate_optimizer(cfg);
    return cfg;
}

TrainerConfig RunConfig::trainer() const {
    const auto& j = doc_->j.at("trainer");
    TrainerConfig cfg;
    cfg.batch_size = j.at("batch_size").get<int64_t>();
    cfg.checkpoint_every = j.at("checkpoint_every").get<int64_t>();
    cfg.deterministic = j.at("deterministic").get<bool>();
    cfg.out_dir = out_dir();
    return cfg;
}

ProbeConfig RunConfig::probe() const {
    const auto& j = doc_->j.at("probe");
    ProbeConfig cfg;
    cfg.train_fraction = j.at("train_fraction").get<double>();
    cfg.epochs = j.at("epochs").get<int64_t>();
    cfg.batch_size = j.at("batch_size").get<int64_t>();
    cfg.lr = j.at("lr").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.frozen = j.at("frozen").get<bool>();
    cfg.seed = seed();
    return cfg;
}

}  // namespace lertlab
