#include "lertlab/tags.hpp"

#include <sstream>

#include "lertlab/error.hpp"

namespace lertlab {

const char* tag_kind_name(TagKind kind) {
    switch (kind) {
        case TagKind::Pos: return "POS";
        case TagKind::Ner: return "NER";
        case TagKind::Dep: return "DEP";
    }
    return "?";
}

TagSet::TagSet(TagKind kind, std::vector<std::string> labels)
    : kind_(kind), name_(tag_kind_name(kind)), labels_(std::move(labels)) {
    for (size_t i = 0; i < labels_.size(); ++i) {
        auto [it, inserted] = index_.emplace(labels_[i], static_cast<int>(i));
        if (!inserted) raise(ErrorKind::Schema, "duplicate label '" + labels_[i] + "' in " + name_);
    }
}

const std::string& TagSet::label_of(int id) const {
    if (id < 0 || static_cast<size_t>(id) >= labels_.size())
        raise(ErrorKind::Schema, name_ + " id out of range: " + std::to_string(id));
    return labels_[static_cast<size_t>(id)];
}

int TagSet::id_of(const std::string& label) const {
    int id = find(label);
    if (id < 0) raise(ErrorKind::Schema, "unknown " + name_ + " label '" + label + "'");
    return id;
}

int TagSet::find(const std::string& label) const {
    auto it = index_.find(label);
    return it == index_.end() ? -1 : it->second;
}

std::string TagSet::to_json() const {
    std::ostringstream out;
    out << "{\"name\":\"" << name_ << "\",\"labels\":[";
    for (size_t i = 0; i < labels_.size(); ++i) {
        if (i) out << ',';
        out << '"' << labels_[i] << '"';
    }
    out << "]}";
    return out.str();
}

const TagSet& TagSets::of(TagKind kind) const {
    switch (kind) {
        case TagKind::Pos: return pos;
        case TagKind::Ner: return ner;
        case TagKind::Dep: return dep;
    }
    return pos;
}

TagSets builtin_tagsets() {
    std::vector<std::string> pos = {
        "n", "v", "wp", "u", "d", "a", "m", "p", "r", "ns", "c", "q", "nt", "nh",
        "nd", "j", "i", "b", "ni", "nz", "nl", "z", "k", "ws", "o", "h", "e", "x",
    };
    std::vector<std::string> ner = {
        "O", "S-Ni", "S-Ns", "S-Nh",
        "B-Ni", "I-Ni", "E-Ni",
        "B-Nh", "I-Nh", "E-Nh",
        "B-Ns", "I-Ns", "E-Ns",
    };
    std::vector<std::string> dep = {
        "ATT", "WP", "ADV", "VOB", "SBV", "COO", "RAD",
        "HED", "POB", "CMP", "LAD", "FOB", "DBL", "IOB",
    };
    return TagSets{TagSet(TagKind::Pos, std::move(pos)), TagSet(TagKind::Ner, std::move(ner)),
                   TagSet(TagKind::Dep, std::move(dep))};
}

namespace {

// Splits an NER label into its BIEOS prefix and entity type.
// "O" -> ('O', ""); "B-Ni" -> ('B', "Ni").
std::pair<char, std::string> split_ner(const std::string& label) {
    if (label == "O") return {'O', ""};
    return {label[0], label.substr(2)};
}

}  // namespace

BieosVerdict validate_bieos(std::span<const std::string> tags, const TagSet& ner) {
    bool inside = false;
    std::string entity;
    size_t span_begin = 0;
    for (size_t i = 0; i < tags.size(); ++i) {
        ner.id_of(tags[i]);  // Schema error on unknown labels
        auto [prefix, type] = split_ner(tags[i]);
        if (inside) {
            if (prefix == 'I' && type == entity) continue;
            if (prefix == 'E' && type == entity) {
                inside = false;
                continue;
            }
            return {false, i, "expected I-" + entity + " or E-" + entity + ", got " + tags[i]};
        }
        switch (prefix) {
            case 'O':
            case 'S':
                break;
            case 'B':
                inside = true;
                entity = type;
                span_begin = i;
                break;
            default:
                return {false, i, std::string(1, prefix) + "-" + type + " outside a span"};
        }
    }
    if (inside)
        return {false, tags.size(), "span opened at position " + std::to_string(span_begin) + " never closed"};
    return {};
}

}  // namespace lertlab
