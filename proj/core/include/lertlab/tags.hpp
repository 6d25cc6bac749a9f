#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lertlab {

enum class TagKind { Pos, Ner, Dep };

const char* tag_kind_name(TagKind kind);

// A named, ordered inventory of linguistic labels with label<->index maps.
// Immutable after construction; safe to share across threads.
class TagSet {
  public:
    TagSet(TagKind kind, std::vector<std::string> labels);

    TagKind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }

    const std::string& label_of(int id) const;
    int id_of(const std::string& label) const;      // throws Schema on unknown
    int find(const std::string& label) const;       // -1 on unknown
    bool contains(const std::string& label) const { return find(label) >= 0; }

    std::string to_json() const;

  private:
    TagKind kind_;
    std::string name_;
    std::vector<std::string> labels_;
    std::unordered_map<std::string, int> index_;
};

// The three built-in inventories: POS (28), NER (13), DEP (14).
struct TagSets {
    TagSet pos;
    TagSet ner;
    TagSet dep;

    const TagSet& of(TagKind kind) const;
};

TagSets builtin_tagsets();

// Verdict of a BIEOS well-formedness check. An invalid sequence reports the
// first position at which the scan can no longer be extended to a legal
// sequence; a span left open at the end reports position == sequence length.
struct BieosVerdict {
    bool valid = true;
    size_t position = 0;
    std::string reason;
};

// Accepts exactly the concatenations of the four legal span shapes:
// O, S-X, and B-X (I-X)* E-X with a consistent entity type X.
// Unknown labels raise a Schema error.
BieosVerdict validate_bieos(std::span<const std::string> tags, const TagSet& ner);

}  // namespace lertlab
