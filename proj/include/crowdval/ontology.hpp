#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace crowdval {

// Fragment after the last '#' or '/', or the whole IRI when neither occurs.
std::string local_name_of(std::string_view iri);

struct EntityRef {
  std::string ontology_id;
  std::string iri;
  std::string local_name;
  std::vector<std::string> labels;
  std::optional<std::string> description;

  friend bool operator==(const EntityRef&, const EntityRef&) = default;
};

// Unordered entity pair, stored with first <= second.
using EntityPair = std::pair<std::string, std::string>;
EntityPair make_unordered(std::string a, std::string b);

class Ontology {
 public:
  Ontology() = default;
  explicit Ontology(std::string id) : id_(std::move(id)) {}

  const std::string& id() const { return id_; }

  // Adds or replaces an entity. local_name is derived when empty and
  // ontology_id is forced to this ontology.
  void add_entity(EntityRef entity);
  void add_subclass(std::string child, std::string parent);
  void add_disjoint(std::string a, std::string b);

  const std::vector<EntityRef>& entities() const { return entities_; }
  const std::set<std::pair<std::string, std::string>>& subclass_edges() const {
    return subclass_edges_;
  }
  // One entry per unordered pair, normalized so first <= second.
  const std::set<EntityPair>& disjoint_pairs() const { return disjoint_pairs_; }

  bool contains(std::string_view iri) const;
  const EntityRef* find(std::string_view iri) const;
  const EntityRef& at(std::string_view iri) const;

  bool are_disjoint(std::string_view a, std::string_view b) const;

  std::vector<std::string> direct_parents(std::string_view iri) const;
  std::vector<std::string> direct_children(std::string_view iri) const;
  std::vector<std::string> disjoint_with(std::string_view iri) const;

  // Strict transitive super/subclasses, sorted.
  std::set<std::string> ancestors(std::string_view iri) const;
  std::set<std::string> descendants(std::string_view iri) const;

  friend bool operator==(const Ontology& a, const Ontology& b) {
    return a.id_ == b.id_ && a.entities_ == b.entities_ &&
           a.subclass_edges_ == b.subclass_edges_ && a.disjoint_pairs_ == b.disjoint_pairs_;
  }

 private:
  std::string id_;
  std::vector<EntityRef> entities_;
  std::unordered_map<std::string, std::size_t> index_;
  std::set<std::pair<std::string, std::string>> subclass_edges_;
  std::set<EntityPair> disjoint_pairs_;
  std::map<std::string, std::vector<std::string>, std::less<>> parents_;
  std::map<std::string, std::vector<std::string>, std::less<>> children_;
};

struct MappingCell {
  std::string source;  // IRI in the source ontology
  std::string target;  // IRI in the target ontology
  double measure = 1.0;

  friend bool operator==(const MappingCell&, const MappingCell&) = default;
};

inline constexpr std::string_view kEquivalenceRelation = "=";

class Alignment {
 public:
  Alignment() = default;
  Alignment(std::string source_ontology_id, std::string target_ontology_id)
      : source_ontology_id_(std::move(source_ontology_id)),
        target_ontology_id_(std::move(target_ontology_id)) {}

  const std::string& source_ontology_id() const { return source_ontology_id_; }
  const std::string& target_ontology_id() const { return target_ontology_id_; }

  // Duplicate (source, target) pairs collapse to the maximum measure.
  void add(MappingCell cell);
  bool contains(std::string_view source, std::string_view target) const;

  // Sorted by (source, target).
  const std::vector<MappingCell>& cells() const { return cells_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

  friend bool operator==(const Alignment&, const Alignment&) = default;

 private:
  std::string source_ontology_id_;
  std::string target_ontology_id_;
  std::vector<MappingCell> cells_;
};

enum class OpenStatus { Open, Closed };
const char* to_string(OpenStatus status);
OpenStatus open_status_from_string(std::string_view text);

struct Dataset {
  std::string id;
  std::string name;
  std::string domain_id;
  Ontology ontology_a;
  Ontology ontology_b;
  Alignment reference;
  OpenStatus status = OpenStatus::Closed;
  double confidence_threshold = 0.5;
};

struct DomainGroup {
  std::string id;
  std::string name;
  std::vector<std::string> dataset_ids;
  OpenStatus status = OpenStatus::Closed;
};

inline bool valid_threshold(double theta) { return theta >= 0.5 && theta <= 1.0; }

// Checks that every cell endpoint exists in the declared ontologies and that
// the alignment's ontology ids match them. Throws ValidationError or
// IncompatibleAlignments.
void resolve_alignment(const Alignment& alignment, const Ontology& source, const Ontology& target);

}  // namespace crowdval
