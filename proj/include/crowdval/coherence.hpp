#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "crowdval/ontology.hpp"
#include "crowdval/types.hpp"

namespace crowdval {

enum class AssertionSource { UserDecision, Inferred };

struct Assertion {
  std::string source;
  std::string target;
  Decision value = Decision::Equivalent;  // never NA
  AssertionSource origin = AssertionSource::UserDecision;
  std::string dataset_id;

  friend bool operator==(const Assertion&, const Assertion&) = default;
};

// A dataset's orientation inside the network: candidate pairs of the dataset
// have their source in source_ontology and their target in target_ontology.
struct DatasetBinding {
  std::string id;
  std::string source_ontology;
  std::string target_ontology;
};

struct CoherenceSettings {
  bool one_to_one = true;
  bool cross_dataset = true;
};

enum class PreFillRule { TransitiveEquivalence, SubsumptionNegativity, Disjointedness, OneToOneNegativity };
const char* to_string(PreFillRule rule);

struct Support {
  enum class Kind { Assertion, SubClassOf, Disjoint, OneToOne };
  Kind kind;
  std::string a;  // Assertion: source; SubClassOf: child; Disjoint: first
  std::string b;  // Assertion: target; SubClassOf: parent; Disjoint: second
  Decision value = Decision::Equivalent;  // Assertion only
  std::string dataset_id;                 // Assertion and OneToOne

  friend auto operator<=>(const Support&, const Support&) = default;
};

// A pair still awaiting a decision from the user whose network is queried.
struct CandidatePair {
  std::string id;
  std::string source;
  std::string target;
  std::string dataset_id;
};

struct PreFill {
  std::string pair_id;
  std::string source;
  std::string target;
  Decision value = Decision::NA;
  PreFillRule rule = PreFillRule::TransitiveEquivalence;
  std::vector<Support> supports;
  std::string explanation;
};

struct ConflictFinding {
  std::string pair_id;
  std::string source;
  std::string target;
  std::vector<PreFillRule> negative_rules;  // rules that derived NotEquivalent
};

struct InferenceResult {
  std::vector<PreFill> prefills;
  std::vector<ConflictFinding> conflicts;
};

// Ontologies of one domain plus one user's assertions. Equivalence
// assertions are indexed into connected components (union-find), both over
// the whole network and per dataset.
class OntologyNetwork {
 public:
  OntologyNetwork() = default;

  const std::vector<std::shared_ptr<const Ontology>>& ontologies() const { return ontologies_; }
  const std::vector<DatasetBinding>& datasets() const { return datasets_; }
  const std::vector<Assertion>& assertions() const { return assertions_; }

  const DatasetBinding* dataset(std::string_view id) const;
  bool has_entity(std::string_view iri) const;
  // Ontology ids that declare the entity (usually exactly one).
  const std::vector<std::size_t>* ontologies_of(std::string_view iri) const;
  bool in_ontology(std::string_view iri, std::string_view ontology_id) const;
  std::string display_name(std::string_view iri) const;

  // Members of the equivalence component containing iri (including iri);
  // scope is the whole network, or only the named dataset's assertions.
  std::vector<std::string> component(std::string_view iri, const std::string* dataset_scope) const;
  bool equivalent(std::string_view a, std::string_view b, const std::string* dataset_scope) const;
  // Shortest chain of Equivalent assertions linking a to b within scope;
  // empty when a == b or they are not connected.
  std::vector<Assertion> equivalence_path(std::string_view a, std::string_view b,
                                          const std::string* dataset_scope) const;

  // Breadth-first tree over Equivalent assertions rooted at `root`.
  struct EquivalenceTree {
    std::string root;
    std::map<std::string, std::pair<std::string, std::size_t>, std::less<>> via;  // node -> (toward root, assertion)
    std::map<std::string, std::size_t, std::less<>> depth;
  };
  EquivalenceTree equivalence_tree(std::string_view root, const std::string* dataset_scope) const;
  // Assertions from node up to the tree's root, in that order.
  std::vector<Assertion> path_to_root(const EquivalenceTree& tree, std::string_view node) const;

  // NotEquivalent user assertions within scope.
  std::vector<const Assertion*> negative_assertions(const std::string* dataset_scope) const;

  // Strict super- and subclasses of iri in every ontology declaring it.
  std::set<std::string> strictly_related(std::string_view iri) const;
  // Shortest SubClassOf chain between two strictly related entities.
  std::vector<Support> subclass_chain(std::string_view from, std::string_view to) const;
  bool disjoint(std::string_view a, std::string_view b) const;

 private:
  friend OntologyNetwork build_network(std::vector<std::shared_ptr<const Ontology>>,
                                       std::vector<DatasetBinding>, std::vector<Assertion>);

  struct Components {
    std::map<std::string, std::string, std::less<>> root;  // iri -> representative
    std::map<std::string, std::vector<std::string>, std::less<>> members;
    std::map<std::string, std::vector<std::size_t>, std::less<>> edges;  // iri -> assertion idx
  };
  const Components& scope(const std::string* dataset_scope) const;

  std::vector<std::shared_ptr<const Ontology>> ontologies_;
  std::vector<DatasetBinding> datasets_;
  std::vector<Assertion> assertions_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> entity_index_;
  Components all_;
  std::map<std::string, Components, std::less<>> per_dataset_;
};

// Throws DanglingAssertion when an assertion names an entity that no member
// ontology declares, or a dataset that is not bound; ValidationError for NA
// assertions.
OntologyNetwork build_network(std::vector<std::shared_ptr<const Ontology>> ontologies,
                              std::vector<DatasetBinding> datasets, std::vector<Assertion> assertions);

// Forward chaining to fixpoint over
//   TransitiveEquivalence   x≡y ∧ y≡z ⊢ x≡z
//   SubsumptionNegativity   x≡y ∧ z strictly above/below x ⊢ z≢y
//   Disjointedness          x≡y ∧ Disjoint(z,x) ⊢ z≢y
//   OneToOneNegativity      x≡y ⊢ w≢y, x≢v for w, v on the same side (one_to_one only)
// Only pending pairs yield pre-fills; pairs deriving both values are reported
// as conflicts instead. Equivalence facts (asserted or derived) feed the
// negative rules; nothing consumes negative facts.
InferenceResult infer_prefills(const OntologyNetwork& network, std::span<const CandidatePair> pending,
                               const CoherenceSettings& settings);

struct CoherenceVerdict {
  bool pass = true;
  std::optional<PreFillRule> violated_rule;
  std::string detail;
};

// Would asserting pair as Equivalent let the rules derive NotEquivalent for
// it, or create a pair that derives both values?
CoherenceVerdict coherence_check(const CandidatePair& pair, const OntologyNetwork& network,
                                 const CoherenceSettings& settings);

// Pre-fills that no longer have a derivation once `removed` is withdrawn
// from the network. Pairs in `confirmed` (now manual decisions) are kept.
std::vector<PreFill> retract_dependents(const OntologyNetwork& network, const Assertion& removed,
                                        std::span<const PreFill> prefills,
                                        std::span<const CandidatePair> pending,
                                        const CoherenceSettings& settings,
                                        const std::set<std::string>& confirmed = {});

std::string render_explanation(const OntologyNetwork& network, Decision value, PreFillRule rule,
                               std::span<const Support> supports);

}  // namespace crowdval
