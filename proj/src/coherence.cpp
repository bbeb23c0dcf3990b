#include "crowdval/coherence.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <unordered_map>

#include "crowdval/error.hpp"

namespace crowdval {

const char* to_string(PreFillRule rule) {
  switch (rule) {
    case PreFillRule::TransitiveEquivalence: return "TransitiveEquivalence";
    case PreFillRule::SubsumptionNegativity: return "SubsumptionNegativity";
    case PreFillRule::Disjointedness: return "Disjointedness";
    case PreFillRule::OneToOneNegativity: return "OneToOneNegativity";
  }
  return "Unknown";
}

// --- network ----------------------------------------------------------------

const DatasetBinding* OntologyNetwork::dataset(std::string_view id) const {
  for (const auto& d : datasets_) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

bool OntologyNetwork::has_entity(std::string_view iri) const { return entity_index_.count(iri) > 0; }

const std::vector<std::size_t>* OntologyNetwork::ontologies_of(std::string_view iri) const {
  auto it = entity_index_.find(iri);
  return it == entity_index_.end() ? nullptr : &it->second;
}

bool OntologyNetwork::in_ontology(std::string_view iri, std::string_view ontology_id) const {
  const auto* idx = ontologies_of(iri);
  if (idx == nullptr) return false;
  return std::any_of(idx->begin(), idx->end(),
                     [&](std::size_t i) { return ontologies_[i]->id() == ontology_id; });
}

std::string OntologyNetwork::display_name(std::string_view iri) const {
  const auto* idx = ontologies_of(iri);
  if (idx == nullptr || idx->empty()) return local_name_of(iri);
  const EntityRef* e = ontologies_[idx->front()]->find(iri);
  return e->local_name.empty() ? e->iri : e->local_name;
}

const OntologyNetwork::Components& OntologyNetwork::scope(const std::string* dataset_scope) const {
  if (dataset_scope == nullptr) return all_;
  static const Components empty;
  auto it = per_dataset_.find(*dataset_scope);
  return it == per_dataset_.end() ? empty : it->second;
}

std::vector<std::string> OntologyNetwork::component(std::string_view iri,
                                                    const std::string* dataset_scope) const {
  const auto& c = scope(dataset_scope);
  auto r = c.root.find(iri);
  if (r == c.root.end()) return {std::string(iri)};
  return c.members.find(r->second)->second;
}

bool OntologyNetwork::equivalent(std::string_view a, std::string_view b,
                                 const std::string* dataset_scope) const {
  if (a == b) return false;
  const auto& c = scope(dataset_scope);
  auto ra = c.root.find(a);
  auto rb = c.root.find(b);
  return ra != c.root.end() && rb != c.root.end() && ra->second == rb->second;
}

OntologyNetwork::EquivalenceTree OntologyNetwork::equivalence_tree(
    std::string_view root, const std::string* dataset_scope) const {
  const auto& c = scope(dataset_scope);
  EquivalenceTree tree;
  tree.root = std::string(root);
  tree.depth.emplace(tree.root, 0);
  std::deque<std::string> queue{tree.root};
  while (!queue.empty()) {
    std::string cur = std::move(queue.front());
    queue.pop_front();
    auto e = c.edges.find(cur);
    if (e == c.edges.end()) continue;
    std::size_t d = tree.depth.find(cur)->second;
    for (std::size_t idx : e->second) {
      const Assertion& as = assertions_[idx];
      const std::string& next = as.source == cur ? as.target : as.source;
      if (tree.depth.count(next)) continue;
      tree.depth.emplace(next, d + 1);
      tree.via.emplace(next, std::pair{cur, idx});
      queue.push_back(next);
    }
  }
  return tree;
}

std::vector<Assertion> OntologyNetwork::path_to_root(const EquivalenceTree& tree,
                                                     std::string_view node) const {
  std::vector<Assertion> path;
  if (!tree.depth.count(node)) return path;
  std::string cur(node);
  while (cur != tree.root) {
    const auto& [next, idx] = tree.via.find(cur)->second;
    path.push_back(assertions_[idx]);
    cur = next;
  }
  return path;
}

std::vector<Assertion> OntologyNetwork::equivalence_path(std::string_view a, std::string_view b,
                                                         const std::string* dataset_scope) const {
  if (a == b || !equivalent(a, b, dataset_scope)) return {};
  return path_to_root(equivalence_tree(b, dataset_scope), a);
}

std::vector<const Assertion*> OntologyNetwork::negative_assertions(
    const std::string* dataset_scope) const {
  std::vector<const Assertion*> out;
  for (const auto& a : assertions_) {
    if (a.value != Decision::NotEquivalent) continue;
    if (dataset_scope != nullptr && a.dataset_id != *dataset_scope) continue;
    out.push_back(&a);
  }
  return out;
}

std::set<std::string> OntologyNetwork::strictly_related(std::string_view iri) const {
  std::set<std::string> out;
  const auto* idx = ontologies_of(iri);
  if (idx == nullptr) return out;
  for (std::size_t i : *idx) {
    out.merge(ontologies_[i]->ancestors(iri));
    out.merge(ontologies_[i]->descendants(iri));
  }
  out.erase(std::string(iri));
  return out;
}

std::vector<Support> OntologyNetwork::subclass_chain(std::string_view from, std::string_view to) const {
  std::vector<Support> best;
  bool found = false;
  const auto* idx = ontologies_of(from);
  if (idx == nullptr) return best;
  for (std::size_t i : *idx) {
    const Ontology& o = *ontologies_[i];
    // Search upward (from ⊑ ... ⊑ to) and downward (to ⊑ ... ⊑ from).
    for (bool upward : {true, false}) {
      std::unordered_map<std::string, std::string> prev;
      std::deque<std::string> queue{std::string(from)};
      prev.emplace(std::string(from), std::string());
      bool reached = false;
      while (!queue.empty() && !reached) {
        std::string cur = std::move(queue.front());
        queue.pop_front();
        for (const auto& next : upward ? o.direct_parents(cur) : o.direct_children(cur)) {
          if (prev.count(next)) continue;
          prev.emplace(next, cur);
          if (next == to) {
            reached = true;
            break;
          }
          queue.push_back(next);
        }
      }
      if (!reached) continue;
      std::vector<Support> chain;
      std::string cur(to);
      while (cur != from) {
        const std::string& p = prev.at(cur);
        if (upward) chain.push_back({Support::Kind::SubClassOf, p, cur, Decision::Equivalent, {}});
        else chain.push_back({Support::Kind::SubClassOf, cur, p, Decision::Equivalent, {}});
        cur = p;
      }
      std::reverse(chain.begin(), chain.end());
      if (!found || chain.size() < best.size()) {
        best = std::move(chain);
        found = true;
      }
    }
  }
  return best;
}

bool OntologyNetwork::disjoint(std::string_view a, std::string_view b) const {
  const auto* idx = ontologies_of(a);
  if (idx == nullptr) return false;
  return std::any_of(idx->begin(), idx->end(),
                     [&](std::size_t i) { return ontologies_[i]->are_disjoint(a, b); });
}

namespace {

void index_components(const std::vector<Assertion>& assertions, const std::string* only_dataset,
                      std::map<std::string, std::string, std::less<>>& root,
                      std::map<std::string, std::vector<std::string>, std::less<>>& members,
                      std::map<std::string, std::vector<std::size_t>, std::less<>>& edges) {
  std::unordered_map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> find = [&](const std::string& x) -> std::string {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent.emplace(x, x);
      return x;
    }
    if (it->second == x) return x;
    std::string r = find(it->second);
    parent[x] = r;
    return r;
  };
  for (std::size_t i = 0; i < assertions.size(); ++i) {
    const auto& a = assertions[i];
    if (a.value != Decision::Equivalent) continue;
    if (only_dataset != nullptr && a.dataset_id != *only_dataset) continue;
    if (a.source == a.target) continue;
    edges[a.source].push_back(i);
    edges[a.target].push_back(i);
    std::string ra = find(a.source), rb = find(a.target);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  for (const auto& [node, _] : edges) {
    std::string r = find(node);
    root[node] = r;
    members[r].push_back(node);
  }
  for (auto& [_, m] : members) std::sort(m.begin(), m.end());
}

}  // namespace

OntologyNetwork build_network(std::vector<std::shared_ptr<const Ontology>> ontologies,
                              std::vector<DatasetBinding> datasets, std::vector<Assertion> assertions) {
  OntologyNetwork net;
  net.ontologies_ = std::move(ontologies);
  net.datasets_ = std::move(datasets);
  net.assertions_ = std::move(assertions);
  for (std::size_t i = 0; i < net.ontologies_.size(); ++i) {
    for (const auto& e : net.ontologies_[i]->entities()) net.entity_index_[e.iri].push_back(i);
  }
  std::set<std::string> dataset_ids;
  for (const auto& d : net.datasets_) dataset_ids.insert(d.id);
  for (const auto& a : net.assertions_) {
    for (const auto* iri : {&a.source, &a.target}) {
      if (!net.has_entity(*iri)) {
        throw Error(ErrorCode::DanglingAssertion,
                    "assertion (" + a.source + ", " + a.target + ") names unknown entity " + *iri);
      }
    }
    if (!net.datasets_.empty() && !dataset_ids.count(a.dataset_id)) {
      throw Error(ErrorCode::DanglingAssertion,
                  "assertion (" + a.source + ", " + a.target + ") names unknown dataset '" +
                      a.dataset_id + "'");
    }
    if (a.value == Decision::NA) {
      throw Error(ErrorCode::ValidationError, "assertions cannot carry NA");
    }
  }
  index_components(net.assertions_, nullptr, net.all_.root, net.all_.members, net.all_.edges);
  for (const auto& id : dataset_ids) {
    auto& c = net.per_dataset_[id];
    index_components(net.assertions_, &id, c.root, c.members, c.edges);
  }
  return net;
}

// --- inference ----------------------------------------------------------------

namespace {

struct Derivation {
  PreFillRule rule;
  std::vector<Support> supports;
};

Support assertion_support(const Assertion& a) {
  return {Support::Kind::Assertion, a.source, a.target, a.value, a.dataset_id};
}

constexpr PreFillRule kNegativeRules[3] = {PreFillRule::SubsumptionNegativity,
                                           PreFillRule::Disjointedness,
                                           PreFillRule::OneToOneNegativity};

// All derivations of NotEquivalent for (u, v), at most one per rule, each
// with a minimum-size support set.
class NegativeDeriver {
 public:
  NegativeDeriver(const OntologyNetwork& net, const CoherenceSettings& settings)
      : net_(net), settings_(settings) {}

  std::vector<Derivation> derive(const std::string& u, const std::string& v,
                                 const std::string& dataset_id) {
    const std::string* scope = settings_.cross_dataset ? nullptr : &dataset_id;
    struct Best {
      std::size_t size;
      int side;
      std::string x;
      std::vector<Support> extra;
    };
    std::optional<Best> best[3];
    std::optional<OntologyNetwork::EquivalenceTree> trees[2];
    // Negative rules fire from a fact x ≡ y with y on one side of the pair
    // and z = the other side.
    for (int side = 0; side < 2; ++side) {
      const std::string& y = side == 0 ? v : u;
      const std::string& z = side == 0 ? u : v;
      auto members = net_.component(y, scope);
      if (members.size() < 2) continue;
      trees[side] = net_.equivalence_tree(y, scope);
      for (const auto& x : members) {
        if (x == y) continue;
        std::size_t depth = trees[side]->depth.find(x)->second;
        for (int r = 0; r < 3; ++r) {
          std::vector<Support> extra;
          if (!applies(kNegativeRules[r], x, z, side, u, v, dataset_id, extra)) continue;
          std::size_t size = depth + extra.size();
          if (best[r] && best[r]->size <= size) continue;
          best[r] = Best{size, side, x, std::move(extra)};
        }
      }
    }
    std::vector<Derivation> out;
    for (int r = 0; r < 3; ++r) {
      if (!best[r]) continue;
      Derivation d{kNegativeRules[r], {}};
      for (const auto& a : net_.path_to_root(*trees[best[r]->side], best[r]->x)) {
        d.supports.push_back(assertion_support(a));
      }
      d.supports.insert(d.supports.end(), best[r]->extra.begin(), best[r]->extra.end());
      out.push_back(std::move(d));
    }
    return out;
  }

 private:
  bool applies(PreFillRule rule, const std::string& x, const std::string& z, int side,
               const std::string& u, const std::string& v, const std::string& dataset_id,
               std::vector<Support>& extra) {
    switch (rule) {
      case PreFillRule::SubsumptionNegativity: {
        if (z == x || !related(z).count(x)) return false;
        extra = net_.subclass_chain(z, x);
        return !extra.empty();
      }
      case PreFillRule::Disjointedness:
        if (z == x || !net_.disjoint(z, x)) return false;
        extra = {{Support::Kind::Disjoint, z, x, Decision::Equivalent, {}}};
        return true;
      case PreFillRule::OneToOneNegativity: {
        if (!settings_.one_to_one || z == x) return false;
        const DatasetBinding* d = net_.dataset(dataset_id);
        if (d == nullptr) return false;
        // x must sit on the same side of the dataset as z.
        const std::string& z_side = side == 0 ? d->source_ontology : d->target_ontology;
        const std::string& y_side = side == 0 ? d->target_ontology : d->source_ontology;
        const std::string& y = side == 0 ? v : u;
        if (!net_.in_ontology(z, z_side) || !net_.in_ontology(y, y_side)) return false;
        if (!net_.in_ontology(x, z_side)) return false;
        extra = {{Support::Kind::OneToOne, {}, {}, Decision::Equivalent, dataset_id}};
        return true;
      }
      case PreFillRule::TransitiveEquivalence: return false;
    }
    return false;
  }

  const std::set<std::string>& related(const std::string& iri) {
    auto it = related_cache_.find(iri);
    if (it == related_cache_.end()) it = related_cache_.emplace(iri, net_.strictly_related(iri)).first;
    return it->second;
  }

  const OntologyNetwork& net_;
  const CoherenceSettings& settings_;
  std::unordered_map<std::string, std::set<std::string>> related_cache_;
};

struct PairVerdict {
  bool equivalent = false;
  std::vector<Support> equivalence_supports;
  std::vector<Derivation> negatives;
};

PairVerdict evaluate(const OntologyNetwork& net, NegativeDeriver& deriver, const std::string& u,
                     const std::string& v, const std::string& dataset_id,
                     const CoherenceSettings& settings) {
  PairVerdict out;
  const std::string* scope = settings.cross_dataset ? nullptr : &dataset_id;
  if (net.equivalent(u, v, scope)) {
    out.equivalent = true;
    for (const auto& a : net.equivalence_path(u, v, scope)) {
      out.equivalence_supports.push_back(assertion_support(a));
    }
  }
  out.negatives = deriver.derive(u, v, dataset_id);
  return out;
}

}  // namespace

std::string render_explanation(const OntologyNetwork& network, Decision value, PreFillRule rule,
                               std::span<const Support> supports) {
  std::string text = std::string(to_string(value)) + " inferred by " + to_string(rule) + ":";
  bool first = true;
  for (const auto& s : supports) {
    text += first ? " " : "; ";
    first = false;
    switch (s.kind) {
      case Support::Kind::Assertion:
        text += network.display_name(s.a) +
                (s.value == Decision::Equivalent ? " ≡ " : " ≢ ") +
                network.display_name(s.b) + " [" + s.dataset_id + "]";
        break;
      case Support::Kind::SubClassOf:
        text += network.display_name(s.a) + " ⊑ " + network.display_name(s.b);
        break;
      case Support::Kind::Disjoint:
        text += "Disjoint(" + network.display_name(s.a) + ", " + network.display_name(s.b) + ")";
        break;
      case Support::Kind::OneToOne:
        text += "one-to-one(" + s.dataset_id + ")";
        break;
    }
  }
  return text;
}

InferenceResult infer_prefills(const OntologyNetwork& network, std::span<const CandidatePair> pending,
                               const CoherenceSettings& settings) {
  InferenceResult result;
  NegativeDeriver deriver(network, settings);
  for (const auto& pair : pending) {
    if (pair.source == pair.target) continue;
    auto verdict = evaluate(network, deriver, pair.source, pair.target, pair.dataset_id, settings);
    bool negative = !verdict.negatives.empty();
    if (verdict.equivalent && negative) {
      ConflictFinding c{pair.id, pair.source, pair.target, {}};
      for (const auto& d : verdict.negatives) c.negative_rules.push_back(d.rule);
      result.conflicts.push_back(std::move(c));
      continue;
    }
    if (!verdict.equivalent && !negative) continue;
    PreFill p;
    p.pair_id = pair.id;
    p.source = pair.source;
    p.target = pair.target;
    if (verdict.equivalent) {
      p.value = Decision::Equivalent;
      p.rule = PreFillRule::TransitiveEquivalence;
      p.supports = std::move(verdict.equivalence_supports);
    } else {
      // Rules come out in priority order; the first one is reported.
      p.value = Decision::NotEquivalent;
      p.rule = verdict.negatives.front().rule;
      p.supports = std::move(verdict.negatives.front().supports);
    }
    p.explanation = render_explanation(network, p.value, p.rule, p.supports);
    result.prefills.push_back(std::move(p));
  }
  return result;
}

namespace {

std::set<EntityPair> conflicts_within(const OntologyNetwork& net, NegativeDeriver& deriver,
                                      const std::vector<std::string>& members,
                                      const std::string* scope, const CoherenceSettings& settings) {
  std::set<EntityPair> out;
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      const auto& a = members[i];
      const auto& b = members[j];
      // Negative rules other than one-to-one are orientation-free; for
      // one-to-one try each dataset the pair can be read in.
      std::vector<std::string> datasets;
      if (scope != nullptr) datasets.push_back(*scope);
      else for (const auto& d : net.datasets()) datasets.push_back(d.id);
      if (datasets.empty()) datasets.push_back("");
      for (const auto& d : datasets) {
        bool flipped = false;
        if (const DatasetBinding* bind = net.dataset(d)) {
          flipped = net.in_ontology(b, bind->source_ontology) && net.in_ontology(a, bind->target_ontology);
        }
        auto negatives = flipped ? deriver.derive(b, a, d) : deriver.derive(a, b, d);
        if (!negatives.empty()) {
          out.insert(make_unordered(a, b));
          break;
        }
      }
    }
  }
  for (const Assertion* neg : net.negative_assertions(scope)) {
    if (net.equivalent(neg->source, neg->target, scope)) {
      out.insert(make_unordered(neg->source, neg->target));
    }
  }
  (void)settings;
  return out;
}

}  // namespace

CoherenceVerdict coherence_check(const CandidatePair& pair, const OntologyNetwork& network,
                                 const CoherenceSettings& settings) {
  CoherenceVerdict verdict;
  if (pair.source == pair.target) return verdict;
  const std::string* scope = settings.cross_dataset ? nullptr : &pair.dataset_id;

  std::vector<std::shared_ptr<const Ontology>> ontologies = network.ontologies();
  std::vector<Assertion> assertions = network.assertions();
  assertions.push_back({pair.source, pair.target, Decision::Equivalent, AssertionSource::Inferred,
                        pair.dataset_id});
  OntologyNetwork after = build_network(ontologies, network.datasets(), std::move(assertions));

  NegativeDeriver after_deriver(after, settings);
  // The pair itself: would the new fact contradict a derivable negative?
  if (auto negatives = after_deriver.derive(pair.source, pair.target, pair.dataset_id);
      !negatives.empty()) {
    verdict.pass = false;
    verdict.violated_rule = negatives.front().rule;
    verdict.detail = render_explanation(after, Decision::NotEquivalent, negatives.front().rule,
                                        negatives.front().supports);
    return verdict;
  }

  NegativeDeriver before_deriver(network, settings);
  auto before_members = network.component(pair.source, scope);
  auto target_members = network.component(pair.target, scope);
  auto before = conflicts_within(network, before_deriver, before_members, scope, settings);
  before.merge(conflicts_within(network, before_deriver, target_members, scope, settings));
  auto now = conflicts_within(after, after_deriver, after.component(pair.source, scope), scope, settings);
  for (const auto& c : now) {
    if (before.count(c)) continue;
    verdict.pass = false;
    // Identify the rule that produced the new conflict.
    NegativeDeriver probe(after, settings);
    auto negatives = probe.derive(c.first, c.second, pair.dataset_id);
    if (negatives.empty()) negatives = probe.derive(c.second, c.first, pair.dataset_id);
    verdict.violated_rule = negatives.empty() ? PreFillRule::TransitiveEquivalence : negatives.front().rule;
    verdict.detail = "asserting (" + pair.source + ", " + pair.target + ") makes (" + c.first + ", " +
                     c.second + ") both Equivalent and NotEquivalent";
    return verdict;
  }
  return verdict;
}

std::vector<PreFill> retract_dependents(const OntologyNetwork& network, const Assertion& removed,
                                        std::span<const PreFill> prefills,
                                        std::span<const CandidatePair> pending,
                                        const CoherenceSettings& settings,
                                        const std::set<std::string>& confirmed) {
  std::vector<Assertion> remaining;
  bool dropped = false;
  for (const auto& a : network.assertions()) {
    if (!dropped && a == removed) {
      dropped = true;
      continue;
    }
    remaining.push_back(a);
  }
  std::vector<PreFill> retracted;
  if (!dropped) return retracted;
  OntologyNetwork without = build_network(network.ontologies(), network.datasets(), std::move(remaining));

  std::map<std::string, const CandidatePair*> by_id;
  for (const auto& c : pending) by_id[c.id] = &c;
  for (const auto& p : prefills) {
    if (confirmed.count(p.pair_id)) continue;
    CandidatePair candidate{p.pair_id, p.source, p.target, ""};
    if (auto it = by_id.find(p.pair_id); it != by_id.end()) candidate = *it->second;
    auto again = infer_prefills(without, std::span(&candidate, 1), settings);
    bool survives = !again.prefills.empty() && again.prefills.front().value == p.value;
    if (!survives) retracted.push_back(p);
  }
  return retracted;
}

}  // namespace crowdval
