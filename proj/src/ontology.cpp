#include "crowdval/ontology.hpp"

#include <algorithm>

#include "crowdval/error.hpp"

namespace crowdval {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::UnsupportedRelation: return "UnsupportedRelation";
    case ErrorCode::IncompatibleAlignments: return "IncompatibleAlignments";
    case ErrorCode::MissingLexicalForm: return "MissingLexicalForm";
    case ErrorCode::EmptySeedSource: return "EmptySeedSource";
    case ErrorCode::TrustUnavailable: return "TrustUnavailable";
    case ErrorCode::NoVotes: return "NoVotes";
    case ErrorCode::DanglingAssertion: return "DanglingAssertion";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::TaskClosed: return "TaskClosed";
    case ErrorCode::Forbidden: return "Forbidden";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string local_name_of(std::string_view iri) {
  auto pos = iri.find_last_of("#/");
  if (pos == std::string_view::npos) return std::string(iri);
  return std::string(iri.substr(pos + 1));
}

EntityPair make_unordered(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return {std::move(a), std::move(b)};
}

void Ontology::add_entity(EntityRef entity) {
  entity.ontology_id = id_;
  if (entity.local_name.empty()) entity.local_name = local_name_of(entity.iri);
  auto it = index_.find(entity.iri);
  if (it != index_.end()) {
    entities_[it->second] = std::move(entity);
    return;
  }
  index_.emplace(entity.iri, entities_.size());
  entities_.push_back(std::move(entity));
}

void Ontology::add_subclass(std::string child, std::string parent) {
  if (!subclass_edges_.emplace(child, parent).second) return;
  parents_[child].push_back(parent);
  children_[parent].push_back(std::move(child));
}

void Ontology::add_disjoint(std::string a, std::string b) {
  disjoint_pairs_.insert(make_unordered(std::move(a), std::move(b)));
}

bool Ontology::contains(std::string_view iri) const { return find(iri) != nullptr; }

const EntityRef* Ontology::find(std::string_view iri) const {
  auto it = index_.find(std::string(iri));
  return it == index_.end() ? nullptr : &entities_[it->second];
}

const EntityRef& Ontology::at(std::string_view iri) const {
  const EntityRef* e = find(iri);
  if (e == nullptr) {
    throw Error(ErrorCode::NotFound,
                "entity '" + std::string(iri) + "' not in ontology '" + id_ + "'");
  }
  return *e;
}

bool Ontology::are_disjoint(std::string_view a, std::string_view b) const {
  return disjoint_pairs_.count(make_unordered(std::string(a), std::string(b))) > 0;
}

namespace {

std::vector<std::string> lookup(
    const std::map<std::string, std::vector<std::string>, std::less<>>& m, std::string_view key) {
  auto it = m.find(key);
  if (it == m.end()) return {};
  auto out = it->second;
  std::sort(out.begin(), out.end());
  return out;
}

std::set<std::string> reach(const std::map<std::string, std::vector<std::string>, std::less<>>& m,
                            std::string_view start) {
  std::set<std::string> seen;
  std::vector<std::string> stack;
  if (auto it = m.find(start); it != m.end()) stack = it->second;
  while (!stack.empty()) {
    std::string cur = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    if (auto it = m.find(cur); it != m.end()) {
      for (const auto& next : it->second) {
        if (!seen.count(next)) stack.push_back(next);
      }
    }
  }
  return seen;
}

}  // namespace

std::vector<std::string> Ontology::direct_parents(std::string_view iri) const {
  return lookup(parents_, iri);
}

std::vector<std::string> Ontology::direct_children(std::string_view iri) const {
  return lookup(children_, iri);
}

std::vector<std::string> Ontology::disjoint_with(std::string_view iri) const {
  std::vector<std::string> out;
  for (const auto& [a, b] : disjoint_pairs_) {
    if (a == iri) out.push_back(b);
    else if (b == iri) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::set<std::string> Ontology::ancestors(std::string_view iri) const { return reach(parents_, iri); }

std::set<std::string> Ontology::descendants(std::string_view iri) const {
  return reach(children_, iri);
}

void Alignment::add(MappingCell cell) {
  auto key_less = [](const MappingCell& a, const MappingCell& b) {
    return std::tie(a.source, a.target) < std::tie(b.source, b.target);
  };
  auto it = std::lower_bound(cells_.begin(), cells_.end(), cell, key_less);
  if (it != cells_.end() && it->source == cell.source && it->target == cell.target) {
    it->measure = std::max(it->measure, cell.measure);
    return;
  }
  cells_.insert(it, std::move(cell));
}

bool Alignment::contains(std::string_view source, std::string_view target) const {
  auto it = std::lower_bound(cells_.begin(), cells_.end(), std::pair{source, target},
                             [](const MappingCell& c, const std::pair<std::string_view, std::string_view>& k) {
                               return std::pair<std::string_view, std::string_view>(c.source, c.target) < k;
                             });
  return it != cells_.end() && it->source == source && it->target == target;
}

const char* to_string(OpenStatus status) { return status == OpenStatus::Open ? "open" : "closed"; }

OpenStatus open_status_from_string(std::string_view text) {
  if (text == "open") return OpenStatus::Open;
  if (text == "closed") return OpenStatus::Closed;
  throw Error(ErrorCode::BadRequest, "status must be 'open' or 'closed'");
}

void resolve_alignment(const Alignment& alignment, const Ontology& source, const Ontology& target) {
  if (alignment.source_ontology_id() != source.id() ||
      alignment.target_ontology_id() != target.id()) {
    throw Error(ErrorCode::IncompatibleAlignments,
                "alignment binds '" + alignment.source_ontology_id() + "' -> '" +
                    alignment.target_ontology_id() + "' but ontologies are '" + source.id() +
                    "' -> '" + target.id() + "'");
  }
  for (const auto& cell : alignment.cells()) {
    if (!source.contains(cell.source)) {
      throw Error(ErrorCode::ValidationError,
                  "cell entity '" + cell.source + "' not found in ontology '" + source.id() + "'");
    }
    if (!target.contains(cell.target)) {
      throw Error(ErrorCode::ValidationError,
                  "cell entity '" + cell.target + "' not found in ontology '" + target.id() + "'");
    }
  }
}

}  // namespace crowdval
