#include "crowdval/diff.hpp"

#include <tuple>

#include "crowdval/error.hpp"

namespace crowdval {

MappingPartition partition_mappings(const Alignment& reference, const Alignment& matcher) {
  if (reference.source_ontology_id() != matcher.source_ontology_id() ||
      reference.target_ontology_id() != matcher.target_ontology_id()) {
    throw Error(ErrorCode::IncompatibleAlignments,
                "reference binds '" + reference.source_ontology_id() + "' -> '" +
                    reference.target_ontology_id() + "', matcher binds '" +
                    matcher.source_ontology_id() + "' -> '" + matcher.target_ontology_id() + "'");
  }
  MappingPartition out;
  out.source_ontology_id = reference.source_ontology_id();
  out.target_ontology_id = reference.target_ontology_id();

  // Both cell lists are sorted by (source, target): a single merge pass.
  const auto& r = reference.cells();
  const auto& a = matcher.cells();
  std::size_t i = 0, j = 0;
  while (i < r.size() || j < a.size()) {
    if (j == a.size()) {
      out.reference_only.push_back(r[i++]);
    } else if (i == r.size()) {
      out.matcher_only.push_back(a[j++]);
    } else {
      auto rk = std::tie(r[i].source, r[i].target);
      auto ak = std::tie(a[j].source, a[j].target);
      if (rk < ak) {
        out.reference_only.push_back(r[i++]);
      } else if (ak < rk) {
        out.matcher_only.push_back(a[j++]);
      } else {
        out.non_disputed.push_back(r[i++]);
        ++j;
      }
    }
  }
  return out;
}

}  // namespace crowdval
