#pragma once

#include <vector>

#include "crowdval/ontology.hpp"

namespace crowdval {

// Cells of R and A split by (source IRI, target IRI) membership. Each set is
// sorted by entity pair; measures are carried over from the reference for
// non-disputed cells and from their own alignment otherwise.
struct MappingPartition {
  std::string source_ontology_id;
  std::string target_ontology_id;
  std::vector<MappingCell> non_disputed;    // A ∩ R
  std::vector<MappingCell> reference_only;  // R − A
  std::vector<MappingCell> matcher_only;    // A − R
};

// Throws IncompatibleAlignments when the two alignments bind different
// ontology pairs (orientation included).
MappingPartition partition_mappings(const Alignment& reference, const Alignment& matcher);

}  // namespace crowdval
