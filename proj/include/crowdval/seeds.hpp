#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdval/diff.hpp"
#include "crowdval/ontology.hpp"
#include "crowdval/types.hpp"

namespace crowdval {

enum class Polarity { Positive, Negative };
enum class Difficulty { Trivial, NonTrivial };
enum class SeedProvenance { FromNonDisputed, OneToOnePermutation, CoherenceFailure };

const char* to_string(Polarity p);
const char* to_string(Difficulty d);
const char* to_string(SeedProvenance p);

struct SeedPair {
  std::string source;
  std::string target;
  Polarity polarity = Polarity::Positive;
  Difficulty difficulty = Difficulty::Trivial;
  Decision gold_answer = Decision::Equivalent;
  SeedProvenance provenance = SeedProvenance::FromNonDisputed;

  friend bool operator==(const SeedPair&, const SeedPair&) = default;
};

struct DifficultyProfile {
  std::size_t positive_count = 0;
  std::size_t trivial_count = 0;
  double trivial_fraction = 0.0;
};

// Lowercased, with camel-case boundaries, whitespace, '_' and '-' dropped.
std::string normalize_lexical_form(std::string_view text);
// 1 - levenshtein(a, b) / max(|a|, |b|) over bytes; 1.0 when both are empty.
double normalized_edit_similarity(std::string_view a, std::string_view b);

// Max similarity over (local_name ∪ labels) cross pairs after normalization.
// Throws MissingLexicalForm if either entity has no non-empty form.
double lexical_similarity(const EntityRef& a, const EntityRef& b);

struct TrivialityOptions {
  double threshold = 0.9;
};

Difficulty classify_triviality(const EntityRef& a, const EntityRef& b,
                               const TrivialityOptions& options = {});

struct SeedOptions {
  TrivialityOptions triviality;
  // Cap on positive seeds; sampled reproducibly from the rng seed.
  std::optional<std::size_t> max_positive;
};

struct PositiveSeeds {
  std::vector<SeedPair> seeds;
  DifficultyProfile profile;
};

// Throws EmptySeedSource when the partition has no non-disputed cells.
PositiveSeeds generate_positive_seeds(const MappingPartition& partition, const Ontology& source,
                                      const Ontology& target, std::uint64_t rng_seed,
                                      const SeedOptions& options = {});

struct ShortfallWarning {
  std::size_t requested_trivial = 0;
  std::size_t requested_nontrivial = 0;
  std::size_t achieved_trivial = 0;
  std::size_t achieved_nontrivial = 0;
};

struct NegativeSeeds {
  std::vector<SeedPair> seeds;
  std::optional<ShortfallWarning> shortfall;
};

// Trivial negatives permute the source side of non-disputed cells (one-to-one
// assumption); non-trivial negatives are disputed cells failing the coherence
// check against the ontology pair plus the non-disputed cells.
NegativeSeeds generate_negative_seeds(const MappingPartition& partition, const Ontology& source,
                                      const Ontology& target, const DifficultyProfile& profile,
                                      std::uint64_t rng_seed);

enum class PairKind { ReferenceOnly, MatcherOnly, Seed };
const char* to_string(PairKind k);
PairKind pair_kind_from_string(std::string_view text);

struct DisputedPair {
  std::string source;
  std::string target;
  PairKind kind = PairKind::ReferenceOnly;
};

std::vector<DisputedPair> disputed_pairs(const MappingPartition& partition);

// One unit of annotation work inside a task.
struct AnnotationPair {
  std::string id;
  std::string source;
  std::string target;
  PairKind kind = PairKind::ReferenceOnly;
  std::optional<SeedPair> seed;  // present iff kind == Seed; never shown to annotators

  bool is_seed() const { return kind == PairKind::Seed; }
  friend bool operator==(const AnnotationPair&, const AnnotationPair&) = default;
};

// Shuffled union of disputed pairs and seeds, ids q1..qN assigned in the
// shuffled order. A disputed pair that was turned into a seed appears once,
// as the seed.
std::vector<AnnotationPair> blend_seeds(const std::vector<DisputedPair>& disputed,
                                        const std::vector<SeedPair>& seeds, std::uint64_t rng_seed);

}  // namespace crowdval
