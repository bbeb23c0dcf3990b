#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crowdval/ontology.hpp"
#include "crowdval/revision.hpp"

namespace crowdval::sim {

// Shape of a synthetic domain. Every ontology carries a copy of one concept
// tree (node k has parent (k-1)/branching), so references are identity
// mappings and stay coherent. Ontology 0 is the anchor.
struct DomainSpec {
  std::string name = "synthetic";
  std::size_t ontology_count = 2;
  std::size_t concept_count = 120;
  std::size_t branching = 3;
  double disjointness = 0.3;  // chance that a sibling pair is declared disjoint
  double label_noise = 0.5;   // chance a concept gets an unrelated label in a copy
  // Per dataset. Non-anchor datasets are scaled by non_anchor_scale.
  std::size_t non_disputed = 20;
  std::size_t true_positives = 30;
  std::size_t false_positives = 30;
  double non_anchor_scale = 1.0;
};

struct SynthDataset {
  Dataset dataset;
  Alignment matcher;
  bool anchor = false;
};

struct SynthDomain {
  DomainGroup group;
  std::string anchor_ontology;
  std::vector<std::shared_ptr<const Ontology>> ontologies;
  std::vector<SynthDataset> datasets;
};

// Deterministic in seed. Throws InfeasibleSpec when the requested mappings
// do not fit the concept tree.
SynthDomain synth_domain(const DomainSpec& spec, std::uint64_t seed);

struct AnnotatorModel {
  std::string id;
  double p = 0.5;  // probability of answering any pair correctly
  bool expert = false;
};

struct PopulationProfile {
  double expert_ratio = 0.5;
  std::pair<double, double> expert_range{0.5, 1.0};
  std::pair<double, double> nonexpert_range{0.0, 0.5};
};

// llround(expert_ratio * count) experts come first. Annotator i draws its
// i-th uniform from the seed's stream whatever the profile, so grids share
// random numbers.
std::vector<AnnotatorModel> simulate_population(const PopulationProfile& profile, std::size_t count,
                                                std::uint64_t seed);

enum class CorrectionTarget { NonSeed, Seed };
const char* to_string(CorrectionTarget t);
CorrectionTarget correction_target_from_string(std::string_view text);

struct SimConfig {
  std::uint64_t rng_seed = 42;
  std::size_t annotator_count = 100;
  double threshold = 0.5;
  std::size_t replicates = 20;
  DomainSpec domain;

  std::vector<double> expert_ratios{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::pair<double, double> expert_range{0.5, 1.0};
  std::pair<double, double> nonexpert_range{0.0, 0.5};

  double knowledge_expert_ratio = 0.5;
  std::vector<double> lower_bounds{0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0};

  std::vector<std::pair<double, double>> spreads{{0.5, 0.5}, {0.4, 0.6}, {0.3, 0.7}, {0.2, 0.8}, {0.1, 0.9}};
  std::vector<double> correction_fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  CorrectionTarget target = CorrectionTarget::NonSeed;

  std::vector<double> coverages{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<DomainSpec> prefill_domains;  // defaults to prefill_presets() when empty
  bool prefill_one_to_one = false;
};

// Missing keys keep their defaults.
SimConfig config_from_json(const nlohmann::json& j);
DomainSpec domain_spec_from_json(const nlohmann::json& j, DomainSpec base = {});

// Three domains that differ in hierarchy depth and disjointness.
std::vector<DomainSpec> prefill_presets();

struct SweepRow {
  std::string sweep;
  std::string spread;  // "lo/hi" for correction sweeps
  std::string parameter;
  double value = 0.0;
  std::string mechanism;              // weighted | unweighted
  std::optional<std::size_t> replicate;  // absent on mean rows
  std::uint64_t replicate_seed = 0;
  double tp_discovery = 0.0;
  double fp_discovery = 0.0;
  double tp_sd = 0.0;  // mean rows only
  double fp_sd = 0.0;
};

struct PrefillRow {
  std::string domain;
  double coverage = 0.0;
  std::string rule;  // a PreFillRule name or "total"
  std::optional<std::size_t> replicate;
  std::uint64_t replicate_seed = 0;
  double count = 0.0;  // pre-fills summed over annotators
  double sd = 0.0;
};

std::vector<SweepRow> run_trust_sweep(const SimConfig& cfg);
std::vector<SweepRow> run_knowledge_sweep(const SimConfig& cfg);
std::vector<SweepRow> run_correction_sweep(const SimConfig& cfg, CorrectionTarget target);
std::vector<PrefillRow> run_prefill_sweep(const SimConfig& cfg);

std::string to_csv(const std::vector<SweepRow>& rows);
std::string to_csv(const std::vector<PrefillRow>& rows);
// Throws IoError when the path cannot be written.
void emit_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
void emit_csv(const std::vector<PrefillRow>& rows, const std::filesystem::path& path);

// One annotation task with ground truth, used by the trust and correction
// sweeps.
struct SimTask {
  TaskDefinition definition;
  std::vector<Decision> truth;  // by pair index
};
SimTask make_sim_task(const DomainSpec& spec, std::uint64_t seed);

}  // namespace crowdval::sim
