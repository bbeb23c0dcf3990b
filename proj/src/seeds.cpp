#include "crowdval/seeds.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <set>

#include "crowdval/coherence.hpp"
#include "crowdval/error.hpp"
#include "crowdval/rng.hpp"

namespace crowdval {

const char* to_string(Polarity p) { return p == Polarity::Positive ? "positive" : "negative"; }
const char* to_string(Difficulty d) { return d == Difficulty::Trivial ? "trivial" : "nontrivial"; }

const char* to_string(SeedProvenance p) {
  switch (p) {
    case SeedProvenance::FromNonDisputed: return "from-non-disputed";
    case SeedProvenance::OneToOnePermutation: return "one-to-one-permutation";
    case SeedProvenance::CoherenceFailure: return "coherence-failure";
  }
  return "unknown";
}

const char* to_string(PairKind k) {
  switch (k) {
    case PairKind::ReferenceOnly: return "reference_only";
    case PairKind::MatcherOnly: return "matcher_only";
    case PairKind::Seed: return "seed";
  }
  return "unknown";
}

PairKind pair_kind_from_string(std::string_view text) {
  if (text == "reference_only") return PairKind::ReferenceOnly;
  if (text == "matcher_only") return PairKind::MatcherOnly;
  if (text == "seed") return PairKind::Seed;
  throw Error(ErrorCode::ParseError, "unknown pair kind '" + std::string(text) + "'");
}

std::string normalize_lexical_form(std::string_view text) {
  // Splitting camel case and then deleting the separators leaves only the
  // case-folded alphanumerics; non-ASCII bytes are kept verbatim.
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    if (c >= 0x80) out.push_back(static_cast<char>(c));
    else if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

double normalized_edit_similarity(std::string_view a, std::string_view b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 && m == 0) return 1.0;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return 1.0 - static_cast<double>(prev[m]) / static_cast<double>(std::max(n, m));
}

namespace {

std::vector<std::string> lexical_forms(const EntityRef& e) {
  std::vector<std::string> forms;
  auto add = [&](std::string_view s) {
    auto norm = normalize_lexical_form(s);
    if (!norm.empty() && std::find(forms.begin(), forms.end(), norm) == forms.end()) {
      forms.push_back(std::move(norm));
    }
  };
  add(e.local_name.empty() ? local_name_of(e.iri) : e.local_name);
  for (const auto& l : e.labels) add(l);
  return forms;
}

}  // namespace

double lexical_similarity(const EntityRef& a, const EntityRef& b) {
  auto fa = lexical_forms(a);
  auto fb = lexical_forms(b);
  if (fa.empty() || fb.empty()) {
    throw Error(ErrorCode::MissingLexicalForm,
                "no local name or label on " + (fa.empty() ? a.iri : b.iri));
  }
  double best = 0.0;
  for (const auto& x : fa) {
    for (const auto& y : fb) best = std::max(best, normalized_edit_similarity(x, y));
  }
  return best;
}

Difficulty classify_triviality(const EntityRef& a, const EntityRef& b, const TrivialityOptions& options) {
  return lexical_similarity(a, b) >= options.threshold ? Difficulty::Trivial : Difficulty::NonTrivial;
}

PositiveSeeds generate_positive_seeds(const MappingPartition& partition, const Ontology& source,
                                      const Ontology& target, std::uint64_t rng_seed,
                                      const SeedOptions& options) {
  if (partition.non_disputed.empty()) {
    throw Error(ErrorCode::EmptySeedSource,
                "no non-disputed mappings; the trust mechanism cannot be enabled");
  }
  std::vector<std::size_t> chosen(partition.non_disputed.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  if (options.max_positive && *options.max_positive < chosen.size()) {
    Rng rng(derive_seed(rng_seed, 1));
    rng.shuffle(chosen);
    chosen.resize(*options.max_positive);
    std::sort(chosen.begin(), chosen.end());
  }

  PositiveSeeds out;
  for (std::size_t i : chosen) {
    const auto& cell = partition.non_disputed[i];
    Difficulty difficulty = Difficulty::NonTrivial;
    const EntityRef* a = source.find(cell.source);
    const EntityRef* b = target.find(cell.target);
    EntityRef fallback_a{source.id(), cell.source, local_name_of(cell.source), {}, {}};
    EntityRef fallback_b{target.id(), cell.target, local_name_of(cell.target), {}, {}};
    try {
      difficulty = classify_triviality(a ? *a : fallback_a, b ? *b : fallback_b, options.triviality);
    } catch (const Error& e) {
      // A pair with no lexical form cannot look similar.
      if (e.code() != ErrorCode::MissingLexicalForm) throw;
    }
    out.seeds.push_back({cell.source, cell.target, Polarity::Positive, difficulty, Decision::Equivalent,
                         SeedProvenance::FromNonDisputed});
    if (difficulty == Difficulty::Trivial) ++out.profile.trivial_count;
  }
  out.profile.positive_count = out.seeds.size();
  out.profile.trivial_fraction =
      static_cast<double>(out.profile.trivial_count) / static_cast<double>(out.profile.positive_count);
  return out;
}

NegativeSeeds generate_negative_seeds(const MappingPartition& partition, const Ontology& source,
                                      const Ontology& target, const DifficultyProfile& profile,
                                      std::uint64_t rng_seed) {
  NegativeSeeds out;
  if (profile.positive_count == 0) return out;

  std::set<std::pair<std::string, std::string>> in_r_or_a;
  for (const auto* cells : {&partition.non_disputed, &partition.reference_only, &partition.matcher_only}) {
    for (const auto& c : *cells) in_r_or_a.emplace(c.source, c.target);
  }

  // Trivial pool: per non-disputed (e1, e2), every e3 ≠ e1 of the source
  // ontology with (e3, e2) in neither alignment.
  std::vector<std::vector<std::string>> trivial_pool(partition.non_disputed.size());
  std::set<std::pair<std::string, std::string>> trivial_distinct;
  for (std::size_t i = 0; i < partition.non_disputed.size(); ++i) {
    const auto& cell = partition.non_disputed[i];
    for (const auto& e3 : source.entities()) {
      if (e3.iri == cell.source || in_r_or_a.count({e3.iri, cell.target})) continue;
      trivial_pool[i].push_back(e3.iri);
      trivial_distinct.emplace(e3.iri, cell.target);
    }
  }

  // Non-trivial pool: disputed cells that fail the coherence check against
  // the ontology pair with every non-disputed cell asserted.
  std::vector<std::pair<std::string, std::string>> nontrivial_pool;
  {
    const std::string dataset_id = "seed-check";
    std::vector<Assertion> assertions;
    for (const auto& c : partition.non_disputed) {
      if (source.contains(c.source) && target.contains(c.target)) {
        assertions.push_back({c.source, c.target, Decision::Equivalent, AssertionSource::UserDecision,
                              dataset_id});
      }
    }
    auto network = build_network(
        {std::make_shared<const Ontology>(source), std::make_shared<const Ontology>(target)},
        {{dataset_id, source.id(), target.id()}}, std::move(assertions));
    CoherenceSettings settings{.one_to_one = true, .cross_dataset = true};
    for (const auto* cells : {&partition.reference_only, &partition.matcher_only}) {
      for (const auto& c : *cells) {
        if (!source.contains(c.source) || !target.contains(c.target)) continue;
        CandidatePair pair{"", c.source, c.target, dataset_id};
        if (!coherence_check(pair, network, settings).pass) nontrivial_pool.emplace_back(c.source, c.target);
      }
    }
  }

  const std::size_t total = profile.positive_count;
  const std::size_t want_trivial = std::min<std::size_t>(
      total, static_cast<std::size_t>(std::llround(profile.trivial_fraction * static_cast<double>(total))));
  const std::size_t want_nontrivial = total - want_trivial;
  std::size_t take_trivial = std::min(want_trivial, trivial_distinct.size());
  std::size_t take_nontrivial = std::min(want_nontrivial, nontrivial_pool.size());
  // Fill a short class from the other one; never invent pairs.
  if (take_trivial < want_trivial) {
    take_nontrivial = std::min(nontrivial_pool.size(), take_nontrivial + (want_trivial - take_trivial));
  }
  if (take_nontrivial < want_nontrivial) {
    take_trivial = std::min(trivial_distinct.size(), take_trivial + (want_nontrivial - take_nontrivial));
  }

  Rng rng(derive_seed(rng_seed, 2));
  // Round-robin over shuffled non-disputed cells, drawing e3 uniformly.
  std::vector<std::size_t> order(partition.non_disputed.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::set<std::pair<std::string, std::string>> taken;
  std::vector<bool> exhausted(order.size(), false);
  std::size_t got_trivial = 0;
  while (got_trivial < take_trivial) {
    bool progressed = false;
    for (std::size_t i : order) {
      if (got_trivial == take_trivial) break;
      if (exhausted[i]) continue;
      auto& pool = trivial_pool[i];
      const std::string& e2 = partition.non_disputed[i].target;
      std::erase_if(pool, [&](const std::string& e3) { return taken.count({e3, e2}) > 0; });
      if (pool.empty()) {
        exhausted[i] = true;
        continue;
      }
      std::size_t pick = static_cast<std::size_t>(rng.uniform_index(pool.size()));
      std::string e3 = pool[pick];
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      taken.emplace(e3, e2);
      out.seeds.push_back({e3, e2, Polarity::Negative, Difficulty::Trivial, Decision::NotEquivalent,
                           SeedProvenance::OneToOnePermutation});
      ++got_trivial;
      progressed = true;
    }
    if (!progressed) break;
  }

  Rng nt_rng(derive_seed(rng_seed, 3));
  nt_rng.shuffle(nontrivial_pool);
  for (std::size_t i = 0; i < take_nontrivial; ++i) {
    out.seeds.push_back({nontrivial_pool[i].first, nontrivial_pool[i].second, Polarity::Negative,
                         Difficulty::NonTrivial, Decision::NotEquivalent,
                         SeedProvenance::CoherenceFailure});
  }

  if (got_trivial != want_trivial || take_nontrivial != want_nontrivial) {
    out.shortfall = ShortfallWarning{want_trivial, want_nontrivial, got_trivial, take_nontrivial};
  }
  return out;
}

std::vector<DisputedPair> disputed_pairs(const MappingPartition& partition) {
  std::vector<DisputedPair> out;
  for (const auto& c : partition.reference_only) out.push_back({c.source, c.target, PairKind::ReferenceOnly});
  for (const auto& c : partition.matcher_only) out.push_back({c.source, c.target, PairKind::MatcherOnly});
  return out;
}

std::vector<AnnotationPair> blend_seeds(const std::vector<DisputedPair>& disputed,
                                        const std::vector<SeedPair>& seeds, std::uint64_t rng_seed) {
  std::set<std::pair<std::string, std::string>> seeded;
  for (const auto& s : seeds) seeded.emplace(s.source, s.target);
  std::vector<AnnotationPair> out;
  out.reserve(disputed.size() + seeds.size());
  for (const auto& d : disputed) {
    if (seeded.count({d.source, d.target})) continue;
    out.push_back({"", d.source, d.target, d.kind, std::nullopt});
  }
  for (const auto& s : seeds) out.push_back({"", s.source, s.target, PairKind::Seed, s});
  Rng rng(rng_seed);
  rng.shuffle(out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = "q" + std::to_string(i + 1);
  return out;
}

}  // namespace crowdval
