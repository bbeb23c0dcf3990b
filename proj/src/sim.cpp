#include "crowdval/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "crowdval/coherence.hpp"
#include "crowdval/diff.hpp"
#include "crowdval/error.hpp"
#include "crowdval/rng.hpp"
#include "crowdval/seeds.hpp"

namespace crowdval::sim {

using nlohmann::json;

namespace {

std::string random_word(Rng& rng, std::size_t length) {
  std::string w;
  for (std::size_t i = 0; i < length; ++i) w += static_cast<char>('a' + rng.uniform_index(26));
  w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

std::size_t parent_of(std::size_t k, std::size_t branching) { return (k - 1) / branching; }

std::size_t scaled(std::size_t n, double scale) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale));
}

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
};

Stats stats(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Decision opposite(Decision d) { return d == Decision::Equivalent ? Decision::NotEquivalent : Decision::Equivalent; }

std::uint64_t replicate_seed(const SimConfig& cfg, std::size_t rep) { return derive_seed(cfg.rng_seed, rep); }

// Uniforms u[annotator][pair], one stream per annotator.
std::vector<std::vector<double>> uniform_matrix(std::uint64_t seed, std::uint64_t tag, std::size_t rows,
                                                std::size_t cols) {
  std::vector<std::vector<double>> m(rows, std::vector<double>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    Rng rng(derive_seed(seed, tag, r));
    for (auto& x : m[r]) x = rng.uniform01();
  }
  return m;
}

struct Rates {
  double tp = 0.0;
  double fp = 0.0;
};

Rates discovery(const SimTask& task, const TaskSnapshot& snap) {
  std::size_t tp = 0, fp = 0, tp_hit = 0, fp_hit = 0;
  for (const auto& p : task.definition.pairs) {
    if (p.is_seed()) continue;
    bool accepted = snap.pairs.at(p.id).status == PairStatus::Accepted;
    if (p.kind == PairKind::ReferenceOnly) {
      ++tp;
      tp_hit += accepted;
    } else {
      ++fp;
      fp_hit += accepted;
    }
  }
  return {tp ? static_cast<double>(tp_hit) / static_cast<double>(tp) : 0.0,
          fp ? static_cast<double>(fp_hit) / static_cast<double>(fp) : 0.0};
}

std::string annotator_id(std::size_t i) { return "a" + std::to_string(i); }

// Appends every annotator's initial answer: correct iff votes[u][j] < p_u.
void record_initial(TaskLedger& ledger, const SimTask& task, const std::vector<double>& p,
                    const std::vector<std::vector<double>>& votes) {
  for (std::size_t u = 0; u < p.size(); ++u) {
    const std::string uid = annotator_id(u);
    for (std::size_t j = 0; j < task.definition.pairs.size(); ++j) {
      Decision d = votes[u][j] < p[u] ? task.truth[j] : opposite(task.truth[j]);
      ledger.append_unchecked(uid, task.definition.pairs[j].id, d, Origin::Manual, 1000);
    }
  }
}

struct Evaluated {
  Rates weighted;
  Rates unweighted;
};

Evaluated evaluate(const SimTask& task, const TaskLedger& ledger) {
  return {discovery(task, ledger.decision_snapshot(std::nullopt, true)),
          discovery(task, ledger.decision_snapshot(std::nullopt, false))};
}

// results[grid][rep] -> rows: per mechanism, replicate rows then a mean row.
void append_rows(std::vector<SweepRow>& rows, const SimConfig& cfg, const std::string& sweep,
                 const std::string& spread, const std::string& parameter, double value,
                 const std::vector<Evaluated>& per_rep) {
  for (int mech = 0; mech < 2; ++mech) {
    std::vector<double> tps, fps;
    for (std::size_t r = 0; r < per_rep.size(); ++r) {
      const Rates& rate = mech == 0 ? per_rep[r].weighted : per_rep[r].unweighted;
      SweepRow row;
      row.sweep = sweep;
      row.spread = spread;
      row.parameter = parameter;
      row.value = value;
      row.mechanism = mech == 0 ? "weighted" : "unweighted";
      row.replicate = r;
      row.replicate_seed = replicate_seed(cfg, r);
      row.tp_discovery = rate.tp;
      row.fp_discovery = rate.fp;
      rows.push_back(row);
      tps.push_back(rate.tp);
      fps.push_back(rate.fp);
    }
    SweepRow mean;
    mean.sweep = sweep;
    mean.spread = spread;
    mean.parameter = parameter;
    mean.value = value;
    mean.mechanism = mech == 0 ? "weighted" : "unweighted";
    Stats t = stats(tps), f = stats(fps);
    mean.tp_discovery = t.mean;
    mean.fp_discovery = f.mean;
    mean.tp_sd = t.sd;
    mean.fp_sd = f.sd;
    rows.push_back(mean);
  }
}

std::vector<double> p_values(const std::vector<AnnotatorModel>& population) {
  std::vector<double> p;
  for (const auto& a : population) p.push_back(a.p);
  return p;
}

// Shared driver for the trust and knowledge sweeps.
template <typename ProfileFor>
std::vector<SweepRow> population_sweep(const SimConfig& cfg, const std::string& sweep, const std::string& parameter,
                                       const std::vector<double>& grid, ProfileFor profile_for) {
  std::vector<std::vector<Evaluated>> results(grid.size());
  for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
    std::uint64_t seed = replicate_seed(cfg, rep);
    SimTask task = make_sim_task(cfg.domain, derive_seed(seed, 1));
    auto votes = uniform_matrix(seed, 2, cfg.annotator_count, task.definition.pairs.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      auto population = simulate_population(profile_for(grid[g]), cfg.annotator_count, derive_seed(seed, 3));
      TaskLedger ledger(task.definition, cfg.threshold, true);
      record_initial(ledger, task, p_values(population), votes);
      results[g].push_back(evaluate(task, ledger));
    }
  }
  std::vector<SweepRow> rows;
  for (std::size_t g = 0; g < grid.size(); ++g) append_rows(rows, cfg, sweep, "", parameter, grid[g], results[g]);
  return rows;
}

}  // namespace

// ---------------------------------------------------------------- synthesis

SynthDomain synth_domain(const DomainSpec& spec, std::uint64_t seed) {
  if (spec.ontology_count < 2) throw Error(ErrorCode::InfeasibleSpec, "a domain needs at least two ontologies");
  if (spec.concept_count == 0 || spec.branching == 0) {
    throw Error(ErrorCode::InfeasibleSpec, "concept_count and branching must be positive");
  }
  if (spec.non_disputed + spec.true_positives > spec.concept_count) {
    throw Error(ErrorCode::InfeasibleSpec, "more reference mappings than concepts");
  }
  Rng rng(seed);
  const std::size_t n = spec.concept_count;

  std::vector<std::string> base(n);
  for (auto& w : base) w = random_word(rng, 7);
  std::vector<std::pair<std::size_t, std::size_t>> disjoint;
  std::map<std::size_t, std::vector<std::size_t>> children;
  for (std::size_t k = 1; k < n; ++k) children[parent_of(k, spec.branching)].push_back(k);
  for (const auto& [parent, kids] : children) {
    for (std::size_t a = 0; a < kids.size(); ++a) {
      for (std::size_t b = a + 1; b < kids.size(); ++b) {
        if (rng.bernoulli(spec.disjointness)) disjoint.emplace_back(kids[a], kids[b]);
      }
    }
  }

  SynthDomain out;
  out.group.id = spec.name;
  out.group.name = spec.name;
  out.group.status = OpenStatus::Open;
  std::vector<std::vector<std::string>> iri(spec.ontology_count, std::vector<std::string>(n));
  for (std::size_t i = 0; i < spec.ontology_count; ++i) {
    auto onto = std::make_shared<Ontology>(spec.name + "-o" + std::to_string(i));
    for (std::size_t k = 0; k < n; ++k) {
      std::string label = (i > 0 && rng.bernoulli(spec.label_noise)) ? random_word(rng, 7) : base[k];
      iri[i][k] = "http://synth.example/" + spec.name + "/o" + std::to_string(i) + "#" + label + std::to_string(k);
      EntityRef e;
      e.iri = iri[i][k];
      e.labels = {label};
      onto->add_entity(std::move(e));
    }
    for (std::size_t k = 1; k < n; ++k) onto->add_subclass(iri[i][k], iri[i][parent_of(k, spec.branching)]);
    for (const auto& [a, b] : disjoint) onto->add_disjoint(iri[i][a], iri[i][b]);
    out.ontologies.push_back(onto);
  }
  out.anchor_ontology = out.ontologies[0]->id();

  // One concept order shared by every dataset, so reference mappings of
  // different datasets overlap on the same concepts.
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  rng.shuffle(order);

  auto related = [&](std::size_t k) {
    std::vector<std::size_t> r;
    if (k > 0) r.push_back(parent_of(k, spec.branching));
    if (auto it = children.find(k); it != children.end()) r.insert(r.end(), it->second.begin(), it->second.end());
    for (const auto& [a, b] : disjoint) {
      if (a == k) r.push_back(b);
      if (b == k) r.push_back(a);
    }
    return r;
  };

  for (std::size_t i = 0; i < spec.ontology_count; ++i) {
    for (std::size_t j = i + 1; j < spec.ontology_count; ++j) {
      bool anchor = i == 0;
      double scale = anchor ? 1.0 : spec.non_anchor_scale;
      std::size_t nd = scaled(spec.non_disputed, scale), tp = scaled(spec.true_positives, scale),
                  fp = scaled(spec.false_positives, scale);
      SynthDataset ds;
      ds.anchor = anchor;
      ds.dataset.id = spec.name + "-o" + std::to_string(i) + "-o" + std::to_string(j);
      ds.dataset.name = ds.dataset.id;
      ds.dataset.domain_id = spec.name;
      ds.dataset.status = OpenStatus::Open;
      ds.dataset.ontology_a = *out.ontologies[i];
      ds.dataset.ontology_b = *out.ontologies[j];
      ds.dataset.reference = Alignment(out.ontologies[i]->id(), out.ontologies[j]->id());
      ds.matcher = Alignment(out.ontologies[i]->id(), out.ontologies[j]->id());

      std::vector<std::size_t> concepts(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nd + tp));
      rng.shuffle(concepts);
      for (std::size_t c = 0; c < concepts.size(); ++c) {
        MappingCell cell{iri[i][concepts[c]], iri[j][concepts[c]], 1.0};
        ds.dataset.reference.add(cell);
        if (c < nd) ds.matcher.add(cell);
      }
      std::vector<std::pair<std::size_t, std::size_t>> near_misses;
      for (std::size_t k : concepts) {
        for (std::size_t r : related(k)) {
          near_misses.emplace_back(k, r);
          near_misses.emplace_back(r, k);
        }
      }
      std::sort(near_misses.begin(), near_misses.end());
      near_misses.erase(std::unique(near_misses.begin(), near_misses.end()), near_misses.end());
      rng.shuffle(near_misses);
      std::size_t added = 0;
      for (const auto& [a, b] : near_misses) {
        if (added == fp) break;
        if (ds.matcher.contains(iri[i][a], iri[j][b])) continue;
        ds.matcher.add({iri[i][a], iri[j][b], 0.8});
        ++added;
      }
      if (added < fp) {
        throw Error(ErrorCode::InfeasibleSpec, "only " + std::to_string(added) + " near-miss false positives exist in " +
                                                   ds.dataset.id);
      }
      out.group.dataset_ids.push_back(ds.dataset.id);
      out.datasets.push_back(std::move(ds));
    }
  }
  return out;
}

std::vector<AnnotatorModel> simulate_population(const PopulationProfile& profile, std::size_t count,
                                                std::uint64_t seed) {
  auto in_unit = [](std::pair<double, double> r) { return r.first >= 0.0 && r.second <= 1.0 && r.first <= r.second; };
  if (!in_unit(profile.expert_range) || !in_unit(profile.nonexpert_range) || profile.expert_ratio < 0.0 ||
      profile.expert_ratio > 1.0) {
    throw Error(ErrorCode::BadRequest, "population ranges must lie within [0, 1]");
  }
  auto experts = static_cast<std::size_t>(std::llround(profile.expert_ratio * static_cast<double>(count)));
  Rng rng(seed);
  std::vector<AnnotatorModel> out;
  for (std::size_t i = 0; i < count; ++i) {
    double u = rng.uniform01();
    bool expert = i < experts;
    auto range = expert ? profile.expert_range : profile.nonexpert_range;
    out.push_back({annotator_id(i), range.first + (range.second - range.first) * u, expert});
  }
  return out;
}

const char* to_string(CorrectionTarget t) { return t == CorrectionTarget::Seed ? "seed" : "non-seed"; }

CorrectionTarget correction_target_from_string(std::string_view text) {
  if (text == "seed") return CorrectionTarget::Seed;
  if (text == "non-seed" || text == "nonseed") return CorrectionTarget::NonSeed;
  throw Error(ErrorCode::BadRequest, "target must be seed or non-seed");
}

SimTask make_sim_task(const DomainSpec& spec, std::uint64_t seed) {
  SynthDomain domain = synth_domain(spec, derive_seed(seed, 1));
  const SynthDataset& ds = domain.datasets.front();
  MappingPartition partition = partition_mappings(ds.dataset.reference, ds.matcher);
  auto positive = generate_positive_seeds(partition, ds.dataset.ontology_a, ds.dataset.ontology_b, derive_seed(seed, 2));
  auto negative = generate_negative_seeds(partition, ds.dataset.ontology_a, ds.dataset.ontology_b, positive.profile,
                                          derive_seed(seed, 3));
  std::vector<SeedPair> seeds = std::move(positive.seeds);
  seeds.insert(seeds.end(), negative.seeds.begin(), negative.seeds.end());
  SimTask task;
  task.definition.id = "sim-" + ds.dataset.id;
  task.definition.matcher_id = "sim-matcher";
  task.definition.dataset_id = ds.dataset.id;
  task.definition.pairs = blend_seeds(disputed_pairs(partition), seeds, derive_seed(seed, 4));
  for (const auto& p : task.definition.pairs) {
    if (p.is_seed()) {
      task.truth.push_back(p.seed->gold_answer);
    } else {
      task.truth.push_back(p.kind == PairKind::ReferenceOnly ? Decision::Equivalent : Decision::NotEquivalent);
    }
  }
  return task;
}

// ------------------------------------------------------------------- sweeps

std::vector<SweepRow> run_trust_sweep(const SimConfig& cfg) {
  return population_sweep(cfg, "trust", "expert_ratio", cfg.expert_ratios, [&](double ratio) {
    return PopulationProfile{ratio, cfg.expert_range, cfg.nonexpert_range};
  });
}

std::vector<SweepRow> run_knowledge_sweep(const SimConfig& cfg) {
  return population_sweep(cfg, "knowledge", "expert_lower_bound", cfg.lower_bounds, [&](double lower) {
    return PopulationProfile{cfg.knowledge_expert_ratio, {lower, 1.0}, cfg.nonexpert_range};
  });
}

std::vector<SweepRow> run_correction_sweep(const SimConfig& cfg, CorrectionTarget target) {
  const std::string sweep = std::string("correction-") + to_string(target);
  // results[spread][fraction][rep]
  std::vector<std::vector<std::vector<Evaluated>>> results(
      cfg.spreads.size(), std::vector<std::vector<Evaluated>>(cfg.correction_fractions.size()));
  for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
    std::uint64_t seed = replicate_seed(cfg, rep);
    SimTask task = make_sim_task(cfg.domain, derive_seed(seed, 1));
    const auto& pairs = task.definition.pairs;
    const std::size_t m = task.definition.seed_count();
    auto votes = uniform_matrix(seed, 2, cfg.annotator_count, pairs.size());
    auto seed_fix = uniform_matrix(seed, 5, cfg.annotator_count, pairs.size());
    std::vector<double> pair_fix(pairs.size());
    {
      Rng rng(derive_seed(seed, 4));
      for (auto& x : pair_fix) x = rng.uniform01();
    }
    const std::size_t experts = cfg.annotator_count / 2;
    for (std::size_t s = 0; s < cfg.spreads.size(); ++s) {
      std::vector<double> p(cfg.annotator_count);
      for (std::size_t u = 0; u < p.size(); ++u) p[u] = u < experts ? cfg.spreads[s].second : cfg.spreads[s].first;
      for (std::size_t g = 0; g < cfg.correction_fractions.size(); ++g) {
        const double f = cfg.correction_fractions[g];
        TaskLedger ledger(task.definition, cfg.threshold, true);
        record_initial(ledger, task, p, votes);
        for (std::size_t u = 0; u < p.size(); ++u) {
          const std::string uid = annotator_id(u);
          auto wrong = [&](std::size_t j) { return !(votes[u][j] < p[u]); };
          if (target == CorrectionTarget::NonSeed) {
            for (std::size_t j = 0; j < pairs.size(); ++j) {
              if (!pairs[j].is_seed() && wrong(j) && pair_fix[j] < f) {
                ledger.append_unchecked(uid, pairs[j].id, task.truth[j], Origin::Manual, 2000);
              }
            }
          } else {
            std::size_t fixed = 0;
            for (std::size_t j = 0; j < pairs.size(); ++j) {
              if (pairs[j].is_seed() && wrong(j) && seed_fix[u][j] < f) {
                ledger.append_unchecked(uid, pairs[j].id, task.truth[j], Origin::Manual, 2000);
                ++fixed;
              }
            }
            // The annotator's accuracy on real pairs follows the corrected
            // trustworthiness: answers that fall inside the gained margin
            // become correct.
            double gained = m ? static_cast<double>(fixed) / static_cast<double>(m) : 0.0;
            for (std::size_t j = 0; j < pairs.size(); ++j) {
              if (!pairs[j].is_seed() && wrong(j) && votes[u][j] < p[u] + gained) {
                ledger.append_unchecked(uid, pairs[j].id, task.truth[j], Origin::Manual, 2000);
              }
            }
          }
        }
        results[s][g].push_back(evaluate(task, ledger));
      }
    }
  }
  std::vector<SweepRow> rows;
  for (std::size_t s = 0; s < cfg.spreads.size(); ++s) {
    char spread[32];
    std::snprintf(spread, sizeof spread, "%.1f/%.1f", cfg.spreads[s].first, cfg.spreads[s].second);
    for (std::size_t g = 0; g < cfg.correction_fractions.size(); ++g) {
      append_rows(rows, cfg, sweep, spread, "correction_fraction", cfg.correction_fractions[g], results[s][g]);
    }
  }
  return rows;
}

std::vector<DomainSpec> prefill_presets() {
  DomainSpec deep;
  deep.name = "deep";
  deep.ontology_count = 3;
  deep.concept_count = 80;
  deep.branching = 2;
  deep.disjointness = 0.5;
  deep.non_disputed = 10;
  deep.true_positives = 20;
  deep.false_positives = 20;
  deep.non_anchor_scale = 0.25;

  DomainSpec flat = deep;
  flat.name = "flat";
  flat.branching = 6;
  flat.disjointness = 0.2;

  DomainSpec plain = deep;
  plain.name = "plain";
  plain.branching = 3;
  plain.disjointness = 0.0;
  return {deep, flat, plain};
}

std::vector<PrefillRow> run_prefill_sweep(const SimConfig& cfg) {
  const std::vector<DomainSpec> domains = cfg.prefill_domains.empty() ? prefill_presets() : cfg.prefill_domains;
  const std::vector<PreFillRule> rules{PreFillRule::TransitiveEquivalence, PreFillRule::SubsumptionNegativity,
                                       PreFillRule::Disjointedness, PreFillRule::OneToOneNegativity};
  std::vector<PrefillRow> rows;
  for (const auto& spec : domains) {
    SynthDomain domain = synth_domain(spec, derive_seed(cfg.rng_seed, hash_string(spec.name)));
    std::vector<DatasetBinding> bindings;
    std::vector<CandidatePair> candidates;
    std::vector<bool> anchor;
    for (const auto& ds : domain.datasets) {
      bindings.push_back({ds.dataset.id, ds.dataset.ontology_a.id(), ds.dataset.ontology_b.id()});
      MappingPartition partition = partition_mappings(ds.dataset.reference, ds.matcher);
      for (const auto& d : disputed_pairs(partition)) {
        candidates.push_back({ds.dataset.id + "/" + std::to_string(candidates.size()), d.source, d.target, ds.dataset.id});
        anchor.push_back(ds.anchor);
      }
    }
    // counts[coverage][rule][rep]
    std::vector<std::vector<std::vector<double>>> counts(
        cfg.coverages.size(), std::vector<std::vector<double>>(rules.size() + 1, std::vector<double>(cfg.replicates)));
    for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
      std::uint64_t seed = derive_seed(replicate_seed(cfg, rep), hash_string(spec.name));
      auto pick = uniform_matrix(seed, 1, cfg.annotator_count, candidates.size());
      auto answer = uniform_matrix(seed, 2, cfg.annotator_count, candidates.size());
      for (std::size_t c = 0; c < cfg.coverages.size(); ++c) {
        for (std::size_t u = 0; u < cfg.annotator_count; ++u) {
          std::vector<Assertion> assertions;
          std::vector<CandidatePair> pending;
          for (std::size_t q = 0; q < candidates.size(); ++q) {
            if (anchor[q] && pick[u][q] < cfg.coverages[c]) {
              Decision d = answer[u][q] < 0.5 ? Decision::Equivalent : Decision::NotEquivalent;
              assertions.push_back({candidates[q].source, candidates[q].target, d, AssertionSource::UserDecision,
                                    candidates[q].dataset_id});
            } else {
              pending.push_back(candidates[q]);
            }
          }
          if (assertions.empty()) continue;
          OntologyNetwork network = build_network(domain.ontologies, bindings, std::move(assertions));
          InferenceResult result = infer_prefills(network, pending, {cfg.prefill_one_to_one, true});
          for (const auto& p : result.prefills) {
            auto r = static_cast<std::size_t>(std::find(rules.begin(), rules.end(), p.rule) - rules.begin());
            counts[c][r][rep] += 1.0;
            counts[c][rules.size()][rep] += 1.0;
          }
        }
      }
    }
    for (std::size_t c = 0; c < cfg.coverages.size(); ++c) {
      for (std::size_t r = 0; r <= rules.size(); ++r) {
        std::string rule = r < rules.size() ? to_string(rules[r]) : "total";
        for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
          rows.push_back({spec.name, cfg.coverages[c], rule, rep, replicate_seed(cfg, rep), counts[c][r][rep], 0.0});
        }
        Stats s = stats(counts[c][r]);
        rows.push_back({spec.name, cfg.coverages[c], rule, std::nullopt, 0, s.mean, s.sd});
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------- csv

std::string to_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "sweep,spread,parameter,value,mechanism,replicate,replicate_seed,tp_discovery,fp_discovery,tp_sd,fp_sd\n";
  for (const auto& r : rows) {
    out += r.sweep + "," + r.spread + "," + r.parameter + "," + fixed6(r.value) + "," + r.mechanism + ",";
    out += r.replicate ? std::to_string(*r.replicate) + "," + std::to_string(r.replicate_seed) : std::string("mean,");
    out += "," + fixed6(r.tp_discovery) + "," + fixed6(r.fp_discovery) + "," + fixed6(r.tp_sd) + "," +
           fixed6(r.fp_sd) + "\n";
  }
  return out;
}

std::string to_csv(const std::vector<PrefillRow>& rows) {
  std::string out = "domain,coverage,rule,replicate,replicate_seed,count,sd\n";
  for (const auto& r : rows) {
    out += r.domain + "," + fixed6(r.coverage) + "," + r.rule + ",";
    out += r.replicate ? std::to_string(*r.replicate) + "," + std::to_string(r.replicate_seed) : std::string("mean,");
    out += "," + fixed6(r.count) + "," + fixed6(r.sd) + "\n";
  }
  return out;
}

namespace {

void write_file(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

}  // namespace

void emit_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) { write_file(to_csv(rows), path); }
void emit_csv(const std::vector<PrefillRow>& rows, const std::filesystem::path& path) { write_file(to_csv(rows), path); }

// ------------------------------------------------------------------- config

DomainSpec domain_spec_from_json(const json& j, DomainSpec d) {
  d.name = j.value("name", d.name);
  d.ontology_count = j.value("ontology_count", d.ontology_count);
  d.concept_count = j.value("concept_count", d.concept_count);
  d.branching = j.value("branching", d.branching);
  d.disjointness = j.value("disjointness", d.disjointness);
  d.label_noise = j.value("label_noise", d.label_noise);
  d.non_disputed = j.value("non_disputed", d.non_disputed);
  d.true_positives = j.value("true_positives", d.true_positives);
  d.false_positives = j.value("false_positives", d.false_positives);
  d.non_anchor_scale = j.value("non_anchor_scale", d.non_anchor_scale);
  return d;
}

SimConfig config_from_json(const json& j) {
  SimConfig c;
  if (!j.is_object()) throw Error(ErrorCode::BadRequest, "config must be a JSON object");
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.annotator_count = j.value("annotator_count", c.annotator_count);
  c.threshold = j.value("threshold", c.threshold);
  c.replicates = j.value("replicates", c.replicates);
  if (j.contains("domain")) c.domain = domain_spec_from_json(j.at("domain"), c.domain);
  c.expert_ratios = j.value("expert_ratios", c.expert_ratios);
  c.expert_range = j.value("expert_range", c.expert_range);
  c.nonexpert_range = j.value("nonexpert_range", c.nonexpert_range);
  c.knowledge_expert_ratio = j.value("knowledge_expert_ratio", c.knowledge_expert_ratio);
  c.lower_bounds = j.value("lower_bounds", c.lower_bounds);
  c.spreads = j.value("spreads", c.spreads);
  c.correction_fractions = j.value("correction_fractions", c.correction_fractions);
  if (j.contains("target")) c.target = correction_target_from_string(j.at("target").get<std::string>());
  c.coverages = j.value("coverages", c.coverages);
  if (j.contains("prefill_domains")) {
    for (const auto& d : j.at("prefill_domains")) c.prefill_domains.push_back(domain_spec_from_json(d));
  }
  c.prefill_one_to_one = j.value("prefill_one_to_one", c.prefill_one_to_one);
  if (c.annotator_count == 0) throw Error(ErrorCode::BadRequest, "annotator_count must be positive");
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) throw Error(ErrorCode::BadRequest, "threshold outside [0, 1]");
  return c;
}

}  // namespace crowdval::sim
