// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "crowdval/coherence.hpp"
#include "crowdval/diff.hpp"
#include "crowdval/error.hpp"
#include "crowdval/revision.hpp"
#include "crowdval/seeds.hpp"
#include "crowdval/service.hpp"
#include "crowdval/sim.hpp"
#include "crowdval/trust.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace crowdval;
using fixtures::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

Outcome within(Outcome o, double elapsed, double limit) {
  o.detail += (o.detail.empty() ? "" : "; ") + fmt(elapsed) + "s (limit " + fmt(limit) + "s)";
  if (elapsed >= limit) o.pass = false;
  return o;
}

Outcome agreement_exactness() {
  auto start = Clock::now();
  Rng rng(1001);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<Vote> votes(1 + rng.uniform_index(50));
    for (auto& v : votes) {
      v.tau = rng.uniform01();
      v.decision = rng.bernoulli(0.5) ? Decision::Equivalent : Decision::NotEquivalent;
    }
    auto got = agreement_score("q", votes);
    auto want = oracle::direct_score(votes);
    worst = std::max({worst, std::fabs(got.raw_score - want.s), std::fabs(got.normalized_share - want.w)});
    if (got.n_users != want.n || got.equivalent_votes != want.equivalent) return {false, "vote counts differ"};
  }
  return within({worst <= 1e-12, "max error " + std::to_string(worst)}, seconds_since(start), 1.0);
}

Outcome trust_exactness() {
  auto start = Clock::now();
  std::size_t patterns = 0;
  for (std::size_t m = 1; m <= 12; ++m) {
    std::vector<AnnotationPair> pairs;
    for (std::size_t i = 0; i < m; ++i) {
      Decision gold = i % 3 ? Decision::Equivalent : Decision::NotEquivalent;
      SeedPair s{"s" + std::to_string(i), "t" + std::to_string(i),
                 gold == Decision::Equivalent ? Polarity::Positive : Polarity::Negative, Difficulty::Trivial, gold,
                 SeedProvenance::FromNonDisputed};
      pairs.push_back({"seed" + std::to_string(i), s.source, s.target, PairKind::Seed, s});
    }
    pairs.push_back({"p", "a", "b", PairKind::ReferenceOnly, std::nullopt});
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
      DecisionMap d;
      std::size_t n = 0;
      for (std::size_t i = 0; i < m; ++i) {
        Decision gold = pairs[i].seed->gold_answer;
        bool right = (mask >> i) & 1;
        n += right;
        d[pairs[i].id] = right ? gold : (gold == Decision::Equivalent ? Decision::NotEquivalent : Decision::Equivalent);
      }
      d["p"] = Decision::Equivalent;
      auto t = trustworthiness("u", "t", pairs, d);
      if (!t.complete || t.m != m || t.n != n || *t.tau != static_cast<double>(n) / static_cast<double>(m)) {
        return {false, "mismatch at m=" + std::to_string(m) + " mask=" + std::to_string(mask)};
      }
      ++patterns;
    }
  }
  return within({true, std::to_string(patterns) + " patterns"}, seconds_since(start), 5.0);
}

Outcome diff_oracle() {
  auto start = Clock::now();
  Rng rng(1003);
  for (int i = 0; i < 500; ++i) {
    std::size_t universe = 2 + rng.uniform_index(30);
    Alignment r = oracle::random_alignment(rng, 200, universe);
    Alignment a = oracle::random_alignment(rng, 200, universe);
    auto got = partition_mappings(r, a);
    auto want = oracle::brute_partition(r, a);
    auto keys = [](const std::vector<MappingCell>& cells) {
      std::set<oracle::CellKey> out;
      for (const auto& c : cells) out.emplace(c.source, c.target);
      return out;
    };
    if (keys(got.non_disputed) != want.both || keys(got.reference_only) != want.reference_only ||
        keys(got.matcher_only) != want.matcher_only) {
      return {false, "partition differs on pair " + std::to_string(i)};
    }
  }
  return within({true, "500 alignment pairs"}, seconds_since(start), 5.0);
}

Outcome coherence_oracle() {
  auto start = Clock::now();
  Rng rng(1004);
  std::size_t conflicts = 0, prefills = 0;
  for (int i = 0; i < 200; ++i) {
    auto n = oracle::random_network(rng, 30, 15);
    auto net = build_network(n.ontologies, n.datasets, n.assertions);
    for (CoherenceSettings s : {CoherenceSettings{true, true}, CoherenceSettings{false, true},
                                CoherenceSettings{true, false}}) {
      auto got = infer_prefills(net, n.pending, s);
      auto want = oracle::naive_closure(n.ontologies, n.datasets, n.assertions, n.pending, s);
      if (auto diff = oracle::compare_inference(got, want)) return {false, "network " + std::to_string(i) + ": " + *diff};
      conflicts += got.conflicts.size();
      prefills += got.prefills.size();
    }
  }
  return within({true, std::to_string(prefills) + " pre-fills, " + std::to_string(conflicts) + " conflicts checked"},
                seconds_since(start), 30.0);
}

Outcome seed_balance() {
  Rng rng(1005);
  std::size_t checked = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto prob = oracle::random_seed_problem(rng);
    auto pos = generate_positive_seeds(prob.partition, prob.source, prob.target, 500 + i);
    auto neg = generate_negative_seeds(prob.partition, prob.source, prob.target, pos.profile, 900 + i);
    if (neg.shortfall) continue;
    ++checked;
    if (neg.seeds.size() != pos.seeds.size()) return {false, "count mismatch on partition " + std::to_string(i)};
    double trivial = 0;
    for (const auto& s : neg.seeds) trivial += s.difficulty == Difficulty::Trivial;
    double gap = std::fabs(trivial / static_cast<double>(neg.seeds.size()) - pos.profile.trivial_fraction);
    double allowed = 1.0 / static_cast<double>(pos.seeds.size());
    worst = std::max(worst, gap / allowed);
    if (gap > allowed + 1e-12) return {false, "difficulty gap on partition " + std::to_string(i)};
  }
  return {checked > 0, std::to_string(checked) + "/100 without shortfall, worst gap " + fmt(worst) + " of allowance"};
}

// Mean rows keyed by (spread, value, mechanism).
using MeanKey = std::tuple<std::string, double, std::string>;
std::map<MeanKey, sim::SweepRow> means(const std::vector<sim::SweepRow>& rows) {
  std::map<MeanKey, sim::SweepRow> out;
  for (const auto& r : rows) {
    if (!r.replicate) out[{r.spread, r.value, r.mechanism}] = r;
  }
  return out;
}

Outcome trust_trend() {
  auto start = Clock::now();
  sim::SimConfig cfg;
  auto m = means(sim::run_trust_sweep(cfg));
  std::ostringstream detail;
  bool pass = true;
  int strict = 0;
  for (double ratio : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}) {
    const auto& w = m.at({"", ratio, "weighted"});
    const auto& u = m.at({"", ratio, "unweighted"});
    double dtp = w.tp_discovery - u.tp_discovery, dfp = w.fp_discovery - u.fp_discovery;
    if (dtp < 0 || dfp > 0) pass = false;
    if (dtp > 0.02 || -dfp > 0.02) ++strict;
    detail << ratio << ":" << fmt(dtp) << "/" << fmt(dfp) << " ";
  }
  if (strict < 3) pass = false;
  for (double ratio : {0.0, 1.0}) {
    const auto& w = m.at({"", ratio, "weighted"});
    const auto& u = m.at({"", ratio, "unweighted"});
    double gap = std::max(std::fabs(w.tp_discovery - u.tp_discovery), std::fabs(w.fp_discovery - u.fp_discovery));
    if (gap > 0.05) pass = false;
    detail << "edge " << ratio << ":" << fmt(gap) << " ";
  }
  detail << "strict=" << strict;
  return within({pass, detail.str()}, seconds_since(start), 300.0);
}

Outcome knowledge_trend() {
  auto start = Clock::now();
  sim::SimConfig cfg;
  auto m = means(sim::run_knowledge_sweep(cfg));
  std::vector<double> gaps;
  std::ostringstream detail;
  for (double l : cfg.lower_bounds) {
    double g = m.at({"", l, "weighted"}).tp_discovery - m.at({"", l, "unweighted"}).tp_discovery;
    gaps.push_back(g);
    detail << l << ":" << fmt(g) << " ";
  }
  auto at = [&](double l) {
    for (std::size_t i = 0; i < cfg.lower_bounds.size(); ++i) {
      if (std::fabs(cfg.lower_bounds[i] - l) < 1e-9) return gaps[i];
    }
    throw std::runtime_error("grid point missing");
  };
  int violations = 0;
  for (std::size_t i = 1; i < gaps.size(); ++i) violations += gaps[i] > gaps[i - 1] + 1e-12;
  bool pass = at(0.5) > at(0.95) && violations <= 1;
  detail << "violations=" << violations;
  return within({pass, detail.str()}, seconds_since(start), 300.0);
}

std::vector<sim::PrefillRow> prefill_rows;

Outcome prefill_peak() {
  auto start = Clock::now();
  sim::SimConfig cfg;
  prefill_rows = sim::run_prefill_sweep(cfg);
  std::map<double, double> total;
  for (const auto& r : prefill_rows) {
    if (!r.replicate && r.rule == "total") total[r.coverage] += r.count;
  }
  double best = -1, best_cov = -1;
  std::ostringstream detail;
  for (const auto& [c, v] : total) {
    if (v > best) best = v, best_cov = c;
    detail << c << ":" << fmt(v) << " ";
  }
  bool pass = best_cov >= 0.3 - 1e-9 && best_cov <= 0.8 + 1e-9 && total.at(0.0) == 0.0;
  detail << "peak at " << best_cov;
  return within({pass, detail.str()}, seconds_since(start), 120.0);
}

Outcome prefill_rules() {
  bool pass = true;
  std::ostringstream detail;
  double plain_disjoint = 0;
  double deep_min = INFINITY;
  for (const auto& r : prefill_rows) {
    if (r.replicate) continue;
    if (r.domain == "plain" && r.rule == "Disjointedness") plain_disjoint += r.count;
    if (r.domain == "deep" && r.rule == "SubsumptionNegativity" && r.coverage >= 0.3 - 1e-9) {
      deep_min = std::min(deep_min, r.count);
    }
  }
  if (plain_disjoint != 0.0 || !(deep_min > 0.0)) pass = false;
  detail << "plain Disjointedness total " << fmt(plain_disjoint) << ", deep min SubsumptionNegativity "
         << fmt(deep_min);
  return {pass, detail.str()};
}

Outcome correction_trend() {
  auto start = Clock::now();
  sim::SimConfig cfg;
  auto m = means(sim::run_correction_sweep(cfg, sim::CorrectionTarget::NonSeed));
  bool pass = true;
  std::ostringstream detail;
  for (const auto& [lo, hi] : cfg.spreads) {
    char spread[32];
    std::snprintf(spread, sizeof spread, "%.1f/%.1f", lo, hi);
    std::vector<double> x, y;
    for (double f : cfg.correction_fractions) {
      x.push_back(f);
      y.push_back(m.at({spread, f, "weighted"}).tp_discovery);
    }
    for (std::size_t i = 1; i < y.size(); ++i) {
      if (y[i] < y[i - 1] - 1e-12) pass = false;
    }
    double r2 = oracle::r_squared(x, y);
    if (r2 < 0.9) pass = false;
    detail << spread << " R2=" << fmt(r2) << " ";
  }
  return within({pass, detail.str()}, seconds_since(start), 300.0);
}

Outcome seed_correction_effect() {
  sim::SimConfig cfg;
  auto m = means(sim::run_correction_sweep(cfg, sim::CorrectionTarget::Seed));
  auto effect = [&](const char* spread) {
    return m.at({spread, 0.2, "weighted"}).tp_discovery - m.at({spread, 0.0, "weighted"}).tp_discovery;
  };
  double low = effect("0.5/0.5"), high = effect("0.1/0.9");
  return {low > high, "0.5/0.5: " + fmt(low) + ", 0.1/0.9: " + fmt(high)};
}

Outcome temporal_determinism() {
  Rng rng(1012);
  for (int i = 0; i < 200; ++i) {
    auto def = fixtures::random_task(rng, 1 + rng.uniform_index(8), rng.uniform_index(5), rng.bernoulli(0.8));
    TaskLedger ledger(def, 0.5 + 0.5 * rng.uniform01());
    auto events = fixtures::random_events(rng, def, 1 + rng.uniform_index(500), 1 + rng.uniform_index(6));
    for (const auto& e : events) ledger.recompute_after_revision(ledger.record_decision(e.user, e.pair, e.value, e.origin, e.at));
    auto all = ledger.log().events();
    if (auto d = oracle::compare_snapshots(ledger.live_snapshot(), ledger.decision_snapshot())) {
      return {false, "live state, sequence " + std::to_string(i) + ": " + *d};
    }
    for (int k = 0; k < 8; ++k) {
      Timestamp at = events[rng.uniform_index(events.size())].at + static_cast<Timestamp>(rng.uniform_index(3)) - 1;
      if (auto d = oracle::compare_snapshots(ledger.decision_snapshot(at),
                                             oracle::replay_snapshot(def, ledger.threshold(), all, at))) {
        return {false, "sequence " + std::to_string(i) + ": " + *d};
      }
    }
  }

  fixtures::TempDir dir;
  std::vector<std::string> before, stamps{""};
  std::string task_id, developer;
  {
    auto w = fixtures::World::build(fixtures::fixed_clock_config(dir.path()));
    task_id = w.task_id;
    developer = w.developer;
    json pairs = w.call("GET", "/tasks/" + task_id + "/pairs", w.developer, nullptr, 200);
    const char* values[] = {"Equivalent", "NotEquivalent", "N/A"};
    for (int k = 0; k < 40; ++k) {
      const json& p = pairs.at("pairs").at(rng.uniform_index(pairs.at("pairs").size()));
      const std::string& who = rng.bernoulli(0.5) ? w.annotator : w.annotator2;
      json ev = w.call("POST", "/tasks/" + task_id + "/pairs/" + p.at("pair_id").get<std::string>() + "/decision", who,
                       json{{"value", values[rng.uniform_index(3)]}}, 200);
      if (k % 8 == 0) stamps.push_back(ev.at("event").at("timestamp"));
    }
    for (const auto& s : stamps) {
      std::string q = s.empty() ? "" : "?as_of=" + s;
      before.push_back(w.call("GET", "/tasks/" + task_id + "/results" + q, developer, nullptr, 200).dump());
    }
  }
  Service again(fixtures::fixed_clock_config(dir.path()));
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    Request r{"GET", "/tasks/" + task_id + "/results", {}, developer, ""};
    if (!stamps[i].empty()) r.query["as_of"] = stamps[i];
    Response resp = again.handle(r);
    if (resp.status != 200 || resp.body.dump() != before[i]) return {false, "restart changed results at " + stamps[i]};
  }
  return {true, "200 sequences, " + std::to_string(stamps.size()) + " restart snapshots byte-identical"};
}

Outcome authorization_matrix() {
  auto w = fixtures::World::build();
  std::size_t probes = 0;
  for (const auto& c : fixtures::authorization_matrix(w)) {
    Request r;
    auto q = c.path.find('?');
    r.path = c.path.substr(0, q);
    if (q != std::string::npos) {
      auto rest = c.path.substr(q + 1);
      r.query[rest.substr(0, rest.find('='))] = rest.substr(rest.find('=') + 1);
    }
    r.method = c.method;
    r.token = c.token;
    if (!c.body.is_null()) r.body = c.body.dump();
    Response resp = w.service->handle(r);
    ++probes;
    if (resp.status != c.expect) {
      return {false, c.label + ": got " + std::to_string(resp.status) + ", want " + std::to_string(c.expect)};
    }
  }
  json pairs = w.call("GET", "/tasks/" + w.task_id + "/pairs", w.developer, nullptr, 200);
  for (const auto& p : pairs.at("pairs")) {
    for (const char* v : {"Equivalent", "NotEquivalent", "N/A"}) {
      Request r{"POST", "/tasks/" + w.task_id + "/pairs/" + p.at("pair_id").get<std::string>() + "/decision", {},
                w.developer, json{{"value", v}}.dump()};
      ++probes;
      if (w.service->handle(r).status != 403) return {false, "own-matcher annotation accepted"};
    }
  }
  return {true, std::to_string(probes) + " probes"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"agreement score exactness", agreement_exactness},
      {"trustworthiness exactness", trust_exactness},
      {"alignment diff oracle", diff_oracle},
      {"coherence inference oracle", coherence_oracle},
      {"seed balance", seed_balance},
      {"trust weighting trend", trust_trend},
      {"expert knowledge trend", knowledge_trend},
      {"pre-fill coverage peak", prefill_peak},
      {"pre-fill rule property", prefill_rules},
      {"non-seed correction trend", correction_trend},
      {"seed correction effect", seed_correction_effect},
      {"temporal determinism", temporal_determinism},
      {"authorization matrix", authorization_matrix},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << o.detail << ")" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
