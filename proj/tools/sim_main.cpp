#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "crowdval/error.hpp"
#include "crowdval/sim.hpp"

using namespace crowdval;

int main(int argc, char** argv) {
  CLI::App app{"Simulation sweeps over synthetic ontology-matching domains"};
  app.require_subcommand(1);

  std::string config_path, out_path, target = "non-seed";
  std::uint64_t seed = 42;
  std::size_t annotators = 100, replicates = 20;
  double threshold = 0.5;

  std::vector<CLI::App*> subs;
  for (const char* name : {"trust-sweep", "knowledge-sweep", "prefill-sweep", "correction-sweep"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON file mirroring the simulation config");
    sub->add_option("--out", out_path, "CSV output path")->required();
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--annotators", annotators, "simulated annotators");
    sub->add_option("--threshold", threshold, "acceptance threshold");
    sub->add_option("--replicates", replicates, "independent replicates");
    if (std::string(name) == "correction-sweep") {
      sub->add_option("--target", target, "seed or non-seed")->check(CLI::IsMember({"seed", "non-seed"}));
    }
    subs.push_back(sub);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorCode::IoError, "cannot read " + config_path);
      j = nlohmann::json::parse(in);
    }
    // Command-line values override the config file only when given.
    auto* sub = app.get_subcommands().front();
    if (sub->count("--seed")) j["rng_seed"] = seed;
    if (sub->count("--annotators")) j["annotator_count"] = annotators;
    if (sub->count("--threshold")) j["threshold"] = threshold;
    if (sub->count("--replicates")) j["replicates"] = replicates;
    sim::SimConfig cfg = sim::config_from_json(j);

    const std::string name = sub->get_name();
    if (name == "trust-sweep") {
      sim::emit_csv(sim::run_trust_sweep(cfg), out_path);
    } else if (name == "knowledge-sweep") {
      sim::emit_csv(sim::run_knowledge_sweep(cfg), out_path);
    } else if (name == "prefill-sweep") {
      sim::emit_csv(sim::run_prefill_sweep(cfg), out_path);
    } else {
      auto t = sub->count("--target") ? sim::correction_target_from_string(target) : cfg.target;
      sim::emit_csv(sim::run_correction_sweep(cfg, t), out_path);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
