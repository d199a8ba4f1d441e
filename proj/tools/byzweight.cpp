// byzweight: command-line front end.
//
//   byzweight tradeoff --weights FILE --alpha-star A [--out FILE]
//   byzweight certify  --weights FILE --k K --alpha A --alpha-star A --delta D --u U [--seed S]
//   byzweight bound    --config FILE --u U [--seed S]
//   byzweight simulate --config FILE [--out-dir DIR]
//
// Exit status: 0 success, 1 bound violated, 2 bad input, 3 empty or
// infeasible trade-off curve, 4 sample not certified.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "byzweight/byzweight.hpp"

namespace {

using namespace byzweight;

constexpr int kOk = 0;
constexpr int kBoundViolated = 1;
constexpr int kBadInput = 2;
constexpr int kNoCurve = 3;
constexpr int kNotCertified = 4;

std::string fixed(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

int cmd_tradeoff(const std::string& weights_file, const std::string& alpha_star_text,
                 const std::string& out_file) {
  const WeightVector weights = read_weights_file(weights_file);
  const Rational alpha_star = parse_rational(alpha_star_text);
  const TradeoffCurve curve = tradeoff_report(weights, alpha_star);
  if (curve.empty()) {
    std::cerr << "no alpha on the grid needs truncation to reach mwp <= " << alpha_star.str()
              << "; the curve is empty\n";
    return kNoCurve;
  }
  if (out_file.empty() || out_file == "-") {
    write_tradeoff_csv(std::cout, curve);
  } else {
    std::ofstream out(out_file, std::ios::binary);
    if (!out) fail(ErrorCode::ParseError, "cannot write " + out_file);
    write_tradeoff_csv(out, curve);
  }
  return kOk;
}

int cmd_certify(const std::string& weights_file, std::size_t k, const std::string& alpha,
                const std::string& alpha_star, double delta, std::optional<std::uint64_t> cap,
                std::uint64_t seed) {
  const WeightVector population = read_weights_file(weights_file);
  SampleCheckParams p;
  p.k = k;
  p.alpha = parse_rational(alpha);
  p.alpha_star = parse_rational(alpha_star);
  p.delta = delta;
  p.u = cap.value_or(population.max());
  p.validate();
  Rng rng = make_rng({seed, stream::kTrial});
  const auto sample = draw_sample(population, p.u, p.k, rng);
  const SampleCheckResult r = certify_sample(sample, p);
  write_certificate_csv(std::cout, r);
  return r.certified ? kOk : kNotCertified;
}

int cmd_bound(const std::string& config_file, std::uint64_t cap, std::uint64_t seed) {
  const ExperimentConfig cfg = load_experiment_config(config_file);
  const Scenario scenario = build_scenario(cfg, cfg.scenarios.front());
  std::vector<Dataset> shards;
  std::vector<std::uint64_t> declared;
  for (const auto& c : scenario.clients) {
    shards.push_back(c.data);
    declared.push_back(c.declared_size);
  }
  const ParamVector w = scenario.model.initial_params(seed);
  const ObjectiveGap gap = objective_gap_bound(scenario.model, w, shards, declared, cap);
  std::cout << "lhs,rhs\n" << fixed(gap.lhs) << ',' << fixed(gap.rhs) << '\n';
  return gap.lhs <= gap.rhs + 1e-9 ? kOk : kBoundViolated;
}

int cmd_simulate(const std::string& config_file, const std::string& out_dir) {
  const ExperimentConfig cfg = load_experiment_config(config_file);
  const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
  const auto cells = run_grid(cfg, dir);
  for (const auto& c : cells) {
    std::cerr << c.preprocess << ' ' << c.aggregator << ' ' << c.attack << ": ";
    if (c.infeasible) std::cerr << "infeasible preprocessing\n";
    else if (c.diverged()) std::cerr << "diverged at round " << c.metrics.back().round << '\n';
    else std::cerr << "final accuracy " << fixed(c.final_accuracy()) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample-size preprocessing and robust aggregation for federated learning"};
  app.require_subcommand(1);

  std::string weights, alpha = "1/10", alpha_star = "1/2", out, config, out_dir;
  double delta = 0.05;
  std::size_t k = 1000;
  std::optional<std::uint64_t> cap;
  std::uint64_t seed = 1;

  auto* tradeoff = app.add_subcommand("tradeoff", "Report (alpha, U*) pairs for a weights file");
  tradeoff->add_option("--weights", weights, "One sample size per line, # comments allowed")->required();
  tradeoff->add_option("--alpha-star", alpha_star, "Largest admissible top-alpha weight share");
  tradeoff->add_option("--out", out, "Output CSV (default stdout)");

  auto* certify = app.add_subcommand("certify", "Check the constraint from a random sample of k clients");
  certify->add_option("--weights", weights, "Population sample sizes")->required();
  certify->add_option("--k", k, "Sample size")->check(CLI::PositiveNumber);
  certify->add_option("--alpha", alpha, "Top fraction");
  certify->add_option("--alpha-star", alpha_star, "Admissible weight share");
  certify->add_option("--delta", delta, "Failure probability");
  certify->add_option("--u", cap, "Truncation bound (default: largest weight)");
  certify->add_option("--seed", seed, "Sampling seed");

  auto* bound = app.add_subcommand("bound", "Evaluate the truncation objective-gap bound at a random w");
  bound->add_option("--config", config, "Experiment config")->required();
  bound->add_option("--u", cap, "Truncation bound")->required();
  bound->add_option("--seed", seed, "Seed for w");

  auto* simulate = app.add_subcommand("simulate", "Run the experiment grid of a config");
  simulate->add_option("--config", config, "Experiment config")->required();
  simulate->add_option("--out-dir", out_dir, "Output directory (default: run.out_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*tradeoff) return cmd_tradeoff(weights, alpha_star, out);
    if (*certify) return cmd_certify(weights, k, alpha, alpha_star, delta, cap, seed);
    if (*bound) return cmd_bound(config, *cap, seed);
    if (*simulate) return cmd_simulate(config, out_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  }
  return kBadInput;
}
