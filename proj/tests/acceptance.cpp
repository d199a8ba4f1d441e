// Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "byzweight/byzweight.hpp"
#include "gradient_check.hpp"
#include "oracles.hpp"

namespace bw = byzweight;
namespace fs = std::filesystem;
using bw::Rational;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

std::vector<std::uint64_t> random_vector(std::mt19937_64& rng, std::size_t max_k, std::uint64_t max_value) {
  std::uniform_int_distribution<std::size_t> len(1, max_k);
  std::uniform_int_distribution<std::uint64_t> val(1, max_value);
  std::vector<std::uint64_t> v(len(rng));
  for (auto& x : v) x = val(rng);
  return v;
}

// ---------------------------------------------------------------- 1
Verdict u_star_oracle() {
  std::mt19937_64 rng(20240101);
  const auto t0 = Clock::now();
  int mismatches = 0, solved = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto values = random_vector(rng, 50, 1'000'000);
    const long long k = static_cast<long long>(values.size());
    const long long j = std::uniform_int_distribution<long long>(1, k)(rng);
    const long long a_num = trial % 2 == 0 ? 3 : 5;
    const bw::TruncationQuery q{Rational(j, k), Rational(a_num, 10)};
    const auto got = bw::solve_u_star(bw::WeightVector(values), q);
    const auto want = oracle::scan_u_star(values, j, k, a_num, 10);
    const bool same = static_cast<int>(got.status) == static_cast<int>(want.kind) && got.u_star == want.u_star;
    if (!same) ++mismatches;
    if (got.solved()) ++solved;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10,
          fmt("1000 instances, %d mismatches, %d solved, %.2f s", mismatches, solved, secs)};
}

// ---------------------------------------------------------------- 2
Verdict monotonicity() {
  std::mt19937_64 rng(77);
  long long mwp_violations = 0, curve_violations = 0, checks = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const bw::WeightVector v(random_vector(rng, 20, 200));
    const long long k = static_cast<long long>(v.size());
    for (long long j = 1; j <= k; ++j) {
      Rational prev(-1);
      for (std::uint64_t cap = 1; cap <= v.max(); ++cap) {
        Rational cur = bw::mwp(bw::truncate(v, cap), Rational(j, k));
        if (cur < prev) ++mwp_violations;
        prev = cur;
        ++checks;
      }
    }
    for (const Rational& astar : {Rational(3, 10), Rational(1, 2)}) {
      const auto curve = bw::tradeoff_report(v, astar);
      for (std::size_t i = 1; i < curve.size(); ++i)
        if (!(curve[i].alpha < curve[i - 1].alpha) || curve[i].u_star < curve[i - 1].u_star) ++curve_violations;
    }
  }
  return {mwp_violations == 0 && curve_violations == 0,
          fmt("200 vectors, %lld mwp checks, %lld mwp violations, %lld curve violations", checks,
              mwp_violations, curve_violations)};
}

// ---------------------------------------------------------------- 3
// Alternatives: every nonzero integer vector v' with 0 <= v'_i <= v_i that
// meets the constraint.
Verdict l1_optimality() {
  std::mt19937_64 rng(5150);
  long long beaten = 0, queries = 0, alternatives = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 2 + trial % 4;  // 2..5
    std::vector<std::uint64_t> values(k);
    for (auto& x : values) x = std::uniform_int_distribution<std::uint64_t>(1, 12)(rng);
    const bw::WeightVector v(values);
    const std::vector<std::uint64_t> sorted(v.values().begin(), v.values().end());

    struct Query {
      long long j, a_num;
      std::uint64_t best;
    };
    std::vector<Query> qs;
    for (long long j = 1; j <= static_cast<long long>(k); ++j)
      for (long long a_num : {3, 5}) {
        const auto out = bw::solve_u_star(v, {Rational(j, static_cast<long long>(k)), Rational(a_num, 10)});
        if (!out.solved()) continue;
        const auto t = bw::truncate(v, out.u_star);
        std::uint64_t dist = 0;
        for (std::size_t i = 0; i < k; ++i) dist += sorted[i] - t[i];
        qs.push_back({j, a_num, dist});
      }
    if (qs.empty()) continue;
    queries += static_cast<long long>(qs.size());

    std::vector<std::uint64_t> alt(k, 0);
    for (;;) {
      std::uint64_t dist = 0;
      bool positive = false;
      for (std::size_t i = 0; i < k; ++i) {
        dist += sorted[i] - alt[i];
        positive = positive || alt[i] > 0;
      }
      if (positive) {
        ++alternatives;
        std::vector<std::uint64_t> alt_sorted = alt;
        std::sort(alt_sorted.begin(), alt_sorted.end());
        for (const auto& q : qs)
          if (dist < q.best && oracle::mwp_at_most(alt_sorted, q.j, static_cast<long long>(k), q.a_num, 10))
            ++beaten;
      }
      std::size_t pos = 0;
      while (pos < k && alt[pos] == sorted[pos]) alt[pos++] = 0;
      if (pos == k) break;
      ++alt[pos];
    }
  }
  return {beaten == 0 && queries > 0,
          fmt("%lld solved queries, %lld alternatives enumerated, beaten %lld times", queries, alternatives,
              beaten)};
}

// ---------------------------------------------------------------- 4
Verdict certificate_soundness() {
  const auto t0 = Clock::now();
  struct Population {
    std::string name;
    bw::WeightVector weights;
    Rational alpha, alpha_star;
    std::uint64_t cap;
  };
  std::vector<Population> pops;
  {
    std::vector<std::uint64_t> v;
    for (int i = 0; i < 100; ++i) {
      v.push_back(9);
      v.push_back(10);
    }
    pops.push_back({"9/10 split", bw::WeightVector(v), Rational(1, 2), Rational(1, 2), 10});
  }
  {
    auto v = bw::generate_partition({20000, 100, 1.5, 3.45, 1});
    const Rational alpha(1, 4), alpha_star(1, 2);
    const auto out = bw::solve_u_star(v, {alpha, alpha_star});
    pops.push_back({"lognormal, U*+1", v, alpha, alpha_star, out.u_star + 1});
  }

  bool ok = true;
  std::string detail;
  for (const auto& pop : pops) {
    const bool violated = bw::mwp(bw::truncate(pop.weights, pop.cap), pop.alpha) > pop.alpha_star;
    ok = ok && violated;  // a population meeting the constraint cannot expose false certificates
    for (double delta : {0.05, 0.1})
      for (std::size_t k : {200u, 1000u}) {
        bw::SampleCheckParams p{k, pop.alpha, pop.alpha_star, delta, pop.cap, bw::LogTerm::Single};
        const double rate = bw::monte_carlo_validate(pop.weights, p, 2000, 99);
        ok = ok && rate <= delta;
        detail += fmt(" [%s d=%.2f k=%zu rate=%.4f]", pop.name.c_str(), delta, k, rate);
      }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60;
  return {ok, fmt("2000 trials per setting, %.1f s;", secs) + detail};
}

// ---------------------------------------------------------------- 5
Verdict gap_bound() {
  std::mt19937_64 rng(4242);
  int violations = 0, nonzero_at_cap = 0;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t clients = std::uniform_int_distribution<std::size_t>(2, 12)(rng);
    const std::uint64_t n = 30 * clients;
    const bw::ModelSpec spec(bw::SoftmaxRegression{4, 3});
    const auto ds = bw::generate_synthetic_dataset(n, 4, 3, 1000 + trial, 2.0);
    const auto sizes = bw::generate_partition({n, clients, 1.5, 3.45, 2000u + trial});
    const auto shards = bw::partition_dataset(ds, sizes, 3000 + trial);
    std::vector<std::uint64_t> declared(sizes.values().begin(), sizes.values().end());
    const std::size_t liars = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
    for (std::size_t l = 0; l < liars; ++l)
      declared[std::uniform_int_distribution<std::size_t>(0, clients - 1)(rng)] *= 1000;
    const auto w = gradcheck::random_params(spec.param_count(), rng, 0.5);
    const std::uint64_t top = *std::max_element(declared.begin(), declared.end());
    const std::uint64_t cap = std::uniform_int_distribution<std::uint64_t>(1, top)(rng);

    const auto gap = bw::objective_gap_bound(spec, w, shards, declared, cap);
    if (gap.lhs > gap.rhs + 1e-9) {
      ++violations;
      worst = std::max(worst, gap.lhs - gap.rhs);
    }
    const auto at_top = bw::objective_gap_bound(spec, w, shards, declared, top);
    if (at_top.lhs != 0 || at_top.rhs != 0) ++nonzero_at_cap;
  }
  return {violations == 0 && nonzero_at_cap == 0,
          fmt("100 instances, %d with lhs > rhs + 1e-9 (worst excess %.4g), %d nonzero at U >= max", violations,
              worst, nonzero_at_cap)};
}

// ---------------------------------------------------------------- 6
Verdict gradients() {
  std::mt19937_64 rng(606);
  double worst_soft = 0, worst_mlp = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto ds = bw::generate_synthetic_dataset(8, 5, 4, 100 + trial, 2.0);
    const bw::ModelSpec spec(bw::SoftmaxRegression{5, 4});
    const auto w = gradcheck::random_params(spec.param_count(), rng, 0.5);
    worst_soft = std::max(worst_soft, gradcheck::max_fd_error(spec, w, ds, std::nullopt));
  }
  const bw::OneHiddenMlp shape{5, 8, 4, 0.2};
  const bw::ModelSpec mlp(shape);
  int done = 0, skipped = 0;
  for (int attempt = 0; done < 50 && attempt < 1000; ++attempt) {
    const auto ds = bw::generate_synthetic_dataset(6, 5, 4, 500 + attempt, 2.0);
    const auto w = gradcheck::random_params(mlp.param_count(), rng, 0.7);
    if (gradcheck::min_abs_preactivation(shape, w, ds) < 1e-3) {
      ++skipped;
      continue;
    }
    worst_mlp = std::max(worst_mlp, gradcheck::max_fd_error(mlp, w, ds, 9000u + attempt));
    ++done;
  }
  return {worst_soft <= 1e-5 && worst_mlp <= 1e-5 && done == 50,
          fmt("worst relative error softmax %.3g, mlp %.3g (50 each, %d mlp draws skipped at ReLU kinks)",
              worst_soft, worst_mlp, skipped)};
}

// ---------------------------------------------------------------- 7
Verdict aggregator_reductions() {
  std::mt19937_64 rng(7007);
  std::uniform_real_distribution<double> val(-50, 50);
  double worst_median = 0, worst_trimmed = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 21)(rng);
    const std::size_t dim = 3;
    std::vector<bw::ParamVector> ups(n, bw::ParamVector(dim));
    for (auto& u : ups)
      for (double& x : u) x = std::round(val(rng) * 2) / 2;
    const std::vector<double> weights(n, 1.0);
    const std::size_t trim = std::uniform_int_distribution<std::size_t>(0, (n - 1) / 2)(rng);
    const double beta = static_cast<double>(trim) / static_cast<double>(n);
    const auto med = bw::aggregate_weighted_median(ups, weights);
    const auto tm = bw::aggregate_trimmed_mean(ups, weights, beta);
    for (std::size_t j = 0; j < dim; ++j) {
      std::vector<double> col;
      for (const auto& u : ups) col.push_back(u[j]);
      worst_median = std::max(worst_median, std::abs(med[j] - oracle::lower_median(col)));
      worst_trimmed = std::max(worst_trimmed, std::abs(tm[j] - oracle::trimmed_mean(col, trim)));
    }
  }
  return {worst_median <= 1e-12 && worst_trimmed <= 1e-12,
          fmt("500 instances, max |median - classic| %.3g, max |trimmed - classic| %.3g", worst_median,
              worst_trimmed)};
}

// ---------------------------------------------------------------- 8-10
struct GridRuns {
  bw::ExperimentConfig cfg;
  std::map<std::string, double> final_accuracy;  // key: attack/preprocess/aggregator
  double no_attack_seconds = 0;

  double at(const std::string& attack, const std::string& mode, const std::string& agg) const {
    return final_accuracy.at(attack + "/" + mode + "/" + agg);
  }

  void run(const std::string& attack_name, const std::vector<std::pair<std::string, std::string>>& cells) {
    const auto attack = bw::config_detail::parse_scenario(attack_name);
    const auto scenario = bw::build_scenario(cfg, attack);
    for (const auto& [mode, agg] : cells) {
      const auto cell = bw::run_cell(cfg, scenario, attack, mode, agg);
      const double acc = cell.metrics.size() == cfg.rounds ? cell.final_accuracy() : 0.0;
      final_accuracy[attack_name + "/" + mode + "/" + agg] = acc;
      std::cout << "    " << attack_name << ' ' << mode << ' ' << agg << ": final accuracy " << acc
                << (cell.diverged() ? " (diverged)" : "") << (cell.infeasible ? " (infeasible)" : "") << std::endl;
    }
  }
};

const std::vector<std::string> kAggregators{"mean", "median", "trimmed"};

Verdict no_attack(GridRuns& g) {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, std::string>> cells;
  for (const auto& mode : {"passthrough", "ignore", "truncate"})
    for (const auto& agg : kAggregators) cells.emplace_back(mode, agg);
  g.run("none", cells);
  g.no_attack_seconds = seconds_since(t0);

  bool ok = g.no_attack_seconds < 300;
  std::string detail;
  for (const auto& agg : kAggregators) {
    const double diff = std::abs(g.at("none", "truncate", agg) - g.at("none", "passthrough", agg));
    ok = ok && diff <= 0.02;
    detail += fmt("|truncate-passthrough| %s %.4f; ", agg.c_str(), diff);
  }
  const double median_drop = g.at("none", "passthrough", "median") - g.at("none", "ignore", "median");
  ok = ok && median_drop >= 0.03;
  detail += fmt("weighted median - ignore median %.4f; %.0f s", median_drop, g.no_attack_seconds);
  return {ok, detail};
}

Verdict single_attacker(GridRuns& g) {
  g.run("negation-single", {{"passthrough", "mean"},
                            {"passthrough", "median"},
                            {"passthrough", "trimmed"},
                            {"truncate", "median"},
                            {"truncate", "trimmed"}});
  const double chance = 1.0 / static_cast<double>(g.cfg.classes);
  bool ok = true;
  std::string detail;
  for (const auto& agg : kAggregators) {
    const double acc = g.at("negation-single", "passthrough", agg);
    ok = ok && acc <= chance + 0.05;
    detail += fmt("passthrough %s %.4f; ", agg.c_str(), acc);
  }
  for (const auto& agg : {"median", "trimmed"}) {
    const double diff = std::abs(g.at("negation-single", "truncate", agg) - g.at("none", "truncate", agg));
    ok = ok && diff <= 0.05;
    detail += fmt("truncate %s off baseline by %.4f; ", agg, diff);
  }
  return {ok, detail};
}

Verdict attacker_fraction(GridRuns& g) {
  const double chance = 1.0 / static_cast<double>(g.cfg.classes);
  bool ok = true;
  std::string detail;
  for (const auto& attack : {"negation-fraction", "label_shift-fraction"}) {
    g.run(attack, {{"truncate", "median"}, {"truncate", "trimmed"}, {"passthrough", "mean"}});
    for (const auto& agg : {"median", "trimmed"}) {
      const double diff = std::abs(g.at(attack, "truncate", agg) - g.at("none", "truncate", agg));
      ok = ok && diff <= 0.05;
      detail += fmt("%s truncate %s off baseline by %.4f; ", attack, agg, diff);
    }
    const double acc = g.at(attack, "passthrough", "mean");
    ok = ok && acc <= chance + 0.05;
    detail += fmt("%s passthrough mean %.4f; ", attack, acc);
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- 11
std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    files[entry.path().filename().string()] = body.str();
  }
  return files;
}

Verdict determinism(const fs::path& cli, const fs::path& config) {
  const fs::path root = fs::temp_directory_path() / ("byzweight_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);

  auto cfg = bw::load_experiment_config(config);
  std::vector<fs::path> configs;
  for (unsigned threads : {1u, 4u}) {
    cfg.threads = threads;
    configs.push_back(root / ("config_t" + std::to_string(threads) + ".ini"));
    std::ofstream(configs.back(), std::ios::binary) << bw::serialize_experiment_config(cfg);
  }
  struct Run {
    fs::path config, out;
  };
  const std::vector<Run> runs{{configs[0], root / "a"}, {configs[0], root / "b"}, {configs[1], root / "c"},
                              {configs[1], root / "d"}};
  for (const auto& r : runs) {
    const std::string cmd = "\"" + cli.string() + "\" simulate --config \"" + r.config.string() + "\" --out-dir \"" +
                            r.out.string() + "\" 2>/dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "simulate exited nonzero: " + cmd};
  }
  const auto reference = read_dir(runs[0].out);
  bool ok = reference.size() == 1 + cfg.scenarios.size() * cfg.modes.size() * cfg.aggregators.size();
  for (std::size_t i = 1; i < runs.size(); ++i) ok = ok && read_dir(runs[i].out) == reference;
  fs::remove_all(root);
  return {ok, fmt("%zu files per run, 4 runs (2 sequential, 2 with 4 threads) %s", reference.size(),
                  ok ? "byte-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 4) {
    std::cerr << "usage: acceptance <byzweight-cli> <desk-grid.ini> <smoke.ini>\n";
    return 2;
  }
  const fs::path cli = argv[1], desk = argv[2], smoke = argv[3];

  int failures = 0;
  auto report = [&](int id, const char* title, const std::function<Verdict()>& check) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << " -- " << v.detail
              << fmt(" (%.1f s)", seconds_since(t0)) << std::endl;
  };

  report(1, "U* matches exhaustive scan", u_star_oracle);
  report(2, "mwp and trade-off curve monotonicity", monotonicity);
  report(3, "truncation is L1-optimal", l1_optimality);
  report(4, "sample certificate false-certification rate <= delta", certificate_soundness);
  report(5, "objective-gap bound holds", gap_bound);
  report(6, "gradients match finite differences", gradients);
  report(7, "weighted aggregators reduce to classic estimators", aggregator_reductions);

  GridRuns grid{bw::load_experiment_config(desk), {}, 0};
  report(8, "no attack: truncation tracks weighted baseline", [&] { return no_attack(grid); });
  report(9, "single inflated negation attacker", [&] { return single_attacker(grid); });
  report(10, "10% inflated attackers", [&] { return attacker_fraction(grid); });
  report(11, "simulate output is byte-identical across runs and thread counts",
         [&] { return determinism(cli, smoke); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
