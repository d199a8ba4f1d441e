#pragma once

// Experiment configuration (INI text), scenario construction and the grid
// runner behind `byzweight simulate`.
//
// Sections and keys (defaults in parentheses):
//   [task]        dim (20) classes (10) n_train (20000) n_test (2000) clients (100)
//                 mu (1.5) sigma (3.45) separation (3) model (mlp|softmax, mlp)
//                 hidden (64) dropout (0.2)
//   [attack]      scenarios (none) fraction (0.1) declared_single (10000000)
//                 declared_fraction (1000000)
//   [training]    rounds (100) participation (1.0) eta (0.05) epochs (1)
//                 batch_size (10) honest_use_all_samples (true)
//   [preprocess]  modes (passthrough,ignore,truncate) alpha (1/10) alpha_star (1/2)
//   [aggregator]  kinds (mean,median,trimmed) beta (0.1)
//   [seeds]       data (1) training (1)
//   [run]         out_dir (out) threads (1)
// Scenario names are `none` or `<negation|label_shift>-<single|fraction>`.
// Participation with a decimal point or exponent is a fraction of the
// clients, otherwise a count.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "byzweight/aggregate.hpp"
#include "byzweight/dataset.hpp"
#include "byzweight/model.hpp"
#include "byzweight/rational.hpp"
#include "byzweight/rng.hpp"
#include "byzweight/simulation.hpp"
#include "byzweight/weights.hpp"

namespace byzweight {

struct AttackScenario {
  Behavior kind = Behavior::Honest;  // Honest means no attackers
  bool single = true;

  std::string name() const {
    if (kind == Behavior::Honest) return "none";
    return behavior_name(kind) + (single ? "-single" : "-fraction");
  }
  friend bool operator==(const AttackScenario&, const AttackScenario&) = default;
};

struct ExperimentConfig {
  // task
  std::size_t dim = 20;
  std::size_t classes = 10;
  std::uint64_t n_train = 20000;
  std::size_t n_test = 2000;
  std::size_t clients = 100;
  double mu = 1.5;
  double sigma = 3.45;
  double separation = kDefaultSeparation;
  std::string model = "mlp";
  std::size_t hidden = 64;
  double dropout = 0.2;
  // attack
  std::vector<AttackScenario> scenarios{AttackScenario{}};
  double attacker_fraction = 0.1;
  std::uint64_t declared_single = 10'000'000;
  std::uint64_t declared_fraction = 1'000'000;
  // training
  std::size_t rounds = 100;
  Participation participation = 1.0;
  double eta = 0.05;
  std::size_t epochs = 1;
  std::size_t batch_size = 10;
  bool honest_use_all_samples = true;
  // preprocess
  std::vector<std::string> modes{"passthrough", "ignore", "truncate"};
  Rational alpha{1, 10};
  Rational alpha_star{1, 2};
  // aggregator
  std::vector<std::string> aggregators{"mean", "median", "trimmed"};
  double beta = 0.1;
  // seeds
  std::uint64_t data_seed = 1;
  std::uint64_t training_seed = 1;
  // run
  std::string out_dir = "out";
  unsigned threads = 1;

  ModelSpec model_spec() const {
    if (model == "softmax") return SoftmaxRegression{dim, classes};
    return OneHiddenMlp{dim, hidden, classes, dropout};
  }

  PreprocessMode preprocess_mode(const std::string& name) const {
    if (name == "passthrough") return Passthrough{};
    if (name == "ignore") return IgnoreWeights{};
    if (name == "truncate") return Truncate{TruncationQuery{alpha, alpha_star}};
    fail(ErrorCode::ParseError, "unknown preprocess mode '" + name + "'");
  }

  AggregatorKind aggregator(const std::string& name) const {
    if (name == "mean") return WeightedMean{};
    if (name == "median") return WeightedMedian{};
    if (name == "trimmed") return TrimmedMean{beta};
    fail(ErrorCode::ParseError, "unknown aggregator '" + name + "'");
  }

  TrainConfig train_config(const std::string& mode, const std::string& agg) const {
    TrainConfig t;
    t.rounds = rounds;
    t.participation = participation;
    t.eta = eta;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.preprocess_mode = preprocess_mode(mode);
    t.aggregator = aggregator(agg);
    t.honest_use_all_samples = honest_use_all_samples;
    t.master_seed = training_seed;
    t.threads = threads;
    return t;
  }

  void validate() const {
    auto check = [](bool ok, const std::string& what) {
      if (!ok) fail(ErrorCode::ParseError, what);
    };
    check(dim >= 1 && classes >= 2, "task needs dim >= 1 and classes >= 2");
    check(clients >= 1 && n_train >= clients, "n_train must give every client a sample");
    check(n_test >= 1, "n_test must be positive");
    check(sigma >= 0 && std::isfinite(mu) && std::isfinite(sigma), "bad lognormal parameters");
    check(separation > 0, "separation must be positive");
    check(model == "mlp" || model == "softmax", "model must be mlp or softmax");
    check(hidden >= 1 && dropout >= 0 && dropout < 1, "bad mlp shape");
    check(!scenarios.empty(), "no attack scenarios");
    check(attacker_fraction > 0 && attacker_fraction <= 1, "attack fraction must lie in (0, 1]");
    check(!modes.empty() && !aggregators.empty(), "empty grid");
    for (const auto& m : modes) preprocess_mode(m);
    for (const auto& a : aggregators) aggregator(a);
    check(alpha > 0 && alpha <= 1 && alpha_star > 0 && alpha_star <= 1, "alpha and alpha_star must lie in (0, 1]");
    check(beta >= 0 && 2 * beta < 1, "beta must lie in [0, 1/2)");
    check(threads >= 1, "threads must be >= 1");
    try {
      clients_per_round(participation, clients);
      train_config(modes.front(), aggregators.front()).validate();
    } catch (const Error& e) {
      fail(ErrorCode::ParseError, e.what());
    }
  }

  std::size_t attacker_count(const AttackScenario& s) const {
    if (s.kind == Behavior::Honest) return 0;
    if (s.single) return 1;
    auto n = static_cast<std::size_t>(std::llround(attacker_fraction * static_cast<double>(clients)));
    return std::clamp<std::size_t>(n, 1, clients);
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const std::string t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
    fail(ErrorCode::ParseError, "bad value for " + key + ": '" + text + "'");
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  fail(ErrorCode::ParseError, "bad boolean for " + key + ": '" + text + "'");
}

inline std::string format_double(double x) {
  std::string s;
  detail::append_number(s, x);
  return s;
}

inline AttackScenario parse_scenario(const std::string& name) {
  if (name == "none") return {};
  const auto dash = name.rfind('-');
  if (dash != std::string::npos) {
    const std::string kind = name.substr(0, dash), count = name.substr(dash + 1);
    AttackScenario s;
    if (kind == "negation") s.kind = Behavior::ModelNegation;
    else if (kind == "label_shift") s.kind = Behavior::LabelShift;
    if (s.kind != Behavior::Honest && (count == "single" || count == "fraction")) {
      s.single = count == "single";
      return s;
    }
  }
  fail(ErrorCode::ParseError, "unknown attack scenario '" + name + "'");
}

}  // namespace config_detail

inline ExperimentConfig parse_experiment_config(std::istream& in) {
  namespace pt = boost::property_tree;
  using namespace config_detail;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::ParseError, e.what());
  }

  ExperimentConfig cfg;
  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  const std::map<std::string, std::map<std::string, Setter>> schema{
      {"task",
       {{"dim", [&](auto& k, auto& v) { cfg.dim = parse_number<std::size_t>(k, v); }},
        {"classes", [&](auto& k, auto& v) { cfg.classes = parse_number<std::size_t>(k, v); }},
        {"n_train", [&](auto& k, auto& v) { cfg.n_train = parse_number<std::uint64_t>(k, v); }},
        {"n_test", [&](auto& k, auto& v) { cfg.n_test = parse_number<std::size_t>(k, v); }},
        {"clients", [&](auto& k, auto& v) { cfg.clients = parse_number<std::size_t>(k, v); }},
        {"mu", [&](auto& k, auto& v) { cfg.mu = parse_number<double>(k, v); }},
        {"sigma", [&](auto& k, auto& v) { cfg.sigma = parse_number<double>(k, v); }},
        {"separation", [&](auto& k, auto& v) { cfg.separation = parse_number<double>(k, v); }},
        {"model", [&](auto&, auto& v) { cfg.model = trim(v); }},
        {"hidden", [&](auto& k, auto& v) { cfg.hidden = parse_number<std::size_t>(k, v); }},
        {"dropout", [&](auto& k, auto& v) { cfg.dropout = parse_number<double>(k, v); }}}},
      {"attack",
       {{"scenarios",
         [&](auto&, auto& v) {
           cfg.scenarios.clear();
           for (const auto& s : split_list(v)) cfg.scenarios.push_back(parse_scenario(s));
         }},
        {"fraction", [&](auto& k, auto& v) { cfg.attacker_fraction = parse_number<double>(k, v); }},
        {"declared_single", [&](auto& k, auto& v) { cfg.declared_single = parse_number<std::uint64_t>(k, v); }},
        {"declared_fraction",
         [&](auto& k, auto& v) { cfg.declared_fraction = parse_number<std::uint64_t>(k, v); }}}},
      {"training",
       {{"rounds", [&](auto& k, auto& v) { cfg.rounds = parse_number<std::size_t>(k, v); }},
        {"participation",
         [&](auto& k, auto& v) {
           const std::string t = trim(v);
           if (t.find_first_of(".eE") != std::string::npos) cfg.participation = parse_number<double>(k, t);
           else cfg.participation = parse_number<std::size_t>(k, t);
         }},
        {"eta", [&](auto& k, auto& v) { cfg.eta = parse_number<double>(k, v); }},
        {"epochs", [&](auto& k, auto& v) { cfg.epochs = parse_number<std::size_t>(k, v); }},
        {"batch_size", [&](auto& k, auto& v) { cfg.batch_size = parse_number<std::size_t>(k, v); }},
        {"honest_use_all_samples", [&](auto& k, auto& v) { cfg.honest_use_all_samples = parse_bool(k, v); }}}},
      {"preprocess",
       {{"modes", [&](auto&, auto& v) { cfg.modes = split_list(v); }},
        {"alpha", [&](auto&, auto& v) { cfg.alpha = parse_rational(v); }},
        {"alpha_star", [&](auto&, auto& v) { cfg.alpha_star = parse_rational(v); }}}},
      {"aggregator",
       {{"kinds", [&](auto&, auto& v) { cfg.aggregators = split_list(v); }},
        {"beta", [&](auto& k, auto& v) { cfg.beta = parse_number<double>(k, v); }}}},
      {"seeds",
       {{"data", [&](auto& k, auto& v) { cfg.data_seed = parse_number<std::uint64_t>(k, v); }},
        {"training", [&](auto& k, auto& v) { cfg.training_seed = parse_number<std::uint64_t>(k, v); }}}},
      {"run",
       {{"out_dir", [&](auto&, auto& v) { cfg.out_dir = trim(v); }},
        {"threads", [&](auto& k, auto& v) { cfg.threads = parse_number<unsigned>(k, v); }}}},
  };

  for (const auto& [section, body] : tree) {
    auto sec = schema.find(section);
    if (sec == schema.end()) {
      if (body.empty()) fail(ErrorCode::ParseError, "key outside any section: '" + section + "'");
      fail(ErrorCode::ParseError, "unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      auto setter = sec->second.find(key);
      if (setter == sec->second.end())
        fail(ErrorCode::ParseError, "unknown key '" + key + "' in [" + section + "]");
      setter->second(section + "." + key, node.data());
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open config " + path.string());
  return parse_experiment_config(in);
}

// Canonical text form; every field is written, so parsing it back gives
// the same configuration.
inline std::string serialize_experiment_config(const ExperimentConfig& cfg) {
  using namespace config_detail;
  std::vector<std::string> scenarios;
  for (const auto& s : cfg.scenarios) scenarios.push_back(s.name());
  std::string participation = std::visit(
      [](auto v) -> std::string {
        if constexpr (std::is_same_v<decltype(v), double>) {
          std::string s = format_double(v);
          if (s.find_first_of(".eE") == std::string::npos) s += ".0";
          return s;
        } else {
          return std::to_string(v);
        }
      },
      cfg.participation);
  std::ostringstream out;
  out << "[task]\n"
      << "dim=" << cfg.dim << "\nclasses=" << cfg.classes << "\nn_train=" << cfg.n_train
      << "\nn_test=" << cfg.n_test << "\nclients=" << cfg.clients << "\nmu=" << format_double(cfg.mu)
      << "\nsigma=" << format_double(cfg.sigma) << "\nseparation=" << format_double(cfg.separation)
      << "\nmodel=" << cfg.model << "\nhidden=" << cfg.hidden << "\ndropout=" << format_double(cfg.dropout)
      << "\n\n[attack]\n"
      << "scenarios=" << join(scenarios) << "\nfraction=" << format_double(cfg.attacker_fraction)
      << "\ndeclared_single=" << cfg.declared_single << "\ndeclared_fraction=" << cfg.declared_fraction
      << "\n\n[training]\n"
      << "rounds=" << cfg.rounds << "\nparticipation=" << participation << "\neta=" << format_double(cfg.eta)
      << "\nepochs=" << cfg.epochs << "\nbatch_size=" << cfg.batch_size
      << "\nhonest_use_all_samples=" << (cfg.honest_use_all_samples ? "true" : "false")
      << "\n\n[preprocess]\n"
      << "modes=" << join(cfg.modes) << "\nalpha=" << cfg.alpha.str() << "\nalpha_star=" << cfg.alpha_star.str()
      << "\n\n[aggregator]\n"
      << "kinds=" << join(cfg.aggregators) << "\nbeta=" << format_double(cfg.beta) << "\n\n[seeds]\n"
      << "data=" << cfg.data_seed << "\ntraining=" << cfg.training_seed << "\n\n[run]\n"
      << "out_dir=" << cfg.out_dir << "\nthreads=" << cfg.threads << "\n";
  return out.str();
}

// The synthetic federated task: lognormal partition of the training blobs,
// a held-out test set, and the scenario's attackers. Attackers are drawn
// uniformly among the clients from the data seed, so scenarios with the
// same attacker count share the same attacker set.
struct Scenario {
  ModelSpec model;
  std::vector<ClientSpec> clients;
  Dataset testset;
  std::vector<ClientId> attackers;
};

inline Scenario build_scenario(const ExperimentConfig& cfg, const AttackScenario& attack) {
  Scenario out;
  out.model = cfg.model_spec();
  const Dataset train =
      generate_synthetic_dataset(static_cast<std::size_t>(cfg.n_train), cfg.dim, cfg.classes, cfg.data_seed,
                                 cfg.separation);
  out.testset = generate_synthetic_testset(cfg.n_test, cfg.dim, cfg.classes, cfg.data_seed, cfg.separation);
  const WeightVector sizes = generate_partition({cfg.n_train, cfg.clients, cfg.mu, cfg.sigma, cfg.data_seed});
  auto shards = partition_dataset(train, sizes, cfg.data_seed);
  out.clients.resize(shards.size());
  for (std::size_t i = 0; i < shards.size(); ++i) {
    const ClientId id = sizes.ids()[i];
    auto& c = out.clients[static_cast<std::size_t>(id)];
    c.id = id;
    c.declared_size = sizes[i];
    c.data = std::move(shards[i]);
  }

  const std::size_t count = cfg.attacker_count(attack);
  if (count > 0) {
    std::vector<ClientId> all(cfg.clients);
    std::iota(all.begin(), all.end(), ClientId{0});
    Rng rng = make_rng({cfg.data_seed, stream::kAttackers, count});
    std::sample(all.begin(), all.end(), std::back_inserter(out.attackers), static_cast<std::ptrdiff_t>(count),
                rng);
    for (ClientId id : out.attackers) {
      auto& c = out.clients[static_cast<std::size_t>(id)];
      c.behavior = attack.kind;
      c.declared_size = attack.single ? cfg.declared_single : cfg.declared_fraction;
    }
  }
  return out;
}

struct CellResult {
  std::string preprocess;
  std::string aggregator;
  std::string attack;
  std::vector<RoundMetrics> metrics;
  bool infeasible = false;  // preprocessing found no admissible truncation

  bool diverged() const { return !metrics.empty() && !metrics.back().finite; }
  double final_accuracy() const { return metrics.empty() ? std::nan("") : metrics.back().test_accuracy; }

  std::string file_name() const { return "metrics_" + preprocess + "_" + aggregator + "_" + attack + ".csv"; }
};

inline CellResult run_cell(const ExperimentConfig& cfg, const Scenario& scenario, const AttackScenario& attack,
                           const std::string& mode, const std::string& agg) {
  CellResult cell{mode, agg, attack.name(), {}, false};
  try {
    cell.metrics = run_training(scenario.model, scenario.clients, scenario.testset, cfg.train_config(mode, agg))
                       .metrics;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::PreprocessInfeasible) throw;
    cell.infeasible = true;
  }
  return cell;
}

inline void write_summary_csv(std::ostream& out, std::span<const CellResult> cells) {
  std::string text = "preprocess,aggregator,attack,rounds,final_accuracy,status\n";
  for (const auto& c : cells) {
    text += c.preprocess + ',' + c.aggregator + ',' + c.attack + ',' + std::to_string(c.metrics.size()) + ',';
    if (c.metrics.empty()) text += "nan";
    else detail::append_number(text, c.final_accuracy());
    text += c.infeasible ? ",infeasible\n" : c.diverged() ? ",diverged\n" : ",ok\n";
  }
  out << text;
}

// Runs every (scenario, preprocess, aggregator) cell and, when out_dir is
// nonempty, writes one metrics file per cell plus summary.csv there.
inline std::vector<CellResult> run_grid(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::vector<CellResult> cells;
  for (const auto& attack : cfg.scenarios) {
    const Scenario scenario = build_scenario(cfg, attack);
    for (const auto& mode : cfg.modes)
      for (const auto& agg : cfg.aggregators) cells.push_back(run_cell(cfg, scenario, attack, mode, agg));
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    for (const auto& c : cells) {
      std::ofstream f(out_dir / c.file_name(), std::ios::binary);
      write_metrics_csv(f, c.metrics);
    }
    std::ofstream summary(out_dir / "summary.csv", std::ios::binary);
    write_summary_csv(summary, cells);
  }
  return cells;
}

}  // namespace byzweight
