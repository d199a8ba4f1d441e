#pragma once

// Federated training loop: declared sizes are collected and preprocessed
// once, then each round selects clients, runs their local updates (honest
// SGD or an attack) and aggregates them with the preprocessed weights.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iterator>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "byzweight/aggregate.hpp"
#include "byzweight/dataset.hpp"
#include "byzweight/error.hpp"
#include "byzweight/model.hpp"
#include "byzweight/rng.hpp"
#include "byzweight/weights.hpp"

namespace byzweight {

enum class Behavior { Honest, ModelNegation, LabelShift };

inline std::string behavior_name(Behavior b) {
  switch (b) {
    case Behavior::Honest: return "honest";
    case Behavior::ModelNegation: return "negation";
    case Behavior::LabelShift: return "label_shift";
  }
  return "?";
}

struct ClientSpec {
  ClientId id = 0;
  Dataset data;
  std::uint64_t declared_size = 0;
  Behavior behavior = Behavior::Honest;
};

// Either an absolute count of clients per round or a fraction of all clients.
using Participation = std::variant<std::size_t, double>;

inline std::size_t clients_per_round(const Participation& p, std::size_t total) {
  std::size_t m = std::visit(
      [&](auto v) -> std::size_t {
        if constexpr (std::is_same_v<decltype(v), double>) {
          require(v > 0 && v <= 1, ErrorCode::InvalidArgument, "participation fraction must lie in (0, 1]");
          return static_cast<std::size_t>(std::ceil(v * static_cast<double>(total)));
        } else {
          return v;
        }
      },
      p);
  require(m >= 1 && m <= total, ErrorCode::InvalidArgument, "clients per round must lie in [1, K]");
  return m;
}

struct TrainConfig {
  std::size_t rounds = 100;
  Participation participation = 1.0;
  double eta = 0.05;
  std::size_t epochs = 1;
  std::size_t batch_size = 10;
  PreprocessMode preprocess_mode = Passthrough{};
  AggregatorKind aggregator = WeightedMean{};
  bool honest_use_all_samples = true;
  std::uint64_t master_seed = 0;
  unsigned threads = 1;

  void validate() const {
    require(eta > 0 && std::isfinite(eta), ErrorCode::InvalidArgument, "eta must be positive");
    require(epochs >= 1, ErrorCode::InvalidArgument, "epochs must be >= 1");
    require(batch_size >= 1, ErrorCode::InvalidArgument, "batch size must be >= 1");
    require(threads >= 1, ErrorCode::InvalidArgument, "threads must be >= 1");
    if (auto* t = std::get_if<TrimmedMean>(&aggregator)) {
      require(t->beta >= 0, ErrorCode::InvalidArgument, "beta must be >= 0");
      if (2 * t->beta >= 1) fail(ErrorCode::AllMassTrimmed, "beta must be below 1/2");
    }
    if (auto* t = std::get_if<Truncate>(&preprocess_mode)) t->query.validate();
  }
};

struct RoundMetrics {
  std::size_t round = 0;
  double test_accuracy = 0;
  double test_loss = 0;
  double aggregate_norm = 0;
  bool finite = true;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

// Local SGD (E epochs, batches of B from a per-epoch shuffle). When
// `usable_samples` is given and smaller than the shard, training is limited
// to a fixed random subset of that many rows, the same in every round.
template <TrainableModel Model>
ParamVector client_update(const Model& model, std::span<const double> w, const ClientSpec& client,
                          const TrainConfig& cfg, std::size_t round,
                          std::optional<std::uint64_t> usable_samples = std::nullopt) {
  require(client.behavior != Behavior::ModelNegation, ErrorCode::InvalidArgument,
          "negating clients do not train");
  if (client.data.empty()) fail(ErrorCode::EmptyClientData, "client has no data");
  const auto id = static_cast<std::uint64_t>(client.id);

  const Dataset* data = &client.data;
  Dataset shifted;
  if (client.behavior == Behavior::LabelShift) {
    shifted = client.data;
    const auto top = static_cast<Label>(shifted.num_classes - 1);
    for (auto& y : shifted.labels) y = top - y;
    data = &shifted;
  }

  std::vector<std::size_t> rows = all_rows(*data);
  if (usable_samples && *usable_samples < rows.size()) {
    require(*usable_samples >= 1, ErrorCode::EmptyClientData, "client may use no samples");
    Rng pick = make_rng({cfg.master_seed, stream::kSubset, id});
    std::vector<std::size_t> chosen;
    std::sample(rows.begin(), rows.end(), std::back_inserter(chosen),
                static_cast<std::ptrdiff_t>(*usable_samples), pick);
    rows = std::move(chosen);
  }

  ParamVector params(w.begin(), w.end());
  ParamVector grad(params.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_rng({cfg.master_seed, stream::kClientRound, round, id, epoch});
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t start = 0, batch = 0; start < rows.size(); start += cfg.batch_size, ++batch) {
      const std::size_t len = std::min(cfg.batch_size, rows.size() - start);
      const auto dropout_seed = derive_seed({cfg.master_seed, stream::kClientRound, round, id, epoch, batch});
      model.loss_and_gradient(params, *data, std::span(rows).subspan(start, len), dropout_seed, grad);
      for (std::size_t j = 0; j < params.size(); ++j) params[j] -= cfg.eta * grad[j];
    }
  }
  return params;
}

inline ParamVector byzantine_update(Behavior behavior, std::span<const double> w_server) {
  require(behavior == Behavior::ModelNegation, ErrorCode::InvalidArgument,
          "only model negation replaces training");
  ParamVector out(w_server.size());
  std::transform(w_server.begin(), w_server.end(), out.begin(), [](double x) { return -x; });
  return out;
}

// Positions 0..K-1 of the participating clients, ascending.
inline std::vector<std::size_t> select_clients(std::size_t round, std::size_t total,
                                               std::size_t per_round, std::uint64_t master_seed) {
  require(per_round >= 1 && per_round <= total, ErrorCode::InvalidArgument,
          "clients per round must lie in [1, K]");
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (per_round == total) return all;
  Rng rng = make_rng({master_seed, stream::kSelect, round});
  std::vector<std::size_t> chosen;
  chosen.reserve(per_round);
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), static_cast<std::ptrdiff_t>(per_round),
              rng);
  return chosen;
}

// What the server fed into one aggregation.
struct RoundObservation {
  std::size_t round = 0;
  std::vector<ClientId> clients;  // ascending
  std::vector<double> weights;    // parallel to clients
};
using RoundObserver = std::function<void(const RoundObservation&)>;

struct TrainingResult {
  std::vector<RoundMetrics> metrics;
  ParamVector params;
  WeightVector preprocessed;
};

namespace detail {

// Runs body(i) for i in [0, n) on up to `threads` workers.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

inline double l2_norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

template <TrainableModel Model>
TrainingResult run_training(const Model& model, std::span<const ClientSpec> clients, const Dataset& testset,
                            const TrainConfig& cfg, const RoundObserver& observer = {}) {
  cfg.validate();
  require(!clients.empty(), ErrorCode::InvalidArgument, "no clients");

  // Work in ascending id order throughout; reductions then never depend on
  // the caller's ordering or on thread scheduling.
  std::vector<const ClientSpec*> roster;
  for (const auto& c : clients) {
    if (c.behavior == Behavior::Honest) {
      require(c.declared_size == c.data.size(), ErrorCode::InvalidArgument,
              "honest clients must declare their true size");
    }
    roster.push_back(&c);
  }
  std::sort(roster.begin(), roster.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < roster.size(); ++i)
    require(roster[i - 1]->id != roster[i]->id, ErrorCode::InvalidArgument, "duplicate client id");

  std::vector<std::uint64_t> declared;
  std::vector<ClientId> ids;
  for (auto* c : roster) {
    declared.push_back(c->declared_size);
    ids.push_back(c->id);
  }
  TrainingResult result;
  result.preprocessed = preprocess(WeightVector(declared, ids), cfg.preprocess_mode);
  std::unordered_map<ClientId, std::uint64_t> weight_of;
  for (std::size_t i = 0; i < result.preprocessed.size(); ++i)
    weight_of[result.preprocessed.ids()[i]] = result.preprocessed[i];

  const std::size_t per_round = clients_per_round(cfg.participation, roster.size());
  ParamVector w = model.initial_params(cfg.master_seed);

  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    const auto selected = select_clients(round, roster.size(), per_round, cfg.master_seed);
    std::vector<ParamVector> updates(selected.size());
    detail::parallel_for(selected.size(), cfg.threads, [&](std::size_t i) {
      const ClientSpec& c = *roster[selected[i]];
      const std::uint64_t assigned = weight_of.at(c.id);
      if (c.behavior == Behavior::ModelNegation) {
        updates[i] = byzantine_update(c.behavior, w);
      } else {
        std::optional<std::uint64_t> usable;
        if (!cfg.honest_use_all_samples) usable = assigned;
        updates[i] = client_update(model, w, c, cfg, round, usable);
      }
    });

    RoundObservation seen{round, {}, {}};
    for (std::size_t i : selected) {
      seen.clients.push_back(roster[i]->id);
      seen.weights.push_back(static_cast<double>(weight_of.at(roster[i]->id)));
    }
    if (observer) observer(seen);

    ParamVector next = aggregate(cfg.aggregator, updates, seen.weights);
    const double norm = detail::l2_norm(next);
    if (!std::isfinite(norm)) {
      result.metrics.push_back({round, std::nan(""), std::nan(""), norm, false});
      w = std::move(next);
      break;
    }
    w = std::move(next);
    const Evaluation eval = model.evaluate(w, testset);
    result.metrics.push_back({round, eval.accuracy, eval.loss, norm, true});
  }
  result.params = std::move(w);
  return result;
}

inline void write_metrics_csv(std::ostream& out, std::span<const RoundMetrics> metrics) {
  std::string text = "round,test_accuracy,test_loss,aggregate_norm\n";
  for (const auto& m : metrics) {
    text += std::to_string(m.round);
    for (double x : {m.test_accuracy, m.test_loss, m.aggregate_norm}) {
      text += ',';
      detail::append_number(text, x);
    }
    text += '\n';
  }
  out << text;
}

}  // namespace byzweight
