#pragma once

// Server-side aggregation rules over client parameter vectors, each
// weighted by the (preprocessed) client sample size:
//   - weighted arithmetic mean
//   - coordinatewise weighted lower median
//   - coordinatewise weight-mass trimmed mean
// With equal weights the latter two reduce to the classic unweighted
// coordinatewise median (lower middle for even counts) and beta-trimmed mean.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "byzweight/error.hpp"
#include "byzweight/model.hpp"

namespace byzweight {

struct WeightedMean {};
struct WeightedMedian {};
struct TrimmedMean {
  double beta = 0.1;
};
using AggregatorKind = std::variant<WeightedMean, WeightedMedian, TrimmedMean>;

inline std::string aggregator_name(const AggregatorKind& kind) {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, WeightedMean>) return "mean";
        else if constexpr (std::is_same_v<K, WeightedMedian>) return "median";
        else return "trimmed";
      },
      kind);
}

namespace detail {

inline double check_inputs(std::span<const ParamVector> updates, std::span<const double> weights) {
  require(!updates.empty(), ErrorCode::InvalidArgument, "no updates to aggregate");
  require(updates.size() == weights.size(), ErrorCode::SizeMismatch,
          "one weight per update required");
  const std::size_t dim = updates.front().size();
  for (const auto& u : updates)
    require(u.size() == dim, ErrorCode::SizeMismatch, "updates differ in length");
  double total = 0;
  for (double w : weights) {
    require(w >= 0 && std::isfinite(w), ErrorCode::InvalidArgument,
            "weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0)) fail(ErrorCode::WeightSumZero, "aggregation weights sum to zero");
  return total;
}

// Visits each coordinate with the updates' values there sorted ascending
// (ties keep update order) alongside their weights.
template <class F>
void for_each_sorted_coordinate(std::span<const ParamVector> updates, std::span<const double> weights,
                                F&& body) {
  const std::size_t n = updates.size();
  const std::size_t dim = updates.front().size();
  std::vector<std::size_t> order(n);
  std::vector<double> values(n), sorted_weights(n);
  for (std::size_t j = 0; j < dim; ++j) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return updates[a][j] < updates[b][j];
    });
    for (std::size_t i = 0; i < n; ++i) {
      values[i] = updates[order[i]][j];
      sorted_weights[i] = weights[order[i]];
    }
    body(j, std::span<const double>(values), std::span<const double>(sorted_weights));
  }
}

}  // namespace detail

inline ParamVector aggregate_weighted_mean(std::span<const ParamVector> updates,
                                           std::span<const double> weights) {
  const double total = detail::check_inputs(updates, weights);
  ParamVector out(updates.front().size(), 0.0);
  for (std::size_t k = 0; k < updates.size(); ++k) {
    const double share = weights[k] / total;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += share * updates[k][j];
  }
  return out;
}

// Per coordinate, the smallest value whose cumulative weight reaches half
// the total.
inline ParamVector aggregate_weighted_median(std::span<const ParamVector> updates,
                                             std::span<const double> weights) {
  const double total = detail::check_inputs(updates, weights);
  ParamVector out(updates.front().size(), 0.0);
  detail::for_each_sorted_coordinate(
      updates, weights, [&](std::size_t j, std::span<const double> values, std::span<const double> w) {
        double cumulative = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
          cumulative += w[i];
          if (2 * cumulative >= total || i + 1 == values.size()) {
            out[j] = values[i];
            return;
          }
        }
      });
  return out;
}

// Per coordinate, drops beta * W of weight mass from each end of the sorted
// values (a boundary update keeps the fraction of its weight that survives)
// and returns the weighted mean of the rest.
inline ParamVector aggregate_trimmed_mean(std::span<const ParamVector> updates,
                                          std::span<const double> weights, double beta) {
  require(beta >= 0 && std::isfinite(beta), ErrorCode::InvalidArgument, "beta must be >= 0");
  if (2 * beta >= 1) fail(ErrorCode::AllMassTrimmed, "beta must be below 1/2");
  const double total = detail::check_inputs(updates, weights);
  const double low = beta * total;
  const double high = total - low;
  ParamVector out(updates.front().size(), 0.0);
  detail::for_each_sorted_coordinate(
      updates, weights, [&](std::size_t j, std::span<const double> values, std::span<const double> w) {
        double start = 0, kept_mass = 0, sum = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
          const double end = start + w[i];
          const double kept = std::max(0.0, std::min(end, high) - std::max(start, low));
          if (kept > 0) {
            kept_mass += kept;
            sum += kept * values[i];
          }
          start = end;
        }
        out[j] = sum / kept_mass;
      });
  return out;
}

inline ParamVector aggregate(const AggregatorKind& kind, std::span<const ParamVector> updates,
                             std::span<const double> weights) {
  return std::visit(
      [&](const auto& k) -> ParamVector {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, WeightedMean>) return aggregate_weighted_mean(updates, weights);
        else if constexpr (std::is_same_v<K, WeightedMedian>)
          return aggregate_weighted_median(updates, weights);
        else return aggregate_trimmed_mean(updates, weights, k.beta);
      },
      kind);
}

}  // namespace byzweight
