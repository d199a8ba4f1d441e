#pragma once

// Per-client empirical risks and the bound on how far the weighted global
// objective moves when declared sample sizes are truncated at U.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "byzweight/dataset.hpp"
#include "byzweight/error.hpp"
#include "byzweight/model.hpp"

namespace byzweight {

// Mean loss over the whole shard, evaluation mode.
inline double client_objective(const ModelSpec& spec, std::span<const double> w,
                               const Dataset& client_data) {
  require(!client_data.empty(), ErrorCode::EmptyClientData, "client holds no samples");
  return loss(spec, w, client_data);
}

struct ObjectiveGap {
  double lhs = 0;  // |declared-weighted objective - truncated-weighted objective|
  double rhs = 0;  // the bound
  // Same expression as rhs with U/T in place of 1/K. Equals lhs exactly
  // whenever every declaration at or below U matches its shard size; rhs
  // is obtained from it by the substitution U/T >= 1/K.
  double unrelaxed = 0;
};

// declared[i] is the size client i reported for shards[i]; the shard itself
// may hold a different number of samples. Objectives are scalars, so the
// norm is an absolute value. With d_i the declared sizes, t_i = min(d_i, U),
// D = sum d_i and T = sum t_i:
//   lhs = | sum d_i F_i / D - sum t_i F_i / T |
//   rhs = | sum_{d_i > U} (d_i / D - 1/K) F_i + (1/D - 1/T) sum_{d_i <= U} L(Z_i) |
// where L(Z_i) is the summed (not averaged) loss over shard i.
inline ObjectiveGap objective_gap_bound(const ModelSpec& spec, std::span<const double> w,
                                        std::span<const Dataset> shards,
                                        std::span<const std::uint64_t> declared, std::uint64_t cap) {
  require(shards.size() == declared.size(), ErrorCode::SizeMismatch,
          "one declared size per shard required");
  require(!shards.empty(), ErrorCode::InvalidArgument, "no shards");
  require(cap >= 1, ErrorCode::InvalidArgument, "truncation bound must be >= 1");

  const std::size_t k = shards.size();
  std::vector<double> objective(k);
  double declared_total = 0, truncated_total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    objective[i] = client_objective(spec, w, shards[i]);
    declared_total += static_cast<double>(declared[i]);
    truncated_total += static_cast<double>(std::min(declared[i], cap));
  }
  require(declared_total > 0, ErrorCode::ZeroTotalWeight, "declared sizes sum to zero");

  double declared_mix = 0, truncated_mix = 0, above = 0, above_unrelaxed = 0, below_losses = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double d = static_cast<double>(declared[i]);
    const double t = static_cast<double>(std::min(declared[i], cap));
    declared_mix += d * objective[i];
    truncated_mix += t * objective[i];
    if (declared[i] > cap) {
      above += (d / declared_total - 1.0 / static_cast<double>(k)) * objective[i];
      above_unrelaxed += (d / declared_total - static_cast<double>(cap) / truncated_total) * objective[i];
    } else {
      below_losses += objective[i] * static_cast<double>(shards[i].size());
    }
  }
  ObjectiveGap gap;
  gap.lhs = std::abs(declared_mix / declared_total - truncated_mix / truncated_total);
  const double below_term = (1.0 / declared_total - 1.0 / truncated_total) * below_losses;
  gap.rhs = std::abs(above + below_term);
  gap.unrelaxed = std::abs(above_unrelaxed + below_term);
  return gap;
}

}  // namespace byzweight
