#pragma once

// Certificate that mwp(trunc(N, U), alpha) <= alpha_star holds with
// confidence 1 - delta, computed from k weights drawn IID (with replacement)
// from trunc(N, U). Three Hoeffding bounds at delta/3 each: one on how many
// draws land in the top-alpha set, one on the mean of the top order
// statistics, one on the overall mean.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "byzweight/error.hpp"
#include "byzweight/rational.hpp"
#include "byzweight/rng.hpp"
#include "byzweight/weights.hpp"

namespace byzweight {

// Which logarithm enters eps2 and eps3. The Hoeffding argument at
// confidence 1 - delta/3 gives ln(3/delta); the doubly-logarithmic variant is
// kept for comparison only and is not a sound certificate.
enum class LogTerm { Single, Double };

struct SampleCheckParams {
  std::size_t k = 0;
  Rational alpha;
  Rational alpha_star;
  double delta = 0.05;
  std::uint64_t u = 0;
  LogTerm log_term = LogTerm::Single;

  void validate() const {
    require(k >= 1, ErrorCode::InvalidArgument, "sample size k must be >= 1");
    require(delta > 0 && delta < 1, ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
    require(alpha > 0 && alpha <= 1, ErrorCode::InvalidArgument, "alpha must lie in (0, 1]");
    require(alpha_star > 0 && alpha_star < 1, ErrorCode::InvalidArgument,
            "alpha_star must lie in (0, 1)");
  }
};

struct EpsilonTriple {
  double eps1 = 0;
  double eps2 = 0;
  double eps3 = 0;
};

struct SampleCheckResult {
  bool certified = false;
  double lhs = 0;
  EpsilonTriple epsilons;
  double top_mean = 0;
  double sample_mean = 0;
};

inline EpsilonTriple epsilons(const SampleCheckParams& p) {
  p.validate();
  const double k = static_cast<double>(p.k);
  const double log_term = std::log(3.0 / p.delta);
  const double scaled_log = p.log_term == LogTerm::Single ? log_term : std::log(log_term);
  const double alpha = to_double(p.alpha);
  const double cap = static_cast<double>(p.u);

  EpsilonTriple e;
  e.eps1 = std::sqrt(log_term / (2.0 * k));
  if (alpha <= e.eps1) {
    fail(ErrorCode::AlphaTooSmall, "alpha = " + std::to_string(alpha) +
                                       " does not exceed eps1 = " + std::to_string(e.eps1));
  }
  e.eps2 = cap * std::sqrt(scaled_log / (2.0 * (k * (alpha - e.eps1) + 1.0)));
  e.eps3 = cap * std::sqrt(scaled_log / (2.0 * k));
  return e;
}

// 1-based index of the first order statistic in the trimmed top window.
inline std::size_t top_window_start(std::size_t k, double alpha, double eps1) {
  double start = std::ceil((1.0 - (alpha - eps1)) * static_cast<double>(k));
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(start, 1.0)), 1, k);
}

inline SampleCheckResult certify_sample(std::span<const std::uint64_t> sample,
                                        const SampleCheckParams& p) {
  p.validate();
  require(sample.size() == p.k, ErrorCode::InvalidArgument,
          "sample holds " + std::to_string(sample.size()) + " values, expected k = " +
              std::to_string(p.k));
  for (auto x : sample) {
    if (x > p.u) {
      fail(ErrorCode::ValueExceedsU,
           "sample value " + std::to_string(x) + " exceeds U = " + std::to_string(p.u));
    }
  }

  SampleCheckResult r;
  r.epsilons = epsilons(p);
  std::vector<std::uint64_t> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());

  const std::size_t k = p.k;
  const std::size_t start = top_window_start(k, to_double(p.alpha), r.epsilons.eps1);
  double top_sum = 0;
  for (std::size_t i = start; i <= k; ++i) top_sum += static_cast<double>(sorted[i - 1]);
  r.top_mean = top_sum / static_cast<double>(k - start + 1);

  double total = 0;
  for (auto x : sorted) total += static_cast<double>(x);
  r.sample_mean = total / static_cast<double>(k);

  const double denom = r.sample_mean - r.epsilons.eps3;
  if (denom > 0) {
    r.lhs = to_double(p.alpha) * (r.top_mean + r.epsilons.eps2) / denom;
    r.certified = r.lhs <= to_double(p.alpha_star);
  } else {
    r.lhs = std::numeric_limits<double>::infinity();
    r.certified = false;
  }
  return r;
}

// k draws with replacement from trunc(population, U).
inline std::vector<std::uint64_t> draw_sample(const WeightVector& population, std::uint64_t cap,
                                              std::size_t k, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
  std::vector<std::uint64_t> out(k);
  for (auto& x : out) x = std::min(population[pick(rng)], cap);
  return out;
}

// Fraction of trials that certify while the population itself violates the
// constraint. Trial t draws from the stream keyed by (seed, t), so the result
// does not depend on trial order.
inline double monte_carlo_validate(const WeightVector& population, const SampleCheckParams& p,
                                   std::size_t trials, std::uint64_t seed) {
  p.validate();
  require(trials >= 1, ErrorCode::InvalidArgument, "trials must be >= 1");
  require(p.u >= 1, ErrorCode::InvalidArgument, "U must be >= 1");
  const bool condition_holds = mwp(truncate(population, p.u), p.alpha) <= p.alpha_star;

  std::size_t false_certs = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = make_rng({seed, stream::kTrial, t});
    auto sample = draw_sample(population, p.u, p.k, rng);
    if (certify_sample(sample, p).certified && !condition_holds) ++false_certs;
  }
  return static_cast<double>(false_certs) / static_cast<double>(trials);
}

inline void write_certificate_csv(std::ostream& out, const SampleCheckResult& r) {
  auto num = [](double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return std::string(buf);
  };
  out << "certified,lhs,eps1,eps2,eps3,top_mean,sample_mean\n";
  out << (r.certified ? "true" : "false") << ',' << num(r.lhs) << ',' << num(r.epsilons.eps1)
      << ',' << num(r.epsilons.eps2) << ',' << num(r.epsilons.eps3) << ',' << num(r.top_mean)
      << ',' << num(r.sample_mean) << '\n';
}

}  // namespace byzweight
