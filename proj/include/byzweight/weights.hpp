#pragma once

// Client sample-size vectors and the truncation-based preprocessing built on
// them: maximal weight proportion (mwp), element-wise truncation, the
// maximal-U solver and the alpha/U* trade-off report.
//
// All weight arithmetic is exact: sums are arbitrary-size integers and
// proportions are rationals, so the floor in the interval solve never
// depends on rounding.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "byzweight/error.hpp"
#include "byzweight/rational.hpp"

namespace byzweight {

using ClientId = std::int64_t;

// Non-decreasing vector of client sample sizes. Optional client ids travel
// with their values through sorting (stable, so equal sizes keep their
// input order) and through every transformation below.
class WeightVector {
 public:
  WeightVector() = default;

  explicit WeightVector(std::vector<std::uint64_t> values)
      : WeightVector(std::move(values), {}) {}

  WeightVector(std::vector<std::uint64_t> values, std::vector<ClientId> ids) {
    require(!values.empty(), ErrorCode::InvalidArgument, "weight vector must be nonempty");
    require(ids.empty() || ids.size() == values.size(), ErrorCode::InvalidArgument,
            "ids must be parallel to values");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    values_.reserve(values.size());
    for (std::size_t i : order) values_.push_back(values[i]);
    if (!ids.empty()) {
      ids_.reserve(ids.size());
      for (std::size_t i : order) ids_.push_back(ids[i]);
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::uint64_t operator[](std::size_t i) const { return values_[i]; }
  std::span<const std::uint64_t> values() const noexcept { return values_; }
  std::span<const ClientId> ids() const noexcept { return ids_; }
  bool has_ids() const noexcept { return !ids_.empty(); }
  std::uint64_t min() const { return values_.front(); }
  std::uint64_t max() const { return values_.back(); }

  BigInt total() const {
    BigInt sum = 0;
    for (auto v : values_) sum += v;
    return sum;
  }

  // Values listed in id order; requires ids 0..K-1.
  std::vector<std::uint64_t> by_id() const {
    require(has_ids(), ErrorCode::InvalidArgument, "weight vector has no ids");
    std::vector<std::uint64_t> out(size(), 0);
    for (std::size_t i = 0; i < size(); ++i) {
      auto id = ids_[i];
      require(id >= 0 && static_cast<std::size_t>(id) < size(), ErrorCode::InvalidArgument,
              "ids are not a permutation of 0..K-1");
      out[static_cast<std::size_t>(id)] = values_[i];
    }
    return out;
  }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  // Used by transformations that provably keep the order.
  struct Sorted {};
  WeightVector(Sorted, std::vector<std::uint64_t> values, std::vector<ClientId> ids)
      : values_(std::move(values)), ids_(std::move(ids)) {}

  friend WeightVector truncate(const WeightVector& v, std::uint64_t cap);
  friend WeightVector with_unit_weights(const WeightVector& v);

  std::vector<std::uint64_t> values_;
  std::vector<ClientId> ids_;
};

struct TruncationQuery {
  Rational alpha;       // assumed proportion of Byzantine clients
  Rational alpha_star;  // tolerated Byzantine weight proportion

  void validate() const {
    require(alpha >= 0 && alpha <= 1, ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
    require(alpha_star > 0 && alpha_star < 1, ErrorCode::InvalidArgument,
            "alpha_star must lie in (0, 1)");
  }
};

struct TruncationOutcome {
  enum class Status { Solved, NoTruncationNeeded, Infeasible };

  Status status = Status::Infeasible;
  std::uint64_t u_star = 0;             // meaningful when Solved
  std::optional<Rational> achieved_mwp;  // absent when Infeasible

  bool solved() const noexcept { return status == Status::Solved; }
};

struct TradeoffPoint {
  Rational alpha;
  std::uint64_t u_star;

  friend bool operator==(const TradeoffPoint&, const TradeoffPoint&) = default;
};

using TradeoffCurve = std::vector<TradeoffPoint>;

namespace detail {

// Number of leading indices excluded from the top-p set: an index i
// (1-based) belongs to the top set iff i > (1 - p) * K, compared exactly.
inline std::size_t top_cut(const Rational& p, std::size_t k) {
  BigInt cut = floor((Rational(1) - p) * Rational(k));
  if (cut < 0) return 0;
  if (cut > k) return k;
  return cut.convert_to<std::size_t>();
}

// Prefix sums over a sorted vector; evaluates mwp(trunc(v, U), alpha) in
// O(log K) without materialising the truncated vector.
class TruncationProfile {
 public:
  explicit TruncationProfile(const WeightVector& v) : values_(v.values()) {
    prefix_.reserve(values_.size() + 1);
    prefix_.push_back(0);
    for (auto x : values_) prefix_.push_back(prefix_.back() + x);
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::uint64_t value(std::size_t i) const { return values_[i]; }
  const BigInt& prefix(std::size_t count) const { return prefix_[count]; }

  // Coefficients of mwp(trunc(v, U), alpha) = (a + b U) / (c + d U), valid for
  // every U with values[unchanged-1] <= U <= values[unchanged].
  struct Fraction {
    BigInt a, b, c, d;
  };

  Fraction coefficients(std::size_t unchanged, std::size_t cut) const {
    const std::size_t k = size();
    Fraction f;
    f.a = unchanged > cut ? BigInt(prefix_[unchanged] - prefix_[cut]) : BigInt(0);
    f.b = k - std::max(unchanged, cut);
    f.c = prefix_[unchanged];
    f.d = k - unchanged;
    return f;
  }

  // mwp(trunc(v, cap), alpha) <= alpha_star, decided exactly.
  bool holds(std::uint64_t cap, std::size_t cut, const Rational& alpha_star) const {
    std::size_t unchanged = static_cast<std::size_t>(
        std::upper_bound(values_.begin(), values_.end(), cap) - values_.begin());
    Fraction f = coefficients(unchanged, cut);
    BigInt top = f.a + f.b * cap;
    BigInt total = f.c + f.d * cap;
    require(total > 0, ErrorCode::ZeroTotalWeight, "truncated weights sum to zero");
    // top / total <= num / den  <=>  top * den <= num * total
    return top * boost::multiprecision::denominator(alpha_star) <=
           boost::multiprecision::numerator(alpha_star) * total;
  }

  Rational mwp_at(std::uint64_t cap, std::size_t cut) const {
    std::size_t unchanged = static_cast<std::size_t>(
        std::upper_bound(values_.begin(), values_.end(), cap) - values_.begin());
    Fraction f = coefficients(unchanged, cut);
    BigInt total = f.c + f.d * cap;
    require(total > 0, ErrorCode::ZeroTotalWeight, "truncated weights sum to zero");
    return Rational(f.a + f.b * cap, total);
  }

 private:
  std::span<const std::uint64_t> values_;
  std::vector<BigInt> prefix_;
};

inline std::uint64_t smallest_cap(const WeightVector& v) {
  return std::max<std::uint64_t>(v.min(), 1);
}

}  // namespace detail

// Weight proportion held by the top p-fraction of the (sorted) vector.
inline Rational mwp(const WeightVector& v, const Rational& p) {
  require(p >= 0 && p <= 1, ErrorCode::InvalidArgument, "proportion must lie in [0, 1]");
  BigInt total = v.total();
  require(total > 0, ErrorCode::ZeroTotalWeight, "weights sum to zero");
  std::size_t cut = detail::top_cut(p, v.size());
  BigInt top = 0;
  for (std::size_t i = cut; i < v.size(); ++i) top += v[i];
  return Rational(top, total);
}

inline WeightVector truncate(const WeightVector& v, std::uint64_t cap) {
  std::vector<std::uint64_t> out(v.values().begin(), v.values().end());
  for (auto& x : out) x = std::min(x, cap);
  return WeightVector(WeightVector::Sorted{}, std::move(out),
                      std::vector<ClientId>(v.ids().begin(), v.ids().end()));
}

inline WeightVector with_unit_weights(const WeightVector& v) {
  return WeightVector(WeightVector::Sorted{}, std::vector<std::uint64_t>(v.size(), 1),
                      std::vector<ClientId>(v.ids().begin(), v.ids().end()));
}

// Largest U in [v[u-1], v[u]] (1-based u: the first u entries stay
// unchanged) with mwp(trunc(v, U), alpha) <= alpha_star, from the closed form
// floor((a - c a*) / (d a* - b)). Throws DegenerateInterval when d a* - b >= 0,
// where the constraint cannot bind from above inside the interval.
inline std::uint64_t interval_solve(const WeightVector& v, std::size_t u, const TruncationQuery& q) {
  q.validate();
  require(u >= 1 && u < v.size(), ErrorCode::InvalidArgument, "interval index out of range");
  detail::TruncationProfile profile(v);
  auto f = profile.coefficients(u, detail::top_cut(q.alpha, v.size()));
  Rational denom = Rational(f.d) * q.alpha_star - Rational(f.b);
  if (denom >= 0) {
    fail(ErrorCode::DegenerateInterval,
         "d*alpha_star - b = " + denom.str() + " is not negative for u = " + std::to_string(u));
  }
  BigInt cap = floor((Rational(f.a) - Rational(f.c) * q.alpha_star) / denom);
  require(cap >= 0 && cap <= std::numeric_limits<std::uint64_t>::max(),
          ErrorCode::DegenerateInterval, "interval solution out of range");
  return cap.convert_to<std::uint64_t>();
}

// Maximal U >= 1 with mwp(trunc(v, U), alpha) <= alpha_star. Scans sorted
// values from the top down to the first breakpoint that satisfies the
// constraint, then finishes inside that interval with interval_solve.
inline TruncationOutcome solve_u_star(const WeightVector& v, const TruncationQuery& q) {
  q.validate();
  using Status = TruncationOutcome::Status;
  require(v.total() > 0, ErrorCode::ZeroTotalWeight, "weights sum to zero");

  const std::size_t k = v.size();
  const std::size_t cut = detail::top_cut(q.alpha, k);
  detail::TruncationProfile profile(v);

  if (profile.holds(v.max(), cut, q.alpha_star)) {
    return {Status::NoTruncationNeeded, 0, profile.mwp_at(v.max(), cut)};
  }
  // Capping at n_1 flattens the vector; capping lower changes nothing but
  // the scale, and U = 0 is excluded.
  const std::uint64_t floor_cap = detail::smallest_cap(v);
  if (!profile.holds(floor_cap, cut, q.alpha_star)) {
    return {Status::Infeasible, 0, std::nullopt};
  }

  // Invariant: the constraint fails at v[u] (0-based), i.e. at n_{u+1}.
  std::size_t u = k - 1;
  while (u >= 1) {
    std::uint64_t candidate = v[u - 1];
    if (candidate < floor_cap) break;
    if (profile.holds(candidate, cut, q.alpha_star)) break;
    --u;
  }
  // Entries 1..u are <= every U in the interval [max(n_u, floor_cap), n_{u+1}].
  std::uint64_t u_star = interval_solve(v, u, q);
  return {Status::Solved, u_star, profile.mwp_at(u_star, cut)};
}

// (alpha, U*) pairs for alpha on the grid j/K, walking alpha down from the
// largest grid point not above alpha_star. Entries that need no truncation
// or cannot be satisfied are skipped. Running sums and the interval pointer
// carry across alpha values, so the walk is O(K) after sorting.
inline TradeoffCurve tradeoff_report(const WeightVector& v, const Rational& alpha_star) {
  TruncationQuery probe{Rational(0), alpha_star};
  probe.validate();
  require(v.total() > 0, ErrorCode::ZeroTotalWeight, "weights sum to zero");

  const std::size_t k = v.size();
  detail::TruncationProfile profile(v);
  const std::uint64_t floor_cap = detail::smallest_cap(v);
  // Entries at or below floor_cap never change inside the search range.
  std::size_t u = static_cast<std::size_t>(
      std::upper_bound(v.values().begin(), v.values().end(), floor_cap) - v.values().begin());

  TradeoffCurve curve;
  BigInt top_j = floor(alpha_star * Rational(k));
  for (long long j = top_j.convert_to<long long>(); j >= 1; --j) {
    Rational alpha(j, static_cast<long long>(k));
    std::size_t cut = detail::top_cut(alpha, k);
    if (!profile.holds(floor_cap, cut, alpha_star)) continue;
    while (u < k && profile.holds(v[u], cut, alpha_star)) ++u;
    if (u == k) break;  // no truncation needed here, nor for any smaller alpha
    curve.push_back({alpha, interval_solve(v, u, TruncationQuery{alpha, alpha_star})});
  }
  return curve;
}

struct Passthrough {};
struct IgnoreWeights {};
struct Truncate {
  TruncationQuery query;
};
using PreprocessMode = std::variant<Passthrough, IgnoreWeights, Truncate>;

inline std::string mode_name(const PreprocessMode& mode) {
  return std::visit(
      [](const auto& m) -> std::string {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Passthrough>) return "passthrough";
        else if constexpr (std::is_same_v<M, IgnoreWeights>) return "ignore";
        else return "truncate";
      },
      mode);
}

inline WeightVector preprocess(const WeightVector& declared, const PreprocessMode& mode) {
  return std::visit(
      [&](const auto& m) -> WeightVector {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Passthrough>) {
          return declared;
        } else if constexpr (std::is_same_v<M, IgnoreWeights>) {
          return with_unit_weights(declared);
        } else {
          auto outcome = solve_u_star(declared, m.query);
          switch (outcome.status) {
            case TruncationOutcome::Status::Solved:
              return truncate(declared, outcome.u_star);
            case TruncationOutcome::Status::NoTruncationNeeded:
              return declared;
            case TruncationOutcome::Status::Infeasible:
              break;
          }
          fail(ErrorCode::PreprocessInfeasible,
               "no truncation satisfies mwp <= " + m.query.alpha_star.str() + " at alpha = " +
                   m.query.alpha.str());
        }
      },
      mode);
}

// --- text formats ---------------------------------------------------------

inline void write_tradeoff_csv(std::ostream& out, const TradeoffCurve& curve) {
  out << "alpha,u_star\n";
  for (const auto& p : curve) out << to_decimal(p.alpha, 6) << ',' << p.u_star << '\n';
}

// One nonnegative integer per line; '#' starts a comment; blank lines are
// skipped. Ids are assigned in file order starting at 0.
inline WeightVector read_weights(std::istream& in) {
  std::vector<std::uint64_t> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    std::string token = line.substr(first, last - first + 1);
    if (token.find_first_not_of("0123456789") != std::string::npos) {
      fail(ErrorCode::ParseError,
           "line " + std::to_string(line_no) + ": expected a nonnegative integer, got '" + token + "'");
    }
    try {
      values.push_back(std::stoull(token));
    } catch (const std::exception&) {
      fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": value out of range");
    }
  }
  require(!values.empty(), ErrorCode::ParseError, "weights file holds no values");
  std::vector<ClientId> ids(values.size());
  std::iota(ids.begin(), ids.end(), ClientId{0});
  return WeightVector(std::move(values), std::move(ids));
}

inline WeightVector read_weights_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open weights file " + path);
  return read_weights(in);
}

inline void write_weights(std::ostream& out, const WeightVector& v) {
  for (auto x : v.values()) out << x << '\n';
}

}  // namespace byzweight
