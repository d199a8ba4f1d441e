#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "byzweight/error.hpp"
#include "byzweight/rng.hpp"
#include "byzweight/weights.hpp"

namespace byzweight {

using Label = std::uint32_t;

// Row-major feature matrix with one class label per row.
struct Dataset {
  std::size_t dim = 0;
  std::size_t num_classes = 1;
  std::vector<double> features;
  std::vector<Label> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }

  void push_back(std::span<const double> x, Label y) {
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(y);
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out{dim, num_classes, {}, {}};
    out.features.reserve(rows.size() * dim);
    out.labels.reserve(rows.size());
    for (auto r : rows) out.push_back(row(r), labels[r]);
    return out;
  }

  void validate() const {
    require(features.size() == labels.size() * dim, ErrorCode::InvalidArgument,
            "feature matrix does not match label count");
    for (auto y : labels)
      require(y < num_classes, ErrorCode::InvalidArgument, "label out of range");
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct PartitionSpec {
  std::uint64_t total_n = 0;
  std::size_t clients = 0;
  double mu = 1.5;
  double sigma = 3.45;
  std::uint64_t seed = 0;
};

// Client sizes from K lognormal draws, scaled to sum exactly to total_n
// with every client holding at least one sample. Each client first gets one
// sample; the remaining total_n - K are split in proportion to the draws
// with largest-remainder rounding. Ids record the draw order.
inline WeightVector generate_partition(const PartitionSpec& spec) {
  require(spec.clients >= 1, ErrorCode::InvalidArgument, "partition needs at least one client");
  if (spec.total_n < spec.clients) {
    fail(ErrorCode::InfeasibleTotal, "cannot give " + std::to_string(spec.clients) +
                                         " clients one sample each out of " +
                                         std::to_string(spec.total_n));
  }
  Rng rng = make_rng({spec.seed, stream::kPartition});
  std::lognormal_distribution<double> draw(spec.mu, spec.sigma);
  std::vector<double> raw(spec.clients);
  for (auto& x : raw) x = draw(rng);
  // Normalise by the largest draw first so huge sigma cannot overflow the sum.
  const double peak = *std::max_element(raw.begin(), raw.end());
  for (auto& x : raw) x /= peak;
  const double mass = std::accumulate(raw.begin(), raw.end(), 0.0);

  const std::uint64_t spare = spec.total_n - spec.clients;
  std::vector<std::uint64_t> sizes(spec.clients, 1);
  std::vector<std::pair<double, std::size_t>> remainders(spec.clients);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < spec.clients; ++i) {
    const double share = raw[i] / mass * static_cast<double>(spare);
    const double whole = std::floor(share);
    sizes[i] += static_cast<std::uint64_t>(whole);
    assigned += static_cast<std::uint64_t>(whole);
    remainders[i] = {share - whole, i};
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  // Floating error can leave the floors a few units off either way.
  std::size_t next = 0;
  while (assigned < spare) {
    ++sizes[remainders[next++ % spec.clients].second];
    ++assigned;
  }
  while (assigned > spare) {
    auto largest = std::max_element(sizes.begin(), sizes.end());
    --*largest;
    --assigned;
  }
  std::vector<ClientId> ids(spec.clients);
  std::iota(ids.begin(), ids.end(), ClientId{0});
  return WeightVector(std::move(sizes), std::move(ids));
}

inline constexpr double kDefaultSeparation = 3.0;

// Class means: `separation` times a standard basis vector while C <= d
// (vertices of a scaled simplex); any further classes get random
// directions of the same length.
inline std::vector<double> class_means(std::size_t dim, std::size_t classes, double separation,
                                       std::uint64_t seed) {
  std::vector<double> means(dim * classes, 0.0);
  Rng rng = make_rng({seed, stream::kClassMeans});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t c = 0; c < classes; ++c) {
    double* m = means.data() + c * dim;
    if (c < dim) {
      m[c] = separation;
      continue;
    }
    double norm = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      m[j] = normal(rng);
      norm += m[j] * m[j];
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < dim; ++j) m[j] *= separation / norm;
  }
  return means;
}

// C Gaussian blobs with unit isotropic noise and uniform class priors.
// Class means depend only on the shape (and `seed` when C > d), the draws
// on `sample_seed`.
inline Dataset sample_blobs(std::size_t n, std::size_t dim, std::size_t classes, double separation,
                            std::uint64_t seed, std::uint64_t sample_seed) {
  require(n >= 1 && dim >= 1 && classes >= 1, ErrorCode::InvalidArgument,
          "n, d and C must be positive");
  auto means = class_means(dim, classes, separation, seed);
  Rng rng(sample_seed);
  std::uniform_int_distribution<std::size_t> pick_class(0, classes - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds{dim, classes, {}, {}};
  ds.features.resize(n * dim);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto c = pick_class(rng);
    ds.labels[i] = static_cast<Label>(c);
    for (std::size_t j = 0; j < dim; ++j) ds.features[i * dim + j] = means[c * dim + j] + noise(rng);
  }
  return ds;
}

inline Dataset generate_synthetic_dataset(std::size_t n, std::size_t dim, std::size_t classes,
                                          std::uint64_t seed,
                                          double separation = kDefaultSeparation) {
  return sample_blobs(n, dim, classes, separation, seed, derive_seed({seed, stream::kTrainData}));
}

// Held-out set from the same blobs, drawn from a separate stream.
inline Dataset generate_synthetic_testset(std::size_t n, std::size_t dim, std::size_t classes,
                                          std::uint64_t seed,
                                          double separation = kDefaultSeparation) {
  return sample_blobs(n, dim, classes, separation, seed, derive_seed({seed, stream::kTestData}));
}

// Shuffles the rows, then hands out contiguous runs of sizes[i] rows in the
// vector's (sorted) order. Shard i belongs to the client sizes.ids()[i] when
// ids are present.
inline std::vector<Dataset> partition_dataset(const Dataset& ds, const WeightVector& sizes,
                                              std::uint64_t seed) {
  if (sizes.total() != ds.size()) {
    fail(ErrorCode::SizeMismatch, "partition sizes sum to " + sizes.total().str() +
                                      " but the dataset has " + std::to_string(ds.size()) +
                                      " rows");
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng({seed, stream::kShuffle});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Dataset> shards;
  shards.reserve(sizes.size());
  std::size_t offset = 0;
  for (auto count : sizes.values()) {
    shards.push_back(ds.subset(std::span(order).subspan(offset, count)));
    offset += count;
  }
  return shards;
}

namespace detail {
inline void append_number(std::string& out, double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, res.ptr);
}
}  // namespace detail

inline void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  std::string line;
  for (std::size_t j = 0; j < ds.dim; ++j) line += "feature_" + std::to_string(j) + ',';
  line += "label\n";
  out << line;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    line.clear();
    for (double x : ds.row(i)) {
      detail::append_number(line, x);
      line += ',';
    }
    line += std::to_string(ds.labels[i]);
    line += '\n';
    out << line;
  }
}

}  // namespace byzweight
