#pragma once

// Classifiers trained by the simulator: multinomial logistic regression and
// a one-hidden-layer ReLU perceptron with inverted dropout. Both use mean
// cross-entropy of a softmax output, with hand-derived gradients.
//
// Parameter layouts (row-major):
//   SoftmaxRegression: W[C x d], b[C]
//   OneHiddenMlp:      W1[h x d], b1[h], W2[C x h], b2[C]

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "byzweight/dataset.hpp"
#include "byzweight/error.hpp"
#include "byzweight/rng.hpp"

namespace byzweight {

using ParamVector = std::vector<double>;

struct Evaluation {
  double accuracy = 0;
  double loss = 0;
};

struct SoftmaxRegression {
  std::size_t dim = 0;
  std::size_t classes = 0;
};

struct OneHiddenMlp {
  std::size_t dim = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;
  double dropout_rate = 0;
};

namespace detail {

// Returns -log softmax(logits)[label] and overwrites logits with the
// softmax probabilities.
inline double softmax_xent(std::span<double> logits, Label label) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  const double shifted = logits[label] - peak;
  double z = 0;
  for (double& v : logits) {
    v = std::exp(v - peak);
    z += v;
  }
  for (double& v : logits) v /= z;
  return std::log(z) - shifted;
}

inline std::size_t argmax(std::span<const double> xs) {
  return static_cast<std::size_t>(std::max_element(xs.begin(), xs.end()) - xs.begin());
}

}  // namespace detail

class ModelSpec {
 public:
  using Kind = std::variant<SoftmaxRegression, OneHiddenMlp>;

  ModelSpec() = default;
  ModelSpec(SoftmaxRegression m) : kind_(m) {  // NOLINT(google-explicit-constructor)
    require(m.dim >= 1 && m.classes >= 1, ErrorCode::InvalidArgument, "empty model shape");
  }
  ModelSpec(OneHiddenMlp m) : kind_(m) {  // NOLINT(google-explicit-constructor)
    require(m.dim >= 1 && m.hidden >= 1 && m.classes >= 1, ErrorCode::InvalidArgument,
            "empty model shape");
    require(m.dropout_rate >= 0 && m.dropout_rate < 1, ErrorCode::InvalidArgument,
            "dropout rate must lie in [0, 1)");
  }

  const Kind& kind() const noexcept { return kind_; }

  std::size_t param_count() const {
    return std::visit(
        [](const auto& m) -> std::size_t {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, SoftmaxRegression>) {
            return m.classes * m.dim + m.classes;
          } else {
            return m.hidden * m.dim + m.hidden + m.classes * m.hidden + m.classes;
          }
        },
        kind_);
  }

  std::size_t classes() const {
    return std::visit([](const auto& m) { return m.classes; }, kind_);
  }

  std::size_t input_dim() const {
    return std::visit([](const auto& m) { return m.dim; }, kind_);
  }

  // Small Gaussian weights scaled by fan-in, zero biases.
  ParamVector initial_params(std::uint64_t seed) const {
    ParamVector w(param_count(), 0.0);
    Rng rng = make_rng({seed, stream::kInit});
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          auto fill = [&](std::size_t offset, std::size_t count, double scale) {
            std::normal_distribution<double> normal(0.0, scale);
            for (std::size_t i = 0; i < count; ++i) w[offset + i] = normal(rng);
          };
          if constexpr (std::is_same_v<M, SoftmaxRegression>) {
            fill(0, m.classes * m.dim, 0.01);
          } else {
            fill(0, m.hidden * m.dim, 1.0 / std::sqrt(static_cast<double>(m.dim)));
            fill(m.hidden * m.dim + m.hidden, m.classes * m.hidden,
                 1.0 / std::sqrt(static_cast<double>(m.hidden)));
          }
        },
        kind_);
    return w;
  }

  // Mean cross-entropy over `rows` of `data`; when `grad` is nonempty it
  // receives the mean gradient. A dropout seed switches the MLP into
  // training mode with masks drawn from that seed, row by row in the order
  // given, so equal seeds reproduce equal masks. Without a seed the
  // evaluation network is used (inverted dropout needs no rescaling).
  double loss_and_gradient(std::span<const double> w, const Dataset& data,
                           std::span<const std::size_t> rows,
                           std::optional<std::uint64_t> dropout_seed,
                           std::span<double> grad) const {
    require(w.size() == param_count(), ErrorCode::InvalidArgument, "parameter count mismatch");
    require(grad.empty() || grad.size() == param_count(), ErrorCode::InvalidArgument,
            "gradient buffer size mismatch");
    require(!rows.empty(), ErrorCode::InvalidArgument, "empty batch");
    require(data.dim == input_dim(), ErrorCode::InvalidArgument, "feature dimension mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
    double total = std::visit(
        [&](const auto& m) { return accumulate(m, w, data, rows, dropout_seed, grad); }, kind_);
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (double& g : grad) g *= inv;
    return total * inv;
  }

  Evaluation evaluate(std::span<const double> w, const Dataset& data) const {
    require(w.size() == param_count(), ErrorCode::InvalidArgument, "parameter count mismatch");
    require(!data.empty(), ErrorCode::InvalidArgument, "empty evaluation set");
    std::vector<double> logits(classes());
    std::vector<double> hidden;
    std::size_t correct = 0;
    double total = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      forward_eval(w, data.row(i), logits, hidden);
      if (detail::argmax(logits) == data.labels[i]) ++correct;
      total += detail::softmax_xent(logits, data.labels[i]);
    }
    const double n = static_cast<double>(data.size());
    return {static_cast<double>(correct) / n, total / n};
  }

 private:
  void forward_eval(std::span<const double> w, std::span<const double> x, std::vector<double>& logits,
                    std::vector<double>& hidden) const {
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, SoftmaxRegression>) {
            const double* W = w.data();
            const double* b = W + m.classes * m.dim;
            for (std::size_t c = 0; c < m.classes; ++c) {
              logits[c] = b[c] + std::inner_product(x.begin(), x.end(), W + c * m.dim, 0.0);
            }
          } else {
            const double* W1 = w.data();
            const double* b1 = W1 + m.hidden * m.dim;
            const double* W2 = b1 + m.hidden;
            const double* b2 = W2 + m.classes * m.hidden;
            hidden.resize(m.hidden);
            for (std::size_t h = 0; h < m.hidden; ++h) {
              double z = b1[h] + std::inner_product(x.begin(), x.end(), W1 + h * m.dim, 0.0);
              hidden[h] = z > 0 ? z : 0.0;
            }
            for (std::size_t c = 0; c < m.classes; ++c) {
              logits[c] =
                  b2[c] + std::inner_product(hidden.begin(), hidden.end(), W2 + c * m.hidden, 0.0);
            }
          }
        },
        kind_);
  }

  static double accumulate(const SoftmaxRegression& m, std::span<const double> w, const Dataset& data,
                           std::span<const std::size_t> rows, std::optional<std::uint64_t>,
                           std::span<double> grad) {
    const double* W = w.data();
    const double* b = W + m.classes * m.dim;
    std::vector<double> logits(m.classes);
    double total = 0;
    for (auto r : rows) {
      auto x = data.row(r);
      const Label y = data.labels[r];
      for (std::size_t c = 0; c < m.classes; ++c) {
        logits[c] = b[c] + std::inner_product(x.begin(), x.end(), W + c * m.dim, 0.0);
      }
      total += detail::softmax_xent(logits, y);
      if (grad.empty()) continue;
      double* gW = grad.data();
      double* gb = gW + m.classes * m.dim;
      for (std::size_t c = 0; c < m.classes; ++c) {
        const double delta = logits[c] - (c == y ? 1.0 : 0.0);
        gb[c] += delta;
        double* row = gW + c * m.dim;
        for (std::size_t j = 0; j < m.dim; ++j) row[j] += delta * x[j];
      }
    }
    return total;
  }

  static double accumulate(const OneHiddenMlp& m, std::span<const double> w, const Dataset& data,
                           std::span<const std::size_t> rows, std::optional<std::uint64_t> dropout_seed,
                           std::span<double> grad) {
    const double* W1 = w.data();
    const double* b1 = W1 + m.hidden * m.dim;
    const double* W2 = b1 + m.hidden;
    const double* b2 = W2 + m.classes * m.hidden;

    const bool training = dropout_seed.has_value() && m.dropout_rate > 0;
    Rng rng(dropout_seed.value_or(0));
    std::bernoulli_distribution keep(1.0 - m.dropout_rate);
    const double kept_scale = 1.0 / (1.0 - m.dropout_rate);

    std::vector<double> pre(m.hidden), act(m.hidden), scale(m.hidden, 1.0), logits(m.classes),
        back(m.hidden);
    double total = 0;
    for (auto r : rows) {
      auto x = data.row(r);
      const Label y = data.labels[r];
      for (std::size_t h = 0; h < m.hidden; ++h) {
        if (training) scale[h] = keep(rng) ? kept_scale : 0.0;
        pre[h] = b1[h] + std::inner_product(x.begin(), x.end(), W1 + h * m.dim, 0.0);
        act[h] = (pre[h] > 0 ? pre[h] : 0.0) * scale[h];
      }
      for (std::size_t c = 0; c < m.classes; ++c) {
        logits[c] = b2[c] + std::inner_product(act.begin(), act.end(), W2 + c * m.hidden, 0.0);
      }
      total += detail::softmax_xent(logits, y);
      if (grad.empty()) continue;

      double* gW1 = grad.data();
      double* gb1 = gW1 + m.hidden * m.dim;
      double* gW2 = gb1 + m.hidden;
      double* gb2 = gW2 + m.classes * m.hidden;
      std::fill(back.begin(), back.end(), 0.0);
      for (std::size_t c = 0; c < m.classes; ++c) {
        const double delta = logits[c] - (c == y ? 1.0 : 0.0);
        gb2[c] += delta;
        double* g_row = gW2 + c * m.hidden;
        const double* w_row = W2 + c * m.hidden;
        for (std::size_t h = 0; h < m.hidden; ++h) {
          g_row[h] += delta * act[h];
          back[h] += delta * w_row[h];
        }
      }
      for (std::size_t h = 0; h < m.hidden; ++h) {
        if (pre[h] <= 0 || scale[h] == 0.0) continue;
        const double d = back[h] * scale[h];
        gb1[h] += d;
        double* g_row = gW1 + h * m.dim;
        for (std::size_t j = 0; j < m.dim; ++j) g_row[j] += d * x[j];
      }
    }
    return total;
  }

  Kind kind_ = SoftmaxRegression{1, 1};
};

inline std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

inline double loss(const ModelSpec& spec, std::span<const double> w, const Dataset& batch,
                   std::optional<std::uint64_t> dropout_seed = std::nullopt) {
  auto rows = all_rows(batch);
  return spec.loss_and_gradient(w, batch, rows, dropout_seed, {});
}

inline ParamVector gradient(const ModelSpec& spec, std::span<const double> w, const Dataset& batch,
                            std::optional<std::uint64_t> dropout_seed = std::nullopt) {
  auto rows = all_rows(batch);
  ParamVector g(spec.param_count());
  spec.loss_and_gradient(w, batch, rows, dropout_seed, g);
  return g;
}

// What the simulator needs from a model. ModelSpec satisfies it; tests plug
// in toy models.
template <class M>
concept TrainableModel = requires(const M& m, std::span<const double> w, const Dataset& data,
                                  std::span<const std::size_t> rows,
                                  std::optional<std::uint64_t> seed, std::span<double> grad) {
  { m.param_count() } -> std::convertible_to<std::size_t>;
  { m.initial_params(std::uint64_t{}) } -> std::convertible_to<ParamVector>;
  { m.loss_and_gradient(w, data, rows, seed, grad) } -> std::convertible_to<double>;
  { m.evaluate(w, data) } -> std::convertible_to<Evaluation>;
};

static_assert(TrainableModel<ModelSpec>);

}  // namespace byzweight
