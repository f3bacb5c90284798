#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/mlp/dataset.hpp"
#include "mvn/rng.hpp"

namespace mvn::mlp {

struct MlpShape {
  std::size_t inputs = 0;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 64;
  std::size_t classes = 0;

  /// p*h1 + h1 + h1*h2 + h2 + h2*k + k.
  [[nodiscard]] std::size_t param_count() const {
    return inputs * hidden1 + hidden1 + hidden1 * hidden2 + hidden2 + hidden2 * classes + classes;
  }

  void validate() const {
    if (inputs == 0 || hidden1 == 0 || hidden2 == 0) throw ConfigError("mlp: layer sizes must be >= 1");
    if (classes < 2) throw ConfigError("mlp: need at least 2 classes");
  }
};

/// Offsets of the parameter blocks inside the flat vector, in storage order
/// W1 (h1 x p), b1, W2 (h2 x h1), b2, W3 (k x h2), b3. Matrices are row-major.
struct ParamLayout {
  std::size_t offset[6] = {};
  std::size_t size[6] = {};

  explicit ParamLayout(const MlpShape& s) {
    size[0] = s.hidden1 * s.inputs;
    size[1] = s.hidden1;
    size[2] = s.hidden2 * s.hidden1;
    size[3] = s.hidden2;
    size[4] = s.classes * s.hidden2;
    size[5] = s.classes;
    for (int b = 1; b < 6; ++b) offset[b] = offset[b - 1] + size[b - 1];
  }
  static constexpr int blocks = 6;
};

/// Two-hidden-layer ReLU network with a softmax cross-entropy head. All
/// parameters live in one flat vector so they can be fed to the optimizer
/// directly.
class Mlp {
 public:
  using MatMap = Eigen::Map<Matrix>;
  using CMatMap = Eigen::Map<const Matrix>;
  using VecMap = Eigen::Map<Vector>;
  using CVecMap = Eigen::Map<const Vector>;

  /// Zero weights and biases.
  explicit Mlp(MlpShape shape) : shape_(shape), layout_((shape.validate(), shape)) {
    params_.assign(shape_.param_count(), 0.0);
  }

  /// Uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  Mlp(MlpShape shape, Rng& rng) : Mlp(shape) {
    const std::size_t fan[3][2] = {{shape_.inputs, shape_.hidden1},
                                   {shape_.hidden1, shape_.hidden2},
                                   {shape_.hidden2, shape_.classes}};
    for (int l = 0; l < 3; ++l) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan[l][0] + fan[l][1]));
      const int b = 2 * l;
      for (std::size_t i = 0; i < layout_.size[b]; ++i) {
        params_[layout_.offset[b] + i] = rng.uniform(-limit, limit);
      }
    }
  }

  [[nodiscard]] const MlpShape& shape() const { return shape_; }
  [[nodiscard]] const ParamLayout& layout() const { return layout_; }
  [[nodiscard]] std::span<double> params() { return params_; }
  [[nodiscard]] std::span<const double> params() const { return params_; }

  [[nodiscard]] CMatMap weight(int layer) const {
    const int b = 2 * layer;
    return {params_.data() + layout_.offset[b], rows(layer), cols(layer)};
  }
  [[nodiscard]] CVecMap bias(int layer) const {
    const int b = 2 * layer + 1;
    return {params_.data() + layout_.offset[b], rows(layer)};
  }

  [[nodiscard]] Eigen::Index rows(int layer) const {
    const std::size_t r[3] = {shape_.hidden1, shape_.hidden2, shape_.classes};
    return static_cast<Eigen::Index>(r[layer]);
  }
  [[nodiscard]] Eigen::Index cols(int layer) const {
    const std::size_t c[3] = {shape_.inputs, shape_.hidden1, shape_.hidden2};
    return static_cast<Eigen::Index>(c[layer]);
  }

 private:
  MlpShape shape_;
  ParamLayout layout_;
  std::vector<double> params_;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grads;  // same layout as Mlp::params()
};

namespace detail {

struct Forward {
  Matrix z1, a1, z2, a2, logits;
};

inline void check_batch(const Mlp& model, const Matrix& x, std::span<const int> y) {
  if (x.rows() == 0) throw ConfigError("forward_backward: empty batch");
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw ConfigError("forward_backward: batch has " + std::to_string(x.rows()) + " inputs but " +
                      std::to_string(y.size()) + " labels");
  }
  if (static_cast<std::size_t>(x.cols()) != model.shape().inputs) {
    throw ConfigError("forward_backward: input width " + std::to_string(x.cols()) +
                      " does not match model (" + std::to_string(model.shape().inputs) + ")");
  }
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= model.shape().classes) {
      throw ConfigError("forward_backward: label out of range");
    }
  }
}

inline Forward forward(const Mlp& model, const Matrix& x) {
  Forward f;
  f.z1 = (x * model.weight(0).transpose()).rowwise() + model.bias(0).transpose();
  f.a1 = f.z1.cwiseMax(0.0);
  f.z2 = (f.a1 * model.weight(1).transpose()).rowwise() + model.bias(1).transpose();
  f.a2 = f.z2.cwiseMax(0.0);
  f.logits = (f.a2 * model.weight(2).transpose()).rowwise() + model.bias(2).transpose();
  if (!f.logits.allFinite()) throw NumericError("forward: non-finite activations");
  return f;
}

/// Row-wise softmax probabilities and mean cross-entropy, via log-sum-exp.
inline double softmax_xent(const Matrix& logits, std::span<const int> y, Matrix* probs) {
  // Neumaier-compensated sum of per-example losses.
  double total = 0.0;
  double comp = 0.0;
  if (probs) probs->resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    const double term = lse - logits(i, y[static_cast<std::size_t>(i)]);
    const double next = total + term;
    comp += std::abs(total) >= std::abs(term) ? (total - next) + term : (term - next) + total;
    total = next;
    if (probs) probs->row(i) = (logits.row(i).array() - lse).exp().matrix();
  }
  return (total + comp) / static_cast<double>(logits.rows());
}

}  // namespace detail

inline double loss_only(const Mlp& model, const Matrix& x, std::span<const int> y) {
  detail::check_batch(model, x, y);
  return detail::softmax_xent(detail::forward(model, x).logits, y, nullptr);
}

/// Mean softmax cross-entropy over the batch and its exact gradient with
/// respect to every parameter. ReLU uses derivative 0 at 0.
inline LossAndGrad forward_backward(const Mlp& model, const Matrix& x, std::span<const int> y) {
  detail::check_batch(model, x, y);
  const detail::Forward f = detail::forward(model, x);
  Matrix dz3;
  LossAndGrad out;
  out.loss = detail::softmax_xent(f.logits, y, &dz3);
  const double inv_b = 1.0 / static_cast<double>(x.rows());
  for (Eigen::Index i = 0; i < dz3.rows(); ++i) dz3(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  dz3 *= inv_b;

  const ParamLayout& lay = model.layout();
  out.grads.assign(model.shape().param_count(), 0.0);
  auto wgrad = [&](int layer) {
    return Mlp::MatMap(out.grads.data() + lay.offset[2 * layer], model.rows(layer),
                       model.cols(layer));
  };
  auto bgrad = [&](int layer) {
    return Mlp::VecMap(out.grads.data() + lay.offset[2 * layer + 1], model.rows(layer));
  };

  wgrad(2) = dz3.transpose() * f.a2;
  bgrad(2) = dz3.colwise().sum().transpose();
  Matrix dz2 = (dz3 * model.weight(2)).cwiseProduct((f.z2.array() > 0.0).cast<double>().matrix());
  wgrad(1) = dz2.transpose() * f.a1;
  bgrad(1) = dz2.colwise().sum().transpose();
  Matrix dz1 = (dz2 * model.weight(1)).cwiseProduct((f.z1.array() > 0.0).cast<double>().matrix());
  wgrad(0) = dz1.transpose() * x;
  bgrad(0) = dz1.colwise().sum().transpose();
  return out;
}

/// Sign pattern of both hidden layers; finite differences are only
/// meaningful when a perturbation leaves it unchanged.
inline std::vector<bool> activation_pattern(const Mlp& model, const Matrix& x) {
  const detail::Forward f = detail::forward(model, x);
  std::vector<bool> pat;
  pat.reserve(static_cast<std::size_t>(f.z1.size() + f.z2.size()));
  for (Eigen::Index i = 0; i < f.z1.size(); ++i) pat.push_back(f.z1.data()[i] > 0.0);
  for (Eigen::Index i = 0; i < f.z2.size(); ++i) pat.push_back(f.z2.data()[i] > 0.0);
  return pat;
}

}  // namespace mvn::mlp
