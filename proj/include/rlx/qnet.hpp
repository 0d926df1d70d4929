#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlx/rng.hpp"

namespace rlx {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using LayerDims = std::vector<Eigen::Index>;

// Nonlinearity between hidden layers. The output layer is always linear.
enum class Activation { kRelu, kIdentity, kTanh };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

inline Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

inline void validate_layer_dims(const LayerDims& dims) {
  if (dims.size() < 2)
    throw std::invalid_argument("layer_dims needs at least 2 entries");
  for (const auto d : dims)
    if (d <= 0) throw std::invalid_argument("layer_dims entries must be positive");
}

/// Per-layer weights and biases. Layer l maps dims[l] inputs to dims[l+1]
/// outputs, so weights[l] is (dims[l+1] x dims[l]).
template <typename Scalar>
struct ParameterSet {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;

  static ParameterSet zeros(const LayerDims& dims) {
    ParameterSet p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      p.weights.push_back(MatrixX<Scalar>::Zero(dims[l + 1], dims[l]));
      p.biases.push_back(VectorX<Scalar>::Zero(dims[l + 1]));
    }
    return p;
  }

  bool congruent(const ParameterSet& other) const {
    if (weights.size() != other.weights.size() ||
        biases.size() != other.biases.size())
      return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != other.weights[l].rows() ||
          weights[l].cols() != other.weights[l].cols() ||
          biases[l].size() != other.biases[l].size())
        return false;
    }
    return true;
  }

  Eigen::Index size() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      n += weights[l].size() + biases[l].size();
    return n;
  }

  void set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
  }

  Scalar squared_norm() const {
    Scalar s = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      s += weights[l].squaredNorm() + biases[l].squaredNorm();
    return s;
  }

  ParameterSet& operator*=(Scalar k) {
    for (auto& w : weights) w *= k;
    for (auto& b : biases) b *= k;
    return *this;
  }

  ParameterSet& operator+=(const ParameterSet& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += other.weights[l];
      biases[l] += other.biases[l];
    }
    return *this;
  }

  bool operator==(const ParameterSet&) const = default;
};

/// Gradient of the squared TD loss, shaped like the network parameters.
template <typename Scalar>
struct Gradients : ParameterSet<Scalar> {
  Scalar loss = 0;
};

template <typename Scalar>
class QNetwork {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  // Zero-initialized network.
  explicit QNetwork(LayerDims layer_dims, Scalar dropout_rate = 0,
                    Activation activation = Activation::kRelu)
      : dims_(std::move(layer_dims)), activation_(activation) {
    validate_layer_dims(dims_);
    set_dropout_rate(dropout_rate);
    params_ = ParameterSet<Scalar>::zeros(dims_);
  }

  const LayerDims& layer_dims() const { return dims_; }
  std::size_t num_layers() const { return dims_.size() - 1; }
  Eigen::Index input_size() const { return dims_.front(); }
  Eigen::Index action_count() const { return dims_.back(); }

  Scalar dropout_rate() const { return dropout_rate_; }
  void set_dropout_rate(Scalar p) {
    if (!(p >= 0 && p < 1))
      throw std::invalid_argument("dropout_rate must lie in [0, 1)");
    dropout_rate_ = p;
  }

  Activation activation() const { return activation_; }
  void set_activation(Activation a) { activation_ = a; }

  Matrix& weight(std::size_t l) { return params_.weights.at(l); }
  const Matrix& weight(std::size_t l) const { return params_.weights.at(l); }
  Vector& bias(std::size_t l) { return params_.biases.at(l); }
  const Vector& bias(std::size_t l) const { return params_.biases.at(l); }

  ParameterSet<Scalar>& params() { return params_; }
  const ParameterSet<Scalar>& params() const { return params_; }

  // Throws std::logic_error if any parameter shape breaks the chain
  // weights[l] : dims[l+1] x dims[l].
  void check_invariants() const {
    if (params_.weights.size() != num_layers() ||
        params_.biases.size() != num_layers())
      throw std::logic_error("QNetwork: layer count mismatch");
    for (std::size_t l = 0; l < num_layers(); ++l) {
      if (params_.weights[l].rows() != dims_[l + 1] ||
          params_.weights[l].cols() != dims_[l] ||
          params_.biases[l].size() != dims_[l + 1])
        throw std::logic_error("QNetwork: parameter shape breaks layer chain");
    }
  }

  bool same_architecture(const QNetwork& other) const {
    return dims_ == other.dims_;
  }

  bool operator==(const QNetwork&) const = default;

 private:
  LayerDims dims_;
  Scalar dropout_rate_ = 0;
  Activation activation_ = Activation::kRelu;
  ParameterSet<Scalar> params_;
};

using QNetworkd = QNetwork<double>;

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
/// Weights are drawn layer by layer in row-major order.
template <typename Scalar = double>
QNetwork<Scalar> init_network(const LayerDims& dims, Rng& rng,
                              Scalar dropout_rate = 0,
                              Activation activation = Activation::kRelu) {
  QNetwork<Scalar> net(dims, dropout_rate, activation);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& w = net.weight(l);
    const double bound =
        std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
  }
  return net;
}

/// One {0, 1/(1-p)} matrix per hidden layer, one column per batch member.
template <typename Scalar>
struct DropoutMask {
  std::vector<MatrixX<Scalar>> layers;
  Scalar scale = 1;
  std::uint64_t rng_tag = 0;
};

template <typename Scalar>
DropoutMask<Scalar> sample_dropout_mask(const QNetwork<Scalar>& net,
                                        Eigen::Index batch, Rng& rng) {
  DropoutMask<Scalar> mask;
  const Scalar p = net.dropout_rate();
  mask.scale = Scalar(1) / (Scalar(1) - p);
  mask.rng_tag = rng.fingerprint();
  const auto& dims = net.layer_dims();
  for (std::size_t l = 1; l + 1 < dims.size(); ++l) {
    MatrixX<Scalar> m(dims[l], batch);
    for (Eigen::Index c = 0; c < batch; ++c)
      for (Eigen::Index r = 0; r < dims[l]; ++r)
        m(r, c) = rng.uniform() < static_cast<double>(p) ? Scalar(0) : mask.scale;
    mask.layers.push_back(std::move(m));
  }
  return mask;
}

/// What backward() needs from a forward pass.
template <typename Scalar>
struct ForwardCache {
  LayerDims dims;
  Activation activation = Activation::kRelu;
  // inputs[l] is the input of layer l (post-activation, post-mask).
  std::vector<MatrixX<Scalar>> inputs;
  // Pre-activations of hidden layers.
  std::vector<MatrixX<Scalar>> hidden_pre;
  std::optional<DropoutMask<Scalar>> mask;
};

template <typename Scalar>
struct ForwardResult {
  MatrixX<Scalar> q;  // action_count x batch
  ForwardCache<Scalar> cache;
};

namespace detail {

template <typename Scalar>
MatrixX<Scalar> activate(const MatrixX<Scalar>& z, Activation a) {
  switch (a) {
    case Activation::kRelu: return z.cwiseMax(Scalar(0));
    case Activation::kIdentity: return z;
    case Activation::kTanh: return z.array().tanh().matrix();
  }
  return z;
}

template <typename Scalar>
MatrixX<Scalar> activation_derivative(const MatrixX<Scalar>& z, Activation a) {
  switch (a) {
    case Activation::kRelu:
      return (z.array() > Scalar(0)).template cast<Scalar>().matrix();
    case Activation::kIdentity:
      return MatrixX<Scalar>::Ones(z.rows(), z.cols());
    case Activation::kTanh:
      return (Scalar(1) - z.array().tanh().square()).matrix();
  }
  return z;
}

template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward_impl(const QNetwork<Scalar>& net,
                                   const Eigen::MatrixBase<Derived>& input,
                                   std::optional<DropoutMask<Scalar>> mask) {
  if (input.rows() != net.input_size())
    throw std::invalid_argument("forward: input length " +
                                std::to_string(input.rows()) + " != " +
                                std::to_string(net.input_size()));
  const Eigen::Index batch = input.cols();
  if (mask) {
    const auto& dims = net.layer_dims();
    if (mask->layers.size() + 2 != dims.size())
      throw std::invalid_argument("forward: mask layer count mismatch");
    for (std::size_t l = 0; l < mask->layers.size(); ++l)
      if (mask->layers[l].rows() != dims[l + 1] ||
          mask->layers[l].cols() != batch)
        throw std::invalid_argument("forward: mask shape mismatch");
  }

  ForwardResult<Scalar> out;
  auto& cache = out.cache;
  cache.dims = net.layer_dims();
  cache.activation = net.activation();
  cache.inputs.reserve(net.num_layers());
  cache.inputs.emplace_back(input.template cast<Scalar>());
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    MatrixX<Scalar> z = net.weight(l) * cache.inputs.back();
    z.colwise() += net.bias(l);
    MatrixX<Scalar> a = activate(z, net.activation());
    if (mask) a.array() *= mask->layers[l].array();
    cache.hidden_pre.push_back(std::move(z));
    cache.inputs.push_back(std::move(a));
  }
  const std::size_t last = net.num_layers() - 1;
  out.q = net.weight(last) * cache.inputs.back();
  out.q.colwise() += net.bias(last);
  cache.mask = std::move(mask);
  return out;
}

}  // namespace detail

/// Deterministic forward pass over a batch (one input per column).
template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const QNetwork<Scalar>& net,
                              const Eigen::MatrixBase<Derived>& input) {
  return detail::forward_impl<Scalar>(net, input,
                                     std::optional<DropoutMask<Scalar>>{});
}

/// Stochastic forward pass: a fresh dropout mask per batch member.
template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const QNetwork<Scalar>& net,
                              const Eigen::MatrixBase<Derived>& input,
                              Rng& rng) {
  return detail::forward_impl<Scalar>(
      net, input,
      std::optional<DropoutMask<Scalar>>(sample_dropout_mask(net, input.cols(), rng)));
}

/// Forward pass under a given mask.
template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const QNetwork<Scalar>& net,
                              const Eigen::MatrixBase<Derived>& input,
                              const DropoutMask<Scalar>& mask) {
  return detail::forward_impl<Scalar>(net, input,
                                     std::optional<DropoutMask<Scalar>>(mask));
}

// Deterministic Q-values of a single state.
template <typename Scalar, typename Derived>
VectorX<Scalar> q_values(const QNetwork<Scalar>& net,
                         const Eigen::MatrixBase<Derived>& state) {
  return forward(net, state).q.col(0);
}

/// Gradient of the batch-mean loss  mean_j (q[a_j, j] - y_j)^2.
///
/// Only the selected output of each column receives gradient; the mask
/// stored in the cache (if any) gates the backward signal exactly as it
/// gated the forward one.
template <typename Scalar>
Gradients<Scalar> backward(const QNetwork<Scalar>& net,
                           const ForwardResult<Scalar>& fwd,
                           std::span<const int> actions,
                           std::span<const Scalar> td_targets) {
  const auto& cache = fwd.cache;
  if (cache.dims != net.layer_dims() ||
      cache.inputs.size() != net.num_layers())
    throw std::invalid_argument("backward: cache does not belong to network");
  const Eigen::Index batch = fwd.q.cols();
  if (static_cast<Eigen::Index>(actions.size()) != batch ||
      static_cast<Eigen::Index>(td_targets.size()) != batch)
    throw std::invalid_argument("backward: batch size mismatch");

  Gradients<Scalar> g;
  g.weights.resize(net.num_layers());
  g.biases.resize(net.num_layers());

  MatrixX<Scalar> delta = MatrixX<Scalar>::Zero(net.action_count(), batch);
  Scalar loss = 0;
  const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const int a = actions[j];
    if (a < 0 || a >= net.action_count())
      throw std::out_of_range("backward: action index out of range");
    const Scalar residual = fwd.q(a, j) - td_targets[j];
    loss += residual * residual;
    delta(a, j) = Scalar(2) * residual * inv_batch;
  }
  g.loss = loss * inv_batch;

  for (std::size_t l = net.num_layers(); l-- > 0;) {
    g.weights[l].noalias() = delta * cache.inputs[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    MatrixX<Scalar> upstream = net.weight(l).transpose() * delta;
    if (cache.mask) upstream.array() *= cache.mask->layers[l - 1].array();
    delta = upstream.cwiseProduct(
        detail::activation_derivative(cache.hidden_pre[l - 1], cache.activation));
  }
  return g;
}

template <typename Scalar>
Gradients<Scalar> backward(const QNetwork<Scalar>& net,
                           const ForwardResult<Scalar>& fwd, int action,
                           Scalar td_target) {
  return backward(net, fwd, std::span<const int>(&action, 1),
                  std::span<const Scalar>(&td_target, 1));
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  ParameterSet<Scalar> first_moment;
  ParameterSet<Scalar> second_moment;
  std::int64_t step = 0;

  static AdamState for_network(const QNetwork<Scalar>& net) {
    AdamState s;
    s.first_moment = ParameterSet<Scalar>::zeros(net.layer_dims());
    s.second_moment = ParameterSet<Scalar>::zeros(net.layer_dims());
    return s;
  }
};

/// One Adam step on the (already batch-averaged) gradient.
template <typename Scalar>
void apply_update(QNetwork<Scalar>& net, const ParameterSet<Scalar>& grad,
                  AdamState<Scalar>& state, const AdamConfig& cfg = {}) {
  if (!grad.congruent(net.params()) ||
      !state.first_moment.congruent(net.params()) ||
      !state.second_moment.congruent(net.params()))
    throw std::invalid_argument("apply_update: shape mismatch");
  ++state.step;
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
  const Scalar eps = static_cast<Scalar>(cfg.epsilon);
  const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.step));
  const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.step));

  auto step = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  auto& p = net.params();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    step(p.weights[l], grad.weights[l], state.first_moment.weights[l],
         state.second_moment.weights[l]);
    step(p.biases[l], grad.biases[l], state.first_moment.biases[l],
         state.second_moment.biases[l]);
  }
  net.check_invariants();
}

// Rescale so the global L2 norm is at most max_norm. No-op for max_norm <= 0.
template <typename Scalar>
void clip_gradient_norm(ParameterSet<Scalar>& grad, Scalar max_norm) {
  if (max_norm <= 0) return;
  const Scalar norm = std::sqrt(grad.squared_norm());
  if (norm > max_norm) grad *= max_norm / norm;
}

}  // namespace rlx
