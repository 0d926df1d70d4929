#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rlx/qnet.hpp"

namespace rlx {

/// Central-difference estimate of d/dθ (q[action] - td_target)^2 for every
/// parameter θ, evaluating only forward passes. With a mask, every
/// evaluation reuses it so the estimate targets the same stochastic network
/// the analytic gradient was taken through.
template <typename Scalar, typename Derived>
Gradients<Scalar> finite_difference_gradient(
    const QNetwork<Scalar>& net, const Eigen::MatrixBase<Derived>& input,
    int action, Scalar td_target, Scalar h,
    const std::optional<DropoutMask<Scalar>>& mask = std::nullopt) {
  if (!(h > 0)) throw std::invalid_argument("finite difference step must be > 0");
  auto loss_of = [&](const QNetwork<Scalar>& n) {
    const auto fwd = mask ? forward(n, input, *mask) : forward(n, input);
    const Scalar r = fwd.q(action, 0) - td_target;
    return r * r;
  };

  QNetwork<Scalar> probe = net;
  Gradients<Scalar> g;
  g.weights.resize(net.num_layers());
  g.biases.resize(net.num_layers());
  g.loss = loss_of(net);

  auto central = [&](Scalar& slot) {
    const Scalar saved = slot;
    slot = saved + h;
    const Scalar up = loss_of(probe);
    slot = saved - h;
    const Scalar down = loss_of(probe);
    slot = saved;
    return (up - down) / (Scalar(2) * h);
  };

  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& w = probe.weight(l);
    g.weights[l].resize(w.rows(), w.cols());
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        g.weights[l](r, c) = central(w(r, c));
    auto& b = probe.bias(l);
    g.biases[l].resize(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) g.biases[l](i) = central(b(i));
  }
  return g;
}

// |a - b| / max(|a|, |b|, 1e-8)
inline double gradient_relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

template <typename Scalar>
double max_relative_error(const ParameterSet<Scalar>& a,
                          const ParameterSet<Scalar>& b) {
  double worst = 0;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < a.weights[l].size(); ++i)
      worst = std::max(worst, gradient_relative_error(a.weights[l].data()[i],
                                                      b.weights[l].data()[i]));
    for (Eigen::Index i = 0; i < a.biases[l].size(); ++i)
      worst = std::max(worst, gradient_relative_error(a.biases[l](i),
                                                      b.biases[l](i)));
  }
  return worst;
}

template <typename Scalar>
double max_abs_difference(const ParameterSet<Scalar>& a,
                          const ParameterSet<Scalar>& b) {
  double worst = 0;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    worst = std::max(worst, static_cast<double>(
                                (a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff()));
    worst = std::max(worst, static_cast<double>(
                                (a.biases[l] - b.biases[l]).cwiseAbs().maxCoeff()));
  }
  return worst;
}

struct GradientCheckCase {
  LayerDims dims;
  bool dropout = false;
  std::uint64_t seed = 0;
  double max_relative_error = 0;
  bool passed = false;
};

struct GradientCheckReport {
  std::vector<GradientCheckCase> cases;
  double tolerance = 1e-4;
  bool passed() const {
    return std::all_of(cases.begin(), cases.end(),
                       [](const auto& c) { return c.passed; });
  }
};

/// Analytic vs central-difference gradients on `count` random networks,
/// cycling through a fixed list of shapes and alternating between the
/// deterministic pass and an active dropout mask (p = 0.3). Inputs are
/// uniform in [-1, 1], targets uniform in [-2, 2].
inline GradientCheckReport run_gradient_check(int count = 20,
                                              std::uint64_t seed = 2024,
                                              double h = 1e-5,
                                              double tolerance = 1e-4) {
  static const std::vector<LayerDims> shapes = {
      {4, 64, 64, 2}, {4, 2}, {3, 5, 2}, {4, 16, 8, 3}, {2, 32, 32, 4}};
  GradientCheckReport report;
  report.tolerance = tolerance;
  for (int i = 0; i < count; ++i) {
    GradientCheckCase c;
    c.dims = shapes[i % shapes.size()];
    c.dropout = (i / static_cast<int>(shapes.size())) % 2 == 1;
    c.seed = derive_run_seed(seed, "grad-check", static_cast<std::uint64_t>(i));
    Rng rng(c.seed);
    auto net = init_network<double>(c.dims, rng, c.dropout ? 0.3 : 0.0);
    for (auto& b : net.params().biases)
      for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = rng.uniform(-0.1, 0.1);
    VectorX<double> x(c.dims.front());
    for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = rng.uniform(-1.0, 1.0);
    const int action = static_cast<int>(rng.below(c.dims.back()));
    const double target = rng.uniform(-2.0, 2.0);

    const auto fwd = c.dropout ? forward(net, x, rng) : forward(net, x);
    const auto analytic = backward(net, fwd, action, target);
    const auto numeric =
        finite_difference_gradient(net, x, action, target, h, fwd.cache.mask);
    c.max_relative_error = max_relative_error(analytic, numeric);
    c.passed = c.max_relative_error < tolerance;
    report.cases.push_back(std::move(c));
  }
  return report;
}

}  // namespace rlx
