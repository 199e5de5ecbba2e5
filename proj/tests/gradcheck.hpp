#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "slowdown/mlp.hpp"

namespace slowdown::testing {

struct GradCheckCase {
  MlpModel model;
  Eigen::MatrixXd batch;
  Eigen::MatrixXd targets;
  DropoutMasks masks;
  bool use_masks = false;
};

// Random small network and batch. Pre-activations within `margin` of a ReLU
// kink make finite differences meaningless, so such draws are rejected.
// `fixed` pins the layer sizes; otherwise they are drawn up to [6, 5, 5, out].
inline GradCheckCase random_gradcheck_case(std::mt19937_64& gen, Head head,
                                           const MlpModel::Dims* fixed = nullptr,
                                           double margin = 1e-3) {
  std::uniform_int_distribution<int> width(1, 5);
  std::uniform_int_distribution<int> in_width(1, 6);
  std::uniform_int_distribution<int> batch_size(1, 6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution keep(0.7);
  std::bernoulli_distribution with_masks(0.5);
  while (true) {
    const std::size_t out = head == Head::kSoftmaxClassifier ? 2 : 1;
    const MlpModel::Dims dims =
        fixed ? *fixed
              : MlpModel::Dims{static_cast<std::size_t>(in_width(gen)), static_cast<std::size_t>(width(gen)),
                               static_cast<std::size_t>(width(gen)), out};
    MlpModel model(dims, head);
    for (auto& layer : model.layers()) {
      layer.weights = layer.weights.unaryExpr([&](double) { return u(gen); });
      layer.biases = layer.biases.unaryExpr([&](double) { return 0.5 * u(gen); });
    }
    const auto& d = model.dims();
    const Eigen::Index b = batch_size(gen);
    GradCheckCase c{model, Eigen::MatrixXd(d[0], b), Eigen::MatrixXd(out, b), {}, with_masks(gen)};
    c.batch = c.batch.unaryExpr([&](double) { return u(gen); });
    for (Eigen::Index j = 0; j < b; ++j) {
      if (head == Head::kSoftmaxClassifier) {
        const int cls = static_cast<int>(gen() % 2);
        c.targets(0, j) = cls == 0 ? 1.0 : 0.0;
        c.targets(1, j) = cls == 1 ? 1.0 : 0.0;
      } else {
        c.targets(0, j) = 0.5 * (u(gen) + 1.0);
      }
    }
    if (c.use_masks) {
      const double scale = 1.0 / (1.0 - 0.3);
      c.masks.hidden1 = Eigen::MatrixXd(d[1], b).unaryExpr([&](double) { return keep(gen) ? scale : 0.0; });
      c.masks.hidden2 = Eigen::MatrixXd(d[2], b).unaryExpr([&](double) { return keep(gen) ? scale : 0.0; });
    }
    const auto cache = forward(c.model, c.batch, c.use_masks ? &c.masks : nullptr);
    const double closest = std::min(cache.z1.cwiseAbs().minCoeff(), cache.z2.cwiseAbs().minCoeff());
    if (closest > margin) return c;
  }
}

// Largest relative error between backward() and central differences over
// every weight and bias.
inline double max_gradient_error(const GradCheckCase& c, double eps = 1e-4) {
  const DropoutMasks* masks = c.use_masks ? &c.masks : nullptr;
  const auto analytic = backward(c.model, forward(c.model, c.batch, masks), c.targets);
  auto objective = [&](const MlpModel& m) {
    return loss(m.head(), forward(m, c.batch, masks).output, c.targets);
  };
  double worst = 0.0;
  MlpModel probe = c.model;
  auto check = [&](double& param, double grad) {
    const double saved = param;
    param = saved + eps;
    const double up = objective(probe);
    param = saved - eps;
    const double down = objective(probe);
    param = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(grad), std::abs(numeric), 1e-7});
    worst = std::max(worst, std::abs(grad - numeric) / denom);
  };
  for (std::size_t l = 0; l < 3; ++l) {
    auto& layer = probe.layers()[l];
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
        check(layer.weights(i, j), analytic[l].weights(i, j));
      }
      check(layer.biases(i), analytic[l].biases(i));
    }
  }
  return worst;
}

}  // namespace slowdown::testing
