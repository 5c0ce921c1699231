#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include "odml/network.hpp"

namespace odml::oracle {

inline Vector random_unit(std::mt19937_64& rng, Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(d);
  do {
    for (Index i = 0; i < d; ++i) v(i) = n(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

inline Matrix random_gaussian(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

/// Network with random general transforms L_i (metric = L^T L) and weights.
inline NetworkState random_network(std::mt19937_64& rng, Index d, int layers, TrainingMode mode) {
  std::uniform_real_distribution<double> w(0.2, 1.5);
  NetworkState net;
  net.mode = mode;
  for (int i = 0; i < layers; ++i) {
    MetricLayer layer = MetricLayer::identity(d);
    layer.transform = Matrix::Identity(d, d) + random_gaussian(rng, d, d, 0.5);
    layer.metric = SymMatrix<double>(Matrix(layer.transform.transpose() * layer.transform));
    layer.min_eigenvalue.reset();
    net.layers.push_back(layer);
    net.layer_weights.push_back(w(rng));
  }
  return net;
}

/// Smallest distance of the trace from a non-differentiable point: hinge
/// arguments at zero and pre-activations at a ReLU kink.
inline double kink_distance(const ForwardTrace& trace) {
  auto hinge_arg = [](const TripletVectors& v) {
    return 1.0 + (v[0] - v[1]).squaredNorm() - (v[0] - v[2]).squaredNorm();
  };
  const int n = trace.num_levels() - 1;
  double dist = std::abs(hinge_arg(trace.post.back()));
  for (int i = 1; i <= n; ++i) {
    const auto& z = trace.pre[static_cast<std::size_t>(i)];
    dist = std::min(dist, std::abs(hinge_arg(z)));
    if (i < n)
      for (const Vector& v : z) dist = std::min(dist, v.cwiseAbs().minCoeff());
  }
  return dist;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  double gradient_norm = 0.0;
};

/// Compares compute_gradients against central differences of
/// combined_loss(forward_pass(.)) in every L_i entry and every w_i.
inline GradientCheck check_gradients(const NetworkState& net, const TripletVectors& input,
                                     const NetworkConfig& cfg, double h = 1e-6) {
  const Gradients g = compute_gradients(net, forward_pass(net, input), cfg);
  auto loss_at = [&](const NetworkState& s) { return combined_loss(forward_pass(s, input), s, cfg); };

  std::vector<double> analytic;
  std::vector<double> numeric;
  for (int i = 0; i < net.num_layers(); ++i) {
    const auto li = static_cast<std::size_t>(i);
    for (Index e = 0; e < net.layers[li].transform.size(); ++e) {
      NetworkState plus = net;
      NetworkState minus = net;
      plus.layers[li].transform(e) += h;
      minus.layers[li].transform(e) -= h;
      analytic.push_back(g.transforms[li](e));
      numeric.push_back((loss_at(plus) - loss_at(minus)) / (2.0 * h));
    }
    if (cfg.mode != TrainingMode::BP) {
      NetworkState plus = net;
      NetworkState minus = net;
      plus.layer_weights[li] += h;
      minus.layer_weights[li] -= h;
      analytic.push_back(g.weights[li]);
      numeric.push_back((loss_at(plus) - loss_at(minus)) / (2.0 * h));
    }
  }
  double diff = 0.0, norm_a = 0.0, norm_n = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
    norm_a += analytic[k] * analytic[k];
    norm_n += numeric[k] * numeric[k];
  }
  GradientCheck out;
  out.gradient_norm = std::sqrt(norm_a);
  out.max_relative_error = std::sqrt(diff) / std::max({std::sqrt(norm_a), std::sqrt(norm_n), 1e-12});
  return out;
}

/// Exhaustive k-NN: sort every training row by (distance, index), vote,
/// break count ties by summed distance then class id.
inline int brute_force_knn(const Matrix& train, const std::vector<int>& labels, const Vector& q, int k) {
  std::vector<std::pair<double, Index>> all;
  for (Index i = 0; i < train.rows(); ++i) all.emplace_back((train.row(i).transpose() - q).norm(), i);
  std::sort(all.begin(), all.end());
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), all.size());
  std::map<int, std::pair<int, double>> votes;
  for (std::size_t j = 0; j < kk; ++j) {
    auto& v = votes[labels[static_cast<std::size_t>(all[j].second)]];
    v.first += 1;
    v.second += all[j].first;
  }
  int best = -1;
  std::pair<int, double> best_v{-1, 0.0};
  for (const auto& [label, v] : votes) {
    if (v.first > best_v.first || (v.first == best_v.first && v.second < best_v.second)) {
      best = label;
      best_v = v;
    }
  }
  return best;
}

/// Student t density integrated with composite Simpson from 0 to t.
inline double t_cdf_by_quadrature(double t, double dof) {
  const double c = std::exp(std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2)) /
                   std::sqrt(dof * std::numbers::pi);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / dof, -(dof + 1) / 2); };
  const int steps = 20000;
  const double a = 0.0, b = std::abs(t);
  const double h = (b - a) / steps;
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < steps; ++i) s += pdf(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  const double half = s * h / 3.0;
  return t >= 0 ? 0.5 + half : 0.5 - half;
}

}  // namespace odml::oracle
