#pragma once

// Mahalanobis-based online metric learning layer.
//
// Each step sees a triplet <x_t, x_p, x_q> and the rank-two matrix
//   A = (x_t - x_p)(x_t - x_p)^T - (x_t - x_q)(x_t - x_q)^T,
// suffers the hinge loss [1 + Tr(M A)]_+ and, when it is positive, moves
// M <- M - gamma * A. The step size is capped so M stays PSD:
// lambda(M - g A) >= lambda_min(M) - g * ||x_t - x_p||^2, so any
// g <= lambda_min(M) / max(4, ||x_t - x_p||^2) keeps lambda_min >= 0
// (for unit-norm inputs the cap is lambda_min / 4).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>

#include "odml/linalg.hpp"
#include "odml/stream.hpp"

namespace odml {

struct MomlConfig {
  double gamma = 1e-2;
  double margin = 1.0;
  double eigen_floor = 0.0;         // floor for the square root
  double projection_floor = 1e-10;  // floor for the non-adaptive fallback
  bool adaptive_gamma = true;

  void validate() const {
    if (!(gamma > 0)) throw ConfigError("gamma must be positive");
    if (margin != 1.0) throw ConfigError("margin is fixed at 1");
    if (eigen_floor < 0 || projection_floor < 0) throw ConfigError("eigen floors must be >= 0");
  }
};

template <typename Scalar>
struct MetricLayerState {
  SymMatrix<Scalar> metric;     // M
  MatrixX<Scalar> transform;    // L with L^T L == M (symmetric unless trained by SGD)
  bool dirty = false;           // transform lags behind metric
  std::int64_t update_count = 0;
  std::int64_t projection_count = 0;
  std::optional<Scalar> min_eigenvalue;  // lambda_min(metric) when known

  static MetricLayerState identity(Index dim) {
    MetricLayerState s;
    s.metric = SymMatrix<Scalar>::identity(dim);
    s.transform = MatrixX<Scalar>::Identity(dim, dim);
    s.min_eigenvalue = Scalar(1);
    return s;
  }

  Index dim() const { return metric.dim(); }
};

template <typename Scalar>
struct TripletUpdateContext {
  SymMatrix<Scalar> a_matrix;
  Scalar loss = 0;
  bool active = false;
  Scalar positive_sq = 0;  // ||x_t - x_p||^2
  Scalar negative_sq = 0;  // ||x_t - x_q||^2
};

template <typename Scalar>
TripletUpdateContext<Scalar> build_context(const MetricLayerState<Scalar>& state,
                                           const VectorX<Scalar>& anchor,
                                           const VectorX<Scalar>& positive,
                                           const VectorX<Scalar>& negative) {
  const Index d = state.dim();
  if (anchor.size() != d || positive.size() != d || negative.size() != d) {
    throw DimMismatch("triplet dimension does not match layer dimension " + std::to_string(d));
  }
  const VectorX<Scalar> u = anchor - positive;
  const VectorX<Scalar> w = anchor - negative;
  TripletUpdateContext<Scalar> ctx;
  ctx.a_matrix = SymMatrix<Scalar>(MatrixX<Scalar>(u * u.transpose() - w * w.transpose()));
  ctx.positive_sq = u.squaredNorm();
  ctx.negative_sq = w.squaredNorm();
  const Scalar trace_ma = state.metric.dense().cwiseProduct(ctx.a_matrix.dense()).sum();
  ctx.loss = std::max(Scalar(0), Scalar(1) + trace_ma);
  ctx.active = ctx.loss > Scalar(0);
  return ctx;
}

inline TripletUpdateContext<double> build_context(const MetricLayerState<double>& state,
                                                  const Triplet& t) {
  return build_context(state, t.anchor.features, t.positive.features, t.negative.features);
}

/// gamma_eff used by the adaptive rule; needs lambda_min of the current metric.
template <typename Scalar>
Scalar adaptive_gamma(Scalar gamma, Scalar lambda_min, Scalar positive_sq) {
  const Scalar cap = std::max(Scalar(0), lambda_min) / std::max(Scalar(4), positive_sq);
  return std::min(gamma, cap);
}

/// Passive-aggressive update. Passive (state untouched) on zero loss.
///
/// Adaptive mode caps gamma from lambda_min(M), which is taken from the
/// cached value of the last decomposition when one is current. Fallback
/// mode takes the nominal step and projects onto {lambda >= projection_floor};
/// the same decomposition also yields the fresh transform.
template <typename Scalar>
MetricLayerState<Scalar> moml_step(MetricLayerState<Scalar> state,
                                   const TripletUpdateContext<Scalar>& ctx,
                                   const MomlConfig& cfg) {
  if (!ctx.active) return state;
  const Scalar gamma = static_cast<Scalar>(cfg.gamma);
  if (cfg.adaptive_gamma) {
    if (!state.min_eigenvalue) state.min_eigenvalue = sym_eigen(state.metric).min_value();
    const Scalar g = adaptive_gamma(gamma, *state.min_eigenvalue, ctx.positive_sq);
    state.metric = SymMatrix<Scalar>(MatrixX<Scalar>(state.metric.dense() - g * ctx.a_matrix.dense()));
    state.min_eigenvalue.reset();
    state.dirty = true;
  } else {
    const SymMatrix<Scalar> stepped(MatrixX<Scalar>(state.metric.dense() - gamma * ctx.a_matrix.dense()));
    const EigenPair<Scalar> eig = sym_eigen(stepped);
    const Scalar floor = static_cast<Scalar>(cfg.projection_floor);
    if (eig.min_value() < floor) {
      ++state.projection_count;
      state.metric = spectral_map(eig, [floor](Scalar l) { return std::max(l, floor); });
      state.min_eigenvalue = floor;
    } else {
      state.metric = stepped;
      state.min_eigenvalue = eig.min_value();
    }
    state.transform = sqrt_from_eigen(eig, std::max(floor, static_cast<Scalar>(cfg.eigen_floor))).dense();
    state.dirty = false;
  }
  ++state.update_count;
  return state;
}

/// Recomputes L as the principal square root of M.
template <typename Scalar>
MetricLayerState<Scalar> refresh_transform(MetricLayerState<Scalar> state, Scalar floor = 0) {
  const EigenPair<Scalar> eig = sym_eigen(state.metric);
  state.min_eigenvalue = eig.min_value();
  state.transform = sqrt_from_eigen(eig, floor).dense();
  state.dirty = false;
  return state;
}

template <typename Scalar>
VectorX<Scalar> apply_transform(const MetricLayerState<Scalar>& state, const VectorX<Scalar>& v) {
  if (state.dirty) throw StaleTransform("layer transform is stale; refresh before applying");
  if (v.size() != state.dim()) throw DimMismatch("vector dimension does not match layer");
  return state.transform * v;
}

/// ||A||_F for the triplet's A matrix; at most 8 for unit-norm samples.
template <typename Scalar>
Scalar a_frobenius_norm(const VectorX<Scalar>& anchor, const VectorX<Scalar>& positive,
                        const VectorX<Scalar>& negative) {
  const VectorX<Scalar> u = anchor - positive;
  const VectorX<Scalar> w = anchor - negative;
  return (u * u.transpose() - w * w.transpose()).norm();
}

inline double a_frobenius_bound_check(const Triplet& t) {
  return a_frobenius_norm(t.anchor.features, t.positive.features, t.negative.features);
}

/// Per-step objective 1/2 ||M - M_prev||_F^2 + gamma [1 + Tr(M A)]_+.
template <typename Scalar>
Scalar moml_objective(const MatrixX<Scalar>& m, const MatrixX<Scalar>& m_prev,
                      const SymMatrix<Scalar>& a, Scalar gamma) {
  const Scalar hinge = std::max(Scalar(0), Scalar(1) + m.cwiseProduct(a.dense()).sum());
  return Scalar(0.5) * (m - m_prev).squaredNorm() + gamma * hinge;
}

/// Plain single-layer MOML over a triplet stream; `losses`, when given,
/// receives the loss suffered at every step.
inline MetricLayerState<double> train_moml(MetricLayerState<double> state,
                                           std::span<const Triplet> triplets,
                                           const MomlConfig& cfg,
                                           std::vector<double>* losses = nullptr) {
  for (const Triplet& t : triplets) {
    const auto ctx = build_context(state, t);
    if (losses != nullptr) losses->push_back(ctx.loss);
    state = moml_step(std::move(state), ctx, cfg);
    if (state.dirty) state = refresh_transform(std::move(state), cfg.eigen_floor);
  }
  return state;
}

}  // namespace odml
