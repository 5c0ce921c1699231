#include "odml/network.hpp"

#include <algorithm>
#include <cmath>

namespace odml {

std::string to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::FP: return "fp";
    case TrainingMode::BP: return "bp";
    case TrainingMode::FBP: return "fbp";
  }
  return "fp";
}

TrainingMode parse_training_mode(const std::string& text) {
  std::string s = text;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "fp") return TrainingMode::FP;
  if (s == "bp") return TrainingMode::BP;
  if (s == "fbp") return TrainingMode::FBP;
  throw ConfigError("unknown training mode '" + text + "' (expected fp, bp or fbp)");
}

std::vector<double> log_spaced(double hi, double lo, int n) {
  std::vector<double> out;
  if (n == 1) return {hi};
  const double a = std::log10(hi);
  const double b = std::log10(lo);
  for (int k = 0; k < n; ++k) out.push_back(std::pow(10.0, a + (b - a) * k / (n - 1)));
  return out;
}

void NetworkConfig::validate() const {
  if (num_layers < 1) throw ConfigError("network needs at least one layer");
  if (lambda_reg < 0) throw ConfigError("lambda must be nonnegative");
  if (learning_rates.empty()) throw ConfigError("learning-rate list is empty");
  for (double lr : learning_rates)
    if (!(lr > 0)) throw ConfigError("learning rates must be positive");
  moml.validate();
}

NetworkState NetworkState::init(Index dim, const NetworkConfig& cfg) {
  cfg.validate();
  NetworkState net;
  net.layers.assign(static_cast<std::size_t>(cfg.num_layers), MetricLayer::identity(dim));
  net.layer_weights.assign(static_cast<std::size_t>(cfg.num_layers), 1.0);
  net.mode = cfg.mode;
  return net;
}

Vector relu(const Vector& v) { return v.cwiseMax(0.0); }

namespace {

TripletVectors ones_like(const TripletVectors& v) {
  return {Vector::Ones(v[0].size()), Vector::Ones(v[1].size()), Vector::Ones(v[2].size())};
}

TripletVectors mask_of(const TripletVectors& z) {
  TripletVectors m;
  for (std::size_t s = 0; s < 3; ++s) m[s] = (z[s].array() > 0.0).cast<double>().matrix();
  return m;
}

void start_trace(ForwardTrace& trace, const TripletVectors& input) {
  trace.pre.push_back(input);
  trace.post.push_back(input);
  trace.masks.push_back(ones_like(input));
}

// Appends layer output z; applies ReLU unless this is the last layer.
void push_level(ForwardTrace& trace, TripletVectors z, bool last) {
  if (last) {
    trace.masks.push_back(ones_like(z));
    trace.post.push_back(z);
  } else {
    TripletVectors h;
    for (std::size_t s = 0; s < 3; ++s) h[s] = relu(z[s]);
    trace.masks.push_back(mask_of(z));
    trace.post.push_back(std::move(h));
  }
  trace.pre.push_back(std::move(z));
}

TripletVectors to_vectors(const Triplet& t) {
  return {t.anchor.features, t.positive.features, t.negative.features};
}

void check_dim(const NetworkState& net, const TripletVectors& v) {
  for (const Vector& x : v)
    if (x.size() != net.dim()) throw DimMismatch("triplet dimension does not match network");
}

}  // namespace

StepResult forward_train_step(NetworkState net, const Triplet& t, const NetworkConfig& cfg) {
  TripletVectors cur = to_vectors(t);
  check_dim(net, cur);
  StepResult out;
  start_trace(out.trace, cur);
  const int n = net.num_layers();
  for (int i = 0; i < n; ++i) {
    MetricLayer& layer = net.layers[static_cast<std::size_t>(i)];
    const auto ctx = build_context(layer, cur[0], cur[1], cur[2]);
    out.trace.local_losses.push_back(ctx.loss);
    layer = moml_step(std::move(layer), ctx, cfg.moml);
    if (layer.dirty) layer = refresh_transform(std::move(layer), cfg.moml.eigen_floor);
    TripletVectors z;
    for (std::size_t s = 0; s < 3; ++s) z[s] = apply_transform(layer, cur[s]);
    push_level(out.trace, std::move(z), i == n - 1);
    cur = out.trace.post.back();
  }
  ++net.step;
  out.net = std::move(net);
  return out;
}

double triplet_hinge(const TripletVectors& v) {
  return std::max(0.0, (v[0] - v[1]).squaredNorm() + 1.0 - (v[0] - v[2]).squaredNorm());
}

ForwardTrace forward_pass(const NetworkState& net, const TripletVectors& input) {
  check_dim(net, input);
  ForwardTrace trace;
  start_trace(trace, input);
  const int n = net.num_layers();
  for (int i = 0; i < n; ++i) {
    const MetricLayer& layer = net.layers[static_cast<std::size_t>(i)];
    TripletVectors z;
    for (std::size_t s = 0; s < 3; ++s) z[s] = apply_transform(layer, trace.post.back()[s]);
    trace.local_losses.push_back(triplet_hinge(z));
    push_level(trace, std::move(z), i == n - 1);
  }
  return trace;
}

ForwardTrace forward_pass(const NetworkState& net, const Triplet& t) {
  return forward_pass(net, to_vectors(t));
}

double combined_loss(const ForwardTrace& trace, const NetworkState& net, const NetworkConfig& cfg) {
  double loss = 0.5 * triplet_hinge(trace.post.back());
  if (cfg.mode != TrainingMode::BP) {
    for (std::size_t i = 0; i < trace.local_losses.size(); ++i)
      loss += net.layer_weights[i] * trace.local_losses[i];
  }
  double reg = 0.0;
  for (const MetricLayer& layer : net.layers) {
    if (layer.dirty) throw StaleTransform("combined loss needs fresh transforms");
    reg += layer.transform.squaredNorm();
  }
  return loss + 0.5 * cfg.lambda_reg * reg;
}

namespace {

// d/dz of [1 + ||z_t - z_p||^2 - ||z_t - z_q||^2]_+ scaled by coef; zero on
// the passive side of the hinge, including the kink.
void add_hinge_gradient(const TripletVectors& z, double coef, TripletVectors& g) {
  if (coef == 0.0 || triplet_hinge(z) <= 0.0) return;
  g[0] += coef * 2.0 * (z[2] - z[1]);
  g[1] += coef * -2.0 * (z[0] - z[1]);
  g[2] += coef * 2.0 * (z[0] - z[2]);
}

}  // namespace

Gradients compute_gradients(const NetworkState& net, const ForwardTrace& trace,
                            const NetworkConfig& cfg) {
  const int n = net.num_layers();
  if (trace.num_levels() != n + 1) throw DimMismatch("trace depth does not match network");
  const bool use_local = cfg.mode != TrainingMode::BP;
  const Index d = net.dim();

  Gradients grads;
  grads.transforms.assign(static_cast<std::size_t>(n), Matrix::Zero(d, d));
  grads.weights.assign(static_cast<std::size_t>(n), 0.0);

  TripletVectors gz{Vector::Zero(d), Vector::Zero(d), Vector::Zero(d)};
  for (int i = n; i >= 1; --i) {
    const auto li = static_cast<std::size_t>(i - 1);
    const TripletVectors& z = trace.pre[static_cast<std::size_t>(i)];
    if (i == n) add_hinge_gradient(z, 0.5, gz);
    if (use_local) {
      add_hinge_gradient(z, net.layer_weights[li], gz);
      grads.weights[li] = trace.local_losses[li];
    }
    const TripletVectors& h_in = trace.post[static_cast<std::size_t>(i - 1)];
    const Matrix& L = net.layers[li].transform;
    Matrix& dL = grads.transforms[li];
    for (std::size_t s = 0; s < 3; ++s) dL.noalias() += gz[s] * h_in[s].transpose();
    dL += cfg.lambda_reg * L;
    if (i > 1) {
      const TripletVectors& mask = trace.masks[static_cast<std::size_t>(i - 1)];
      for (std::size_t s = 0; s < 3; ++s)
        gz[s] = (L.transpose() * gz[s]).cwiseProduct(mask[s]);
    }
  }
  for (const Matrix& g : grads.transforms)
    if (!g.allFinite()) throw NonFiniteGradient("non-finite transform gradient");
  for (double g : grads.weights)
    if (!std::isfinite(g)) throw NonFiniteGradient("non-finite layer-weight gradient");
  return grads;
}

NetworkState backward_step(NetworkState net, const ForwardTrace& trace, const NetworkConfig& cfg,
                           double lr) {
  const Gradients grads = compute_gradients(net, trace, cfg);
  bool all_zero = true;
  for (const Matrix& g : grads.transforms) all_zero = all_zero && g.isZero(0.0);
  for (double g : grads.weights) all_zero = all_zero && g == 0.0;
  if (all_zero) return net;

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    MetricLayer& layer = net.layers[i];
    Matrix L = layer.transform - lr * grads.transforms[i];
    if (!L.allFinite()) throw NonFiniteGradient("transform diverged");
    const SymMatrix<double> m(Matrix(L.transpose() * L));
    const EigenPair<double> eig = sym_eigen(m);
    const double floor = cfg.moml.eigen_floor;
    if (eig.min_value() < floor) {
      layer.metric = spectral_map(eig, [floor](double l) { return std::max(l, floor); });
      layer.min_eigenvalue = floor;
    } else {
      layer.metric = m;
      layer.min_eigenvalue = eig.min_value();
    }
    layer.transform = std::move(L);
    layer.dirty = false;
    if (cfg.mode != TrainingMode::BP) {
      net.layer_weights[i] = std::max(0.0, net.layer_weights[i] - lr * grads.weights[i]);
    }
  }
  return net;
}

double scheduled_rate(const std::vector<double>& rates, std::size_t k, std::size_t total) {
  if (rates.empty()) throw ConfigError("learning-rate list is empty");
  if (total == 0) return rates.front();
  const std::size_t idx = std::min(rates.size() - 1, k * rates.size() / total);
  return rates[idx];
}

namespace {

NetworkState backward_with_retry(const NetworkState& net, const ForwardTrace& trace,
                                 const NetworkConfig& cfg, double lr) {
  try {
    return backward_step(net, trace, cfg, lr);
  } catch (const NonFiniteGradient&) {
    return backward_step(net, trace, cfg, 0.5 * lr);
  }
}

}  // namespace

NetworkState train(NetworkState net, std::span<const Triplet> triplets, const NetworkConfig& cfg) {
  const std::size_t total = triplets.size();
  for (std::size_t k = 0; k < total; ++k) {
    const Triplet& t = triplets[k];
    switch (cfg.mode) {
      case TrainingMode::FP:
        net = forward_train_step(std::move(net), t, cfg).net;
        break;
      case TrainingMode::BP: {
        const ForwardTrace trace = forward_pass(net, t);
        net = backward_with_retry(net, trace, cfg, scheduled_rate(cfg.learning_rates, k, total));
        ++net.step;
        break;
      }
      case TrainingMode::FBP: {
        net = forward_train_step(std::move(net), t, cfg).net;
        // gradients must see the parameters the FP step just produced
        const ForwardTrace trace = forward_pass(net, t);
        net = backward_with_retry(net, trace, cfg, scheduled_rate(cfg.learning_rates, k, total));
        break;
      }
    }
  }
  return net;
}

Vector embed(const NetworkState& net, const Vector& v, int upto_layer) {
  const int n = net.num_layers();
  if (upto_layer < 0 || upto_layer > n) throw DimError("tap index outside [0, n]");
  Vector x = v;
  for (int i = 0; i < upto_layer; ++i) {
    x = apply_transform(net.layers[static_cast<std::size_t>(i)], x);
    if (i < n - 1) x = relu(x);
  }
  return x;
}

Matrix embed_rows(const NetworkState& net, const Matrix& rows, int upto_layer) {
  const int n = net.num_layers();
  if (upto_layer < 0 || upto_layer > n) throw DimError("tap index outside [0, n]");
  if (rows.cols() != net.dim()) throw DimMismatch("row dimension does not match network");
  Matrix x = rows;
  for (int i = 0; i < upto_layer; ++i) {
    const MetricLayer& layer = net.layers[static_cast<std::size_t>(i)];
    if (layer.dirty) throw StaleTransform("layer transform is stale; refresh before embedding");
    x = x * layer.transform.transpose();
    if (i < n - 1) x = x.cwiseMax(0.0);
  }
  return x;
}

}  // namespace odml
