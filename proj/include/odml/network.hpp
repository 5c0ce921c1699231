#pragma once

// Stacked metric layers with ReLU between them (none after the last).
//
// Training modes:
//   FP   each layer takes its closed-form MOML step during the forward pass.
//   BP   metrics frozen in the forward pass; SGD on every L_i against
//        1/2 G_triplet + lambda/2 sum ||L_i||_F^2.
//   FBP  FP step, then an SGD step on the full combined loss
//        1/2 G_triplet + sum w_i G_local^i + lambda/2 sum ||L_i||_F^2.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "odml/moml.hpp"

namespace odml {

using MetricLayer = MetricLayerState<double>;

enum class TrainingMode { FP, BP, FBP };

std::string to_string(TrainingMode mode);
TrainingMode parse_training_mode(const std::string& text);

/// n log-spaced values from `hi` down to `lo`.
std::vector<double> log_spaced(double hi, double lo, int n);

struct NetworkConfig {
  int num_layers = 3;
  MomlConfig moml;
  double lambda_reg = 1e-4;
  std::vector<double> learning_rates = log_spaced(1e-2, 1e-4, 20);
  TrainingMode mode = TrainingMode::FP;
  std::uint64_t seed = 0;

  void validate() const;
};

struct NetworkState {
  std::vector<MetricLayer> layers;
  std::vector<double> layer_weights;
  std::int64_t step = 0;
  TrainingMode mode = TrainingMode::FP;

  static NetworkState init(Index dim, const NetworkConfig& cfg);
  int num_layers() const { return static_cast<int>(layers.size()); }
  Index dim() const { return layers.empty() ? 0 : layers.front().dim(); }
};

/// Anchor, positive and negative vectors at one depth.
using TripletVectors = std::array<Vector, 3>;

/// Activations of one triplet through the stack. Level 0 is the input;
/// level i holds layer i's output before (pre) and after (post) its ReLU.
/// masks[i] marks where post[i] passed through (all ones at level n).
struct ForwardTrace {
  std::vector<TripletVectors> pre;
  std::vector<TripletVectors> post;
  std::vector<TripletVectors> masks;
  std::vector<double> local_losses;  // G_local^i, index i-1

  int num_levels() const { return static_cast<int>(post.size()); }
};

Vector relu(const Vector& v);

struct StepResult {
  NetworkState net;
  ForwardTrace trace;
};

/// One online FP step: every layer updates on its current input triplet,
/// refreshes its transform and maps the triplet forward.
StepResult forward_train_step(NetworkState net, const Triplet& t, const NetworkConfig& cfg);

/// Forward pass with every metric frozen. Local losses are measured on the
/// pre-activations: [1 + ||z_t - z_p||^2 - ||z_t - z_q||^2]_+.
ForwardTrace forward_pass(const NetworkState& net, const TripletVectors& input);
ForwardTrace forward_pass(const NetworkState& net, const Triplet& t);

double triplet_hinge(const TripletVectors& v);

double combined_loss(const ForwardTrace& trace, const NetworkState& net, const NetworkConfig& cfg);

struct Gradients {
  std::vector<Matrix> transforms;  // dG/dL_i
  std::vector<double> weights;     // dG/dw_i
};

Gradients compute_gradients(const NetworkState& net, const ForwardTrace& trace,
                            const NetworkConfig& cfg);

/// One SGD step on every L_i (and w_i outside BP mode); M_i is rebuilt as
/// L_i^T L_i. Throws NonFiniteGradient on divergence.
NetworkState backward_step(NetworkState net, const ForwardTrace& trace, const NetworkConfig& cfg,
                           double lr);

/// Learning rate used at position k of a stream of length total.
double scheduled_rate(const std::vector<double>& rates, std::size_t k, std::size_t total);

NetworkState train(NetworkState net, std::span<const Triplet> triplets, const NetworkConfig& cfg);

/// Feature vector after layers 1..upto_layer. Intermediate taps include the
/// ReLU that follows their layer.
Vector embed(const NetworkState& net, const Vector& v, int upto_layer);
Matrix embed_rows(const NetworkState& net, const Matrix& rows, int upto_layer);

// Checkpoint text format, first line "ODML1".
void save_checkpoint(std::ostream& out, const NetworkState& net, const NetworkConfig& cfg);
struct Checkpoint {
  NetworkState net;
  NetworkConfig cfg;
};
Checkpoint load_checkpoint(std::istream& in);

}  // namespace odml
