#pragma once

// Experiment orchestration: runners for the metric-learning methods, nested
// gamma selection, the resampling experiment and its output files.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "odml/dataset.hpp"
#include "odml/eval.hpp"
#include "odml/network.hpp"

namespace odml {

struct RunConfig {
  std::vector<std::string> datasets;  // bundled names or file paths
  NetworkConfig network;
  std::vector<double> gamma_grid{1e-3, 1e-2};
  SplitSpec split;
  int epochs = 20;
  int k = 5;
  std::vector<std::string> baselines{"euclidean", "moml"};
  std::filesystem::path out_dir = "odml_out";
  bool emit_embeddings = false;
  bool emit_layer_curve = false;
  bool pca_train_only = false;  // fit PCA on each training half instead of the whole set
  double nested_fraction = 0.8;
  int threads = 0;
  CsvSchema schema;

  void validate() const;
};

/// Applies one key=value setting (the same keys as the CLI flags).
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// Reads key=value lines; '#' starts a comment.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Locates a dataset by path, falling back to the bundled data directory.
std::filesystem::path resolve_dataset(const std::string& name_or_path);

// ---- fitted models ---------------------------------------------------------

class NetworkEmbedding final : public Embedding {
 public:
  explicit NetworkEmbedding(NetworkState net) : net_(std::move(net)) {}
  int num_taps() const override { return net_.num_layers() + 1; }
  Matrix embed(const Matrix& rows, int tap) const override { return embed_rows(net_, rows, tap); }
  const NetworkState& network() const { return net_; }

 private:
  NetworkState net_;
};

/// Single MOML layer; tap 0 is the input space, tap 1 the learned one.
class MomlEmbedding final : public Embedding {
 public:
  explicit MomlEmbedding(MetricLayer layer) : layer_(std::move(layer)) {}
  int num_taps() const override { return 2; }
  Matrix embed(const Matrix& rows, int tap) const override;
  const MetricLayer& layer() const { return layer_; }

 private:
  MetricLayer layer_;
};

/// Seed of the training stream for a fit made from `seed`.
std::uint64_t stream_seed(std::uint64_t seed);

NetworkState fit_network(const Dataset& train, const NetworkConfig& net_cfg, int epochs,
                         std::uint64_t seed);
MetricLayer fit_moml(const Dataset& train, const MomlConfig& cfg, int epochs, std::uint64_t seed);

/// Picks gamma from the grid by k-NN error of the final tap on a nested
/// holdout of `train`; ties keep the earlier grid entry.
double select_gamma(const Dataset& train, const RunConfig& cfg, std::uint64_t seed,
                    const std::function<std::unique_ptr<Embedding>(const Dataset&, double)>& fit);

Runner make_odml_runner(const RunConfig& cfg);
Runner make_moml_runner(const RunConfig& cfg);
Runner make_euclidean_runner();
/// Wraps a runner so PCA is fit on each training half (then rows are l2-normalized).
Runner with_train_only_pca(Runner inner, Index pca_dim);

std::vector<Method> build_methods(const RunConfig& cfg, Index raw_dim);

/// Preprocesses `raw` and runs the resampling protocol for the network and
/// the configured baselines; the network ("odml") is the t-test reference.
ExperimentReport run_dataset(const Dataset& raw, const RunConfig& cfg);

struct EmbeddingPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;
  int layer = 0;
};

/// 2-D PCA views (after l2 normalization) of every tap of one network fit
/// on the first resample's training half.
std::vector<EmbeddingPoint> layer_embeddings(const Dataset& raw, const RunConfig& cfg);

/// Error of every tap of a checkpointed network when `reference` is the
/// k-NN training set and `test` the query set.
std::vector<double> evaluate_checkpoint(const Checkpoint& cp, const Dataset& reference_raw,
                                        const Dataset& test_raw, int k);

/// Fits one network on the whole (preprocessed) dataset.
Checkpoint train_checkpoint(const Dataset& raw, const RunConfig& cfg);

// ---- output files ----------------------------------------------------------

void write_report_csv(std::ostream& out, const ExperimentReport& report);
/// Per-resample errors back into a report (no comparisons; see
/// compare_against_reference).
std::vector<ExperimentReport> read_report_csv(std::istream& in);
void write_summary_csv(std::ostream& out, const ExperimentReport& report);
void write_report_text(std::ostream& out, const ExperimentReport& report);
void write_layer_curve(std::ostream& out, const MethodResult& network_result);
void write_embeddings(std::ostream& out, const std::vector<EmbeddingPoint>& points);
void write_timing(std::ostream& out, const ExperimentReport& report);

class PhaseError : public Error {
 public:
  PhaseError(std::string phase, const std::string& what)
      : Error(phase + ": " + what), phase_(std::move(phase)) {}
  const std::string& phase() const { return phase_; }

 private:
  std::string phase_;
};

/// Runs every configured dataset and writes, per dataset, under
/// out_dir/<name>/: report.txt, report.csv, summary.csv, timing.txt and,
/// when enabled, layers.csv and embed.csv. Errors surface as PhaseError.
std::vector<ExperimentReport> run_experiment(const RunConfig& cfg);

}  // namespace odml
