#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "odml/dataset.hpp"

namespace odml {

// ---- k-NN -----------------------------------------------------------------

/// Majority label among the k nearest rows of `train` (Euclidean). Equal
/// distances keep the lower row index; a count tie goes to the class with
/// the smallest summed neighbor distance, then the smaller class id.
int knn_classify(const Matrix& train, std::span<const int> labels, const Vector& query, int k);

std::vector<int> knn_classify_rows(const Matrix& train, std::span<const int> labels,
                                   const Matrix& queries, int k);

double error_rate(std::span<const int> predictions, std::span<const int> truth);

// ---- statistics -----------------------------------------------------------

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double dof);
/// t with student_t_cdf(t, dof) == p.
double student_t_quantile(double p, double dof);

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> xs);

enum class Verdict { Win, Tie, Loss };
std::string to_string(Verdict v);

struct TTestResult {
  Verdict verdict = Verdict::Tie;
  double statistic = 0.0;  // t of mean(a - b)
  double p_value = 1.0;    // two-tailed
  int dof = 0;
};

/// Paired two-tailed t-test on a - b. Win means a is significantly lower.
/// Identical samples are a tie; a constant nonzero difference is decided
/// by its sign.
TTestResult pairwise_t_test(std::span<const double> a, std::span<const double> b,
                            double alpha = 0.05);

// ---- regret diagnostics ---------------------------------------------------

class RegretLog {
 public:
  void record(double loss);
  std::size_t steps() const { return losses_.size(); }
  std::span<const double> losses() const { return losses_; }
  std::span<const double> cumulative() const { return cumulative_; }

 private:
  std::vector<double> losses_;
  std::vector<double> cumulative_;
};

/// Average loss over the first t steps.
double regret_checkpoint(const RegretLog& log, std::size_t t);

// ---- resampling protocol --------------------------------------------------

struct SplitSpec {
  double train_fraction = 0.5;
  int num_resamples = 30;
  std::uint64_t seed = 0;
  bool stratified = true;

  void validate() const;
};

struct Split {
  std::vector<Index> train;
  std::vector<Index> test;
};

/// Random train/test partition; stratified splits round each class's share
/// and keep at least one sample of every class on both sides.
Split make_split(std::span<const int> labels, double train_fraction, std::uint64_t seed,
                 bool stratified);

/// A fitted feature map with one or more taps; the last tap is the final
/// representation.
class Embedding {
 public:
  virtual ~Embedding() = default;
  virtual int num_taps() const = 0;
  virtual Matrix embed(const Matrix& rows, int tap) const = 0;
};

class IdentityEmbedding final : public Embedding {
 public:
  int num_taps() const override { return 1; }
  Matrix embed(const Matrix& rows, int) const override { return rows; }
};

using Runner = std::function<std::unique_ptr<Embedding>(const Dataset& train, std::uint64_t seed)>;

struct Method {
  std::string name;
  Runner runner;
};

struct MethodResult {
  std::string name;
  std::vector<std::vector<double>> tap_errors;  // [tap][resample]
  std::vector<double> train_seconds;            // per resample; not written to reports

  const std::vector<double>& final_errors() const { return tap_errors.back(); }
  double mean_error(int tap = -1) const;
  double stddev_error(int tap = -1) const;
};

struct Comparison {
  std::string method;  // compared against the reference
  TTestResult test;    // reference vs method
};

struct ExperimentReport {
  std::string dataset;
  int num_resamples = 0;
  std::string reference;
  std::vector<MethodResult> methods;
  std::vector<Comparison> comparisons;

  const MethodResult& method(std::string_view name) const;
  friend bool operator==(const ExperimentReport& a, const ExperimentReport& b);
};

/// Recomputes the reference-vs-others t-tests from the stored errors.
void compare_against_reference(ExperimentReport& report, double alpha = 0.05);

/// Worker count from ODML_THREADS, else the hardware concurrency.
int default_thread_count();

struct ProtocolOptions {
  int k = 5;
  int threads = 0;  // 0: default_thread_count()
  std::string reference;
  double alpha = 0.05;
};

/// Every method sees the same seed-derived splits; resamples run on a
/// worker pool and merge by resample index.
ExperimentReport resample_protocol(const Dataset& data, const SplitSpec& spec,
                                   std::span<const Method> methods,
                                   const ProtocolOptions& opts = {});

}  // namespace odml
