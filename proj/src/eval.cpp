#include "odml/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "odml/stream.hpp"

namespace odml {

namespace {

int vote(std::span<const int> labels, std::span<const std::pair<double, Index>> nearest) {
  std::map<int, std::pair<int, double>> tally;  // label -> (count, summed distance)
  for (const auto& [sq, idx] : nearest) {
    auto& [count, dist] = tally[labels[static_cast<std::size_t>(idx)]];
    ++count;
    dist += std::sqrt(sq);
  }
  int best = tally.begin()->first;
  auto best_score = tally.begin()->second;
  for (const auto& [label, score] : tally) {
    const bool more = score.first > best_score.first;
    const bool closer = score.first == best_score.first && score.second < best_score.second;
    if (more || closer) {
      best = label;
      best_score = score;
    }
  }
  return best;
}

int knn_from_distances(const Vector& sq, std::span<const int> labels, int k) {
  const Index n = sq.size();
  const auto kk = static_cast<std::size_t>(std::min<Index>(k, n));
  std::vector<std::pair<double, Index>> d(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = {sq(i), i};
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
  return vote(labels, std::span(d.data(), kk));
}

void check_train(const Matrix& train, std::span<const int> labels, int k) {
  if (train.rows() == 0) throw EmptyTrainSet("k-NN needs at least one training point");
  if (static_cast<std::size_t>(train.rows()) != labels.size())
    throw LengthMismatch("k-NN training rows and labels differ in length");
  if (k < 1) throw ConfigError("k must be positive");
}

}  // namespace

int knn_classify(const Matrix& train, std::span<const int> labels, const Vector& query, int k) {
  check_train(train, labels, k);
  if (query.size() != train.cols()) throw DimMismatch("query dimension does not match k-NN set");
  const Vector sq = (train.rowwise() - query.transpose()).rowwise().squaredNorm();
  return knn_from_distances(sq, labels, k);
}

std::vector<int> knn_classify_rows(const Matrix& train, std::span<const int> labels,
                                   const Matrix& queries, int k) {
  check_train(train, labels, k);
  if (queries.cols() != train.cols()) throw DimMismatch("query dimension does not match k-NN set");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Index q = 0; q < queries.rows(); ++q) {
    const Vector sq = (train.rowwise() - queries.row(q)).rowwise().squaredNorm();
    out.push_back(knn_from_distances(sq, labels, k));
  }
  return out;
}

double error_rate(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size()) throw LengthMismatch("prediction/truth length mismatch");
  if (truth.empty()) throw LengthMismatch("error rate of an empty set");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predictions[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  if (num_resamples < 1) throw ConfigError("need at least one resample");
}

Split make_split(std::span<const int> labels, double train_fraction, std::uint64_t seed,
                 bool stratified) {
  Split split;
  auto take = [&](std::vector<Index> idx, std::uint64_t s) {
    const auto n = static_cast<long>(idx.size());
    std::mt19937_64 rng(s);
    std::shuffle(idx.begin(), idx.end(), rng);
    const long n_train = std::clamp(std::lround(train_fraction * static_cast<double>(n)), 1L, n - 1);
    split.train.insert(split.train.end(), idx.begin(), idx.begin() + n_train);
    split.test.insert(split.test.end(), idx.begin() + n_train, idx.end());
  };
  if (stratified) {
    std::map<int, std::vector<Index>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<Index>(i));
    for (auto& [label, idx] : by_class) {
      if (idx.size() < 2) {
        throw StratificationError("class " + std::to_string(label) +
                                  " has fewer than two samples and cannot be split");
      }
      take(std::move(idx), derive_seed(seed, 0x57a7, static_cast<std::uint64_t>(label)));
    }
  } else {
    if (labels.size() < 2) throw StratificationError("need at least two samples to split");
    std::vector<Index> idx(labels.size());
    std::iota(idx.begin(), idx.end(), Index(0));
    take(std::move(idx), derive_seed(seed, 0x57a7));
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

double MethodResult::mean_error(int tap) const {
  return mean(tap < 0 ? final_errors() : tap_errors.at(static_cast<std::size_t>(tap)));
}

double MethodResult::stddev_error(int tap) const {
  return stddev(tap < 0 ? final_errors() : tap_errors.at(static_cast<std::size_t>(tap)));
}

const MethodResult& ExperimentReport::method(std::string_view name) const {
  for (const MethodResult& m : methods)
    if (m.name == name) return m;
  throw ConfigError("report has no method '" + std::string(name) + "'");
}

bool operator==(const ExperimentReport& a, const ExperimentReport& b) {
  if (a.dataset != b.dataset || a.num_resamples != b.num_resamples || a.reference != b.reference ||
      a.methods.size() != b.methods.size() || a.comparisons.size() != b.comparisons.size())
    return false;
  for (std::size_t i = 0; i < a.methods.size(); ++i) {
    if (a.methods[i].name != b.methods[i].name || a.methods[i].tap_errors != b.methods[i].tap_errors)
      return false;
  }
  for (std::size_t i = 0; i < a.comparisons.size(); ++i) {
    const auto& x = a.comparisons[i];
    const auto& y = b.comparisons[i];
    if (x.method != y.method || x.test.verdict != y.test.verdict ||
        x.test.statistic != y.test.statistic || x.test.p_value != y.test.p_value ||
        x.test.dof != y.test.dof)
      return false;
  }
  return true;
}

void compare_against_reference(ExperimentReport& report, double alpha) {
  report.comparisons.clear();
  if (report.reference.empty() || report.num_resamples < 2) return;
  const MethodResult& ref = report.method(report.reference);
  for (const MethodResult& m : report.methods) {
    if (m.name == report.reference) continue;
    report.comparisons.push_back({m.name, pairwise_t_test(ref.final_errors(), m.final_errors(), alpha)});
  }
}

int default_thread_count() {
  if (const char* env = std::getenv("ODML_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentReport resample_protocol(const Dataset& data, const SplitSpec& spec,
                                   std::span<const Method> methods, const ProtocolOptions& opts) {
  spec.validate();
  const auto R = static_cast<std::size_t>(spec.num_resamples);
  const std::size_t M = methods.size();

  // results[r][m] = (per-tap errors, seconds)
  std::vector<std::vector<std::pair<std::vector<double>, double>>> results(
      R, std::vector<std::pair<std::vector<double>, double>>(M));

  auto run_one = [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(spec.seed, r);
    const Split split = make_split(data.labels, spec.train_fraction, seed, spec.stratified);
    const Dataset train = data.subset(split.train);
    const Dataset test = data.subset(split.test);
    for (std::size_t m = 0; m < M; ++m) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::unique_ptr<Embedding> emb = methods[m].runner(train, seed);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::vector<double> errs;
      for (int tap = 0; tap < emb->num_taps(); ++tap) {
        const Matrix ztr = emb->embed(train.features, tap);
        const Matrix zte = emb->embed(test.features, tap);
        errs.push_back(error_rate(knn_classify_rows(ztr, train.labels, zte, opts.k), test.labels));
      }
      results[r][m] = {std::move(errs), secs};
    }
  };

  const int threads = std::max(1, std::min<int>(opts.threads > 0 ? opts.threads : default_thread_count(),
                                                static_cast<int>(R)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    for (std::size_t r; (r = next.fetch_add(1)) < R;) {
      try {
        run_one(r);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = R;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentReport report;
  report.dataset = data.name;
  report.num_resamples = spec.num_resamples;
  report.reference = opts.reference;
  for (std::size_t m = 0; m < M; ++m) {
    MethodResult mr;
    mr.name = methods[m].name;
    const std::size_t taps = results[0][m].first.size();
    mr.tap_errors.assign(taps, std::vector<double>(R));
    for (std::size_t r = 0; r < R; ++r) {
      if (results[r][m].first.size() != taps) throw DimError("method changed its tap count between resamples");
      for (std::size_t t = 0; t < taps; ++t) mr.tap_errors[t][r] = results[r][m].first[t];
      mr.train_seconds.push_back(results[r][m].second);
    }
    report.methods.push_back(std::move(mr));
  }
  compare_against_reference(report, opts.alpha);
  return report;
}

}  // namespace odml
