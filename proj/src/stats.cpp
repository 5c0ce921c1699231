#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "odml/eval.hpp"

namespace odml {

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) return h;
  }
  throw NonConvergence("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  if (t * t < dof) {
    // central form keeps resolution near t = 0
    const double half = 0.5 * incomplete_beta(0.5, 0.5 * dof, t * t / (dof + t * t));
    return t >= 0 ? 0.5 + half : 0.5 - half;
  }
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
  return t >= 0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("t quantile needs p in (0, 1)");
  double lo = -1.0;
  double hi = 1.0;
  while (student_t_cdf(lo, dof) > p) lo *= 2.0;
  while (student_t_cdf(hi, dof) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, std::fabs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, dof) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Win: return "win";
    case Verdict::Tie: return "tie";
    case Verdict::Loss: return "loss";
  }
  return "tie";
}

TTestResult pairwise_t_test(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size()) throw LengthMismatch("paired t-test needs equal-length samples");
  if (a.size() < 2) throw LengthMismatch("paired t-test needs at least two pairs");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];

  TTestResult r;
  r.dof = static_cast<int>(diff.size()) - 1;
  const double m = mean(diff);
  const double s = stddev(diff);
  if (s == 0.0) {
    if (m == 0.0) return r;
    r.statistic = m < 0 ? -std::numeric_limits<double>::infinity()
                        : std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
  } else {
    r.statistic = m / (s / std::sqrt(static_cast<double>(diff.size())));
    r.p_value = 2.0 * student_t_cdf(-std::fabs(r.statistic), r.dof);
  }
  if (r.p_value < alpha) r.verdict = m < 0 ? Verdict::Win : Verdict::Loss;
  return r;
}

void RegretLog::record(double loss) {
  if (!(loss >= 0.0)) throw ConfigError("instantaneous loss must be nonnegative");
  losses_.push_back(loss);
  cumulative_.push_back((cumulative_.empty() ? 0.0 : cumulative_.back()) + loss);
}

double regret_checkpoint(const RegretLog& log, std::size_t t) {
  if (t == 0 || t > log.steps()) throw DimError("regret checkpoint outside the logged range");
  return log.cumulative()[t - 1] / static_cast<double>(t);
}

}  // namespace odml
