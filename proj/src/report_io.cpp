#include <cstdio>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "odml/experiment.hpp"

namespace odml {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

const Comparison* find_comparison(const ExperimentReport& report, const std::string& method) {
  for (const Comparison& c : report.comparisons)
    if (c.method == method) return &c;
  return nullptr;
}

}  // namespace

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << "dataset,method,tap,resample,error\n";
  for (const MethodResult& m : report.methods)
    for (std::size_t tap = 0; tap < m.tap_errors.size(); ++tap)
      for (std::size_t r = 0; r < m.tap_errors[tap].size(); ++r)
        out << report.dataset << ',' << m.name << ',' << tap << ',' << r << ','
            << num(m.tap_errors[tap][r]) << '\n';
}

std::vector<ExperimentReport> read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "dataset,method,tap,resample,error")
    throw FormatError("report csv: missing header");
  std::vector<ExperimentReport> reports;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 5) throw ParseError(line_no, f.size() + 1, "expected 5 fields");
    std::size_t tap = 0;
    std::size_t resample = 0;
    double err = 0.0;
    try {
      tap = std::stoul(f[2]);
      resample = std::stoul(f[3]);
      err = std::stod(f[4]);
    } catch (const std::exception&) {
      throw ParseError(line_no, 3, "bad numeric field");
    }
    if (reports.empty() || reports.back().dataset != f[0]) {
      reports.emplace_back();
      reports.back().dataset = f[0];
    }
    ExperimentReport& rep = reports.back();
    if (rep.methods.empty() || rep.methods.back().name != f[1]) {
      rep.methods.emplace_back();
      rep.methods.back().name = f[1];
    }
    MethodResult& m = rep.methods.back();
    if (m.tap_errors.size() <= tap) m.tap_errors.resize(tap + 1);
    if (m.tap_errors[tap].size() <= resample) m.tap_errors[tap].resize(resample + 1);
    m.tap_errors[tap][resample] = err;
    rep.num_resamples = std::max(rep.num_resamples, static_cast<int>(resample + 1));
  }
  return reports;
}

void write_summary_csv(std::ostream& out, const ExperimentReport& report) {
  out << "dataset,method,tap,mean,std,vs_reference,t,p\n";
  for (const MethodResult& m : report.methods) {
    for (std::size_t tap = 0; tap < m.tap_errors.size(); ++tap) {
      out << report.dataset << ',' << m.name << ',' << tap << ',' << num(mean(m.tap_errors[tap])) << ','
          << num(stddev(m.tap_errors[tap]));
      const Comparison* c = tap + 1 == m.tap_errors.size() ? find_comparison(report, m.name) : nullptr;
      if (c != nullptr) {
        out << ',' << to_string(c->test.verdict) << ',' << num(c->test.statistic) << ','
            << num(c->test.p_value) << '\n';
      } else {
        out << ",,,\n";
      }
    }
  }
}

void write_report_text(std::ostream& out, const ExperimentReport& report) {
  out << "dataset: " << report.dataset << "   resamples: " << report.num_resamples
      << "   reference: " << (report.reference.empty() ? "-" : report.reference) << "\n\n";
  out << std::left << std::setw(12) << "method" << std::setw(5) << "tap" << std::setw(16)
      << "error" << std::setw(10) << "ref-vs" << std::setw(10) << "t" << "p\n";
  for (const MethodResult& m : report.methods) {
    for (std::size_t tap = 0; tap < m.tap_errors.size(); ++tap) {
      const auto& e = m.tap_errors[tap];
      out << std::left << std::setw(12) << m.name << std::setw(5) << tap << std::setw(16)
          << (fixed3(mean(e)) + " +- " + fixed3(stddev(e)));
      const Comparison* c = tap + 1 == m.tap_errors.size() ? find_comparison(report, m.name) : nullptr;
      if (c != nullptr) {
        char t[32];
        char p[32];
        std::snprintf(t, sizeof t, "%.3f", c->test.statistic);
        std::snprintf(p, sizeof p, "%.4f", c->test.p_value);
        out << std::setw(10) << to_string(c->test.verdict) << std::setw(10) << t << p;
      }
      out << '\n';
    }
  }
}

void write_layer_curve(std::ostream& out, const MethodResult& network_result) {
  const auto& taps = network_result.tap_errors;
  out << "resample";
  for (std::size_t t = 0; t < taps.size(); ++t) out << ",tap_" << t;
  out << '\n';
  const std::size_t R = taps.empty() ? 0 : taps.front().size();
  for (std::size_t r = 0; r < R; ++r) {
    out << r;
    for (const auto& col : taps) out << ',' << num(col[r]);
    out << '\n';
  }
  out << "mean";
  for (const auto& col : taps) out << ',' << num(mean(col));
  out << '\n';
}

void write_embeddings(std::ostream& out, const std::vector<EmbeddingPoint>& points) {
  out << "x,y,label,layer\n";
  for (const auto& p : points) out << num(p.x) << ',' << num(p.y) << ',' << p.label << ',' << p.layer << '\n';
}

void write_timing(std::ostream& out, const ExperimentReport& report) {
  out << "method,mean_train_seconds,total_train_seconds\n";
  for (const MethodResult& m : report.methods) {
    double total = 0.0;
    for (double s : m.train_seconds) total += s;
    out << m.name << ',' << num(mean(m.train_seconds)) << ',' << num(total) << '\n';
  }
}

}  // namespace odml
