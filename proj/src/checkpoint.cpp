#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "odml/network.hpp"

namespace odml {

namespace {

constexpr const char* kMagic = "ODML1";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << num(m(i, j));
    out << '\n';
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::istringstream line() {
    std::string s;
    if (!std::getline(in_, s)) throw FormatError("checkpoint truncated");
    return std::istringstream(s);
  }

  // Reads "key v1 v2 ..." and checks the key.
  std::istringstream keyed(const std::string& key) {
    auto ss = line();
    std::string k;
    ss >> k;
    if (k != key) throw FormatError("checkpoint: expected '" + key + "', found '" + k + "'");
    return ss;
  }

  template <typename T>
  T value(const std::string& key) {
    auto ss = keyed(key);
    T v{};
    if (!(ss >> v)) throw FormatError("checkpoint: bad value for '" + key + "'");
    return v;
  }

  Matrix matrix(Index d) {
    Matrix m(d, d);
    for (Index i = 0; i < d; ++i) {
      auto ss = line();
      for (Index j = 0; j < d; ++j)
        if (!(ss >> m(i, j))) throw FormatError("checkpoint: short matrix row");
    }
    return m;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(std::ostream& out, const NetworkState& net, const NetworkConfig& cfg) {
  out << kMagic << '\n';
  out << "dim " << net.dim() << '\n';
  out << "layers " << net.num_layers() << '\n';
  out << "step " << net.step << '\n';
  out << "mode " << to_string(net.mode) << '\n';
  out << "gamma " << num(cfg.moml.gamma) << '\n';
  out << "margin " << num(cfg.moml.margin) << '\n';
  out << "eigen_floor " << num(cfg.moml.eigen_floor) << '\n';
  out << "projection_floor " << num(cfg.moml.projection_floor) << '\n';
  out << "adaptive_gamma " << (cfg.moml.adaptive_gamma ? 1 : 0) << '\n';
  out << "lambda " << num(cfg.lambda_reg) << '\n';
  out << "seed " << cfg.seed << '\n';
  out << "learning_rates " << cfg.learning_rates.size();
  for (double lr : cfg.learning_rates) out << ' ' << num(lr);
  out << '\n';
  out << "weights";
  for (double w : net.layer_weights) out << ' ' << num(w);
  out << '\n';
  for (int i = 0; i < net.num_layers(); ++i) {
    const MetricLayer& layer = net.layers[static_cast<std::size_t>(i)];
    if (layer.dirty) throw StaleTransform("refresh transforms before saving a checkpoint");
    out << "layer " << i + 1 << ' ' << layer.update_count << ' ' << layer.projection_count << '\n';
    out << "metric\n";
    write_matrix(out, layer.metric.dense());
    out << "transform\n";
    write_matrix(out, layer.transform);
  }
  out << "end\n";
}

Checkpoint load_checkpoint(std::istream& in) {
  Reader r(in);
  {
    auto ss = r.line();
    std::string magic;
    ss >> magic;
    if (magic != kMagic) throw FormatError("not an ODML1 checkpoint");
  }
  Checkpoint cp;
  const auto d = r.value<Index>("dim");
  const int n = r.value<int>("layers");
  if (d < 1 || n < 1) throw FormatError("checkpoint: bad dimensions");
  cp.net.step = r.value<std::int64_t>("step");
  cp.net.mode = parse_training_mode(r.value<std::string>("mode"));
  cp.cfg.mode = cp.net.mode;
  cp.cfg.num_layers = n;
  cp.cfg.moml.gamma = r.value<double>("gamma");
  cp.cfg.moml.margin = r.value<double>("margin");
  cp.cfg.moml.eigen_floor = r.value<double>("eigen_floor");
  cp.cfg.moml.projection_floor = r.value<double>("projection_floor");
  cp.cfg.moml.adaptive_gamma = r.value<int>("adaptive_gamma") != 0;
  cp.cfg.lambda_reg = r.value<double>("lambda");
  cp.cfg.seed = r.value<std::uint64_t>("seed");
  {
    auto ss = r.keyed("learning_rates");
    std::size_t count = 0;
    ss >> count;
    cp.cfg.learning_rates.assign(count, 0.0);
    for (double& lr : cp.cfg.learning_rates)
      if (!(ss >> lr)) throw FormatError("checkpoint: short learning-rate list");
  }
  {
    auto ss = r.keyed("weights");
    cp.net.layer_weights.assign(static_cast<std::size_t>(n), 0.0);
    for (double& w : cp.net.layer_weights)
      if (!(ss >> w)) throw FormatError("checkpoint: short weight list");
  }
  for (int i = 0; i < n; ++i) {
    MetricLayer layer;
    {
      auto ss = r.keyed("layer");
      int idx = 0;
      ss >> idx >> layer.update_count >> layer.projection_count;
      if (idx != i + 1) throw FormatError("checkpoint: layers out of order");
    }
    r.keyed("metric");
    layer.metric = SymMatrix<double>(r.matrix(d));
    r.keyed("transform");
    layer.transform = r.matrix(d);
    cp.net.layers.push_back(std::move(layer));
  }
  r.keyed("end");
  cp.cfg.validate();
  return cp;
}

}  // namespace odml
