#include "odml/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "odml/stream.hpp"

namespace odml {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("setting '" + key + "' expects a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream ss(v);
  T out{};
  if (!(ss >> out) || !(ss >> std::ws).eof())
    throw ConfigError("setting '" + key + "' expects a number, got '" + v + "'");
  return out;
}

constexpr std::uint64_t kStreamTag = 0x57ea;
constexpr std::uint64_t kNestedTag = 0x4e57;

}  // namespace

void RunConfig::validate() const {
  if (datasets.empty()) throw ConfigError("no dataset given");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (gamma_grid.empty()) throw ConfigError("gamma grid is empty");
  for (double g : gamma_grid)
    if (!(g > 0)) throw ConfigError("gamma values must be positive");
  if (!(nested_fraction > 0 && nested_fraction < 1)) throw ConfigError("nested fraction must lie in (0, 1)");
  for (const auto& b : baselines)
    if (b != "euclidean" && b != "moml") throw ConfigError("unknown baseline '" + b + "'");
  network.validate();
  split.validate();
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "dataset") {
    cfg.datasets = split_list(value);
  } else if (key == "layers") {
    cfg.network.num_layers = parse_number<int>(key, value);
  } else if (key == "mode") {
    cfg.network.mode = parse_training_mode(value);
  } else if (key == "epochs") {
    cfg.epochs = parse_number<int>(key, value);
  } else if (key == "gamma") {
    cfg.gamma_grid.clear();
    for (const auto& g : split_list(value)) cfg.gamma_grid.push_back(parse_number<double>(key, g));
    if (!cfg.gamma_grid.empty()) cfg.network.moml.gamma = cfg.gamma_grid.front();
  } else if (key == "lambda") {
    cfg.network.lambda_reg = parse_number<double>(key, value);
  } else if (key == "resamples") {
    cfg.split.num_resamples = parse_number<int>(key, value);
  } else if (key == "seed") {
    cfg.split.seed = parse_number<std::uint64_t>(key, value);
    cfg.network.seed = cfg.split.seed;
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "baselines") {
    cfg.baselines = value == "none" ? std::vector<std::string>{} : split_list(value);
  } else if (key == "k") {
    cfg.k = parse_number<int>(key, value);
  } else if (key == "train_fraction") {
    cfg.split.train_fraction = parse_number<double>(key, value);
  } else if (key == "stratified") {
    cfg.split.stratified = parse_bool(key, value);
  } else if (key == "pca_train_only") {
    cfg.pca_train_only = parse_bool(key, value);
  } else if (key == "emit_embeddings") {
    cfg.emit_embeddings = parse_bool(key, value);
  } else if (key == "emit_layer_curve") {
    cfg.emit_layer_curve = parse_bool(key, value);
  } else if (key == "adaptive_gamma") {
    cfg.network.moml.adaptive_gamma = parse_bool(key, value);
  } else if (key == "threads") {
    cfg.threads = parse_number<int>(key, value);
  } else if (key == "label_column") {
    cfg.schema.label_column = parse_number<int>(key, value);
  } else if (key == "delimiter") {
    if (value.size() != 1 && value != "tab") throw ConfigError("delimiter must be one character or 'tab'");
    cfg.schema.delimiter = value == "tab" ? '\t' : value[0];
  } else if (key == "header") {
    cfg.schema.has_header = parse_bool(key, value);
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    auto strip = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    apply_setting(cfg, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
}

std::filesystem::path resolve_dataset(const std::string& name_or_path) {
  const std::filesystem::path direct(name_or_path);
  if (std::filesystem::is_regular_file(direct)) return direct;
  const auto bundled = bundled_dataset_path(name_or_path);
  if (std::filesystem::is_regular_file(bundled)) return bundled;
  throw ConfigError("dataset '" + name_or_path + "' is neither a file nor a bundled dataset");
}

Matrix MomlEmbedding::embed(const Matrix& rows, int tap) const {
  if (tap == 0) return rows;
  if (layer_.dirty) throw StaleTransform("MOML transform is stale");
  return rows * layer_.transform.transpose();
}

std::uint64_t stream_seed(std::uint64_t seed) { return derive_seed(seed, kStreamTag); }

NetworkState fit_network(const Dataset& train, const NetworkConfig& net_cfg, int epochs,
                         std::uint64_t seed) {
  const auto triplets = epoch_stream(train, epochs, stream_seed(seed));
  return odml::train(NetworkState::init(train.dim(), net_cfg), triplets, net_cfg);
}

MetricLayer fit_moml(const Dataset& train, const MomlConfig& cfg, int epochs, std::uint64_t seed) {
  const auto triplets = epoch_stream(train, epochs, stream_seed(seed));
  return train_moml(MetricLayer::identity(train.dim()), triplets, cfg);
}

double select_gamma(const Dataset& train, const RunConfig& cfg, std::uint64_t seed,
                    const std::function<std::unique_ptr<Embedding>(const Dataset&, double)>& fit) {
  if (cfg.gamma_grid.size() == 1) return cfg.gamma_grid.front();
  const std::uint64_t nested_seed = derive_seed(seed, kNestedTag);
  Split split;
  try {
    split = make_split(train.labels, cfg.nested_fraction, nested_seed, true);
  } catch (const StratificationError&) {
    split = make_split(train.labels, cfg.nested_fraction, nested_seed, false);
  }
  const Dataset inner = train.subset(split.train);
  const Dataset holdout = train.subset(split.test);
  double best_gamma = cfg.gamma_grid.front();
  double best_err = 2.0;
  for (double g : cfg.gamma_grid) {
    const auto emb = fit(inner, g);
    const int tap = emb->num_taps() - 1;
    const double err = error_rate(
        knn_classify_rows(emb->embed(inner.features, tap), inner.labels, emb->embed(holdout.features, tap), cfg.k),
        holdout.labels);
    if (err < best_err) {
      best_err = err;
      best_gamma = g;
    }
  }
  return best_gamma;
}

Runner make_odml_runner(const RunConfig& cfg) {
  return [cfg](const Dataset& train, std::uint64_t seed) -> std::unique_ptr<Embedding> {
    auto fit = [&](const Dataset& ds, double gamma) {
      NetworkConfig nc = cfg.network;
      nc.moml.gamma = gamma;
      return std::make_unique<NetworkEmbedding>(fit_network(ds, nc, cfg.epochs, seed));
    };
    // gamma only enters through the forward updates
    const double gamma = cfg.network.mode == TrainingMode::BP ? cfg.gamma_grid.front()
                                                              : select_gamma(train, cfg, seed, fit);
    return fit(train, gamma);
  };
}

Runner make_moml_runner(const RunConfig& cfg) {
  return [cfg](const Dataset& train, std::uint64_t seed) -> std::unique_ptr<Embedding> {
    auto fit = [&](const Dataset& ds, double gamma) {
      MomlConfig mc = cfg.network.moml;
      mc.gamma = gamma;
      return std::make_unique<MomlEmbedding>(fit_moml(ds, mc, cfg.epochs, seed));
    };
    return fit(train, select_gamma(train, cfg, seed, fit));
  };
}

Runner make_euclidean_runner() {
  return [](const Dataset&, std::uint64_t) -> std::unique_ptr<Embedding> {
    return std::make_unique<IdentityEmbedding>();
  };
}

namespace {

class PcaEmbedding final : public Embedding {
 public:
  PcaEmbedding(PcaResult<double> pca, std::unique_ptr<Embedding> inner)
      : pca_(std::move(pca)), inner_(std::move(inner)) {}
  int num_taps() const override { return inner_->num_taps(); }
  Matrix embed(const Matrix& rows, int tap) const override {
    return inner_->embed(l2_normalize_rows(pca_.transform(rows)), tap);
  }

 private:
  PcaResult<double> pca_;
  std::unique_ptr<Embedding> inner_;
};

}  // namespace

Runner with_train_only_pca(Runner inner, Index pca_dim) {
  return [inner = std::move(inner), pca_dim](const Dataset& train,
                                             std::uint64_t seed) -> std::unique_ptr<Embedding> {
    // a training half can have fewer rows than pca_dim
    const Index dim = std::min({pca_dim, train.rows(), train.dim()});
    auto pca = pca_fit_transform(train.features, dim);
    Dataset reduced = train;
    reduced.features = l2_normalize_rows(pca.projected);
    reduced.preprocess_log.push_back("pca(train)->" + std::to_string(dim));
    reduced.preprocess_log.push_back("l2norm");
    return std::make_unique<PcaEmbedding>(std::move(pca), inner(reduced, seed));
  };
}

namespace {

bool defers_pca(const RunConfig& cfg, Index raw_dim) {
  return cfg.pca_train_only && raw_dim >= PreprocessOptions{}.pca_threshold;
}

}  // namespace

std::vector<Method> build_methods(const RunConfig& cfg, Index raw_dim) {
  std::vector<Method> methods{{"odml", make_odml_runner(cfg)}};
  for (const auto& b : cfg.baselines) {
    if (b == "euclidean") methods.push_back({b, make_euclidean_runner()});
    if (b == "moml") methods.push_back({b, make_moml_runner(cfg)});
  }
  if (defers_pca(cfg, raw_dim)) {
    for (Method& m : methods) m.runner = with_train_only_pca(std::move(m.runner), PreprocessOptions{}.pca_dim);
  }
  return methods;
}

ExperimentReport run_dataset(const Dataset& raw, const RunConfig& cfg) {
  const Dataset data = defers_pca(cfg, raw.dim()) ? raw : preprocess(raw);
  const auto methods = build_methods(cfg, raw.dim());
  ProtocolOptions opts;
  opts.k = cfg.k;
  opts.threads = cfg.threads;
  opts.reference = "odml";
  return resample_protocol(data, cfg.split, methods, opts);
}

std::vector<EmbeddingPoint> layer_embeddings(const Dataset& raw, const RunConfig& cfg) {
  const Dataset data = preprocess(raw);
  const std::uint64_t seed = derive_seed(cfg.split.seed, 0);
  const Split split = make_split(data.labels, cfg.split.train_fraction, seed, cfg.split.stratified);
  const auto emb = make_odml_runner(cfg)(data.subset(split.train), seed);
  std::vector<EmbeddingPoint> points;
  for (int tap = 0; tap < emb->num_taps(); ++tap) {
    const Matrix z = l2_normalize_rows(emb->embed(data.features, tap));
    const Matrix xy = pca_fit_transform(z, std::min<Index>(2, z.cols())).projected;
    for (Index i = 0; i < xy.rows(); ++i) {
      points.push_back({xy(i, 0), xy.cols() > 1 ? xy(i, 1) : 0.0,
                        data.class_names[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])], tap});
    }
  }
  return points;
}

std::vector<double> evaluate_checkpoint(const Checkpoint& cp, const Dataset& reference_raw,
                                        const Dataset& test_raw, int k) {
  if (reference_raw.dim() != test_raw.dim())
    throw DimMismatch("reference and test sets have different feature widths");
  Matrix ref = reference_raw.features;
  Matrix test = test_raw.features;
  const PreprocessOptions popts;
  if (ref.cols() >= popts.pca_threshold) {
    const auto pca = pca_fit_transform(ref, std::min(popts.pca_dim, ref.rows()));
    ref = pca.projected;
    test = pca.transform(test);
  }
  ref = l2_normalize_rows(ref);
  test = l2_normalize_rows(test);
  if (ref.cols() != cp.net.dim()) throw DimMismatch("checkpoint dimension does not match the data");

  // map test labels onto the reference's class ids by name
  std::vector<int> truth;
  for (int l : test_raw.labels) {
    const auto& name = test_raw.class_names[static_cast<std::size_t>(l)];
    const auto it = std::find(reference_raw.class_names.begin(), reference_raw.class_names.end(), name);
    truth.push_back(it == reference_raw.class_names.end()
                        ? -1
                        : static_cast<int>(it - reference_raw.class_names.begin()));
  }
  std::vector<double> errors;
  for (int tap = 0; tap <= cp.net.num_layers(); ++tap) {
    const auto pred = knn_classify_rows(embed_rows(cp.net, ref, tap), reference_raw.labels,
                                        embed_rows(cp.net, test, tap), k);
    errors.push_back(error_rate(pred, truth));
  }
  return errors;
}

Checkpoint train_checkpoint(const Dataset& raw, const RunConfig& cfg) {
  const Dataset data = preprocess(raw);
  const std::uint64_t seed = cfg.split.seed;
  auto fit = [&](const Dataset& ds, double gamma) {
    NetworkConfig nc = cfg.network;
    nc.moml.gamma = gamma;
    return std::make_unique<NetworkEmbedding>(fit_network(ds, nc, cfg.epochs, seed));
  };
  Checkpoint cp;
  cp.cfg = cfg.network;
  cp.cfg.moml.gamma = cfg.network.mode == TrainingMode::BP ? cfg.gamma_grid.front()
                                                           : select_gamma(data, cfg, seed, fit);
  cp.net = fit(data, cp.cfg.moml.gamma)->network();
  return cp;
}

std::vector<ExperimentReport> run_experiment(const RunConfig& cfg) {
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw PhaseError("config", e.what());
  }
  std::vector<ExperimentReport> reports;
  for (const auto& name : cfg.datasets) {
    Dataset raw;
    try {
      raw = load_dataset(resolve_dataset(name), cfg.schema);
    } catch (const std::exception& e) {
      throw PhaseError("load " + name, e.what());
    }
    ExperimentReport report;
    std::vector<EmbeddingPoint> points;
    try {
      report = run_dataset(raw, cfg);
      if (cfg.emit_embeddings) points = layer_embeddings(raw, cfg);
    } catch (const std::exception& e) {
      throw PhaseError("experiment " + raw.name, e.what());
    }
    try {
      const auto dir = cfg.out_dir / raw.name;
      std::filesystem::create_directories(dir);
      auto open = [&](const char* file) {
        std::ofstream out(dir / file);
        if (!out) throw FormatError("cannot write " + (dir / file).string());
        return out;
      };
      {
        auto out = open("report.txt");
        write_report_text(out, report);
      }
      {
        auto out = open("report.csv");
        write_report_csv(out, report);
      }
      {
        auto out = open("summary.csv");
        write_summary_csv(out, report);
      }
      {
        auto out = open("timing.txt");
        write_timing(out, report);
      }
      if (cfg.emit_layer_curve) {
        auto out = open("layers.csv");
        write_layer_curve(out, report.method("odml"));
      }
      if (cfg.emit_embeddings) {
        auto out = open("embed.csv");
        write_embeddings(out, points);
      }
    } catch (const std::exception& e) {
      throw PhaseError("write " + raw.name, e.what());
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace odml
