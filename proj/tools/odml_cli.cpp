// odml: experiment driver for stacked online metric learning.
//
//   odml run     --dataset iris,wine --layers 3 --out results
//   odml train   --dataset iris --checkpoint iris.odml
//   odml eval    --checkpoint iris.odml --reference train.csv --dataset test.csv
//   odml layers  --dataset balance --layers 5
//   odml embed   --dataset iris

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "odml/experiment.hpp"

namespace {

struct SharedOptions {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> opts;
  std::string config;
  CLI::Option* config_opt = nullptr;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    opts[key] = app->add_option(flag, values[key], help);
  }
  void add_flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    opts[key] = app->add_flag(flag, help);
  }

  void attach(CLI::App* app) {
    config_opt = app->add_option("--config", config, "key=value settings file (flags override it)");
    add(app, "--dataset", "dataset", "bundled dataset name(s) or CSV path(s), comma separated");
    add(app, "--layers", "layers", "number of metric layers");
    add(app, "--mode", "mode", "training mode: fp, bp or fbp");
    add(app, "--epochs", "epochs", "passes over the training set");
    add(app, "--gamma", "gamma", "gamma grid, comma separated (one value disables selection)");
    add(app, "--lambda", "lambda", "Frobenius regularization weight for back propagation");
    add(app, "--resamples", "resamples", "number of random 50/50 splits");
    add(app, "--seed", "seed", "base random seed");
    add(app, "--out", "out", "output directory");
    add(app, "--baselines", "baselines", "baselines to run: euclidean,moml or none");
    add(app, "--k", "k", "neighbors for k-NN");
    add(app, "--threads", "threads", "worker threads (default: ODML_THREADS or all cores)");
    add_flag(app, "--pca-train-only", "pca_train_only", "fit PCA on each training half only");
    add_flag(app, "--emit-layer-curve", "emit_layer_curve", "write per-tap errors (layers.csv)");
    add_flag(app, "--emit-embeddings", "emit_embeddings", "write 2-D per-layer projections (embed.csv)");
  }

  odml::RunConfig build() const {
    odml::RunConfig cfg;
    if (config_opt->count() > 0) odml::load_config_file(cfg, config);
    for (const auto& [key, opt] : opts) {
      if (opt->count() == 0) continue;
      const bool is_flag = opt->get_expected_min() == 0;
      odml::apply_setting(cfg, key, is_flag ? "true" : values.at(key));
    }
    return cfg;
  }
};

void print_taps(const std::vector<double>& errors) {
  for (std::size_t tap = 0; tap < errors.size(); ++tap)
    std::printf("tap %zu error %.6f\n", tap, errors[tap]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online deep metric learning experiments"};
  app.require_subcommand(1);

  SharedOptions run_opts, train_opts, eval_opts, layers_opts, embed_opts;
  auto* run = app.add_subcommand("run", "full resampling experiment with baselines");
  run_opts.attach(run);

  auto* train = app.add_subcommand("train", "fit one network on a whole dataset and save a checkpoint");
  train_opts.attach(train);
  std::string train_checkpoint = "model.odml";
  train->add_option("--checkpoint", train_checkpoint, "checkpoint file to write");

  auto* eval = app.add_subcommand("eval", "k-NN error of a checkpoint on a test file");
  eval_opts.attach(eval);
  std::string eval_checkpoint;
  std::string eval_reference;
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval->add_option("--reference", eval_reference, "labeled k-NN reference (training) file")->required();

  auto* layers = app.add_subcommand("layers", "per-layer error curve of the network");
  layers_opts.attach(layers);

  auto* embed = app.add_subcommand("embed", "2-D per-layer feature projections");
  embed_opts.attach(embed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = run_opts.build();
      for (const auto& report : odml::run_experiment(cfg)) odml::write_report_text(std::cout, report);
    } else if (*train) {
      auto cfg = train_opts.build();
      if (cfg.datasets.size() != 1) throw odml::ConfigError("train takes exactly one dataset");
      const auto raw = odml::load_dataset(odml::resolve_dataset(cfg.datasets.front()), cfg.schema);
      const auto cp = odml::train_checkpoint(raw, cfg);
      std::ofstream out(train_checkpoint);
      if (!out) throw odml::FormatError("cannot write " + train_checkpoint);
      odml::save_checkpoint(out, cp.net, cp.cfg);
      std::printf("wrote %s (gamma %g, %lld steps)\n", train_checkpoint.c_str(), cp.cfg.moml.gamma,
                  static_cast<long long>(cp.net.step));
    } else if (*eval) {
      auto cfg = eval_opts.build();
      if (cfg.datasets.size() != 1) throw odml::ConfigError("eval takes exactly one test dataset");
      std::ifstream in(eval_checkpoint);
      if (!in) throw odml::FormatError("cannot open " + eval_checkpoint);
      const auto cp = odml::load_checkpoint(in);
      const auto reference = odml::load_dataset(odml::resolve_dataset(eval_reference), cfg.schema);
      const auto test = odml::load_dataset(odml::resolve_dataset(cfg.datasets.front()), cfg.schema);
      print_taps(odml::evaluate_checkpoint(cp, reference, test, cfg.k));
    } else if (*layers) {
      auto cfg = layers_opts.build();
      cfg.baselines.clear();
      cfg.emit_layer_curve = true;
      for (const auto& report : odml::run_experiment(cfg)) {
        std::printf("%s\n", report.dataset.c_str());
        const auto& net = report.method("odml");
        for (std::size_t tap = 0; tap < net.tap_errors.size(); ++tap)
          std::printf("tap %zu mean error %.4f\n", tap, net.mean_error(static_cast<int>(tap)));
      }
    } else if (*embed) {
      auto cfg = embed_opts.build();
      cfg.validate();
      for (const auto& name : cfg.datasets) {
        const auto raw = odml::load_dataset(odml::resolve_dataset(name), cfg.schema);
        const auto points = odml::layer_embeddings(raw, cfg);
        const auto dir = cfg.out_dir / raw.name;
        std::filesystem::create_directories(dir);
        std::ofstream out(dir / "embed.csv");
        odml::write_embeddings(out, points);
        std::printf("wrote %s\n", (dir / "embed.csv").string().c_str());
      }
    }
  } catch (const odml::PhaseError& e) {
    std::fprintf(stderr, "odml: error in %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "odml: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
