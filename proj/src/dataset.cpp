#include "odml/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <string_view>

namespace odml {

Dataset Dataset::subset(const std::vector<Index>& indices) const {
  Dataset out;
  out.name = name;
  out.class_names = class_names;
  out.preprocess_log = preprocess_log;
  out.features.resize(static_cast<Index>(indices.size()), dim());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.features.row(static_cast<Index>(i)) = features.row(indices[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(indices[i])]);
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file " + path.string());

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = schema.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = split_fields(line, schema.delimiter);
    if (width == 0) {
      if (fields.size() < 2) throw ParseError(line_no, 1, "need at least one feature and a label");
      width = fields.size();
    } else if (fields.size() != width) {
      throw ParseError(line_no, std::min(fields.size(), width) + 1,
                       "expected " + std::to_string(width) + " fields, found " +
                           std::to_string(fields.size()));
    }
    const auto w = static_cast<int>(width);
    const int label_col = schema.label_column < 0 ? w + schema.label_column : schema.label_column;
    if (label_col < 0 || label_col >= w) throw ConfigError("label column outside the row");

    std::vector<double> feats;
    feats.reserve(width - 1);
    for (int c = 0; c < w; ++c) {
      const std::string_view f = fields[static_cast<std::size_t>(c)];
      if (c == label_col) {
        if (f.empty()) throw ParseError(line_no, static_cast<std::size_t>(c) + 1, "empty label");
        raw_labels.emplace_back(f);
        continue;
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError(line_no, static_cast<std::size_t>(c) + 1,
                         "non-numeric feature '" + std::string(f) + "'");
      }
      feats.push_back(v);
    }
    rows.push_back(std::move(feats));
  }
  if (rows.empty()) throw EmptyDataset("dataset " + path.string() + " has no rows");

  Dataset ds;
  ds.name = path.stem().string();
  std::map<std::string, int> ids;
  for (const auto& l : raw_labels) ids.emplace(l, 0);
  for (auto& [name, id] : ids) {
    id = static_cast<int>(ds.class_names.size());
    ds.class_names.push_back(name);
  }
  ds.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(width - 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      ds.features(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    ds.labels.push_back(ids.at(raw_labels[i]));
  }
  return ds;
}

Dataset preprocess(const Dataset& ds, const PreprocessOptions& opts) {
  Dataset out = ds;
  if (!opts.skip_pca && ds.dim() >= opts.pca_threshold) {
    const Index dim = std::min(opts.pca_dim, ds.rows());
    out.features = pca_fit_transform(ds.features, dim).projected;
    out.preprocess_log.push_back("pca->" + std::to_string(dim));
  }
  out.features = l2_normalize_rows(out.features);
  out.preprocess_log.push_back("l2norm");
  return out;
}

std::filesystem::path bundled_dataset_path(const std::string& name) {
  return std::filesystem::path(ODML_DATA_DIR) / (name + ".csv");
}

}  // namespace odml
