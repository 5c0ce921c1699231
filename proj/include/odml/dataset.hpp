#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "odml/linalg.hpp"

namespace odml {

/// Labeled feature matrix, one sample per row. Labels are dense class ids
/// indexing `class_names`.
struct Dataset {
  std::string name;
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<std::string> preprocess_log;

  Index rows() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }

  /// Rows selected by `indices`, in that order, with labels and provenance.
  Dataset subset(const std::vector<Index>& indices) const;
};

struct CsvSchema {
  int label_column = -1;  // negative counts from the end
  char delimiter = ',';
  bool has_header = false;
};

/// Reads a delimited text file. Empty lines are skipped; every other line
/// must carry the same number of fields, all numeric except the label.
Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema = {});

struct PreprocessOptions {
  Index pca_threshold = 200;  // apply PCA when dim >= threshold
  Index pca_dim = 100;
  bool skip_pca = false;
};

/// PCA to `pca_dim` when the feature width reaches `pca_threshold`, then
/// per-row l2 normalization.
Dataset preprocess(const Dataset& ds, const PreprocessOptions& opts = {});

/// Path of a dataset shipped in the repository's data/ directory.
std::filesystem::path bundled_dataset_path(const std::string& name);

}  // namespace odml
