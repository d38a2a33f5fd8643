#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "attdmm/numcore/tensor.hpp"

namespace attdmm {

struct StaticFeatures {
  double age = 0.0;
  int aids = 0;
  int hematologic_malignancy = 0;
  int metastatic_cancer = 0;
  std::string admission_type;

  bool operator==(const StaticFeatures&) const = default;
};

// A stay as read from disk: values hold NaN where the CSV field was empty.
struct RawStay {
  std::string stay_id;
  Matrix values;  // T x M
  StaticFeatures statics;
  std::optional<int> label;
};

struct RawDataset {
  std::vector<std::string> feature_names;
  std::vector<RawStay> stays;  // order of first appearance in timeseries.csv
};

struct DatasetPaths {
  std::filesystem::path timeseries;
  std::filesystem::path statics;
  std::filesystem::path labels;  // may be empty: stays are then unlabeled

  static DatasetPaths in_directory(const std::filesystem::path& dir);
};

// timeseries.csv: stay_id,t_index,<feat_1>,...,<feat_M>  (empty field = missing)
// static.csv:     stay_id,age,aids,hematologic_malignancy,metastatic_cancer,admission_type
// labels.csv:     stay_id,label
// Throws DataError for ragged rows, non-increasing t_index, unknown stay ids
// and stays without a static row or label.
RawDataset load_dataset(const DatasetPaths& paths);

// Writes the three files (temp file + rename each). Numbers use the shortest
// representation that reads back to the same double.
void write_dataset(const RawDataset& data, const DatasetPaths& paths);

// Writes text to path atomically.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string format_double(double v);

}  // namespace attdmm
