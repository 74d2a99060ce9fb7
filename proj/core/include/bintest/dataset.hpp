#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "bintest/training.hpp"

namespace bintest {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DatasetFormat { csv, idx };

/// How raw feature values are mapped into [0, 1].
enum class ValueScale {
  unit,    ///< values must already lie in [0, 1]
  image,   ///< values in [0, 255], divided by 255
  minmax,  ///< per-feature min/max rescaling
};

DatasetFormat dataset_format_from_string(const std::string& s);
ValueScale value_scale_from_string(const std::string& s);

struct DatasetOptions {
  ValueScale scale = ValueScale::unit;
  /// Labels must lie below this; unset means "one more than the largest label".
  std::optional<int> num_classes;
  /// IDX only: the label file accompanying the image file.
  std::filesystem::path labels_path;
};

/// CSV: one sample per line, label first. A first line whose label field is
/// not numeric is taken as a header. IDX: unsigned-byte tensors (images
/// 0x00000803 or vectors 0x00000802) with a 0x00000801 label file; always
/// scaled as images.
LabeledData ingest_dataset(const std::filesystem::path& path, DatasetFormat format,
                           const DatasetOptions& options = {});

LabeledData parse_csv_dataset(const std::string& text, const DatasetOptions& options = {});
LabeledData parse_idx_dataset(const std::string& images, const std::string& labels,
                              const DatasetOptions& options = {});

}  // namespace bintest
