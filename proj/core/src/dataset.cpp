#include "bintest/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bintest {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> to_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void finish(LabeledData& data, const DatasetOptions& options) {
  if (data.size() == 0) throw DatasetError("dataset contains no samples");
  const int max_label = *std::max_element(data.labels.begin(), data.labels.end());
  data.num_classes = options.num_classes.value_or(max_label + 1);
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.labels[i] >= data.num_classes)
      throw DatasetError("record " + std::to_string(i) + ": label " + std::to_string(data.labels[i]) +
                         " out of range for " + std::to_string(data.num_classes) + " classes");
}

void rescale(LabeledData& data, ValueScale scale, const std::vector<std::size_t>& lines) {
  if (scale == ValueScale::minmax) {
    const std::size_t d = data.dim();
    for (std::size_t j = 0; j < d; ++j) {
      double lo = data.inputs[0][j], hi = lo;
      for (const Vector& x : data.inputs) lo = std::min(lo, x[j]), hi = std::max(hi, x[j]);
      const double span = hi - lo;
      for (Vector& x : data.inputs) x[j] = span > 0.0 ? (x[j] - lo) / span : 0.0;
    }
    return;
  }
  const double top = scale == ValueScale::image ? 255.0 : 1.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.inputs[i].size(); ++j) {
      double& v = data.inputs[i][j];
      if (v < 0.0 || v > top)
        throw DatasetError("line " + std::to_string(lines[i]) + ", feature " + std::to_string(j) + ": value " +
                           std::to_string(v) + " outside [0, " + (scale == ValueScale::image ? "255" : "1") + "]");
      v /= top;
    }
  }
}

std::uint32_t read_be32(const std::string& bytes, std::size_t offset, const char* what) {
  if (offset + 4 > bytes.size())
    throw DatasetError(std::string(what) + ": truncated header at offset " + std::to_string(offset));
  std::uint32_t v = 0;
  for (std::size_t k = 0; k < 4; ++k) v = (v << 8) | static_cast<unsigned char>(bytes[offset + k]);
  return v;
}

}  // namespace

DatasetFormat dataset_format_from_string(const std::string& s) {
  if (s == "csv") return DatasetFormat::csv;
  if (s == "idx") return DatasetFormat::idx;
  throw std::invalid_argument("unknown dataset format '" + s + "' (expected csv or idx)");
}

ValueScale value_scale_from_string(const std::string& s) {
  if (s == "unit") return ValueScale::unit;
  if (s == "image") return ValueScale::image;
  if (s == "minmax") return ValueScale::minmax;
  throw std::invalid_argument("unknown value scale '" + s + "' (expected unit, image or minmax)");
}

LabeledData parse_csv_dataset(const std::string& text, const DatasetOptions& options) {
  LabeledData data;
  std::vector<std::size_t> lines;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(trim(field));
    if (line.back() == ',') fields.emplace_back();

    const auto label = to_double(fields[0]);
    if (first && !label) {
      first = false;
      continue;  // header
    }
    first = false;
    const auto where = "line " + std::to_string(line_no);
    if (!label) throw DatasetError(where + ": label '" + fields[0] + "' is not a number");
    if (*label != std::floor(*label) || *label < 0.0 || *label > 1e9)
      throw DatasetError(where + ": label " + fields[0] + " is not a non-negative integer");
    if (fields.size() < 2) throw DatasetError(where + ": no feature values");
    Vector x;
    for (std::size_t j = 1; j < fields.size(); ++j) {
      const auto v = to_double(fields[j]);
      if (!v || !std::isfinite(*v))
        throw DatasetError(where + ", feature " + std::to_string(j - 1) + ": '" + fields[j] + "' is not a finite number");
      x.push_back(*v);
    }
    if (!data.inputs.empty() && x.size() != data.dim())
      throw DatasetError(where + ": expected " + std::to_string(data.dim()) + " features, found " +
                         std::to_string(x.size()));
    data.inputs.push_back(std::move(x));
    data.labels.push_back(static_cast<int>(*label));
    lines.push_back(line_no);
  }
  finish(data, options);
  rescale(data, options.scale, lines);
  return data;
}

LabeledData parse_idx_dataset(const std::string& images, const std::string& labels, const DatasetOptions& options) {
  const std::uint32_t image_magic = read_be32(images, 0, "image file");
  if (image_magic != 0x00000803 && image_magic != 0x00000802)
    throw DatasetError("image file: bad magic number at offset 0 (expected 0x00000803 or 0x00000802)");
  const std::uint32_t label_magic = read_be32(labels, 0, "label file");
  if (label_magic != 0x00000801) throw DatasetError("label file: bad magic number at offset 0 (expected 0x00000801)");

  const std::size_t ndims = image_magic & 0xff;
  const std::size_t count = read_be32(images, 4, "image file");
  std::size_t dim = 1;
  for (std::size_t k = 1; k < ndims; ++k) dim *= read_be32(images, 4 + 4 * k, "image file");
  const std::size_t header = 4 + 4 * ndims;
  if (images.size() != header + count * dim)
    throw DatasetError("image file: expected " + std::to_string(header + count * dim) + " bytes, found " +
                       std::to_string(images.size()));
  const std::size_t label_count = read_be32(labels, 4, "label file");
  if (label_count != count)
    throw DatasetError("label file: header at offset 4 declares " + std::to_string(label_count) + " labels for " +
                       std::to_string(count) + " images");
  if (labels.size() != 8 + count)
    throw DatasetError("label file: expected " + std::to_string(8 + count) + " bytes, found " +
                       std::to_string(labels.size()));

  LabeledData data;
  for (std::size_t i = 0; i < count; ++i) {
    Vector x(dim);
    for (std::size_t j = 0; j < dim; ++j) x[j] = static_cast<unsigned char>(images[header + i * dim + j]) / 255.0;
    data.inputs.push_back(std::move(x));
    data.labels.push_back(static_cast<unsigned char>(labels[8 + i]));
  }
  finish(data, options);
  return data;
}

LabeledData ingest_dataset(const std::filesystem::path& path, DatasetFormat format, const DatasetOptions& options) {
  if (format == DatasetFormat::csv) return parse_csv_dataset(read_file(path), options);
  if (options.labels_path.empty()) throw DatasetError("IDX datasets need a label file");
  return parse_idx_dataset(read_file(path), read_file(options.labels_path), options);
}

}  // namespace bintest
