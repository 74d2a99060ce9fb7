#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "bintest/nn.hpp"

namespace bintest {

/// Weight container layout (all integers little-endian):
///
///   "BTNN" | u32 format version | u64 header length | JSON header | f64 payload
///
/// The JSON header lists the layers with their shapes, the frozen flag of
/// each normalization layer and the offset (in doubles) of every parameter
/// block inside the payload. Matrices are stored row-major.
inline constexpr unsigned kModelFormatVersion = 1;

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_model(const SplitModel& model);
SplitModel decode_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const SplitModel& model);
SplitModel load_model(const std::filesystem::path& path);

}  // namespace bintest
