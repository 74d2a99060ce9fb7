#pragma once

#include <stdexcept>
#include <string>

#include "bintest/harness.hpp"

namespace bintest {

inline constexpr int kReportSchemaVersion = 1;

class ReportParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON documents with sorted keys; parse followed by serialize reproduces
/// the input byte for byte.
std::string serialize_report(const TestReport& report);
TestReport parse_report(const std::string& text);

std::string serialize_report(const DetectorTestReport& report);
DetectorTestReport parse_detector_report(const std::string& text);

std::string serialize_report(const SweepTable& table);
std::string serialize_report(const TuneResult& result);

/// One line per sample.
std::string samples_csv(const TestReport& report);
/// One line per (attack, kappa); the R-ASR column is the hardness baseline.
std::string sweep_csv(const SweepTable& table);

/// Short human-readable summary, one line.
std::string summary_line(const TestReport& report);

}  // namespace bintest
