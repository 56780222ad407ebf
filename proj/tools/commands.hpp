#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "imo/attribution.hpp"
#include "imo/io.hpp"

namespace imo::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kFormat = 3,
  kNumerical = 4,
  kInput = 5,
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string> kMethods{"saliency", "ig", "eg", "fa", "occlusion", "imo"};

// Redshift of the synthetic test spectra written by `synth`.
inline constexpr double kTestRedshift = 0.1;

struct RunConfig {
  std::string subcommand;
  std::filesystem::path input;
  std::filesystem::path dataset;
  std::filesystem::path model;  // defaults to model.json next to the dataset
  std::filesystem::path out = ".";
  std::filesystem::path synth_config;
  std::string method = "imo";
  std::vector<std::size_t> windows{1, 4, 16, 64};
  StridePolicy stride = StridePolicy::disjoint;
  std::size_t baselines = 8;
  int steps = 512;
  std::uint64_t seed = 42;
  std::size_t count = 100;
  unsigned threads = 1;

  bool windows_set = false;
  bool stride_set = false;
  bool steps_set = false;
  bool baselines_set = false;
};

struct SynthOutputs {
  std::filesystem::path dataset;
  std::filesystem::path model;
  std::vector<std::filesystem::path> anomalies;
  std::vector<AnomalyLabel> labels;
};

struct AttributeSummary {
  std::string method;
  std::size_t argmax_pixel = 0;  // argmax of |attribution|
  double argmax_wavelength = 0.0;
  double max_value = 0.0;
  double max_abs = 0.0;
  // IMO only: threshold on max_abs derived from the per-baseline spread.
  std::optional<double> noise_floor;
  // Set when the input carries anomaly labels.
  std::optional<bool> argmax_in_label;
  std::filesystem::path result_path;
  std::filesystem::path plot_path;
};

struct CompareOutputs {
  std::vector<std::filesystem::path> results;
  std::filesystem::path csv;
  std::filesystem::path plot;
  std::vector<std::size_t> source_ids;
};

SynthOutputs cmd_synth(const RunConfig& config);
AttributeSummary cmd_attribute(const RunConfig& config);
CompareOutputs cmd_compare(const RunConfig& config);

// Parses argv, dispatches, prints the run summary and maps errors to exit codes.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace imo::cli
