#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "imo/attribution.hpp"
#include "imo/model.hpp"
#include "imo/spectrum.hpp"
#include "imo/synth.hpp"
#include "imo/toy_model.hpp"

namespace imo {

inline constexpr int kFormatVersion = 1;

struct SpectrumFile {
  Spectrum spectrum;
  std::vector<AnomalyLabel> labels;

  bool operator==(const SpectrumFile& other) const;
};

struct ResultFile {
  std::string method;
  std::size_t n = 0;
  std::size_t m = 0;  // baselines used (0 for single-gradient methods)
  std::vector<std::size_t> windows;
  StridePolicy stride = StridePolicy::disjoint;
  int steps = 0;
  std::uint64_t seed = 0;
  std::string model_fingerprint;
  std::string input_path;
  std::string dataset_path;
  std::vector<std::size_t> source_ids;
  Matrix per_window_mean;  // K x N, K = windows.size()
  Matrix per_window_var;
  std::vector<Matrix> per_baseline;  // empty or K entries of M x N
  Vector combined;

  std::size_t k() const { return windows.size(); }
  // Dimension checks against n, K and M. Throws FormatError.
  void validate() const;
  bool operator==(const ResultFile& other) const;
};

// 17 significant digits; parses back to the identical double.
std::string format_double(double value);

void write_spectrum(std::ostream& out, const SpectrumFile& file);
SpectrumFile read_spectrum(std::istream& in);
void save_spectrum(const std::filesystem::path& path, const SpectrumFile& file);
SpectrumFile load_spectrum(const std::filesystem::path& path);

// All dataset spectra share one wavelength grid.
void write_dataset(std::ostream& out, const std::vector<Spectrum>& dataset);
std::vector<Spectrum> read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const std::vector<Spectrum>& dataset);
std::vector<Spectrum> load_dataset(const std::filesystem::path& path);

void write_result(std::ostream& out, const ResultFile& file);
ResultFile read_result(std::istream& in);
void save_result(const std::filesystem::path& path, const ResultFile& file);
ResultFile load_result(const std::filesystem::path& path);

// JSON config files for the toy model and the generator.
nlohmann::json to_json(const ToyModelSpec& spec);
ToyModelSpec toy_model_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const nlohmann::json& j);
void save_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json load_json(const std::filesystem::path& path);

// Draws M spectra uniformly without replacement when M <= |D| (with
// replacement otherwise), reconstructs each at redshift z and scores it.
BaselineEnsemble sample_baselines(const std::vector<Spectrum>& dataset, std::size_t m,
                                  const ModelBundle& model, double z, std::uint64_t seed);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace imo
