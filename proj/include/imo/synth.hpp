#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "imo/spectrum.hpp"
#include "imo/toy_model.hpp"

namespace imo {

// Lines sharing a group scale together in generated datasets; the toy model
// turns each group into one template.
struct EmissionLine {
  double rest_center = 0.0;  // Angstrom
  double amplitude = 0.0;
  double width = 1.0;  // rest frame sigma, Angstrom
  std::string group;

  bool operator==(const EmissionLine&) const = default;
};

struct SynthConfig {
  Vector grid;
  // Polynomial in t = (lambda_rest - continuum_pivot) / continuum_scale.
  std::vector<double> continuum_coeffs;
  double continuum_pivot = 6000.0;
  double continuum_scale = 2000.0;
  std::vector<EmissionLine> lines;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  // Dataset variability: each continuum coefficient is scaled by a factor
  // uniform in [1 - j_k, 1 + j_k], each line group by [1 - line_jitter, 1 + line_jitter].
  std::vector<double> continuum_jitter;
  double line_jitter = 0.0;

  void validate() const;
  // Distinct line groups in first-appearance order.
  std::vector<std::string> line_groups() const;

  // 512 pixels over 3600-9800 A, linear continuum, H-alpha + [NII] complex,
  // H-beta, [OIII] and [OII].
  static SynthConfig defaults();
};

struct GeneratedSpectrum {
  Spectrum spectrum;
  std::vector<std::string> warnings;
};

// Continuum plus Gaussian lines at rest_center * (1 + z) with noise drawn from
// config.seed. Lines whose observed center falls off the grid are skipped with a warning.
GeneratedSpectrum generate_spectrum(const SynthConfig& config, double z);

struct Injection {
  Spectrum spectrum;
  AnomalyLabel label;
};

// flux += offset + slope * (lambda - pivot) for lambda < pivot.
Injection inject_calibration_jump(const Spectrum& spectrum, double pivot, double offset,
                                  double slope);

// Removes the config line at rest_center (if any) and adds two Gaussians at
// (rest_center -/+ separation / 2) * (1 + z).
Injection inject_double_peak(const Spectrum& spectrum, const SynthConfig& config,
                             double rest_center, double separation, double amplitude,
                             double width);

struct CalibrationJumpParams {
  double pivot = 5800.0;
  double offset = -3.0;
  double slope = 1e-3;
};

struct DoublePeakParams {
  double rest_center = 6563.0;
  double separation = 60.0;
  double amplitude = 30.0;
  double width = 10.0;
};

// `count` anomaly-free spectra with per-item seeds derived from `seed`.
std::vector<Spectrum> build_dataset(const SynthConfig& config, std::size_t count,
                                    std::pair<double, double> z_range, std::uint64_t seed);

// Toy model whose templates match the generator: one polynomial term per
// continuum coefficient and one Gaussian template per line group. The latent
// density is the sample mean and unbiased variance of the dataset, each item
// encoded at its own redshift.
ToyModelSpec toy_model_spec(const SynthConfig& config, const std::vector<Spectrum>& dataset);

// Everything the synthetic harness produces for one seed: the baseline
// population, the fitted toy model, an anomaly-free test spectrum, a fresh
// population member at the test redshift and both injected anomalies.
struct Scenario {
  SynthConfig config;
  std::vector<Spectrum> dataset;
  ToyModelSpec model;
  Spectrum clean;
  Spectrum population;
  Injection double_peak;
  Injection calibration;
};

inline constexpr std::pair<double, double> kDatasetRedshiftRange{0.0, 0.2};

Scenario build_scenario(const SynthConfig& config, std::size_t count, std::uint64_t seed,
                        double test_redshift = 0.1,
                        const DoublePeakParams& double_peak = {},
                        const CalibrationJumpParams& calibration = {});

}  // namespace imo
