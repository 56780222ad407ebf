#include "imo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "imo/errors.hpp"

namespace imo {
namespace {

// Pixels beyond this absolute contribution count as untouched when labelling.
constexpr double kLabelCutoff = 1e-10;
constexpr double kVarianceFloor = 1e-8;

double gaussian(double x, double center, double sigma) {
  const double u = (x - center) / sigma;
  return std::exp(-0.5 * u * u);
}

std::map<std::string, double> unit_group_scales(const SynthConfig& config) {
  std::map<std::string, double> scales;
  for (const auto& g : config.line_groups()) scales[g] = 1.0;
  return scales;
}

GeneratedSpectrum render(const SynthConfig& config, double z, const std::vector<double>& continuum,
                         const std::map<std::string, double>& group_scale, std::mt19937_64& rng) {
  if (!std::isfinite(z) || z < 0.0) throw InputError("redshift must be finite and >= 0");
  GeneratedSpectrum out;
  const auto& grid = config.grid;
  Spectrum& s = out.spectrum;
  s.wavelengths = grid;
  s.redshift = z;
  s.flux = Vector::Zero(grid.size());

  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double t = (grid[i] / (1.0 + z) - config.continuum_pivot) / config.continuum_scale;
    double power = 1.0;
    double value = 0.0;
    for (double c : continuum) {
      value += c * power;
      power *= t;
    }
    s.flux[i] = value;
  }

  const double lo = grid[0];
  const double hi = grid[grid.size() - 1];
  for (const auto& line : config.lines) {
    const double center = line.rest_center * (1.0 + z);
    if (center < lo || center > hi) {
      out.warnings.push_back("line at rest " + std::to_string(line.rest_center) +
                             " A falls outside the grid at z = " + std::to_string(z) + "; skipped");
      continue;
    }
    const double amplitude = line.amplitude * group_scale.at(line.group);
    const double sigma = line.width * (1.0 + z);
    for (Eigen::Index i = 0; i < grid.size(); ++i) s.flux[i] += amplitude * gaussian(grid[i], center, sigma);
  }

  if (config.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, config.noise_sigma);
    for (Eigen::Index i = 0; i < grid.size(); ++i) s.flux[i] += noise(rng);
  }
  return out;
}

// Pixel interval where a Gaussian of this amplitude exceeds kLabelCutoff.
PixelRange gaussian_support(const Vector& grid, double center, double sigma, double amplitude) {
  const double a = std::abs(amplitude);
  if (a <= kLabelCutoff) return {};
  const double reach = sigma * std::sqrt(2.0 * std::log(a / kLabelCutoff));
  const auto* first = grid.data();
  const auto* last = grid.data() + grid.size();
  const auto begin = static_cast<std::size_t>(std::lower_bound(first, last, center - reach) - first);
  const auto end = static_cast<std::size_t>(std::upper_bound(first, last, center + reach) - first);
  return {begin, std::max(begin, end)};
}

std::vector<PixelRange> merge_ranges(std::vector<PixelRange> ranges) {
  std::erase_if(ranges, [](const PixelRange& r) { return r.end <= r.begin; });
  std::sort(ranges.begin(), ranges.end(),
            [](const PixelRange& a, const PixelRange& b) { return a.begin < b.begin; });
  std::vector<PixelRange> merged;
  for (const auto& r : ranges) {
    if (!merged.empty() && r.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, r.end);
    } else {
      merged.push_back(r);
    }
  }
  return merged;
}

}  // namespace

void SynthConfig::validate() const {
  if (grid.size() == 0) throw InputError("synth grid is empty");
  require_finite(grid, "synth grid");
  for (Eigen::Index i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw InputError("synth grid is not strictly increasing");
  }
  if (!(continuum_scale > 0.0)) throw InputError("continuum_scale must be positive");
  if (!(noise_sigma >= 0.0)) throw InputError("noise_sigma must be >= 0");
  if (!continuum_jitter.empty() && continuum_jitter.size() != continuum_coeffs.size()) {
    throw InputError("continuum_jitter must be empty or match continuum_coeffs");
  }
  for (const auto& line : lines) {
    if (!(line.width > 0.0)) throw InputError("emission line widths must be positive");
    if (!std::isfinite(line.rest_center) || !std::isfinite(line.amplitude)) {
      throw InputError("emission line parameters must be finite");
    }
  }
}

std::vector<std::string> SynthConfig::line_groups() const {
  std::vector<std::string> groups;
  for (const auto& line : lines) {
    if (std::find(groups.begin(), groups.end(), line.group) == groups.end()) groups.push_back(line.group);
  }
  return groups;
}

SynthConfig SynthConfig::defaults() {
  SynthConfig c;
  c.grid = linear_grid(3600.0, 9800.0, 512);
  c.continuum_coeffs = {1.0, -0.2};
  c.continuum_jitter = {0.2, 0.5};
  // Widths are broad compared to real galaxies so lines span a few ~12 A pixels.
  c.lines = {
      {6563.0, 3.0, 20.0, "halpha"}, {6548.0, 0.3, 20.0, "halpha"}, {6583.0, 0.9, 20.0, "halpha"},
      {4861.0, 1.0, 20.0, "hbeta"},  {5007.0, 1.5, 20.0, "oiii"},   {4959.0, 0.5, 20.0, "oiii"},
      {3727.0, 1.2, 20.0, "oii"},
  };
  c.noise_sigma = 0.02;
  c.line_jitter = 0.5;
  c.seed = 0;
  return c;
}

GeneratedSpectrum generate_spectrum(const SynthConfig& config, double z) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  return render(config, z, config.continuum_coeffs, unit_group_scales(config), rng);
}

Injection inject_calibration_jump(const Spectrum& spectrum, double pivot, double offset,
                                  double slope) {
  spectrum.validate();
  const auto& grid = spectrum.wavelengths;
  if (!(pivot >= grid[0] && pivot <= grid[grid.size() - 1])) {
    throw InputError("calibration pivot lies outside the wavelength grid");
  }
  Injection out{spectrum, {}};
  std::size_t blue = 0;
  for (Eigen::Index i = 0; i < grid.size() && grid[i] < pivot; ++i) {
    out.spectrum.flux[i] += offset + slope * (grid[i] - pivot);
    ++blue;
  }
  out.label.kind = AnomalyKind::calibration_jump;
  out.label.affected_pixels = {PixelRange{0, blue}};
  out.label.parameters = {{"pivot", pivot}, {"offset", offset}, {"slope", slope}};
  return out;
}

Injection inject_double_peak(const Spectrum& spectrum, const SynthConfig& config,
                             double rest_center, double separation, double amplitude,
                             double width) {
  spectrum.validate();
  if (!(width > 0.0)) throw InputError("double-peak width must be positive");
  if (!(separation >= 0.0)) throw InputError("double-peak separation must be >= 0");
  const auto& grid = spectrum.wavelengths;
  const double stretch = 1.0 + spectrum.redshift;
  const double blue_peak = (rest_center - 0.5 * separation) * stretch;
  const double red_peak = (rest_center + 0.5 * separation) * stretch;
  if (blue_peak < grid[0] || red_peak > grid[grid.size() - 1]) {
    throw InputError("double-peak centers fall outside the wavelength grid");
  }

  Injection out{spectrum, {}};
  Vector& flux = out.spectrum.flux;
  std::vector<PixelRange> ranges;

  const auto original = std::find_if(config.lines.begin(), config.lines.end(), [&](const EmissionLine& l) {
    return std::abs(l.rest_center - rest_center) < 1e-6;
  });
  if (original != config.lines.end()) {
    const double center = original->rest_center * stretch;
    const double sigma = original->width * stretch;
    for (Eigen::Index i = 0; i < grid.size(); ++i) flux[i] -= original->amplitude * gaussian(grid[i], center, sigma);
    ranges.push_back(gaussian_support(grid, center, sigma, original->amplitude));
  }

  const double sigma = width * stretch;
  for (double center : {blue_peak, red_peak}) {
    for (Eigen::Index i = 0; i < grid.size(); ++i) flux[i] += amplitude * gaussian(grid[i], center, sigma);
    ranges.push_back(gaussian_support(grid, center, sigma, amplitude));
  }

  out.label.kind = AnomalyKind::double_peak;
  out.label.affected_pixels = merge_ranges(std::move(ranges));
  out.label.peak_pixels = {nearest_pixel(grid, blue_peak), nearest_pixel(grid, red_peak)};
  out.label.parameters = {{"rest_center", rest_center},
                          {"separation", separation},
                          {"amplitude", amplitude},
                          {"width", width},
                          {"redshift", spectrum.redshift}};
  return out;
}

std::vector<Spectrum> build_dataset(const SynthConfig& config, std::size_t count,
                                    std::pair<double, double> z_range, std::uint64_t seed) {
  config.validate();
  if (count < 1) throw InputError("dataset count must be >= 1");
  const auto [z_lo, z_hi] = z_range;
  if (!std::isfinite(z_lo) || !std::isfinite(z_hi) || z_lo < 0.0 || z_hi < z_lo) {
    throw InputError("invalid redshift range");
  }
  const auto groups = config.line_groups();
  std::vector<Spectrum> dataset;
  dataset.reserve(count);
  for (std::size_t item = 0; item < count; ++item) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(item), static_cast<std::uint32_t>(item >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double z = z_lo + (z_hi - z_lo) * unit(rng);
    std::vector<double> continuum = config.continuum_coeffs;
    for (std::size_t k = 0; k < continuum.size(); ++k) {
      const double j = config.continuum_jitter.empty() ? 0.0 : config.continuum_jitter[k];
      continuum[k] *= 1.0 + j * (2.0 * unit(rng) - 1.0);
    }
    std::map<std::string, double> scales;
    for (const auto& g : groups) scales[g] = 1.0 + config.line_jitter * (2.0 * unit(rng) - 1.0);
    dataset.push_back(render(config, z, continuum, scales, rng).spectrum);
  }
  return dataset;
}

ToyModelSpec toy_model_spec(const SynthConfig& config, const std::vector<Spectrum>& dataset) {
  config.validate();
  if (dataset.empty()) throw InputError("cannot fit the latent density on an empty dataset");

  ToyModelSpec spec;
  spec.canonical_grid = config.grid;
  spec.poly_pivot = config.continuum_pivot;
  spec.poly_scale = config.continuum_scale;
  for (std::size_t k = 0; k < config.continuum_coeffs.size(); ++k) {
    Template t;
    t.name = "continuum_t" + std::to_string(k);
    t.poly.assign(k + 1, 0.0);
    t.poly[k] = 1.0;
    spec.basis.push_back(std::move(t));
  }
  for (const auto& group : config.line_groups()) {
    Template t;
    t.name = group;
    for (const auto& line : config.lines) {
      if (line.group == group) t.bumps.push_back({line.rest_center, line.width, line.amplitude});
    }
    spec.basis.push_back(std::move(t));
  }

  const auto s = static_cast<Eigen::Index>(spec.basis.size());
  Vector mean = Vector::Zero(s);
  Vector m2 = Vector::Zero(s);
  std::size_t count = 0;
  for (const auto& item : dataset) {
    item.validate();
    const Vector latent = toy_encode(spec, item.flux, item.redshift);
    ++count;
    const Vector delta = latent - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta.cwiseProduct(latent - mean);
  }
  spec.latent_mean = mean;
  spec.latent_variances =
      count > 1 ? Vector(m2 / static_cast<double>(count - 1)) : Vector(Vector::Zero(s));
  spec.latent_variances = spec.latent_variances.cwiseMax(kVarianceFloor);
  return spec;
}

Scenario build_scenario(const SynthConfig& config, std::size_t count, std::uint64_t seed,
                        double test_redshift, const DoublePeakParams& double_peak,
                        const CalibrationJumpParams& calibration) {
  Scenario s;
  s.config = config;
  s.config.seed = seed;
  s.dataset = build_dataset(s.config, count, kDatasetRedshiftRange, seed);
  s.model = toy_model_spec(s.config, s.dataset);

  SynthConfig test_config = s.config;
  test_config.seed = seed + 1;
  s.clean = generate_spectrum(test_config, test_redshift).spectrum;
  s.population = build_dataset(s.config, 1, {test_redshift, test_redshift}, seed + 2).front();

  s.double_peak = inject_double_peak(s.clean, s.config, double_peak.rest_center, double_peak.separation,
                                     double_peak.amplitude, double_peak.width);
  s.calibration = inject_calibration_jump(s.clean, calibration.pivot, calibration.offset, calibration.slope);
  return s;
}

}  // namespace imo
