#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace imo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Observed-frame flux on a wavelength grid (Angstrom). Negative flux is allowed.
struct Spectrum {
  Vector wavelengths;
  Vector flux;
  double redshift = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(flux.size()); }

  // Throws InputError if lengths differ, the grid is not strictly increasing,
  // any value is non-finite, or redshift < 0.
  void validate() const;
};

// N evenly spaced wavelengths spanning [lo, hi].
Vector linear_grid(double lo, double hi, std::size_t n);

// Index of the grid point closest to `wavelength`.
std::size_t nearest_pixel(const Vector& grid, double wavelength);

// Throws InputError unless every entry is finite.
void require_finite(const Vector& v, const char* what);

// Throws InputError unless `v` has exactly `n` entries.
void require_size(const Vector& v, std::size_t n, const char* what);

enum class AnomalyKind { calibration_jump, double_peak };

std::string to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(const std::string& s);

// Half-open pixel interval [begin, end).
struct PixelRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const PixelRange&) const = default;
};

struct AnomalyLabel {
  AnomalyKind kind = AnomalyKind::calibration_jump;
  std::vector<PixelRange> affected_pixels;
  // Pixel indices of the injected peaks (double_peak only).
  std::vector<std::size_t> peak_pixels;
  std::map<std::string, double> parameters;

  bool covers(std::size_t pixel) const;
  bool operator==(const AnomalyLabel&) const = default;
};

}  // namespace imo
