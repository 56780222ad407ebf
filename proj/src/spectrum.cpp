#include "imo/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include "imo/errors.hpp"

namespace imo {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw InputError(std::string(what) + " contains non-finite values");
}

void require_size(const Vector& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n) {
    throw InputError(std::string(what) + " has length " + std::to_string(v.size()) +
                     ", expected " + std::to_string(n));
  }
}

void Spectrum::validate() const {
  if (flux.size() == 0) throw InputError("spectrum is empty");
  require_size(wavelengths, size(), "wavelengths");
  require_finite(flux, "flux");
  require_finite(wavelengths, "wavelengths");
  for (Eigen::Index i = 1; i < wavelengths.size(); ++i) {
    if (!(wavelengths[i] > wavelengths[i - 1])) {
      throw InputError("wavelengths are not strictly increasing at pixel " + std::to_string(i));
    }
  }
  if (!std::isfinite(redshift) || redshift < 0.0) {
    throw InputError("redshift must be finite and >= 0");
  }
}

Vector linear_grid(double lo, double hi, std::size_t n) {
  if (n == 0) throw InputError("grid needs at least one point");
  if (n == 1) return Vector::Constant(1, lo);
  if (!(hi > lo)) throw InputError("grid upper bound must exceed lower bound");
  Vector g(static_cast<Eigen::Index>(n));
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[static_cast<Eigen::Index>(i)] = lo + step * static_cast<double>(i);
  g[g.size() - 1] = hi;
  return g;
}

std::size_t nearest_pixel(const Vector& grid, double wavelength) {
  if (grid.size() == 0) throw InputError("empty grid");
  const auto* first = grid.data();
  const auto* last = grid.data() + grid.size();
  const auto* it = std::lower_bound(first, last, wavelength);
  if (it == first) return 0;
  if (it == last) return static_cast<std::size_t>(grid.size() - 1);
  const auto hi = static_cast<std::size_t>(it - first);
  return (wavelength - *(it - 1) <= *it - wavelength) ? hi - 1 : hi;
}

std::string to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::calibration_jump:
      return "calibration_jump";
    case AnomalyKind::double_peak:
      return "double_peak";
  }
  return "unknown";
}

AnomalyKind anomaly_kind_from_string(const std::string& s) {
  if (s == "calibration_jump") return AnomalyKind::calibration_jump;
  if (s == "double_peak") return AnomalyKind::double_peak;
  throw InputError("unknown anomaly kind '" + s + "'");
}

bool AnomalyLabel::covers(std::size_t pixel) const {
  return std::any_of(affected_pixels.begin(), affected_pixels.end(),
                     [pixel](const PixelRange& r) { return r.contains(pixel); });
}

}  // namespace imo
