#include "imo/toy_model.hpp"

#include <cmath>
#include <numbers>

#include "imo/errors.hpp"
#include "imo/io.hpp"

namespace imo {
namespace {

constexpr double kRankThreshold = 1e-10;

// S x N pseudo-inverse of the basis via column-pivoted QR.
Matrix least_squares_encoder(const Matrix& basis, double z) {
  Eigen::ColPivHouseholderQR<Matrix> qr(basis);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < basis.cols()) {
    throw DegenerateModelError("toy basis is rank deficient at z = " + std::to_string(z) + " (rank " +
                               std::to_string(qr.rank()) + " < " + std::to_string(basis.cols()) + ")");
  }
  return qr.solve(Matrix::Identity(basis.rows(), basis.rows()));
}

void check_redshift(double z) {
  if (!std::isfinite(z) || z < 0.0) throw InputError("redshift must be finite and >= 0");
}

}  // namespace

double Template::evaluate(double rest_wavelength, double pivot, double scale) const {
  double value = 0.0;
  const double t = (rest_wavelength - pivot) / scale;
  double power = 1.0;
  for (double c : poly) {
    value += c * power;
    power *= t;
  }
  for (const auto& b : bumps) {
    const double u = (rest_wavelength - b.center) / b.width;
    value += b.weight * std::exp(-0.5 * u * u);
  }
  return value;
}

void ToyModelSpec::validate() const {
  if (basis.empty()) throw InputError("toy model needs at least one template");
  if (canonical_grid.size() == 0) throw InputError("toy model grid is empty");
  require_finite(canonical_grid, "canonical grid");
  for (Eigen::Index i = 1; i < canonical_grid.size(); ++i) {
    if (!(canonical_grid[i] > canonical_grid[i - 1])) {
      throw InputError("canonical grid is not strictly increasing");
    }
  }
  require_size(latent_mean, latent_size(), "latent_mean");
  require_size(latent_variances, latent_size(), "latent_variances");
  require_finite(latent_mean, "latent_mean");
  require_finite(latent_variances, "latent_variances");
  if ((latent_variances.array() <= 0.0).any()) {
    throw InputError("latent variances must be strictly positive");
  }
  if (!(poly_scale > 0.0) || !std::isfinite(poly_pivot)) {
    throw InputError("polynomial normalization must be finite with positive scale");
  }
  for (const auto& t : basis) {
    for (const auto& b : t.bumps) {
      if (!(b.width > 0.0)) throw InputError("template '" + t.name + "' has a non-positive bump width");
    }
  }
}

Matrix redshifted_basis(const ToyModelSpec& spec, double z) {
  check_redshift(z);
  const auto n = spec.canonical_grid.size();
  const auto s = static_cast<Eigen::Index>(spec.latent_size());
  Matrix basis(n, s);
  for (Eigen::Index k = 0; k < s; ++k) {
    const auto& tmpl = spec.basis[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < n; ++i) {
      basis(i, k) = tmpl.evaluate(spec.canonical_grid[i] / (1.0 + z), spec.poly_pivot, spec.poly_scale);
    }
  }
  return basis;
}

Vector toy_encode(const ToyModelSpec& spec, const Vector& flux, double z) {
  require_size(flux, spec.input_size(), "flux");
  require_finite(flux, "flux");
  return least_squares_encoder(redshifted_basis(spec, z), z) * flux;
}

Vector toy_decode(const ToyModelSpec& spec, const Vector& latent, double z) {
  require_size(latent, spec.latent_size(), "latent");
  require_finite(latent, "latent");
  return redshifted_basis(spec, z) * latent;
}

double toy_log_prob(const ToyModelSpec& spec, const Vector& latent) {
  require_size(latent, spec.latent_size(), "latent");
  const Eigen::ArrayXd d = latent.array() - spec.latent_mean.array();
  const double quad = (d * d / spec.latent_variances.array()).sum();
  const double norm = (2.0 * std::numbers::pi * spec.latent_variances.array()).log().sum();
  return -0.5 * quad - 0.5 * norm;
}

ToyModel::ToyModel(ToyModelSpec spec, double analysis_redshift)
    : spec_(std::move(spec)), redshift_(analysis_redshift) {
  spec_.validate();
  check_redshift(redshift_);
  basis_ = redshifted_basis(spec_, redshift_);
  encoder_ = least_squares_encoder(basis_, redshift_);
  log_norm_ = -0.5 * (2.0 * std::numbers::pi * spec_.latent_variances.array()).log().sum();
}

Vector ToyModel::encode(const Vector& flux) const {
  require_size(flux, input_size(), "flux");
  return encoder_ * flux;
}

Vector ToyModel::encode_at(const Vector& flux, double z) const {
  if (z == redshift_) return encode(flux);
  return toy_encode(spec_, flux, z);
}

Vector ToyModel::decode(const Vector& latent, double z) const {
  require_size(latent, latent_size(), "latent");
  require_finite(latent, "latent");
  if (z == redshift_) return basis_ * latent;
  return toy_decode(spec_, latent, z);
}

double ToyModel::latent_log_prob(const Vector& latent) const {
  require_size(latent, latent_size(), "latent");
  const Eigen::ArrayXd d = latent.array() - spec_.latent_mean.array();
  return -0.5 * (d * d / spec_.latent_variances.array()).sum() + log_norm_;
}

Vector ToyModel::analytic_gradient(const Vector& flux) const {
  const Vector latent = encoder_ * flux;
  const Vector dlogp =
      ((spec_.latent_mean.array() - latent.array()) / spec_.latent_variances.array()).matrix();
  return encoder_.transpose() * dlogp;
}

std::string ToyModel::fingerprint() const {
  auto j = to_json(spec_);
  j["analysis_redshift"] = redshift_;
  return sha256_hex(j.dump());
}

}  // namespace imo
