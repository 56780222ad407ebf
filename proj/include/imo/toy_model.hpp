#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "imo/model.hpp"
#include "imo/spectrum.hpp"

namespace imo {

struct GaussianBump {
  double center = 0.0;  // rest frame, Angstrom
  double width = 1.0;   // rest frame sigma, Angstrom
  double weight = 1.0;

  bool operator==(const GaussianBump&) const = default;
};

// A rest-frame template: polynomial in t = (lambda_rest - pivot) / scale plus
// Gaussian bumps.
struct Template {
  std::string name;
  std::vector<double> poly;
  std::vector<GaussianBump> bumps;

  double evaluate(double rest_wavelength, double pivot, double scale) const;
  bool operator==(const Template&) const = default;
};

struct ToyModelSpec {
  std::vector<Template> basis;
  Vector latent_mean;
  Vector latent_variances;
  Vector canonical_grid;
  double poly_pivot = 6000.0;
  double poly_scale = 2000.0;

  std::size_t latent_size() const { return basis.size(); }
  std::size_t input_size() const { return static_cast<std::size_t>(canonical_grid.size()); }

  // Checks shapes, positivity of variances and the grid; does not test rank.
  void validate() const;
};

// N x S matrix of templates evaluated at grid / (1 + z).
Matrix redshifted_basis(const ToyModelSpec& spec, double z);

// Least-squares projection of flux onto the redshifted basis.
// Throws DegenerateModelError when the basis is rank deficient at z.
Vector toy_encode(const ToyModelSpec& spec, const Vector& flux, double z);

// sum_k latent_k * basis_k(grid / (1 + z))
Vector toy_decode(const ToyModelSpec& spec, const Vector& latent, double z);

// Diagonal Gaussian log density of the latent vector.
double toy_log_prob(const ToyModelSpec& spec, const Vector& latent);

// Analytic model bundle built for one analysis redshift: encode() projects
// onto the basis at that redshift, encode_at() at any other.
class ToyModel final : public ModelBundle {
 public:
  ToyModel(ToyModelSpec spec, double analysis_redshift);

  std::size_t input_size() const override { return spec_.input_size(); }
  std::size_t latent_size() const override { return spec_.latent_size(); }

  Vector encode(const Vector& flux) const override;
  Vector encode_at(const Vector& flux, double z) const override;
  Vector decode(const Vector& latent, double z) const override;
  double latent_log_prob(const Vector& latent) const override;
  bool has_analytic_gradient() const override { return true; }
  std::string fingerprint() const override;

  const ToyModelSpec& spec() const { return spec_; }
  double analysis_redshift() const { return redshift_; }
  // S x N linear encoder at the analysis redshift.
  const Matrix& encoder_matrix() const { return encoder_; }

 protected:
  Vector analytic_gradient(const Vector& flux) const override;

 private:
  ToyModelSpec spec_;
  double redshift_;
  Matrix basis_;
  Matrix encoder_;
  double log_norm_;
};

}  // namespace imo
