#include "imo/model.hpp"

#include <algorithm>
#include <cmath>

#include "imo/errors.hpp"

namespace imo {

Vector ModelBundle::encode_at(const Vector& flux, double /*z*/) const { return encode(flux); }

double ModelBundle::score(const Vector& flux) const {
  require_size(flux, input_size(), "flux");
  require_finite(flux, "flux");
  const double s = latent_log_prob(encode(flux));
  if (!std::isfinite(s)) throw NumericalError("model score is not finite");
  return s;
}

Vector ModelBundle::score_gradient(const Vector& flux, double relative_step) const {
  require_size(flux, input_size(), "flux");
  require_finite(flux, "flux");
  if (has_analytic_gradient()) return analytic_gradient(flux);
  return finite_difference_gradient(*this, flux, relative_step);
}

Vector ModelBundle::reconstruct(const Vector& flux, double source_z, double target_z) const {
  require_size(flux, input_size(), "flux");
  require_finite(flux, "flux");
  return decode(encode_at(flux, source_z), target_z);
}

Vector ModelBundle::analytic_gradient(const Vector& /*flux*/) const {
  throw InputError("model has no analytic gradient");
}

Vector finite_difference_gradient(const ModelBundle& model, const Vector& flux,
                                  double relative_step) {
  if (!(relative_step > 0.0)) throw InputError("finite-difference step must be positive");
  Vector grad(flux.size());
  Vector probe = flux;
  for (Eigen::Index i = 0; i < flux.size(); ++i) {
    const double h = relative_step * std::max(1.0, std::abs(flux[i]));
    probe[i] = flux[i] + h;
    const double up = model.score(probe);
    probe[i] = flux[i] - h;
    const double down = model.score(probe);
    probe[i] = flux[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace imo
