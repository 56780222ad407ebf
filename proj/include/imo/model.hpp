#pragma once

#include <cstddef>
#include <string>

#include "imo/spectrum.hpp"

namespace imo {

// Scored model: encoder f, redshift-aware decoder g and latent log-density h.
// The anomaly score of a flux vector is h(f(x)). Implementations are immutable
// after construction and may be shared across threads.
class ModelBundle {
 public:
  virtual ~ModelBundle() = default;

  // Input length N.
  virtual std::size_t input_size() const = 0;
  // Latent length S.
  virtual std::size_t latent_size() const = 0;

  virtual Vector encode(const Vector& flux) const = 0;

  // Encode a spectrum observed at redshift `z`. Redshift-agnostic encoders
  // ignore `z`; the default forwards to encode().
  virtual Vector encode_at(const Vector& flux, double z) const;

  virtual Vector decode(const Vector& latent, double z) const = 0;
  virtual double latent_log_prob(const Vector& latent) const = 0;

  virtual bool has_analytic_gradient() const { return false; }

  // Stable identifier of the model parameters, recorded in result files.
  virtual std::string fingerprint() const = 0;

  // h(f(flux)). Validates length and finiteness; throws NumericalError if the
  // density returns a non-finite value.
  double score(const Vector& flux) const;

  // d score / d flux. Uses the analytic gradient when available, otherwise
  // central finite differences with step `relative_step * max(1, |x_i|)`.
  Vector score_gradient(const Vector& flux, double relative_step = 1e-5) const;

  // decode(encode_at(flux, source_z), target_z)
  Vector reconstruct(const Vector& flux, double source_z, double target_z) const;

 protected:
  // Only called when has_analytic_gradient() is true. Input already validated.
  virtual Vector analytic_gradient(const Vector& flux) const;
};

// Central-difference gradient of model.score, independent of any analytic path.
Vector finite_difference_gradient(const ModelBundle& model, const Vector& flux,
                                  double relative_step = 1e-5);

}  // namespace imo
