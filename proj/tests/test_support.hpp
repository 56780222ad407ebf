#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "imo/model.hpp"
#include "imo/toy_model.hpp"

namespace imo::testing {

// score(x) = c for every x.
class ConstantModel final : public ModelBundle {
 public:
  ConstantModel(std::size_t n, double value) : n_(n), value_(value) {}
  std::size_t input_size() const override { return n_; }
  std::size_t latent_size() const override { return 1; }
  Vector encode(const Vector&) const override { return Vector::Zero(1); }
  Vector decode(const Vector&, double) const override { return Vector::Zero(static_cast<Eigen::Index>(n_)); }
  double latent_log_prob(const Vector&) const override { return value_; }
  std::string fingerprint() const override { return "constant"; }

 private:
  std::size_t n_;
  double value_;
};

// score(x) = w . x, with the finite-difference gradient path.
class LinearModel final : public ModelBundle {
 public:
  explicit LinearModel(Vector weights) : w_(std::move(weights)) {}
  std::size_t input_size() const override { return static_cast<std::size_t>(w_.size()); }
  std::size_t latent_size() const override { return 1; }
  Vector encode(const Vector& flux) const override { return Vector::Constant(1, w_.dot(flux)); }
  Vector decode(const Vector& latent, double) const override { return latent[0] * w_ / w_.squaredNorm(); }
  double latent_log_prob(const Vector& latent) const override { return latent[0]; }
  std::string fingerprint() const override { return "linear"; }
  const Vector& weights() const { return w_; }

 private:
  Vector w_;
};

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

// Small toy model: linear continuum plus Gaussian bumps, unit-ish variances.
inline ToyModelSpec small_toy_spec(std::size_t n = 64, double lo = 4000.0, double hi = 8000.0) {
  ToyModelSpec spec;
  spec.canonical_grid = Vector::LinSpaced(static_cast<Eigen::Index>(n), lo, hi);
  spec.basis.push_back({"const", {1.0}, {}});
  spec.basis.push_back({"slope", {0.0, 1.0}, {}});
  spec.basis.push_back({"line_a", {}, {{5000.0, 150.0, 1.0}}});
  spec.basis.push_back({"line_b", {}, {{6000.0, 200.0, 1.0}, {6300.0, 120.0, 0.5}}});
  spec.latent_mean = Vector::Zero(4);
  spec.latent_mean << 1.0, -0.2, 2.0, 1.0;
  spec.latent_variances = Vector::Zero(4);
  spec.latent_variances << 0.04, 0.01, 0.5, 0.25;
  return spec;
}

// max_i |a_i - b_i| / max(max_i |b_i|, tiny)
inline double max_relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Straight-line reimplementation of inverse multiscale occlusion: paste each
// block of x into every reconstruction, two-pass mean and variance, then the
// floored inverse-variance combination.
struct NaiveImo {
  Matrix mean;
  Matrix var;
  Vector combined;
};

inline NaiveImo naive_imo(const ModelBundle& model, const Vector& x, const std::vector<Vector>& recons,
                          const std::vector<std::size_t>& sizes, bool dense) {
  const std::size_t n = static_cast<std::size_t>(x.size());
  const std::size_t m = recons.size();
  const std::size_t k_count = sizes.size();
  NaiveImo out{Matrix::Zero(k_count, n), Matrix::Zero(k_count, n), Vector::Zero(n)};
  for (std::size_t k = 0; k < k_count; ++k) {
    const std::size_t w = sizes[k];
    const std::size_t stride = dense ? 1 : w;
    std::vector<std::vector<double>> rows(m, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> hits(n, 0.0);
      const double base = model.score(recons[j]);
      for (std::size_t start = 0; start < n; start += stride) {
        const std::size_t end = std::min(start + w, n);
        Vector pasted = recons[j];
        for (std::size_t i = start; i < end; ++i) pasted[i] = x[i];
        const double value = (base - model.score(pasted)) / static_cast<double>(end - start);
        for (std::size_t i = start; i < end; ++i) {
          rows[j][i] += value;
          hits[i] += 1.0;
        }
      }
      for (std::size_t i = 0; i < n; ++i) rows[j][i] /= hits[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double mu = 0.0;
      for (std::size_t j = 0; j < m; ++j) mu += rows[j][i];
      mu /= static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t j = 0; j < m; ++j) ss += (rows[j][i] - mu) * (rows[j][i] - mu);
      out.mean(k, i) = mu;
      out.var(k, i) = m > 1 ? ss / static_cast<double>(m - 1) : 0.0;
    }
  }
  const double floor = 1e-12 * (out.var.maxCoeff() + 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    bool all_small = true;
    for (std::size_t k = 0; k < k_count; ++k) all_small = all_small && out.var(k, i) <= floor;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      const double weight = all_small ? 1.0 : 1.0 / std::max(out.var(k, i), floor);
      num += weight * out.mean(k, i);
      den += weight;
    }
    out.combined[i] = num / den;
  }
  return out;
}

}  // namespace imo::testing
