#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "imo/model.hpp"
#include "imo/spectrum.hpp"

namespace imo {

// M dataset spectra reconstructed at the input redshift, each with its score.
struct BaselineEnsemble {
  std::vector<Vector> reconstructions;
  std::vector<double> scores;
  std::vector<std::size_t> source_ids;

  std::size_t size() const { return reconstructions.size(); }
  // M >= 1, consistent lengths, finite scores.
  void validate(std::size_t n) const;
  // Elementwise mean of the reconstructions.
  Vector mean_reconstruction() const;
};

// Strictly increasing window sizes, each in [1, N].
class WindowSet {
 public:
  WindowSet(std::vector<std::size_t> sizes, std::size_t n);

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t size() const { return sizes_.size(); }

  static const std::vector<std::size_t>& defaults();

 private:
  std::vector<std::size_t> sizes_;
};

enum class StridePolicy { disjoint, dense };

std::string to_string(StridePolicy policy);
StridePolicy stride_policy_from_string(const std::string& s);
// disjoint -> window, dense -> 1
std::size_t stride_for(StridePolicy policy, std::size_t window);

struct AttributionStack {
  Matrix per_window_mean;  // K x N
  Matrix per_window_var;   // K x N, unbiased over baselines
  // per_baseline[k] is M x N; empty unless requested.
  std::vector<Matrix> per_baseline;
  Vector combined;
};

Vector saliency(const ModelBundle& model, const Vector& x);

// Trapezoidal rule over `steps` evenly spaced points on [0, 1], endpoints included.
Vector integrated_gradients(const ModelBundle& model, const Vector& x, const Vector& baseline,
                            int steps);

// Full integrated gradients per ensemble member, averaged in ensemble order.
Vector expected_gradients(const ModelBundle& model, const Vector& x,
                          const BaselineEnsemble& ensemble, int steps);

// FA_i = score(x) - score(x with x_i <- baseline_i).
Vector feature_ablation(const ModelBundle& model, const Vector& x, const Vector& baseline);

// Forward occlusion: blocks of x are replaced by the baseline. Each block's
// score drop is spread evenly over its width; pixels covered by several blocks
// get the average.
Vector occlusion(const ModelBundle& model, const Vector& x, const Vector& baseline,
                 std::size_t window, std::size_t stride);

// Inverse occlusion: blocks of x are pasted into the reconstruction and the
// attribution is recon_score - score(pasted), spread over the block width.
Vector inverse_occlusion(const ModelBundle& model, const Vector& x, const Vector& recon,
                         double recon_score, std::size_t window, std::size_t stride);

struct ImoOptions {
  StridePolicy stride = StridePolicy::disjoint;
  bool keep_per_baseline = false;
  // Worker threads for the per-baseline loop. Results do not depend on it.
  unsigned threads = 1;
};

AttributionStack inverse_multiscale_occlusion(const ModelBundle& model, const Spectrum& x,
                                              const BaselineEnsemble& ensemble,
                                              const WindowSet& windows,
                                              const ImoOptions& options = {});

// Inverse-variance weighted mean over window rows with a relative variance
// floor; falls back to the unweighted mean where all variances are at the floor.
Vector combine_min_variance(const Matrix& per_window_mean, const Matrix& per_window_var);

}  // namespace imo
