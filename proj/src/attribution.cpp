#include "imo/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "imo/errors.hpp"

namespace imo {
namespace {

void check_pair(const ModelBundle& model, const Vector& x, const Vector& other, const char* what) {
  require_size(x, model.input_size(), "input");
  require_size(other, model.input_size(), what);
  require_finite(x, "input");
  require_finite(other, what);
}

void check_window(std::size_t n, std::size_t window, std::size_t stride) {
  if (window < 1 || window > n) {
    throw InputError("window " + std::to_string(window) + " outside [1, " + std::to_string(n) + "]");
  }
  if (stride < 1 || stride > window) {
    throw InputError("stride " + std::to_string(stride) + " outside [1, window]");
  }
}

// Visits blocks [i, min(i + window, n)) for i = 0, stride, 2 stride, ... < n,
// spreads each block value over its width and averages by coverage.
template <typename BlockValue>
Vector spread_blocks(std::size_t n, std::size_t window, std::size_t stride, BlockValue&& value) {
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(n));
  Vector coverage = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; i += stride) {
    const std::size_t u = std::min(i + window, n);
    const auto begin = static_cast<Eigen::Index>(i);
    const auto width = static_cast<Eigen::Index>(u - i);
    const double per_pixel = value(begin, width) / static_cast<double>(width);
    sum.segment(begin, width).array() += per_pixel;
    coverage.segment(begin, width).array() += 1.0;
  }
  return (sum.array() / coverage.array()).matrix();
}

// Running mean and sum of squared deviations over rows, accumulated in row order.
// Identical rows give back that row exactly with zero spread.
struct RowMoments {
  Vector mean;
  Vector m2;
  std::size_t count = 0;

  explicit RowMoments(Eigen::Index n) : mean(Vector::Zero(n)), m2(Vector::Zero(n)) {}

  void add(const Vector& row) {
    ++count;
    const Vector delta = row - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta.cwiseProduct(row - mean);
  }

  Vector variance() const {
    if (count < 2) return Vector::Zero(mean.size());
    return (m2 / static_cast<double>(count - 1)).cwiseMax(0.0);
  }
};

}  // namespace

void BaselineEnsemble::validate(std::size_t n) const {
  if (reconstructions.empty()) throw InputError("baseline ensemble is empty");
  if (scores.size() != reconstructions.size() || source_ids.size() != reconstructions.size()) {
    throw InputError("baseline ensemble fields have inconsistent lengths");
  }
  for (std::size_t j = 0; j < reconstructions.size(); ++j) {
    require_size(reconstructions[j], n, "baseline reconstruction");
    require_finite(reconstructions[j], "baseline reconstruction");
    if (!std::isfinite(scores[j])) throw InputError("baseline score is not finite");
  }
}

Vector BaselineEnsemble::mean_reconstruction() const {
  if (reconstructions.empty()) throw InputError("baseline ensemble is empty");
  RowMoments moments(reconstructions.front().size());
  for (const auto& r : reconstructions) moments.add(r);
  return moments.mean;
}

WindowSet::WindowSet(std::vector<std::size_t> sizes, std::size_t n) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw InputError("window set is empty");
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    if (sizes_[k] < 1 || sizes_[k] > n) {
      throw InputError("window " + std::to_string(sizes_[k]) + " outside [1, " + std::to_string(n) + "]");
    }
    if (k > 0 && sizes_[k] <= sizes_[k - 1]) {
      throw InputError("window sizes must be strictly increasing");
    }
  }
}

const std::vector<std::size_t>& WindowSet::defaults() {
  static const std::vector<std::size_t> sizes{1, 4, 16, 64};
  return sizes;
}

std::string to_string(StridePolicy policy) {
  return policy == StridePolicy::dense ? "dense" : "disjoint";
}

StridePolicy stride_policy_from_string(const std::string& s) {
  if (s == "disjoint") return StridePolicy::disjoint;
  if (s == "dense") return StridePolicy::dense;
  throw InputError("unknown stride policy '" + s + "' (expected disjoint or dense)");
}

std::size_t stride_for(StridePolicy policy, std::size_t window) {
  return policy == StridePolicy::dense ? 1 : window;
}

Vector saliency(const ModelBundle& model, const Vector& x) { return model.score_gradient(x); }

Vector integrated_gradients(const ModelBundle& model, const Vector& x, const Vector& baseline,
                            int steps) {
  check_pair(model, x, baseline, "baseline");
  if (steps < 2) throw InputError("integrated gradients needs at least 2 steps");
  const Vector path = x - baseline;
  Vector integral = Vector::Zero(x.size());
  const double last = static_cast<double>(steps - 1);
  for (int j = 0; j < steps; ++j) {
    const double alpha = static_cast<double>(j) / last;
    const double weight = (j == 0 || j == steps - 1) ? 0.5 : 1.0;
    integral += weight * model.score_gradient(baseline + alpha * path);
  }
  integral /= last;
  return path.cwiseProduct(integral);
}

Vector expected_gradients(const ModelBundle& model, const Vector& x,
                          const BaselineEnsemble& ensemble, int steps) {
  ensemble.validate(model.input_size());
  RowMoments moments(x.size());
  for (const auto& b : ensemble.reconstructions) {
    moments.add(integrated_gradients(model, x, b, steps));
  }
  return moments.mean;
}

Vector feature_ablation(const ModelBundle& model, const Vector& x, const Vector& baseline) {
  check_pair(model, x, baseline, "baseline");
  const double reference = model.score(x);
  Vector out(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = baseline[i];
    out[i] = reference - model.score(probe);
    probe[i] = x[i];
  }
  return out;
}

Vector occlusion(const ModelBundle& model, const Vector& x, const Vector& baseline,
                 std::size_t window, std::size_t stride) {
  check_pair(model, x, baseline, "baseline");
  const std::size_t n = model.input_size();
  check_window(n, window, stride);
  const double reference = model.score(x);
  Vector probe = x;
  return spread_blocks(n, window, stride, [&](Eigen::Index begin, Eigen::Index width) {
    probe.segment(begin, width) = baseline.segment(begin, width);
    const double drop = reference - model.score(probe);
    probe.segment(begin, width) = x.segment(begin, width);
    return drop;
  });
}

Vector inverse_occlusion(const ModelBundle& model, const Vector& x, const Vector& recon,
                         double recon_score, std::size_t window, std::size_t stride) {
  check_pair(model, x, recon, "reconstruction");
  if (!std::isfinite(recon_score)) throw InputError("reconstruction score is not finite");
  const std::size_t n = model.input_size();
  check_window(n, window, stride);
  Vector probe = recon;
  return spread_blocks(n, window, stride, [&](Eigen::Index begin, Eigen::Index width) {
    probe.segment(begin, width) = x.segment(begin, width);
    const double drop = recon_score - model.score(probe);
    probe.segment(begin, width) = recon.segment(begin, width);
    return drop;
  });
}

AttributionStack inverse_multiscale_occlusion(const ModelBundle& model, const Spectrum& x,
                                              const BaselineEnsemble& ensemble,
                                              const WindowSet& windows,
                                              const ImoOptions& options) {
  x.validate();
  const std::size_t n = model.input_size();
  require_size(x.flux, n, "input flux");
  ensemble.validate(n);
  WindowSet checked(windows.sizes(), n);

  const auto rows = static_cast<Eigen::Index>(ensemble.size());
  const auto cols = static_cast<Eigen::Index>(n);
  const auto k_count = static_cast<Eigen::Index>(windows.size());
  AttributionStack stack;
  stack.per_window_mean.resize(k_count, cols);
  stack.per_window_var.resize(k_count, cols);

  for (Eigen::Index k = 0; k < k_count; ++k) {
    const std::size_t window = windows.sizes()[static_cast<std::size_t>(k)];
    const std::size_t stride = stride_for(options.stride, window);
    Matrix per_baseline(rows, cols);

    auto run_one = [&](Eigen::Index j) {
      const auto idx = static_cast<std::size_t>(j);
      per_baseline.row(j) = inverse_occlusion(model, x.flux, ensemble.reconstructions[idx],
                                              ensemble.scores[idx], window, stride)
                                .transpose();
    };

    const unsigned workers =
        std::min<unsigned>(std::max(1u, options.threads), static_cast<unsigned>(rows));
    if (workers <= 1) {
      for (Eigen::Index j = 0; j < rows; ++j) run_one(j);
    } else {
      std::exception_ptr failure;
      std::mutex failure_mutex;
      {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned t = 0; t < workers; ++t) {
          pool.emplace_back([&, t] {
            try {
              for (Eigen::Index j = t; j < rows; j += workers) run_one(j);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
          });
        }
      }
      if (failure) std::rethrow_exception(failure);
    }

    RowMoments moments(cols);
    for (Eigen::Index j = 0; j < rows; ++j) moments.add(per_baseline.row(j).transpose());
    stack.per_window_mean.row(k) = moments.mean.transpose();
    stack.per_window_var.row(k) = moments.variance().transpose();
    if (options.keep_per_baseline) stack.per_baseline.push_back(std::move(per_baseline));
  }

  stack.combined = combine_min_variance(stack.per_window_mean, stack.per_window_var);
  return stack;
}

Vector combine_min_variance(const Matrix& per_window_mean, const Matrix& per_window_var) {
  if (per_window_mean.rows() == 0 || per_window_mean.cols() == 0) {
    throw InputError("attribution stack is empty");
  }
  if (per_window_mean.rows() != per_window_var.rows() ||
      per_window_mean.cols() != per_window_var.cols()) {
    throw InputError("per-window mean and variance shapes differ");
  }
  if (!per_window_mean.allFinite() || !per_window_var.allFinite()) {
    throw InputError("attribution stack contains non-finite values");
  }
  if ((per_window_var.array() < 0.0).any()) throw InputError("negative variance in attribution stack");

  const Eigen::Index k_count = per_window_mean.rows();
  if (k_count == 1) return per_window_mean.row(0).transpose();

  Vector combined(per_window_mean.cols());
  for (Eigen::Index i = 0; i < per_window_mean.cols(); ++i) {
    const auto means = per_window_mean.col(i);
    const auto vars = per_window_var.col(i);
    const double floor = 1e-12 * (vars.maxCoeff() + 1.0);
    double value = 0.0;
    if ((vars.array() <= floor).all()) {
      value = means.sum() / static_cast<double>(k_count);
    } else {
      double num = 0.0;
      double den = 0.0;
      for (Eigen::Index k = 0; k < k_count; ++k) {
        const double w = 1.0 / std::max(vars[k], floor);
        num += means[k] * w;
        den += w;
      }
      value = num / den;
    }
    if (!std::isfinite(value)) throw NumericalError("combined attribution is not finite");
    combined[i] = std::clamp(value, means.minCoeff(), means.maxCoeff());
  }
  return combined;
}

}  // namespace imo
