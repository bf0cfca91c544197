#pragma once

#include "regionvad/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace regionvad {

enum class CovarianceMode { full, diagonal, spherical, tied };

std::string_view to_string(CovarianceMode mode);
CovarianceMode parse_covariance_mode(std::string_view name);

struct EmConfig {
  int max_iterations = 200;
  double rel_tolerance = 1e-4;  // relative change of the total log-likelihood
  double ridge = 1e-6;          // added to every covariance diagonal
  int restarts = 3;             // k-means++ initialisations, best final LL kept
  std::uint64_t seed = 0;

  void validate() const;
};

struct FitMetadata {
  std::uint64_t seed = 0;
  int iterations = 0;
  double log_likelihood = 0.0;
  bool converged = false;
  int reseeded_components = 0;
  // Training log-likelihood after every E-step of the kept restart.
  std::vector<double> log_likelihood_history;
  // (k, BIC) for every k tried by select_components_bic.
  std::vector<std::pair<int, double>> bic_table;
};

/// Immutable Gaussian mixture with cached Cholesky factors. Under the tied
/// mode a single covariance is stored and shared by every component.
class GaussianMixture {
 public:
  GaussianMixture() = default;
  GaussianMixture(CovarianceMode mode, std::vector<double> weights, std::vector<Vector> means,
                  std::vector<Matrix> covariances, FitMetadata metadata = {});

  int dimension() const { return dimension_; }
  int num_components() const { return static_cast<int>(weights_.size()); }
  CovarianceMode mode() const { return mode_; }
  double weight(int i) const { return weights_.at(static_cast<std::size_t>(i)); }
  const Vector& mean(int i) const { return means_.at(static_cast<std::size_t>(i)); }
  const Matrix& covariance(int i) const;
  const FitMetadata& metadata() const { return metadata_; }
  void set_metadata(FitMetadata metadata) { metadata_ = std::move(metadata); }

  /// Mixture log-density at x (log-sum-exp over components).
  double log_pdf(const Eigen::Ref<const Vector>& x) const;
  /// Row-wise log-density of an N x D sample matrix.
  Vector log_pdf_rows(const Matrix& samples) const;
  /// log N(x | mean_i, cov_i), without the mixture weight.
  double component_log_pdf(int i, const Eigen::Ref<const Vector>& x) const;
  /// (x - mean_i)^T cov_i^{-1} (x - mean_i).
  double mahalanobis_squared(int i, const Eigen::Ref<const Vector>& x) const;
  /// N x k matrix of log(weight_i) + component log-density.
  Matrix weighted_component_log_pdf(const Matrix& samples) const;
  /// Lower Cholesky factor of component i's covariance.
  const Matrix& cholesky(int i) const;

 private:
  std::size_t cov_index(int i) const {
    return mode_ == CovarianceMode::tied ? 0 : static_cast<std::size_t>(i);
  }

  CovarianceMode mode_ = CovarianceMode::full;
  int dimension_ = 0;
  std::vector<double> weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covariances_;
  std::vector<Matrix> cholesky_;
  std::vector<double> log_det_;
  FitMetadata metadata_;
};

/// EM fit of a k-component mixture. Rows are put into a canonical
/// (lexicographic) order before fitting, so the result does not depend on the
/// row order of `samples`.
GaussianMixture fit_em(const Matrix& samples, int k, CovarianceMode mode, const EmConfig& config);

/// Number of free parameters of a k-component mixture in dimension d.
long free_parameter_count(CovarianceMode mode, long k, long d);

/// Total log-likelihood of the rows of `samples`.
double total_log_likelihood(const GaussianMixture& model, const Matrix& samples);

/// BIC = p ln N - 2 LL; lower is better.
double bic(const GaussianMixture& model, const Matrix& samples);

/// Fits k = 1..min(k_max, N) and returns the minimum-BIC model (ties go to
/// the smaller k). The BIC table is stored in the returned model's metadata.
GaussianMixture select_components_bic(const Matrix& samples, int k_max, CovarianceMode mode,
                                      const EmConfig& config);

/// n x D draws.
Matrix sample(const GaussianMixture& model, int n, std::uint64_t seed);

/// Plug-in estimate of KL(a||b) + KL(b||a): mean over samples_a of
/// log a - log b, plus the same over samples_b with roles swapped.
double symmetric_kl(const GaussianMixture& a, const GaussianMixture& b, const Matrix& samples_a,
                    const Matrix& samples_b);

/// Average of symmetric_kl over all ordered pairs i != j.
double mean_pairwise_divergence(std::span<const GaussianMixture> models,
                                std::span<const Matrix> samples);

/// Closed-form KL(N0 || N1) between two Gaussians.
double gaussian_kl(const Vector& mean0, const Matrix& cov0, const Vector& mean1,
                   const Matrix& cov1);

nlohmann::json to_json(const GaussianMixture& model);
GaussianMixture mixture_from_json(const nlohmann::json& doc);

}  // namespace regionvad
