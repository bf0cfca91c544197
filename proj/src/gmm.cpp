#include "regionvad/gmm.hpp"

#include "regionvad/kmeans.hpp"
#include "regionvad/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace regionvad {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kEmptyComponentMass = 1e-8;

void require_finite(const Matrix& samples, const char* where) {
  if (!samples.allFinite()) {
    throw std::invalid_argument(std::string(where) + ": samples contain non-finite values");
  }
}

// Cholesky of a covariance, adding diagonal jitter when rounding leaves it
// numerically indefinite.
Matrix robust_cholesky(Matrix& cov, double ridge) {
  cov = 0.5 * (cov + cov.transpose());
  double jitter = 0.0;
  const double scale = std::max(1e-12, cov.diagonal().cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 12; ++attempt) {
    Matrix trial = cov;
    trial.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(trial);
    if (llt.info() == Eigen::Success) {
      Matrix l = llt.matrixL();
      if ((l.diagonal().array() > 0.0).all()) {
        cov = trial;
        return l;
      }
    }
    jitter = (jitter == 0.0) ? std::max(ridge, 1e-12 * scale) : jitter * 10.0;
  }
  throw std::runtime_error("covariance is not positive definite after regularisation");
}

struct Params {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
};

Vector row_logsumexp(const Matrix& m) {
  Vector out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    if (!std::isfinite(mx)) {
      out[i] = mx;
      continue;
    }
    out[i] = mx + std::log((m.row(i).array() - mx).exp().sum());
  }
  return out;
}

Matrix project_covariance(const Matrix& scatter, CovarianceMode mode) {
  const Eigen::Index d = scatter.rows();
  switch (mode) {
    case CovarianceMode::full:
    case CovarianceMode::tied:
      return scatter;
    case CovarianceMode::diagonal:
      return Matrix(scatter.diagonal().asDiagonal());
    case CovarianceMode::spherical: {
      const double v = scatter.diagonal().mean();
      return v * Matrix::Identity(d, d);
    }
  }
  return scatter;
}

Matrix weighted_scatter(const Matrix& x, const Vector& mean, const Vector& resp) {
  Matrix diff = x.rowwise() - mean.transpose();
  Matrix weighted = diff.array().colwise() * resp.array();
  return weighted.transpose() * diff;
}

// M-step given responsibilities. Components with no responsibility mass are
// re-seeded at the lowest-likelihood samples.
Params m_step(const Matrix& x, const Matrix& resp, CovarianceMode mode, double ridge,
              const Vector& sample_ll, const Matrix& data_cov, int& reseeds) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const int k = static_cast<int>(resp.cols());
  const Vector nk = resp.colwise().sum().transpose();
  Params p;
  p.weights.resize(static_cast<std::size_t>(k));
  p.means.resize(static_cast<std::size_t>(k));

  std::vector<Eigen::Index> reseed_order;
  std::vector<bool> empty(static_cast<std::size_t>(k), false);
  for (int j = 0; j < k; ++j) empty[j] = !(nk[j] >= kEmptyComponentMass);
  if (std::any_of(empty.begin(), empty.end(), [](bool e) { return e; })) {
    reseed_order.resize(static_cast<std::size_t>(n));
    std::iota(reseed_order.begin(), reseed_order.end(), Eigen::Index{0});
    std::stable_sort(reseed_order.begin(), reseed_order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return sample_ll[a] < sample_ll[b]; });
  }
  std::size_t next_reseed = 0;

  Matrix tied_scatter = Matrix::Zero(d, d);
  std::vector<Matrix> covs(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    if (empty[j]) {
      const Eigen::Index idx = reseed_order[next_reseed % reseed_order.size()];
      ++next_reseed;
      p.means[j] = x.row(idx).transpose();
      p.weights[j] = 1.0 / static_cast<double>(n);
      covs[j] = project_covariance(data_cov, mode);
      ++reseeds;
      continue;
    }
    p.weights[j] = nk[j] / static_cast<double>(n);
    p.means[j] = (resp.col(j).transpose() * x).transpose() / nk[j];
    Matrix scatter = weighted_scatter(x, p.means[j], resp.col(j));
    if (mode == CovarianceMode::tied) {
      tied_scatter += scatter;
    } else {
      covs[j] = project_covariance(scatter / nk[j], mode);
    }
  }
  const double wsum = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
  for (double& w : p.weights) w /= wsum;

  if (mode == CovarianceMode::tied) {
    Matrix shared = tied_scatter / static_cast<double>(n);
    shared.diagonal().array() += ridge;
    p.covariances.push_back(shared);
  } else {
    for (int j = 0; j < k; ++j) {
      covs[j].diagonal().array() += ridge;
      p.covariances.push_back(covs[j]);
    }
  }
  return p;
}

std::vector<Eigen::Index> canonical_order(const Matrix& x) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (x(a, c) < x(b, c)) return true;
      if (x(b, c) < x(a, c)) return false;
    }
    return false;
  });
  return order;
}

}  // namespace

std::string_view to_string(CovarianceMode mode) {
  switch (mode) {
    case CovarianceMode::full: return "full";
    case CovarianceMode::diagonal: return "diagonal";
    case CovarianceMode::spherical: return "spherical";
    case CovarianceMode::tied: return "tied";
  }
  return "full";
}

CovarianceMode parse_covariance_mode(std::string_view name) {
  if (name == "full") return CovarianceMode::full;
  if (name == "diagonal" || name == "diag") return CovarianceMode::diagonal;
  if (name == "spherical") return CovarianceMode::spherical;
  if (name == "tied") return CovarianceMode::tied;
  throw std::invalid_argument("unknown covariance mode: " + std::string(name));
}

void EmConfig::validate() const {
  if (max_iterations < 1) throw std::invalid_argument("EmConfig: max_iterations must be >= 1");
  if (!(rel_tolerance > 0.0)) throw std::invalid_argument("EmConfig: rel_tolerance must be > 0");
  if (!(ridge >= 0.0)) throw std::invalid_argument("EmConfig: ridge must be >= 0");
  if (restarts < 1) throw std::invalid_argument("EmConfig: restarts must be >= 1");
}

GaussianMixture::GaussianMixture(CovarianceMode mode, std::vector<double> weights,
                                 std::vector<Vector> means, std::vector<Matrix> covariances,
                                 FitMetadata metadata)
    : mode_(mode),
      weights_(std::move(weights)),
      means_(std::move(means)),
      covariances_(std::move(covariances)),
      metadata_(std::move(metadata)) {
  const std::size_t k = weights_.size();
  if (k == 0) throw std::invalid_argument("GaussianMixture: no components");
  if (means_.size() != k) throw std::invalid_argument("GaussianMixture: weights/means size mismatch");
  const std::size_t expected_covs = (mode_ == CovarianceMode::tied) ? 1 : k;
  if (covariances_.size() != expected_covs) {
    throw std::invalid_argument("GaussianMixture: wrong number of covariances for mode");
  }
  dimension_ = static_cast<int>(means_[0].size());
  if (dimension_ < 1) throw std::invalid_argument("GaussianMixture: dimension must be >= 1");
  double wsum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i])) {
      throw std::invalid_argument("GaussianMixture: weights must be positive");
    }
    if (means_[i].size() != dimension_ || !means_[i].allFinite()) {
      throw std::invalid_argument("GaussianMixture: bad mean");
    }
    wsum += weights_[i];
  }
  if (std::abs(wsum - 1.0) > 1e-9) {
    throw std::invalid_argument("GaussianMixture: weights must sum to 1");
  }
  for (const Matrix& c : covariances_) {
    if (c.rows() != dimension_ || c.cols() != dimension_ || !c.allFinite()) {
      throw std::invalid_argument("GaussianMixture: bad covariance shape");
    }
    Eigen::LLT<Matrix> llt(c);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("GaussianMixture: covariance is not positive definite");
    }
    Matrix l = llt.matrixL();
    if (!(l.diagonal().array() > 0.0).all()) {
      throw std::invalid_argument("GaussianMixture: covariance is not positive definite");
    }
    log_det_.push_back(2.0 * l.diagonal().array().log().sum());
    cholesky_.push_back(std::move(l));
  }
}

const Matrix& GaussianMixture::covariance(int i) const {
  if (i < 0 || i >= num_components()) throw std::out_of_range("component index");
  return covariances_[cov_index(i)];
}

const Matrix& GaussianMixture::cholesky(int i) const {
  if (i < 0 || i >= num_components()) throw std::out_of_range("component index");
  return cholesky_[cov_index(i)];
}

double GaussianMixture::mahalanobis_squared(int i, const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dimension_) throw std::invalid_argument("mahalanobis: dimension mismatch");
  const Vector diff = x - mean(i);
  const Vector z = cholesky(i).triangularView<Eigen::Lower>().solve(diff);
  return z.squaredNorm();
}

double GaussianMixture::component_log_pdf(int i, const Eigen::Ref<const Vector>& x) const {
  const double maha = mahalanobis_squared(i, x);
  return -0.5 * (dimension_ * kLog2Pi + log_det_[cov_index(i)] + maha);
}

double GaussianMixture::log_pdf(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dimension_) throw std::invalid_argument("log_pdf: dimension mismatch");
  if (!x.allFinite()) throw std::invalid_argument("log_pdf: non-finite input");
  const int k = num_components();
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    terms[i] = std::log(weights_[i]) + component_log_pdf(i, x);
    mx = std::max(mx, terms[i]);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

Matrix GaussianMixture::weighted_component_log_pdf(const Matrix& samples) const {
  if (samples.cols() != dimension_) throw std::invalid_argument("log_pdf: dimension mismatch");
  const int k = num_components();
  Matrix out(samples.rows(), k);
  for (int i = 0; i < k; ++i) {
    const Matrix diff = (samples.rowwise() - means_[i].transpose()).transpose();
    const Matrix z = cholesky(i).triangularView<Eigen::Lower>().solve(diff);
    const Eigen::RowVectorXd maha = z.colwise().squaredNorm();
    const double c = std::log(weights_[i]) - 0.5 * (dimension_ * kLog2Pi + log_det_[cov_index(i)]);
    out.col(i) = (c - 0.5 * maha.array()).transpose();
  }
  return out;
}

Vector GaussianMixture::log_pdf_rows(const Matrix& samples) const {
  return row_logsumexp(weighted_component_log_pdf(samples));
}

GaussianMixture fit_em(const Matrix& samples, int k, CovarianceMode mode, const EmConfig& config) {
  config.validate();
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (k < 1) throw std::invalid_argument("fit_em: k must be >= 1");
  if (d < 1) throw std::invalid_argument("fit_em: dimension must be >= 1");
  if (n < k) throw std::invalid_argument("fit_em: fewer samples than components");
  require_finite(samples, "fit_em");

  const std::vector<Eigen::Index> order = canonical_order(samples);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = samples.row(order[i]);

  const Vector global_mean = x.colwise().mean().transpose();
  Matrix data_cov = weighted_scatter(x, global_mean, Vector::Ones(n)) / static_cast<double>(n);

  GaussianMixture best;
  double best_ll = -std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (int r = 0; r < config.restarts; ++r) {
    const std::uint64_t restart_seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    const KMeansResult init = kmeans(x, k, restart_seed, 1, 20);
    Matrix resp = Matrix::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) resp(i, init.labels[i]) = 1.0;

    FitMetadata meta;
    meta.seed = config.seed;
    int reseeds = 0;
    Params params = m_step(x, resp, mode, config.ridge, Vector::Zero(n), data_cov, reseeds);

    GaussianMixture model;
    double prev_ll = 0.0;
    int it = 0;
    for (;; ++it) {
      for (Matrix& c : params.covariances) robust_cholesky(c, config.ridge);
      model = GaussianMixture(mode, params.weights, params.means, params.covariances);
      const Matrix logp = model.weighted_component_log_pdf(x);
      const Vector sample_ll = row_logsumexp(logp);
      double ll = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) ll += sample_ll[i];
      meta.log_likelihood_history.push_back(ll);
      meta.log_likelihood = ll;
      if (it > 0 && std::abs(ll - prev_ll) <= config.rel_tolerance * std::abs(ll)) {
        meta.converged = true;
        break;
      }
      if (it >= config.max_iterations) break;
      prev_ll = ll;
      resp = (logp.colwise() - sample_ll).array().exp();
      params = m_step(x, resp, mode, config.ridge, sample_ll, data_cov, reseeds);
    }
    meta.iterations = it;
    meta.reseeded_components = reseeds;
    if (!have_best || meta.log_likelihood > best_ll) {
      best_ll = meta.log_likelihood;
      model.set_metadata(std::move(meta));
      best = std::move(model);
      have_best = true;
    }
  }
  return best;
}

long free_parameter_count(CovarianceMode mode, long k, long d) {
  const long base = (k - 1) + k * d;
  switch (mode) {
    case CovarianceMode::full: return base + k * d * (d + 1) / 2;
    case CovarianceMode::diagonal: return base + k * d;
    case CovarianceMode::spherical: return base + k;
    case CovarianceMode::tied: return base + d * (d + 1) / 2;
  }
  return base;
}

double total_log_likelihood(const GaussianMixture& model, const Matrix& samples) {
  const Vector ll = model.log_pdf_rows(samples);
  double s = 0.0;
  for (Eigen::Index i = 0; i < ll.size(); ++i) s += ll[i];
  return s;
}

double bic(const GaussianMixture& model, const Matrix& samples) {
  if (samples.rows() == 0) throw std::invalid_argument("bic: no samples");
  if (samples.cols() != model.dimension()) throw std::invalid_argument("bic: dimension mismatch");
  const long p = free_parameter_count(model.mode(), model.num_components(), model.dimension());
  return static_cast<double>(p) * std::log(static_cast<double>(samples.rows())) -
         2.0 * total_log_likelihood(model, samples);
}

GaussianMixture select_components_bic(const Matrix& samples, int k_max, CovarianceMode mode,
                                      const EmConfig& config) {
  if (k_max < 1) throw std::invalid_argument("select_components_bic: k_max must be >= 1");
  if (samples.rows() < 1) throw std::invalid_argument("select_components_bic: no samples");
  const int upper = static_cast<int>(std::min<Eigen::Index>(k_max, samples.rows()));
  std::vector<std::pair<int, double>> table;
  GaussianMixture best;
  double best_bic = std::numeric_limits<double>::infinity();
  bool found = false;
  for (int k = 1; k <= upper; ++k) {
    GaussianMixture model;
    try {
      model = fit_em(samples, k, mode, config);
    } catch (const std::invalid_argument&) {
      if (k == 1) throw;
      continue;
    } catch (const std::runtime_error&) {
      continue;
    }
    const double score = bic(model, samples);
    table.emplace_back(k, score);
    if (!found || score < best_bic) {
      best_bic = score;
      best = std::move(model);
      found = true;
    }
  }
  if (!found) throw std::runtime_error("select_components_bic: every fit failed");
  FitMetadata meta = best.metadata();
  meta.bic_table = std::move(table);
  best.set_metadata(std::move(meta));
  return best;
}

Matrix sample(const GaussianMixture& model, int n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("sample: n must be >= 0");
  if (model.num_components() == 0) throw std::invalid_argument("sample: unfitted model");
  const int d = model.dimension();
  Matrix out(n, d);
  std::vector<double> weights(static_cast<std::size_t>(model.num_components()));
  for (int i = 0; i < model.num_components(); ++i) weights[i] = model.weight(i);
  Rng rng(seed);
  Vector z(d);
  for (int r = 0; r < n; ++r) {
    const int c = static_cast<int>(rng.categorical(weights));
    for (int j = 0; j < d; ++j) z[j] = rng.normal();
    out.row(r) = (model.mean(c) + model.cholesky(c) * z).transpose();
  }
  return out;
}

double symmetric_kl(const GaussianMixture& a, const GaussianMixture& b, const Matrix& samples_a,
                    const Matrix& samples_b) {
  if (samples_a.rows() == 0 || samples_b.rows() == 0) {
    throw std::invalid_argument("symmetric_kl: empty sample set");
  }
  if (a.dimension() != b.dimension() || samples_a.cols() != a.dimension() ||
      samples_b.cols() != a.dimension()) {
    throw std::invalid_argument("symmetric_kl: dimension mismatch");
  }
  const Vector aa = a.log_pdf_rows(samples_a);
  const Vector ba = b.log_pdf_rows(samples_a);
  const Vector bb = b.log_pdf_rows(samples_b);
  const Vector ab = a.log_pdf_rows(samples_b);
  double kl_ab = 0.0;
  for (Eigen::Index i = 0; i < aa.size(); ++i) kl_ab += aa[i] - ba[i];
  double kl_ba = 0.0;
  for (Eigen::Index i = 0; i < bb.size(); ++i) kl_ba += bb[i] - ab[i];
  return kl_ab / static_cast<double>(aa.size()) + kl_ba / static_cast<double>(bb.size());
}

double mean_pairwise_divergence(std::span<const GaussianMixture> models,
                                std::span<const Matrix> samples) {
  const std::size_t k = models.size();
  if (k < 2) throw std::invalid_argument("mean_pairwise_divergence: need at least 2 models");
  if (samples.size() != k) throw std::invalid_argument("mean_pairwise_divergence: lists not aligned");
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      // D_sym is symmetric, so each unordered pair stands for two ordered ones.
      total += 2.0 * symmetric_kl(models[i], models[j], samples[i], samples[j]);
    }
  }
  return total / static_cast<double>(k * (k - 1));
}

double gaussian_kl(const Vector& mean0, const Matrix& cov0, const Vector& mean1,
                   const Matrix& cov1) {
  const Eigen::LLT<Matrix> l0(cov0);
  const Eigen::LLT<Matrix> l1(cov1);
  if (l0.info() != Eigen::Success || l1.info() != Eigen::Success) {
    throw std::invalid_argument("gaussian_kl: covariance not positive definite");
  }
  const double d = static_cast<double>(mean0.size());
  const Matrix m0 = l0.matrixL();
  const Matrix m1 = l1.matrixL();
  const double logdet0 = 2.0 * m0.diagonal().array().log().sum();
  const double logdet1 = 2.0 * m1.diagonal().array().log().sum();
  const double trace = l1.solve(cov0).trace();
  const Vector diff = mean1 - mean0;
  const double maha = diff.dot(l1.solve(diff));
  return 0.5 * (trace + maha - d + logdet1 - logdet0);
}

nlohmann::json to_json(const GaussianMixture& model) {
  using nlohmann::json;
  json comps = json::array();
  const int d = model.dimension();
  for (int i = 0; i < model.num_components(); ++i) {
    json mean = json::array();
    for (int j = 0; j < d; ++j) mean.push_back(model.mean(i)[j]);
    json cov = json::array();
    const Matrix& c = model.covariance(i);
    for (int r = 0; r < d; ++r) {
      for (int col = 0; col < d; ++col) cov.push_back(c(r, col));
    }
    comps.push_back({{"weight", model.weight(i)}, {"mean", mean}, {"covariance_row_major", cov}});
  }
  const FitMetadata& m = model.metadata();
  json bic_table = json::array();
  for (const auto& [k, value] : m.bic_table) bic_table.push_back(json::array({k, value}));
  json meta = {{"seed", m.seed},
               {"iterations", m.iterations},
               {"log_likelihood", m.log_likelihood},
               {"converged", m.converged},
               {"reseeded_components", m.reseeded_components},
               {"log_likelihood_history", m.log_likelihood_history},
               {"bic_table", bic_table}};
  return json{{"dimension", d},
              {"covariance_mode", std::string(to_string(model.mode()))},
              {"components", comps},
              {"fit_metadata", meta}};
}

GaussianMixture mixture_from_json(const nlohmann::json& doc) {
  try {
    const int d = doc.at("dimension").get<int>();
    if (d < 1) throw std::invalid_argument("mixture document: dimension must be >= 1");
    const CovarianceMode mode = parse_covariance_mode(doc.at("covariance_mode").get<std::string>());
    std::vector<double> weights;
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (const auto& comp : doc.at("components")) {
      weights.push_back(comp.at("weight").get<double>());
      const auto mean = comp.at("mean").get<std::vector<double>>();
      const auto cov = comp.at("covariance_row_major").get<std::vector<double>>();
      if (static_cast<int>(mean.size()) != d || static_cast<int>(cov.size()) != d * d) {
        throw std::invalid_argument("mixture document: component has wrong dimension");
      }
      means.push_back(Eigen::Map<const Vector>(mean.data(), d));
      covs.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                   Eigen::RowMajor>>(cov.data(), d, d));
    }
    if (mode == CovarianceMode::tied && !covs.empty()) {
      for (const Matrix& c : covs) {
        if (c != covs.front()) {
          throw std::invalid_argument("mixture document: tied covariances differ");
        }
      }
      covs.resize(1);
    }
    FitMetadata meta;
    if (doc.contains("fit_metadata")) {
      const auto& m = doc.at("fit_metadata");
      meta.seed = m.value("seed", std::uint64_t{0});
      meta.iterations = m.value("iterations", 0);
      meta.log_likelihood = m.value("log_likelihood", 0.0);
      meta.converged = m.value("converged", false);
      meta.reseeded_components = m.value("reseeded_components", 0);
      meta.log_likelihood_history =
          m.value("log_likelihood_history", std::vector<double>{});
      if (m.contains("bic_table")) {
        for (const auto& row : m.at("bic_table")) {
          meta.bic_table.emplace_back(row.at(0).get<int>(), row.at(1).get<double>());
        }
      }
    }
    return GaussianMixture(mode, std::move(weights), std::move(means), std::move(covs),
                           std::move(meta));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("mixture document: ") + e.what());
  }
}

}  // namespace regionvad
