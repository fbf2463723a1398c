#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "oddm/common.hpp"
#include "oddm/linops.hpp"

namespace oddm {

struct MampConfig {
  int max_iterations = 50;     // T_t
  int damping_window = 3;      // ell
  double sparsity = 0.1;       // p, prior nonzero probability
  double prior_mean = 0.0;     // u_g
  double prior_var = 1.0;      // v_g (total complex variance)
  double noise_var = 1e-2;     // delta^2
  double lambda_min = 0.0;     // lower eigenvalue bound of Phi Phi^H
  double lambda_max = -1.0;    // upper bound; < 0 means estimate by power iteration
  double tolerance = 1e-6;     // relative step on the posterior estimate
  int memory_length = 16;      // stored NLE outputs for the LLE correction
  double kappa_cap = 1e6;      // finite stand-in for the kappa* infinity branch
  int moment_probes = 64;      // Hutchinson probes (matrix-free moments)
  double moment_rel_tol = 0.01;
  int divergence_patience = 5;
  std::uint64_t seed = 1;      // internal randomness (power iteration, probes)
};

/// theta_t = 1 / (lambda_bar + rho_t); keeps rho(theta_t B) < 1.
inline double compute_theta(double lambda_min, double lambda_max, double rho) {
  if (rho <= 0.0) throw std::invalid_argument("compute_theta: rho must be positive");
  return 1.0 / (0.5 * (lambda_min + lambda_max) + rho);
}

/// Scalar Bernoulli-Gaussian posterior under Gaussian noise:
/// prior x = b*g, b ~ Bernoulli(p), g ~ N(u, v); observation y = x + n,
/// n ~ N(0, d2). Returns posterior mean and variance. Evaluated in the
/// log domain so extreme inputs stay finite.
inline std::pair<double, double> nle_denoise(double y, double p, double u,
                                             double v, double d2) {
  if (v <= 0.0 || d2 <= 0.0)
    throw std::invalid_argument("nle_denoise: variances must be positive");
  double v_hat = 1.0 / (1.0 / v + 1.0 / d2);
  double u_hat = v_hat * (u / v + y / d2);
  double p_post;
  if (p >= 1.0) {
    p_post = 1.0;
  } else if (p <= 0.0) {
    p_post = 0.0;
  } else {
    double log_c = 0.5 * std::log1p(v / d2);
    double d = (y - u) * (y - u) / (2.0 * (d2 + v)) - y * y / (2.0 * d2);
    // p_post = p / (p + c (1-p) exp(d))
    double log_odds = std::log1p(-p) - std::log(p) + log_c + d;
    p_post = 1.0 / (1.0 + std::exp(std::min(log_odds, 700.0)));
  }
  double x_post = p_post * u_hat;
  double v_post = p_post * (1.0 - p_post) * u_hat * u_hat + p_post * v_hat;
  return {x_post, v_post};
}

/// Complex entries are denoised component-wise with half variances; the
/// returned variance is the total (real + imag) posterior variance.
inline std::pair<cplx, double> nle_denoise_complex(cplx y, double p, double u,
                                                   double v, double d2) {
  double u_comp = u * (0.5 * std::numbers::sqrt2);
  auto [xr, vr] = nle_denoise(y.real(), p, u_comp, v / 2.0, d2 / 2.0);
  auto [xi, vi] = nle_denoise(y.imag(), p, u_comp, v / 2.0, d2 / 2.0);
  return {cplx(xr, xi), vr + vi};
}

/// Spectral moments w_t = tr{Phi^H B^t Phi} / dim(h) with
/// B = lambda_bar I - Phi Phi^H. Exact via matrix products when a dense
/// matrix is available, otherwise Hutchinson estimation.
class SpectralMoments {
 public:
  SpectralMoments(const LinOp& op, double lambda_bar, const Mat* dense,
                  int probes, double rel_tol, std::uint64_t seed)
      : op_(op), lambda_bar_(lambda_bar), rel_tol_(rel_tol), rng_(seed) {
    if (dense != nullptr) {
      phi_ = *dense;
      state_dense_ = phi_;
    } else {
      init_probes(probes);
    }
  }

  double w(int k) {
    ensure(k);
    return w_[static_cast<std::size_t>(k)];
  }

  double w_bar(int i, int j) {
    return lambda_bar_ * w(i + j) - w(i + j + 1) - w(i) * w(j);
  }

  bool exact() const { return phi_.size() > 0; }

 private:
  void init_probes(int probes) {
    const Eigen::Index n = op_.cols();
    std::uniform_int_distribution<int> coin(0, 1);
    probe_q_.reserve(probes);
    for (int j = 0; j < probes; ++j) {
      Vec z(n);
      for (Eigen::Index i = 0; i < n; ++i)
        z[i] = cplx(coin(rng_) ? 1.0 : -1.0, coin(rng_) ? 1.0 : -1.0) * (0.5 * std::numbers::sqrt2);
      probe_q_.push_back(op_.apply(z));
    }
    probe_state_ = probe_q_;
  }

  void ensure(int k) {
    const double inv_dim = 1.0 / static_cast<double>(op_.cols());
    while (static_cast<int>(w_.size()) <= k) {
      if (exact()) {
        if (!w_.empty())
          state_dense_ = lambda_bar_ * state_dense_ - phi_ * (phi_.adjoint() * state_dense_);
        w_.push_back(std::real((phi_.conjugate().cwiseProduct(state_dense_)).sum()) * inv_dim);
      } else {
        if (!w_.empty())
          for (auto& s : probe_state_) s = lambda_bar_ * s - op_.apply(op_.adjoint(s));
        double mean = 0.0, m2 = 0.0;
        int count = 0;
        for (std::size_t j = 0; j < probe_q_.size(); ++j) {
          double sample = std::real(probe_q_[j].dot(probe_state_[j])) * inv_dim;
          ++count;
          double delta = sample - mean;
          mean += delta / count;
          m2 += delta * (sample - mean);
        }
        double stderr_ = count > 1 ? std::sqrt(m2 / (count - 1) / count) : 0.0;
        double scale = std::max(std::abs(mean), std::abs(w_.empty() ? mean : w_[0]));
        if (scale > 0.0 && stderr_ > 5.0 * rel_tol_ * scale)
          throw DivergenceError("Hutchinson moment estimate too noisy; increase probes");
        w_.push_back(mean);
      }
    }
  }

  const LinOp& op_;
  double lambda_bar_;
  double rel_tol_;
  std::mt19937_64 rng_;
  Mat phi_;          // dense path
  Mat state_dense_;  // B^k Phi
  std::vector<Vec> probe_q_;      // Phi z_j
  std::vector<Vec> probe_state_;  // B^k Phi z_j
  std::vector<double> w_;
};

struct IterationRecord {
  int iteration;
  double nu_gamma;  // NLE error variance entering this iteration
  double nu_theta;  // LLE error variance
  double nmse;      // vs truth when supplied, else NaN
};

struct MampResult {
  Vec estimate;  // posterior mean at the final iteration
  std::vector<IterationRecord> trace;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
};

namespace detail {

/// Minimum-variance affine combination weights for candidates whose
/// error covariance follows the nesting rule U_ab = var of the later
/// candidate. Returns false when the system is singular or yields a
/// non-positive combined variance.
inline bool damping_weights(const std::vector<double>& vars, RealVec& weights,
                            double& combined_var) {
  const int w = static_cast<int>(vars.size());
  RealMat u(w, w);
  for (int a = 0; a < w; ++a)
    for (int b = 0; b < w; ++b) u(a, b) = vars[static_cast<std::size_t>(std::max(a, b))];
  Eigen::FullPivLU<RealMat> lu(u);  // window-sized, constant cost
  if (!lu.isInvertible()) return false;
  RealVec ones = RealVec::Ones(w);
  RealVec ui = lu.solve(ones);
  double denom = ones.dot(ui);
  if (!(denom > 0.0)) return false;
  weights = ui / denom;
  combined_var = 1.0 / denom;
  return true;
}

/// nu_theta as a function of kappa given the e-terms (the quantity
/// kappa* minimizes).
inline double nu_theta_of_kappa(double kappa, double e0, double e1, double e2,
                                double e3, double w0) {
  double denom = w0 * w0 * (kappa + e0) * (kappa + e0);
  return (e1 * kappa * kappa - 2.0 * e2 * kappa + e3) / denom;
}

}  // namespace detail

/// Memory AMP engine. Exposed step-by-step so tests can probe the
/// per-iteration scalars; most callers use mamp_estimate below.
class MampEngine {
 public:
  MampEngine(const LinOp& op, const Vec& y, const MampConfig& cfg)
      : base_op_(op), cfg_(cfg), rng_(cfg.seed) {
    double lmax = cfg_.lambda_max;
    if (lmax < 0.0) lmax = 1.02 * power_iteration(base_op_, rng_);
    double lmin = cfg_.lambda_min;
    double s2 = 0.5 * (lmin + lmax);
    if (s2 <= 0.0) s2 = 1.0;
    scale_ = std::sqrt(s2);
    op_ = std::make_unique<ScaledOp>(base_op_, scale_);
    lambda_bar_ = 1.0;  // by construction after rescaling
    lambda_min_ = lmin / s2;
    lambda_max_ = lmax / s2;
    y_ = y / scale_;
    sigma2_ = std::max(cfg_.noise_var, 1e-30) / s2;

    moments_.emplace(*op_, lambda_bar_, nullptr, cfg_.moment_probes,
                     cfg_.moment_rel_tol, cfg_.seed + 17);

    const Eigen::Index n = op_->cols();
    double prior_mean_sq = cfg_.sparsity * (1.0 - cfg_.sparsity) * cfg_.prior_mean * cfg_.prior_mean;
    nu_gamma_.push_back(prior_mean_sq + cfg_.sparsity * cfg_.prior_var);
    x_hist_.push_back(Vec::Constant(n, cplx(cfg_.sparsity * cfg_.prior_mean, 0.0)));
    z_ = Vec::Zero(op_->rows());
    post_ = x_hist_.back();
  }

  /// Replaces the Hutchinson moments with exact dense ones.
  void use_dense_moments(const Mat& phi) {
    Mat scaled = phi / scale_;
    moments_.emplace(*op_, lambda_bar_, &scaled, 0, cfg_.moment_rel_tol, 0);
  }

  /// Runs one LLE -> NLE -> damping iteration. Returns the relative step
  /// of the posterior estimate.
  double step() {
    const int t = static_cast<int>(x_hist_.size());  // 1-based iteration
    const Vec& x_t = x_hist_.back();
    double nu_g = nu_gamma_.back();

    rho_ = sigma2_ / nu_g;
    theta_ = compute_theta(lambda_min_, lambda_max_, rho_);

    // eta_{t,i} = kappa_i prod_{j>i} theta_j, updated in place
    for (auto& e : eta_) e *= theta_;
    compute_e_terms(t);
    kappa_ = (t == 1) ? 1.0 : kappa_opt();
    eta_.push_back(kappa_);

    double w0 = moments_->w(0);
    zeta_ = w0 * (kappa_ + e0_);
    if (std::abs(zeta_) < 1e-300)
      throw DivergenceError("LLE normalization zeta vanished");
    nu_theta_ = detail::nu_theta_of_kappa(kappa_, e0_, e1_, e2_, e3_, w0);
    if (!(nu_theta_ > 0.0))
      nu_theta_ = std::numeric_limits<double>::min();

    // long-memory recursion: z_t = theta_t B z_{t-1} + kappa_t (y - A x_t)
    z_ = theta_ * (lambda_bar_ * z_ - op_->apply(op_->adjoint(z_))) +
         kappa_ * (y_ - op_->apply(x_t));

    // unbiased LLE output mu_t = (A^H z_t + sum_i eta_{t,i} w_{t-i} x_i) / zeta;
    // vectors evicted by the memory budget drop out of the sum (their
    // eta weights have decayed geometrically by then)
    mu_ = op_->adjoint(z_);
    for (int i = 0; i < t; ++i)
      if (x_hist_[i].size() > 0)
        mu_ += eta_[i] * moments_->w(t - 1 - i) * x_hist_[i];
    mu_ /= zeta_;

    // NLE: Bernoulli-Gaussian posterior, component-wise
    const Eigen::Index n = mu_.size();
    post_.resize(n);
    double v_post = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto [xp, vp] = nle_denoise_complex(mu_[i], cfg_.sparsity, cfg_.prior_mean,
                                          cfg_.prior_var, nu_theta_);
      post_[i] = xp;
      v_post += vp;
    }
    v_post /= static_cast<double>(n);

    // orthogonalization against the LLE input error
    double c = v_post / nu_theta_;
    Vec x_next;
    double nu_next;
    if (c >= 1.0 - 1e-12) {
      x_next = x_t;  // denoiser made no progress
      nu_next = nu_g;
    } else {
      x_next = (post_ - c * mu_) / (1.0 - c);
      nu_next = v_post / (1.0 - c);
    }

    damp(x_next, nu_next);
    x_hist_.push_back(std::move(x_next));
    nu_gamma_.push_back(nu_next);
    if (static_cast<int>(x_hist_.size()) > cfg_.memory_length + 1) {
      // drop the oldest stored vector; scalar history stays complete
      x_hist_.front().resize(0);
    }

    double step_rel;
    double prev_norm = prev_post_.size() ? prev_post_.norm() : 0.0;
    if (prev_post_.size() == 0)
      step_rel = std::numeric_limits<double>::infinity();
    else if (prev_norm == 0.0)
      step_rel = post_.norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    else
      step_rel = (post_ - prev_post_).norm() / prev_norm;
    prev_post_ = post_;
    return step_rel;
  }

  const Vec& posterior() const { return post_; }
  const Vec& mu() const { return mu_; }
  double nu_theta() const { return nu_theta_; }
  double nu_gamma() const { return nu_gamma_.back(); }
  double kappa() const { return kappa_; }
  double theta() const { return theta_; }
  double zeta() const { return zeta_; }
  double lambda_bar_scaled() const { return lambda_bar_; }
  void e_terms(double& e0, double& e1, double& e2, double& e3, double& w0) {
    e0 = e0_; e1 = e1_; e2 = e2_; e3 = e3_; w0 = moments_->w(0);
  }

 private:
  void compute_e_terms(int t) {
    // cross NLE covariances follow the nesting rule
    // nu_{i,j} = nu_{max(i,j),max(i,j)} (later estimates refine earlier ones)
    auto nu_cross = [&](int i, int j) { return nu_gamma_[std::max(i, j)]; };
    double w0 = moments_->w(0);
    e0_ = 0.0;
    e2_ = 0.0;
    e3_ = 0.0;
    for (int i = 0; i < t - 1; ++i) {
      double wi = moments_->w(t - 1 - i);
      e0_ += eta_[i] * wi / w0;
      e2_ -= eta_[i] * (sigma2_ * wi + nu_cross(t - 1, i) * moments_->w_bar(0, t - 1 - i));
      for (int j = 0; j < t - 1; ++j)
        e3_ += eta_[i] * eta_[j] *
               (sigma2_ * moments_->w(2 * (t - 1) - i - j) +
                nu_cross(i, j) * moments_->w_bar(t - 1 - i, t - 1 - j));
    }
    e1_ = sigma2_ * w0 + nu_gamma_[t - 1] * moments_->w_bar(0, 0);
  }

  double kappa_opt() const {
    double denom = e1_ * e0_ + e2_;
    if (denom == 0.0) return cfg_.kappa_cap;
    double k = (e2_ * e0_ + e3_) / denom;
    if (!std::isfinite(k) || std::abs(k) > cfg_.kappa_cap)
      return std::copysign(cfg_.kappa_cap, k);
    return k;
  }

  void damp(Vec& x_next, double& nu_next) {
    const int avail = static_cast<int>(x_hist_.size());  // previous outputs
    int window = std::min(cfg_.damping_window, avail + 1);
    // candidates, oldest first: x_{t-window+2}, ..., x_t, x_next
    std::vector<const Vec*> cand;
    std::vector<double> var;
    for (int i = avail - (window - 1); i < avail; ++i) {
      if (x_hist_[i].size() == 0) { continue; }  // truncated away
      cand.push_back(&x_hist_[i]);
      var.push_back(nu_gamma_[i]);
    }
    cand.push_back(&x_next);
    var.push_back(nu_next);
    const int w = static_cast<int>(cand.size());
    if (w < 2) return;

    RealVec weights;
    double combined = 0.0;
    if (!detail::damping_weights(var, weights, combined)) {
      // fallback: keep the previous NLE output
      x_next = *cand[w - 2];
      nu_next = var[w - 2];
      return;
    }
    Vec combo = Vec::Zero(x_next.size());
    for (int a = 0; a < w; ++a) combo += cplx(weights[a], 0.0) * *cand[a];
    x_next = std::move(combo);
    nu_next = combined;
  }

  const LinOp& base_op_;
  MampConfig cfg_;
  std::mt19937_64 rng_;
  std::unique_ptr<ScaledOp> op_;
  std::optional<SpectralMoments> moments_;

  double scale_ = 1.0;
  double lambda_bar_ = 1.0, lambda_min_ = 0.0, lambda_max_ = 2.0;
  double sigma2_ = 0.0;
  Vec y_;

  std::vector<Vec> x_hist_;        // x_1..x_t (older entries may be cleared)
  std::vector<double> nu_gamma_;   // nu^gamma_{i,i}, full history
  std::vector<double> eta_;        // eta_{t,i}, full history
  Vec z_;                          // LLE recursion state
  Vec mu_, post_, prev_post_;
  double rho_ = 0.0, theta_ = 0.0, kappa_ = 1.0, zeta_ = 1.0, nu_theta_ = 0.0;
  double e0_ = 0.0, e1_ = 0.0, e2_ = 0.0, e3_ = 0.0;
};

/// Estimates h from y = Phi h + n by memory approximate message passing.
/// Matrix-vector products only; `dense_hint` switches the spectral
/// moments to their exact dense-product form when the matrix is at hand.
inline MampResult mamp_estimate(const LinOp& op, const Vec& y,
                                const MampConfig& cfg,
                                const Vec* truth = nullptr,
                                const Mat* dense_hint = nullptr) {
  MampEngine engine(op, y, cfg);
  if (dense_hint != nullptr) engine.use_dense_moments(*dense_hint);

  MampResult result;
  int rising = 0;
  double last_nu = engine.nu_gamma();
  for (int t = 1; t <= cfg.max_iterations; ++t) {
    double step = engine.step();
    result.iterations = t;
    double nm = std::numeric_limits<double>::quiet_NaN();
    if (truth != nullptr && truth->squaredNorm() > 0.0)
      nm = (engine.posterior() - *truth).squaredNorm() / truth->squaredNorm();
    result.trace.push_back({t, engine.nu_gamma(), engine.nu_theta(), nm});

    if (engine.nu_gamma() > last_nu * (1.0 + 1e-12)) {
      if (++rising >= cfg.divergence_patience) {
        result.diverged = true;
        break;
      }
    } else {
      rising = 0;
    }
    last_nu = engine.nu_gamma();
    if (step <= cfg.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.estimate = engine.posterior();
  return result;
}

}  // namespace oddm
