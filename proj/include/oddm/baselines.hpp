#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "oddm/common.hpp"
#include "oddm/linops.hpp"

namespace oddm {

struct OmpConfig {
  int sparsity = 8;            // atoms to select
  double residual_tol = 0.0;   // stop early when ||r|| / ||y|| drops below
};

struct OmpResult {
  Vec estimate;                 // full-length, zero off the support
  std::vector<int> support;     // selection order
  std::vector<double> residual_norms;  // after each selection
};

/// Orthogonal matching pursuit on an explicit dictionary. Each round
/// picks the column most correlated with the residual and re-solves the
/// least squares problem on the accumulated support.
inline OmpResult omp_estimate(const Mat& phi, const Vec& y,
                              const OmpConfig& cfg,
                              std::string* diag = nullptr) {
  const Eigen::Index n = phi.cols();
  OmpResult result;
  result.estimate = Vec::Zero(n);
  Vec r = y;
  const double y_norm = y.norm();
  if (y_norm == 0.0) return result;

  Mat sub(phi.rows(), 0);
  for (int k = 0; k < cfg.sparsity && k < n; ++k) {
    Vec corr = phi.adjoint() * r;
    ops::matvec_applies.fetch_add(1);
    Eigen::Index best = 0;
    double best_mag = -1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::find(result.support.begin(), result.support.end(),
                    static_cast<int>(j)) != result.support.end())
        continue;
      double mag = std::abs(corr[j]);
      if (mag > best_mag) { best_mag = mag; best = j; }
    }
    result.support.push_back(static_cast<int>(best));
    sub.conservativeResize(Eigen::NoChange, sub.cols() + 1);
    sub.col(sub.cols() - 1) = phi.col(best);

    Eigen::ColPivHouseholderQR<Mat> qr(sub);
    ops::dense_factorizations.fetch_add(1);
    Vec coeffs;
    if (qr.rank() < sub.cols()) {
      if (diag != nullptr)
        *diag += "omp: rank-deficient support of size " +
                 std::to_string(sub.cols()) + "; using ridge solve\n";
      Mat gram = sub.adjoint() * sub;
      gram.diagonal().array() += 1e-12 * gram.diagonal().real().maxCoeff();
      coeffs = gram.ldlt().solve(sub.adjoint() * y);
      ops::dense_solves.fetch_add(1);
    } else {
      coeffs = qr.solve(y);
      ops::dense_solves.fetch_add(1);
    }
    r = y - sub * coeffs;
    ops::matvec_applies.fetch_add(1);
    result.residual_norms.push_back(r.norm());

    result.estimate.setZero();
    for (std::size_t i = 0; i < result.support.size(); ++i)
      result.estimate[result.support[i]] = coeffs[static_cast<Eigen::Index>(i)];
    if (cfg.residual_tol > 0.0 && r.norm() <= cfg.residual_tol * y_norm) break;
  }
  return result;
}

/// Linear MMSE estimate under an i.i.d. CN(0, v_g) prior:
/// h = v_g Phi^H (v_g Phi Phi^H + d2 I)^{-1} y. With d2 = 0 this reduces
/// to a least squares solve.
inline Vec lmmse_oracle(const Mat& phi, const Vec& y, double prior_var,
                        double noise_var) {
  if (prior_var <= 0.0)
    throw std::invalid_argument("lmmse_oracle: prior variance must be positive");
  if (noise_var <= 0.0) {
    Eigen::ColPivHouseholderQR<Mat> qr(phi);
    ops::dense_factorizations.fetch_add(1);
    ops::dense_solves.fetch_add(1);
    return qr.solve(y);
  }
  Mat gram = prior_var * (phi * phi.adjoint());
  gram.diagonal().array() += noise_var;
  ops::dense_factorizations.fetch_add(1);
  ops::dense_solves.fetch_add(1);
  return prior_var * (phi.adjoint() * gram.ldlt().solve(y));
}

/// LMMSE restricted to a known support: zero elsewhere.
inline Vec genie_lmmse(const Mat& phi, const Vec& y,
                       const std::vector<int>& support, double prior_var,
                       double noise_var) {
  Mat sub(phi.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i)
    sub.col(static_cast<Eigen::Index>(i)) = phi.col(support[i]);
  Vec coeffs;
  if (noise_var <= 0.0) {
    Eigen::ColPivHouseholderQR<Mat> qr(sub);
    ops::dense_factorizations.fetch_add(1);
    ops::dense_solves.fetch_add(1);
    coeffs = qr.solve(y);
  } else {
    Mat gram = prior_var * (sub * sub.adjoint());
    gram.diagonal().array() += noise_var;
    ops::dense_factorizations.fetch_add(1);
    ops::dense_solves.fetch_add(1);
    coeffs = prior_var * (sub.adjoint() * gram.ldlt().solve(y));
  }
  Vec out = Vec::Zero(phi.cols());
  for (std::size_t i = 0; i < support.size(); ++i)
    out[support[i]] = coeffs[static_cast<Eigen::Index>(i)];
  return out;
}

/// Per-sample scalar MMSE equalizer: x_hat = conj(h) y / (|h|^2 + d2),
/// then nearest 4-QAM symbol. Returns the hard decisions.
inline Vec qam4_equalize(const Vec& y, const Vec& channel, double noise_var) {
  if (y.size() != channel.size())
    throw std::invalid_argument("qam4_equalize: size mismatch");
  const double a = 1.0 / std::sqrt(2.0);
  Vec out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    cplx s = std::conj(channel[i]) * y[i] /
             (std::norm(channel[i]) + noise_var);
    out[i] = cplx(s.real() >= 0.0 ? a : -a, s.imag() >= 0.0 ? a : -a);
  }
  return out;
}

/// Symbol error rate between two 4-QAM streams.
inline double symbol_error_rate(const Vec& decided, const Vec& truth) {
  if (decided.size() != truth.size())
    throw std::invalid_argument("symbol_error_rate: size mismatch");
  if (decided.size() == 0) return 0.0;
  Eigen::Index errs = 0;
  for (Eigen::Index i = 0; i < decided.size(); ++i)
    if (std::abs(decided[i] - truth[i]) > 1e-6) ++errs;
  return static_cast<double>(errs) / static_cast<double>(decided.size());
}

}  // namespace oddm
