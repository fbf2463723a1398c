#pragma once

#include <random>

#include "oddm/common.hpp"

namespace oddm {

/// Abstract linear operator with apply/adjoint access only.
class LinOp {
 public:
  virtual ~LinOp() = default;
  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;
  virtual Vec apply(const Vec& x) const = 0;    // A x
  virtual Vec adjoint(const Vec& y) const = 0;  // A^H y
};

/// Wraps an explicit matrix as a LinOp.
class DenseOp final : public LinOp {
 public:
  explicit DenseOp(Mat a) : a_(std::move(a)) {}

  Eigen::Index rows() const override { return a_.rows(); }
  Eigen::Index cols() const override { return a_.cols(); }

  Vec apply(const Vec& x) const override {
    ++ops::matvec_applies;
    return a_ * x;
  }
  Vec adjoint(const Vec& y) const override {
    ++ops::matvec_applies;
    return a_.adjoint() * y;
  }

  const Mat& matrix() const { return a_; }

 private:
  Mat a_;
};

/// View of another operator scaled by 1/s: (A/s) x.
class ScaledOp final : public LinOp {
 public:
  ScaledOp(const LinOp& base, double scale) : base_(base), inv_(1.0 / scale) {}

  Eigen::Index rows() const override { return base_.rows(); }
  Eigen::Index cols() const override { return base_.cols(); }
  Vec apply(const Vec& x) const override { return inv_ * base_.apply(x); }
  Vec adjoint(const Vec& y) const override { return inv_ * base_.adjoint(y); }

 private:
  const LinOp& base_;
  double inv_;
};

/// A (A^H v): the Gram operator on the row space.
inline Vec gram_apply(const LinOp& a, const Vec& v) {
  return a.apply(a.adjoint(v));
}

/// Largest eigenvalue of A A^H by power iteration.
inline double power_iteration(const LinOp& a, std::mt19937_64& rng,
                              int max_steps = 50, double rel_tol = 1e-4) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(a.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = cplx(gauss(rng), gauss(rng));
  v.normalize();
  double lambda = 0.0;
  for (int step = 0; step < max_steps; ++step) {
    Vec w = gram_apply(a, v);
    double next = std::real(v.dot(w));
    double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (step > 0 && std::abs(next - lambda) <= rel_tol * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

}  // namespace oddm
