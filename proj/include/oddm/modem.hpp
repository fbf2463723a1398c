#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "oddm/channel.hpp"
#include "oddm/common.hpp"
#include "oddm/linops.hpp"

namespace oddm {

/// Per-antenna pilot frames, each M x N (delay rows, Doppler columns).
struct FrameSet {
  int slots = 0;        // M
  int subcarriers = 0;  // N
  std::vector<Mat> frames;

  int antennas() const { return static_cast<int>(frames.size()); }
};

/// Unit-energy 4-QAM pilot frames, i.i.d. per antenna.
inline FrameSet make_qam4_frames(int slots, int subcarriers, int antennas,
                                 std::mt19937_64& rng) {
  static const cplx points[4] = {
      {M_SQRT1_2, M_SQRT1_2}, {M_SQRT1_2, -M_SQRT1_2},
      {-M_SQRT1_2, M_SQRT1_2}, {-M_SQRT1_2, -M_SQRT1_2}};
  std::uniform_int_distribution<int> pick(0, 3);
  FrameSet fs{slots, subcarriers, {}};
  fs.frames.reserve(antennas);
  for (int a = 0; a < antennas; ++a) {
    Mat f(slots, subcarriers);
    for (int n = 0; n < subcarriers; ++n)
      for (int m = 0; m < slots; ++m) f(m, n) = points[pick(rng)];
    fs.frames.push_back(std::move(f));
  }
  return fs;
}

/// Grid dimensions of one effective model.
struct ModelDims {
  int slots;         // M
  int subcarriers;   // N
  int antennas;      // N_t
  int delay_bins;    // L
  int doppler_max;   // K

  int obs_dim() const { return slots * subcarriers; }
  int doppler_bins() const { return 2 * doppler_max + 1; }
  int block_dim() const { return doppler_bins() * delay_bins; }
  int h_dim() const { return block_dim() * antennas; }
};

inline ModelDims dims_of(const ChannelSpec& spec) {
  return {spec.num_slots, spec.num_subcarriers, spec.num_antennas,
          spec.max_delay_index, spec.max_doppler_index};
}

/// Flat column index for cell (antenna, delay, Doppler): antenna-major,
/// delay middle, Doppler minor.
struct GridIndex {
  int antenna;  // n_t
  int delay;    // d1 in [0, L-1]
  int doppler;  // d2 in [-K, K]

  int flat(const ModelDims& d) const {
    return antenna * d.block_dim() + delay * d.doppler_bins() + (doppler + d.doppler_max);
  }
  static GridIndex from_flat(int idx, const ModelDims& d) {
    int nt = idx / d.block_dim();
    int rem = idx % d.block_dim();
    return {nt, rem / d.doppler_bins(), rem % d.doppler_bins() - d.doppler_max};
  }
};

namespace detail {

/// Value of the effective-matrix column (nt, d1, d2) at observation
/// (m, n): the noiseless unit-impulse response with zero steering phase.
inline cplx column_value(const Mat& frame, const ModelDims& d, int d1, int d2,
                         int m, int n) {
  int nn = ((n - d2) % d.subcarriers + d.subcarriers) % d.subcarriers;  // n''
  cplx phase = std::polar(1.0, kTwoPi * d2 * (m - d1) / double(d.slots * d.subcarriers));
  if (m - d1 >= 0) return phase * frame(m - d1, nn);
  // wrapped branch: previous frame period, extra e^{-j 2 pi n''/N}
  return phase * frame(m - d1 + d.slots, nn) *
         std::polar(1.0, -kTwoPi * nn / double(d.subcarriers));
}

}  // namespace detail

/// Discrete ODDM input-output relation: received frame Y from the sparse
/// grid, summing over antennas and occupied delay-Doppler cells.
/// Evaluated path-by-path, independently of the effective matrix.
inline Mat apply_channel(const FrameSet& frames, const DDGrid& grid,
                         const ChannelSpec& spec, double noise_var,
                         std::mt19937_64& rng) {
  const ModelDims d = dims_of(spec);
  if (frames.antennas() != d.antennas || frames.slots != d.slots ||
      frames.subcarriers != d.subcarriers)
    throw std::invalid_argument("frame dimensions do not match spec");
  if (grid.delay_bins() != d.delay_bins || grid.doppler_bins() != d.doppler_bins())
    throw std::invalid_argument("grid dimensions do not match spec");

  const int M = d.slots, N = d.subcarriers;
  Mat y = Mat::Zero(M, N);
  for (int d1 = 0; d1 < d.delay_bins; ++d1) {
    for (int r = 0; r < d.doppler_bins(); ++r) {
      cplx h = grid.gains(r, d1);
      if (h == cplx(0.0, 0.0)) continue;
      int d2 = r - d.doppler_max;
      double alpha = grid.alpha(r, d1);
      for (int nt = 0; nt < d.antennas; ++nt) {
        cplx coeff = h * std::polar(1.0, kTwoPi * nt * alpha);
        const Mat& x = frames.frames[nt];
        for (int n = 0; n < N; ++n) {
          int nn = ((n - d2) % N + N) % N;
          for (int m = 0; m < M; ++m) {
            cplx rot = std::polar(1.0, kTwoPi * d2 * (m - d1) / double(M * N));
            if (m - d1 >= 0)
              y(m, n) += coeff * rot * x(m - d1, nn);
            else
              y(m, n) += coeff * rot * x(m - d1 + M, nn) *
                         std::polar(1.0, -kTwoPi * nn / double(N));
          }
        }
      }
    }
  }
  if (noise_var > 0.0) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(noise_var / 2.0));
    for (int n = 0; n < N; ++n)
      for (int m = 0; m < M; ++m) y(m, n) += cplx(gauss(rng), gauss(rng));
  }
  return y;
}

/// Equivalent channel vector: per antenna block, the column-major grid
/// flattened with the steering phase e^{j 2 pi n_t alpha} on each cell.
inline Vec build_h_tilde(const DDGrid& grid, int antennas) {
  const int kRows = grid.doppler_bins();
  const int kCols = grid.delay_bins();
  const int block = kRows * kCols;
  Vec h = Vec::Zero(static_cast<Eigen::Index>(block) * antennas);
  for (int nt = 0; nt < antennas; ++nt)
    for (int c = 0; c < kCols; ++c)
      for (int r = 0; r < kRows; ++r) {
        cplx g = grid.gains(r, c);
        if (g == cplx(0.0, 0.0)) continue;
        h[nt * block + c * kRows + r] =
            g * std::polar(1.0, kTwoPi * nt * grid.alpha(r, c));
      }
  return h;
}

/// Equivalent coefficient matrix as an operator: column (nt, d1, d2) is
/// the vectorized unit-impulse response of the I/O relation. Provides
/// matrix-free apply/adjoint and optional materialization.
class EffectiveOperator final : public LinOp {
 public:
  EffectiveOperator(FrameSet frames, ModelDims dims)
      : frames_(std::move(frames)), dims_(dims) {
    if (frames_.antennas() != dims_.antennas || frames_.slots != dims_.slots ||
        frames_.subcarriers != dims_.subcarriers)
      throw std::invalid_argument("frame dimensions do not match model dims");
  }

  Eigen::Index rows() const override { return dims_.obs_dim(); }
  Eigen::Index cols() const override { return dims_.h_dim(); }
  const ModelDims& dims() const { return dims_; }
  const FrameSet& frames() const { return frames_; }

  Vec apply(const Vec& x) const override {
    ++ops::matvec_applies;
    const int M = dims_.slots, N = dims_.subcarriers;
    Vec y = Vec::Zero(dims_.obs_dim());
    int idx = 0;
    for (int nt = 0; nt < dims_.antennas; ++nt) {
      const Mat& f = frames_.frames[nt];
      for (int d1 = 0; d1 < dims_.delay_bins; ++d1)
        for (int d2 = -dims_.doppler_max; d2 <= dims_.doppler_max; ++d2, ++idx) {
          cplx v = x[idx];
          if (v == cplx(0.0, 0.0)) continue;
          for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m)
              y[m + M * n] += v * detail::column_value(f, dims_, d1, d2, m, n);
        }
    }
    return y;
  }

  Vec adjoint(const Vec& y) const override {
    ++ops::matvec_applies;
    const int M = dims_.slots, N = dims_.subcarriers;
    Vec out = Vec::Zero(dims_.h_dim());
    int idx = 0;
    for (int nt = 0; nt < dims_.antennas; ++nt) {
      const Mat& f = frames_.frames[nt];
      for (int d1 = 0; d1 < dims_.delay_bins; ++d1)
        for (int d2 = -dims_.doppler_max; d2 <= dims_.doppler_max; ++d2, ++idx) {
          cplx acc(0.0, 0.0);
          for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m)
              acc += std::conj(detail::column_value(f, dims_, d1, d2, m, n)) * y[m + M * n];
          out[idx] = acc;
        }
    }
    return out;
  }

  /// Materializes the full matrix. Throws when the element count exceeds
  /// the budget; callers must then stay matrix-free.
  Mat dense(std::int64_t element_budget = (std::int64_t{1} << 26)) const {
    std::int64_t elems = std::int64_t{dims_.obs_dim()} * dims_.h_dim();
    if (elems > element_budget)
      throw std::length_error("effective matrix exceeds memory budget; use matrix-free mode");
    const int M = dims_.slots, N = dims_.subcarriers;
    Mat phi(dims_.obs_dim(), dims_.h_dim());
    int idx = 0;
    for (int nt = 0; nt < dims_.antennas; ++nt) {
      const Mat& f = frames_.frames[nt];
      for (int d1 = 0; d1 < dims_.delay_bins; ++d1)
        for (int d2 = -dims_.doppler_max; d2 <= dims_.doppler_max; ++d2, ++idx)
          for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m)
              phi(m + M * n, idx) = detail::column_value(f, dims_, d1, d2, m, n);
    }
    return phi;
  }

 private:
  FrameSet frames_;
  ModelDims dims_;
};

/// y = Phi h + n, with everything needed to score an estimator.
struct EffectiveModel {
  ModelDims dims;
  FrameSet frames;
  Vec h_tilde;
  Vec y;
  double noise_var = 0.0;
};

/// Normalized mean square error ||est - truth||^2 / ||truth||^2.
inline double nmse(const Vec& estimate, const Vec& truth) {
  if (estimate.size() != truth.size())
    throw std::invalid_argument("nmse: length mismatch");
  double denom = truth.squaredNorm();
  if (denom == 0.0) throw std::invalid_argument("nmse: zero truth vector");
  return (estimate - truth).squaredNorm() / denom;
}

}  // namespace oddm
