#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "oddm/channel.hpp"
#include "oddm/common.hpp"

namespace oddm {

/// Square-root raised cosine pulse, unit symbol period.
inline double srrc(double t, double beta) {
  const double eps = 1e-9;
  if (std::abs(t) < eps) return 1.0 - beta + 4.0 * beta / kPi;
  if (beta > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < eps) {
    double a = (1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * beta));
    double b = (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * beta));
    return beta / std::sqrt(2.0) * (a + b);
  }
  double num = std::sin(kPi * t * (1.0 - beta)) +
               4.0 * beta * t * std::cos(kPi * t * (1.0 + beta));
  double den = kPi * t * (1.0 - 16.0 * beta * beta * t * t);
  return num / den;
}

struct WaveformResult {
  Mat received;              // matched-filter samples on the M x N grid
  double ambiguity_residual; // sum |A(dm,dn) - delta| over the probed offsets
};

struct WaveformParams {
  int pulse_half_len = 20;   // Q, in units of T/M
  int oversampling = 8;      // samples per T/M
  double rolloff = 0.25;
};

/// Continuous-time oracle for the discrete I/O relation. The symbol at
/// delay-Doppler cell (m, n) rides a staggered pulse train,
///   s_mn(t) = sum_nh a(t - m T/M - nh T) exp(j 2 pi n nh / N),
/// on a circular N*T time axis (the periodic extension behind the
/// frame-edge wrap of the discrete model). The channel applies circular
/// integer-sample delays and continuous Doppler phases; the matched
/// filter projects back onto the same train family. Single antenna,
/// small dimensions only.
inline WaveformResult waveform_oracle(const Mat& frame, const PathSet& paths,
                                      const WaveformParams& wp = {}) {
  const int M = static_cast<int>(frame.rows());
  const int N = static_cast<int>(frame.cols());
  if (M > 64 || N > 16) throw std::invalid_argument("waveform oracle: dims too large");
  if (wp.oversampling < 4) throw std::invalid_argument("oversampling must be >= 4");

  const double T = 1.0;
  const double Ts = T / M;          // delay resolution
  const double dt = Ts / wp.oversampling;
  const int S = wp.oversampling;
  const int Q = wp.pulse_half_len;
  const int total = M * N * S;      // one period of the circular axis
  const double period = N * T;

  // pulse a(t), |t| <= Q*Ts, normalized so the N-pulse train has unit
  // energy per period
  const int half = Q * S;
  if (2 * half + 1 > total)
    throw std::invalid_argument("pulse longer than the frame period");
  std::vector<double> pulse(2 * half + 1);
  double energy = 0.0;
  for (int k = -half; k <= half; ++k) {
    double v = srrc(k * dt / Ts, wp.rolloff);
    pulse[k + half] = v;
    energy += v * v * dt;
  }
  double scale = std::sqrt(1.0 / (N * energy));
  for (auto& v : pulse) v *= scale;

  // phased train for Doppler bin n, sampled circularly:
  // u_n(k) = sum_nh a(k - nh*M*S) exp(j 2 pi n nh / N)
  auto train = [&](int n, long k) {
    long km = ((k % total) + total) % total;
    cplx acc(0.0, 0.0);
    for (int nh = -1; nh <= N; ++nh) {
      long off = km - static_cast<long>(nh) * M * S;
      if (off >= -half && off <= half)
        acc += pulse[off + half] *
               std::polar(1.0, kTwoPi * n * nh / static_cast<double>(N));
    }
    return acc;
  };

  // transmit signal over one period
  std::vector<cplx> x(total, cplx(0.0, 0.0));
  for (int k = 0; k < total; ++k)
    for (int m = 0; m < M; ++m) {
      long kk = k - static_cast<long>(m) * S;
      cplx acc(0.0, 0.0);
      for (int n = 0; n < N; ++n) {
        cplx u = train(n, kk);
        if (u == cplx(0.0, 0.0)) continue;
        acc += frame(m, n) * u;
      }
      x[k] += acc;
    }

  // channel: circular integer-sample delays, continuous Doppler phase
  std::vector<cplx> y(total, cplx(0.0, 0.0));
  for (const auto& p : paths) {
    int shift = p.delay_index * S;
    double nu = p.doppler_index / period;
    double tau = p.delay_index * Ts;
    for (int k = 0; k < total; ++k) {
      double t = k * dt;
      y[k] += p.gain * x[(k - shift + total) % total] *
              std::polar(1.0, kTwoPi * nu * (t - tau));
    }
  }

  // matched filter bank sampled on the grid
  Mat out(M, N);
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) {
      cplx acc(0.0, 0.0);
      for (int k = 0; k < total; ++k) {
        cplx u = train(n, k - static_cast<long>(m) * S);
        if (u == cplx(0.0, 0.0)) continue;
        acc += std::conj(u) * y[k];
      }
      out(m, n) = acc * dt;
    }

  // cross-ambiguity of the filter bank: coupling of the (0, 0) symbol
  // onto cell (dm, dn) should be the unit sample
  // the trains are frame-periodic, so every circular slot offset couples
  double residual = 0.0;
  for (int dm = -M / 2; dm < M - M / 2; ++dm) {
    for (int dn = 0; dn < N; ++dn) {
      cplx acc(0.0, 0.0);
      for (int k = 0; k < total; ++k) {
        cplx g1 = train(0, k);
        if (g1 == cplx(0.0, 0.0)) continue;
        cplx g2 = train(dn, k - static_cast<long>(dm) * S);
        if (g2 == cplx(0.0, 0.0)) continue;
        acc += std::conj(g2) * g1 * dt;
      }
      double ideal = (dm == 0 && dn % N == 0) ? 1.0 : 0.0;
      residual += std::abs(acc - ideal);
    }
  }
  return {out, residual};
}

}  // namespace oddm
