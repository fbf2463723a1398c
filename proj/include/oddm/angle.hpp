#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "oddm/common.hpp"

namespace oddm {

/// Magnitude-squared spectrum of the across-antenna gain vector under the
/// unitary DFT U_{n,m} = exp(j 2 pi n m / Nt) / sqrt(Nt), after a per-antenna
/// phase rotation exp(+j n dtheta).
inline RealVec dft_spectrum(const Vec& gains, double dtheta = 0.0) {
  const Eigen::Index nt = gains.size();
  if (nt == 0) throw std::invalid_argument("dft_spectrum: empty input");
  RealVec spectrum(nt);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(nt));
  for (Eigen::Index m = 0; m < nt; ++m) {
    cplx acc(0.0, 0.0);
    for (Eigen::Index n = 0; n < nt; ++n) {
      double phase = static_cast<double>(n) * dtheta -
                     kTwoPi * static_cast<double>(n) * static_cast<double>(m) /
                         static_cast<double>(nt);
      acc += gains[n] * std::polar(1.0, phase);
    }
    spectrum[m] = std::norm(acc * inv_sqrt);
  }
  return spectrum;
}

struct AnglePeak {
  int bin = 0;       // 1-based spectrum bin
  double power = 0;  // spectrum value at the peak
};

/// Circular local maxima of a power spectrum, strongest first, with a
/// +/- guard_bins exclusion zone around each accepted peak. Appends a
/// diagnostic line to `diag` when fewer than `count` peaks exist.
inline std::vector<AnglePeak> find_peaks(const RealVec& spectrum, int count,
                                         int guard_bins = 1,
                                         std::string* diag = nullptr) {
  const int n = static_cast<int>(spectrum.size());
  std::vector<AnglePeak> maxima;
  for (int i = 0; i < n; ++i) {
    double left = spectrum[(i + n - 1) % n];
    double right = spectrum[(i + 1) % n];
    if (spectrum[i] >= left && spectrum[i] >= right &&
        (spectrum[i] > left || spectrum[i] > right))
      maxima.push_back({i + 1, spectrum[i]});
  }
  if (n == 1 && maxima.empty()) maxima.push_back({1, spectrum[0]});
  std::stable_sort(maxima.begin(), maxima.end(),
                   [](const AnglePeak& a, const AnglePeak& b) {
                     return a.power > b.power;
                   });
  std::vector<AnglePeak> picked;
  std::vector<bool> blocked(static_cast<std::size_t>(n), false);
  for (const auto& pk : maxima) {
    if (static_cast<int>(picked.size()) >= count) break;
    if (blocked[static_cast<std::size_t>(pk.bin - 1)]) continue;
    picked.push_back(pk);
    for (int d = -guard_bins; d <= guard_bins; ++d)
      blocked[static_cast<std::size_t>((pk.bin - 1 + d + n) % n)] = true;
  }
  if (static_cast<int>(picked.size()) < count && diag != nullptr)
    *diag += "find_peaks: only " + std::to_string(picked.size()) + " of " +
             std::to_string(count) + " requested peaks found\n";
  return picked;
}

/// Rotation offset maximizing the spectrum value at `bin` (1-based):
/// coarse 64-point grid over [-pi/Nt, pi/Nt], then golden-section
/// refinement to 1e-8.
inline double refine_rotation(const Vec& gains, int bin) {
  const int nt = static_cast<int>(gains.size());
  const double half = kPi / static_cast<double>(nt);
  auto value = [&](double dtheta) {
    cplx acc(0.0, 0.0);
    for (int n = 0; n < nt; ++n)
      acc += gains[n] * std::polar(1.0, n * dtheta -
                                            kTwoPi * n * (bin - 1) / double(nt));
    return std::norm(acc);
  };
  const int grid = 64;
  double best = -half, best_val = value(best);
  for (int i = 1; i <= grid; ++i) {
    double d = -half + 2.0 * half * i / grid;
    double v = value(d);
    if (v > best_val) { best_val = v; best = d; }
  }
  double step = 2.0 * half / grid;
  double lo = std::max(-half, best - step);
  double hi = std::min(half, best + step);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = value(c), fd = value(d);
  while (b - a > 1e-8) {
    if (fc > fd) {
      b = d; d = c; fd = fc;
      c = b - invphi * (b - a);
      fc = value(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + invphi * (b - a);
      fd = value(d);
    }
  }
  double m = 0.5 * (a + b);
  // parabolic vertex fit: near the maximum the comparisons above are
  // noise-limited, but a 3-point quadratic fit with a wider stencil
  // recovers the vertex to ~1e-10
  const double h = 1e-6 * half;
  double f0 = value(m - h), f1 = value(m), f2 = value(m + h);
  double denom = f0 - 2.0 * f1 + f2;
  if (denom < 0.0) {
    double shift = 0.5 * h * (f0 - f2) / denom;
    if (std::abs(shift) <= h) m += shift;
  }
  return std::clamp(m, -half, half);
}

struct AngleEstimate {
  int bin = 0;           // 1-based DFT bin of the peak
  double rotation = 0;   // refined phase offset dtheta
  double alpha = 0;      // normalized spatial frequency, spacing * sin(theta)
  double theta_rad = 0;  // angle of departure
  bool clamped = false;  // alpha/spacing fell outside [-1, 1]
};

/// Maps a (1-based) peak bin plus refined rotation to the normalized
/// spatial frequency and angle. Bins past Nt/2 alias to negative
/// frequencies.
inline AngleEstimate bins_to_angle(int bin, double rotation, int nt,
                                   double spacing, std::string* diag = nullptr) {
  AngleEstimate est;
  est.bin = bin;
  est.rotation = rotation;
  double limit = static_cast<double>(nt) * spacing;
  if (static_cast<double>(bin) <= limit)
    est.alpha = static_cast<double>(bin - 1) / nt - rotation / kTwoPi;
  else
    est.alpha = static_cast<double>(bin - nt - 1) / nt - rotation / kTwoPi;
  double s = est.alpha / spacing;
  if (s > 1.0 || s < -1.0) {
    est.clamped = true;
    if (diag != nullptr)
      *diag += "bins_to_angle: sin(theta) = " + std::to_string(s) +
               " clamped to unit range\n";
    s = std::clamp(s, -1.0, 1.0);
  }
  est.theta_rad = std::asin(s);
  return est;
}

/// Full pipeline: spectrum -> strongest peaks -> per-peak rotation
/// refinement -> angles. `gains` is the across-antenna vector of one
/// delay-Doppler cell (or a column-stacked average).
inline std::vector<AngleEstimate> estimate_angles(const Vec& gains, int count,
                                                  double spacing,
                                                  std::string* diag = nullptr) {
  const int nt = static_cast<int>(gains.size());
  RealVec spec = dft_spectrum(gains);
  auto peaks = find_peaks(spec, count, 1, diag);
  std::vector<AngleEstimate> out;
  out.reserve(peaks.size());
  for (const auto& pk : peaks) {
    double rot = refine_rotation(gains, pk.bin);
    out.push_back(bins_to_angle(pk.bin, rot, nt, spacing, diag));
  }
  return out;
}

}  // namespace oddm
