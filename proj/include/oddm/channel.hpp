#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oddm/common.hpp"

namespace oddm {

/// Named power-delay profile: tap delays in ns and tap powers in dB.
struct PowerProfile {
  std::string name;
  std::vector<double> delay_ns;
  std::vector<double> power_db;

  void validate() const {
    if (delay_ns.empty() || delay_ns.size() != power_db.size())
      throw ConfigError("profile '" + name + "': delay/power lists must be non-empty and equal length");
    if (delay_ns.front() < 0.0)
      throw ConfigError("profile '" + name + "': delays must be non-negative");
    for (std::size_t i = 1; i < delay_ns.size(); ++i)
      if (delay_ns[i] <= delay_ns[i - 1])
        throw ConfigError("profile '" + name + "': delays must be strictly increasing");
  }
};

/// Extended Vehicular A, 9 taps (3GPP TS 36.101 Annex B).
inline PowerProfile eva_profile() {
  return {"eva",
          {0, 30, 150, 310, 370, 710, 1090, 1730, 2510},
          {0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9}};
}

/// Small 4-tap profile whose taps land on distinct delay bins at the
/// desk-scale bandwidth (M=32, 15 kHz spacing -> ~2.1 us resolution).
/// EVA collapses onto one or two bins there.
inline PowerProfile desk_profile() {
  return {"desk", {0, 2200, 4400, 6600}, {0.0, -1.0, -2.0, -3.0}};
}

inline PowerProfile builtin_profile(const std::string& name) {
  if (name == "eva") return eva_profile();
  if (name == "desk") return desk_profile();
  throw ConfigError("unknown built-in profile '" + name + "'");
}

/// Loads a profile from a plain-text key-value file:
///   name = myprofile
///   delay_ns = 0, 30, 150
///   power_db = 0, -1.5, -1.4
inline PowerProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile file '" + path + "'");
  PowerProfile prof;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r\n");
      auto e = s.find_last_not_of(" \t\r\n");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "name") {
      prof.name = val;
    } else if (key == "delay_ns" || key == "power_db") {
      std::vector<double> items;
      std::stringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ',')) items.push_back(std::stod(tok));
      (key == "delay_ns" ? prof.delay_ns : prof.power_db) = std::move(items);
    }
  }
  prof.validate();
  return prof;
}

/// Physical and grid parameters of one scenario.
struct ChannelSpec {
  double carrier_freq_hz = 5e9;
  double subcarrier_spacing_hz = 15e3;
  double speed_kmh = 250.0;
  int num_paths = 4;         // P
  int max_delay_index = 5;   // L: delay bins are [0, L-1]
  int max_doppler_index = 2; // K: Doppler bins are [-K, K]
  int num_antennas = 8;      // N_t
  double antenna_spacing = 0.5;  // d_BS / lambda_c
  int num_slots = 32;        // M (fixes the delay resolution 1/W = 1/(M*df))
  int num_subcarriers = 16;  // N (fixes the Doppler resolution 1/(NT) = df/N)
  PowerProfile profile = desk_profile();
  bool complex_gains = false;

  double bandwidth_hz() const { return num_slots * subcarrier_spacing_hz; }
  double delay_resolution_s() const { return 1.0 / bandwidth_hz(); }
  double doppler_resolution_hz() const { return subcarrier_spacing_hz / num_subcarriers; }
  double max_doppler_hz() const {
    return speed_kmh / 3.6 * carrier_freq_hz / kSpeedOfLight;
  }

  void validate() const {
    if (num_paths < 1) throw ConfigError("P must be >= 1");
    if (max_delay_index < 1) throw ConfigError("L must be >= 1");
    if (max_doppler_index < 0) throw ConfigError("K must be >= 0");
    if (num_antennas < 1) throw ConfigError("N_t must be >= 1");
    if (antenna_spacing <= 0.0 || antenna_spacing > 0.5)
      throw ConfigError("antenna spacing d_BS/lambda_c must be in (0, 0.5]");
    if (num_slots < 1 || num_subcarriers < 1) throw ConfigError("M and N must be >= 1");
    profile.validate();
    if (static_cast<std::size_t>(num_paths) > profile.delay_ns.size())
      throw ConfigError("profile has fewer taps than requested paths");
    double max_delay = profile.delay_ns[num_paths - 1] * 1e-9;
    if (max_delay > (max_delay_index - 1) * delay_resolution_s() + 0.5 * delay_resolution_s())
      throw ConfigError("profile delay exceeds (L-1) delay resolutions");
    if (max_doppler_hz() > max_doppler_index * doppler_resolution_hz() + 0.5 * doppler_resolution_hz())
      throw ConfigError("max Doppler exceeds K Doppler resolutions");
  }
};

/// One resolvable path on the delay-Doppler grid.
struct PathParams {
  cplx gain;          // imaginary part zero unless complex_gains is set
  int delay_index;    // k_p in [0, L-1]
  int doppler_index;  // l_p in [-K, K]
  double angle;       // theta_p in (-pi/2, pi/2), radians
};

using PathSet = std::vector<PathParams>;

/// Sparse delay-Doppler grid: gains G is (2K+1) x L (Doppler rows, delay
/// columns), alpha holds the spatial frequency of the dominant path on
/// each occupied cell.
struct DDGrid {
  Mat gains;       // (2K+1) x L
  RealMat alpha;   // same shape; meaningful only where gains != 0

  int doppler_bins() const { return static_cast<int>(gains.rows()); }
  int delay_bins() const { return static_cast<int>(gains.cols()); }
  int k_max() const { return (doppler_bins() - 1) / 2; }
};

/// ULA steering vector: entry n = exp(j 2 pi n (d/lambda) sin(theta)).
inline Vec steering_vector(double theta, int num_antennas, double spacing) {
  if (num_antennas < 1) throw std::invalid_argument("num_antennas must be >= 1");
  Vec a(num_antennas);
  double alpha = spacing * std::sin(theta);
  for (int n = 0; n < num_antennas; ++n)
    a[n] = std::polar(1.0, kTwoPi * n * alpha);
  return a;
}

/// Draws P paths: delays from the profile quantized to the delay
/// resolution, Doppler from a uniformly random direction of motion,
/// real Gaussian gains normalized so the tap powers sum to one.
inline PathSet sample_paths(const ChannelSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const int p_count = spec.num_paths;
  std::vector<double> lin_power(p_count);
  double total = 0.0;
  for (int p = 0; p < p_count; ++p) {
    lin_power[p] = std::pow(10.0, spec.profile.power_db[p] / 10.0);
    total += lin_power[p];
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uphi(0.0, kTwoPi);
  std::uniform_real_distribution<double> utheta(-kPi / 2 + 1e-9, kPi / 2 - 1e-9);
  const double nu_max = spec.max_doppler_hz();
  const double nt_product = static_cast<double>(spec.num_subcarriers) / spec.subcarrier_spacing_hz;

  PathSet paths(p_count);
  std::vector<std::pair<int, int>> occupied;
  for (int p = 0; p < p_count; ++p) {
    double var = lin_power[p] / total;
    double sigma = std::sqrt(var);
    cplx gain;
    if (spec.complex_gains)
      gain = cplx(gauss(rng), gauss(rng)) * (sigma / std::sqrt(2.0));
    else
      gain = cplx(gauss(rng) * sigma, 0.0);
    int k_idx = static_cast<int>(std::llround(spec.profile.delay_ns[p] * 1e-9 / spec.delay_resolution_s()));
    int l_idx = 0;
    bool placed = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      double phi = uphi(rng);
      l_idx = static_cast<int>(std::llround(nu_max * std::cos(phi) * nt_product));
      if (std::abs(l_idx) > spec.max_doppler_index) continue;
      auto cell = std::make_pair(k_idx, l_idx);
      if (std::find(occupied.begin(), occupied.end(), cell) == occupied.end()) {
        occupied.push_back(cell);
        placed = true;
        break;
      }
    }
    if (!placed)
      throw ConfigError("could not place path " + std::to_string(p) +
                        " on a free delay-Doppler cell after 100 attempts");
    paths[p] = PathParams{gain, k_idx, l_idx, utheta(rng)};
  }
  return paths;
}

/// Arranges paths into the sparse gain grid plus per-cell angle map.
inline DDGrid to_grid(const PathSet& paths, const ChannelSpec& spec) {
  const int rows = 2 * spec.max_doppler_index + 1;
  const int cols = spec.max_delay_index;
  DDGrid grid;
  grid.gains = Mat::Zero(rows, cols);
  grid.alpha = RealMat::Zero(rows, cols);
  for (const auto& p : paths) {
    if (p.delay_index < 0 || p.delay_index >= cols ||
        std::abs(p.doppler_index) > spec.max_doppler_index)
      throw std::invalid_argument("path index out of grid bounds");
    int r = p.doppler_index + spec.max_doppler_index;
    if (grid.gains(r, p.delay_index) != cplx(0.0, 0.0))
      throw std::invalid_argument("duplicate delay-Doppler cell");
    grid.gains(r, p.delay_index) = p.gain;
    grid.alpha(r, p.delay_index) = spec.antenna_spacing * std::sin(p.angle);
  }
  return grid;
}

/// Reads the occupied cells back into a PathSet (angles recovered via
/// arcsin of the stored spatial frequency).
inline PathSet grid_to_paths(const DDGrid& grid, const ChannelSpec& spec) {
  PathSet out;
  const int k = grid.k_max();
  for (int c = 0; c < grid.delay_bins(); ++c)
    for (int r = 0; r < grid.doppler_bins(); ++r)
      if (grid.gains(r, c) != cplx(0.0, 0.0))
        out.push_back(PathParams{grid.gains(r, c), c, r - k,
                                 std::asin(grid.alpha(r, c) / spec.antenna_spacing)});
  return out;
}

}  // namespace oddm
