#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oddm/baselines.hpp"
#include "oddm/channel.hpp"
#include "oddm/common.hpp"
#include "oddm/mamp.hpp"
#include "oddm/modem.hpp"

namespace oddm {

struct ExperimentConfig {
  ChannelSpec channel;
  double snr_db = 10.0;  // infinity means noiseless
  std::string sweep = "snr_db";  // snr_db | speed_kmh | num_antennas | none
  std::vector<double> sweep_values = {10.0};
  int trials = 100;
  std::uint64_t seed = 1;
  int workers = 1;
  bool timing = false;
  std::vector<std::string> estimators = {"mamp", "omp", "lmmse"};
  MampConfig mamp;
  OmpConfig omp;
  // prior overrides; negative = derive from the scenario
  double prior_sparsity = -1.0;
  double prior_var = -1.0;
  double prior_mean = 0.0;
  bool reference_matrix = false;  // i.i.d. Gaussian stand-in for the dictionary

  void validate() const {
    channel.validate();
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (sweep != "snr_db" && sweep != "speed_kmh" && sweep != "num_antennas" &&
        sweep != "none")
      throw ConfigError("unknown sweep parameter '" + sweep + "'");
    if (sweep_values.empty()) throw ConfigError("sweep_values must be non-empty");
    if (estimators.empty()) throw ConfigError("no estimators selected");
    for (const auto& e : estimators)
      if (e != "mamp" && e != "omp" && e != "lmmse" && e != "genie")
        throw ConfigError("unknown estimator '" + e + "'");
  }
};

inline void apply_preset(ExperimentConfig& cfg, const std::string& name) {
  if (name == "desk") {
    cfg.channel.num_slots = 32;
    cfg.channel.num_subcarriers = 16;
    cfg.channel.num_antennas = 8;
    cfg.channel.max_delay_index = 5;
    cfg.channel.max_doppler_index = 2;
    cfg.channel.num_paths = 4;
    cfg.channel.profile = desk_profile();
  } else if (name == "paper") {
    cfg.channel.num_slots = 512;
    cfg.channel.num_subcarriers = 32;
    cfg.channel.num_antennas = 128;
    cfg.channel.max_delay_index = 20;
    cfg.channel.max_doppler_index = 3;
    cfg.channel.num_paths = 9;
    cfg.channel.profile = eva_profile();
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
}

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_snr(const std::string& v) {
  if (v == "inf" || v == "Inf" || v == "INF")
    return std::numeric_limits<double>::infinity();
  return std::stod(v);
}

}  // namespace detail

/// Key = value configuration, '#' comments. Unknown keys are an error.
inline ExperimentConfig load_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    try {
      if (key == "preset") apply_preset(cfg, val);
      else if (key == "slots") cfg.channel.num_slots = std::stoi(val);
      else if (key == "subcarriers") cfg.channel.num_subcarriers = std::stoi(val);
      else if (key == "antennas") cfg.channel.num_antennas = std::stoi(val);
      else if (key == "delay_bins") cfg.channel.max_delay_index = std::stoi(val);
      else if (key == "doppler_max") cfg.channel.max_doppler_index = std::stoi(val);
      else if (key == "paths") cfg.channel.num_paths = std::stoi(val);
      else if (key == "carrier_freq_hz") cfg.channel.carrier_freq_hz = std::stod(val);
      else if (key == "subcarrier_spacing_hz") cfg.channel.subcarrier_spacing_hz = std::stod(val);
      else if (key == "speed_kmh") cfg.channel.speed_kmh = std::stod(val);
      else if (key == "antenna_spacing") cfg.channel.antenna_spacing = std::stod(val);
      else if (key == "complex_gains") cfg.channel.complex_gains = (val == "1" || val == "true");
      else if (key == "profile") {
        std::ifstream f(val);
        cfg.channel.profile = f ? load_profile(val) : builtin_profile(val);
      }
      else if (key == "snr_db") cfg.snr_db = detail::parse_snr(val);
      else if (key == "sweep") cfg.sweep = val;
      else if (key == "sweep_values") {
        cfg.sweep_values.clear();
        for (const auto& v : detail::split_list(val))
          cfg.sweep_values.push_back(detail::parse_snr(v));
      }
      else if (key == "trials") cfg.trials = std::stoi(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "workers") cfg.workers = std::stoi(val);
      else if (key == "timing") cfg.timing = (val == "1" || val == "true");
      else if (key == "estimators") cfg.estimators = detail::split_list(val);
      else if (key == "reference_matrix") cfg.reference_matrix = (val == "1" || val == "true");
      else if (key == "mamp.iterations") cfg.mamp.max_iterations = std::stoi(val);
      else if (key == "mamp.tolerance") cfg.mamp.tolerance = std::stod(val);
      else if (key == "mamp.damping_window") cfg.mamp.damping_window = std::stoi(val);
      else if (key == "mamp.memory") cfg.mamp.memory_length = std::stoi(val);
      else if (key == "mamp.probes") cfg.mamp.moment_probes = std::stoi(val);
      else if (key == "omp.sparsity") cfg.omp.sparsity = std::stoi(val);
      else if (key == "omp.residual_tol") cfg.omp.residual_tol = std::stod(val);
      else if (key == "prior.sparsity") cfg.prior_sparsity = std::stod(val);
      else if (key == "prior.var") cfg.prior_var = std::stod(val);
      else if (key == "prior.mean") cfg.prior_mean = std::stod(val);
      else throw ConfigError("unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ConfigError("line " + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return load_config(in);
}

struct TrialResult {
  double sweep_value = 0.0;
  std::string estimator;
  std::uint64_t seed = 0;
  double nmse = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
  bool diverged = false;
};

namespace detail {

struct TrialScene {
  ChannelSpec spec;
  ModelDims dims;
  FrameSet frames;
  DDGrid grid;
  Vec h_tilde;
  Vec y_clean;
  Vec y;
  double noise_var = 0.0;
  Mat phi;        // empty when over the dense budget
  Mat ref_phi;    // i.i.d. Gaussian stand-in when requested
};

/// Builds one randomized scenario. The per-trial noise variance is set
/// from the realized signal power: SNR = ||Phi h||^2 / (M N delta^2).
inline TrialScene build_scene(const ExperimentConfig& cfg, double sweep_value,
                              std::uint64_t trial_seed, double snr_db) {
  TrialScene sc;
  sc.spec = cfg.channel;
  if (cfg.sweep == "speed_kmh") sc.spec.speed_kmh = sweep_value;
  else if (cfg.sweep == "num_antennas") sc.spec.num_antennas = static_cast<int>(sweep_value);
  sc.spec.validate();
  sc.dims = dims_of(sc.spec);

  std::seed_seq seq{static_cast<std::uint64_t>(0x9e3779b9u), cfg.seed, trial_seed};
  std::mt19937_64 rng(seq);

  auto paths = sample_paths(sc.spec, rng);
  sc.grid = to_grid(paths, sc.spec);
  sc.frames = make_qam4_frames(sc.dims.slots, sc.dims.subcarriers,
                               sc.dims.antennas, rng);
  sc.h_tilde = build_h_tilde(sc.grid, sc.dims.antennas);

  EffectiveOperator op(sc.frames, sc.dims);
  if (cfg.reference_matrix) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    sc.ref_phi = Mat(sc.dims.obs_dim(), sc.dims.h_dim());
    for (Eigen::Index j = 0; j < sc.ref_phi.cols(); ++j)
      for (Eigen::Index i = 0; i < sc.ref_phi.rows(); ++i)
        sc.ref_phi(i, j) = cplx(gauss(rng), gauss(rng));
    sc.y_clean = sc.ref_phi * sc.h_tilde;
  } else {
    sc.y_clean = op.apply(sc.h_tilde);
    try {
      sc.phi = op.dense();
    } catch (const std::length_error&) {
      // matrix-free only at this size
    }
  }

  double sig = sc.y_clean.squaredNorm() / sc.dims.obs_dim();
  if (std::isinf(snr_db)) {
    sc.noise_var = 0.0;
    sc.y = sc.y_clean;
  } else {
    sc.noise_var = sig / std::pow(10.0, snr_db / 10.0);
    std::normal_distribution<double> gauss(0.0, std::sqrt(sc.noise_var / 2.0));
    sc.y = sc.y_clean;
    for (Eigen::Index i = 0; i < sc.y.size(); ++i)
      sc.y[i] += cplx(gauss(rng), gauss(rng));
  }
  return sc;
}

inline std::vector<int> true_support(const Vec& h) {
  std::vector<int> s;
  for (Eigen::Index i = 0; i < h.size(); ++i)
    if (h[i] != cplx(0.0, 0.0)) s.push_back(static_cast<int>(i));
  return s;
}

}  // namespace detail

/// Runs one estimator on one scenario and scores it.
inline TrialResult run_trial(const ExperimentConfig& cfg, double sweep_value,
                             std::uint64_t trial, const std::string& estimator) {
  double snr_db = (cfg.sweep == "snr_db") ? sweep_value : cfg.snr_db;
  auto sc = detail::build_scene(cfg, sweep_value, trial, snr_db);

  TrialResult res;
  res.sweep_value = sweep_value;
  res.estimator = estimator;
  res.seed = trial;

  const double p = cfg.prior_sparsity > 0.0
                       ? cfg.prior_sparsity
                       : static_cast<double>(sc.spec.num_paths) / sc.dims.block_dim();
  const double vg = cfg.prior_var > 0.0 ? cfg.prior_var
                                        : 1.0 / sc.spec.num_paths;

  auto t0 = std::chrono::steady_clock::now();
  Vec est;
  if (estimator == "mamp") {
    MampConfig mc = cfg.mamp;
    mc.sparsity = p;
    mc.prior_mean = cfg.prior_mean;
    mc.prior_var = vg;
    mc.noise_var = std::max(sc.noise_var, 1e-12 * sc.y.squaredNorm() / sc.y.size());
    mc.seed = cfg.seed * 1000003 + trial;
    if (cfg.reference_matrix) {
      DenseOp op(sc.ref_phi);
      auto r = mamp_estimate(op, sc.y, mc, &sc.h_tilde, &sc.ref_phi);
      est = r.estimate;
      res.iterations = r.iterations;
      res.diverged = r.diverged;
    } else {
      EffectiveOperator op(sc.frames, sc.dims);
      const Mat* hint = sc.phi.size() > 0 ? &sc.phi : nullptr;
      auto r = mamp_estimate(op, sc.y, mc, &sc.h_tilde, hint);
      est = r.estimate;
      res.iterations = r.iterations;
      res.diverged = r.diverged;
    }
  } else {
    const Mat& phi = cfg.reference_matrix ? sc.ref_phi : sc.phi;
    if (phi.size() == 0)
      throw ConfigError("estimator '" + estimator +
                        "' needs the dense dictionary; problem too large");
    if (estimator == "omp") {
      OmpConfig oc = cfg.omp;
      if (oc.sparsity <= 0) oc.sparsity = sc.spec.num_paths * sc.dims.antennas;
      auto r = omp_estimate(phi, sc.y, oc);
      est = r.estimate;
      res.iterations = static_cast<int>(r.support.size());
    } else if (estimator == "lmmse") {
      est = lmmse_oracle(phi, sc.y, vg, sc.noise_var);
      res.iterations = 1;
    } else {  // genie
      est = genie_lmmse(phi, sc.y, detail::true_support(sc.h_tilde), vg,
                        sc.noise_var);
      res.iterations = 1;
    }
  }
  auto t1 = std::chrono::steady_clock::now();
  res.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  res.nmse = nmse(est, sc.h_tilde);
  return res;
}

/// Full sweep. Trials are distributed over `workers` threads; the result
/// order is fixed by (sweep index, trial, estimator) regardless of the
/// thread count.
inline std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t per_point = cfg.trials * cfg.estimators.size();
  std::vector<TrialResult> results(cfg.sweep_values.size() * per_point);

  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < results.size(); i += stride) {
      std::size_t sweep_idx = i / per_point;
      std::size_t rem = i % per_point;
      std::size_t trial = rem / cfg.estimators.size();
      std::size_t est_idx = rem % cfg.estimators.size();
      // the trial seed mixes the sweep index so points are independent
      std::uint64_t tseed = sweep_idx * 100000 + trial;
      results[i] = run_trial(cfg, cfg.sweep_values[sweep_idx], tseed,
                             cfg.estimators[est_idx]);
    }
  };
  if (cfg.workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < cfg.workers; ++w)
      pool.emplace_back(work, static_cast<std::size_t>(w),
                        static_cast<std::size_t>(cfg.workers));
    for (auto& t : pool) t.join();
  }
  return results;
}

inline void write_csv(std::ostream& out, const std::vector<TrialResult>& rows,
                      bool timing = false) {
  out << "sweep,estimator,seed,nmse,iterations";
  if (timing) out << ",wall_ms";
  out << "\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.sweep_value);
    out << buf << "," << r.estimator << "," << r.seed << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.nmse);
    out << buf << "," << r.iterations;
    if (timing) {
      std::snprintf(buf, sizeof(buf), "%.6g", r.wall_ms);
      out << "," << buf;
    }
    out << "\n";
  }
}

/// Per-iteration error trace for a single scenario (the `converge`
/// subcommand).
inline MampResult convergence_trace(const ExperimentConfig& cfg,
                                    std::uint64_t trial = 0) {
  ExperimentConfig c = cfg;
  c.validate();
  double snr_db = (c.sweep == "snr_db") ? c.sweep_values.front() : c.snr_db;
  auto sc = detail::build_scene(c, c.sweep_values.front(), trial, snr_db);
  MampConfig mc = c.mamp;
  mc.sparsity = c.prior_sparsity > 0.0
                    ? c.prior_sparsity
                    : static_cast<double>(sc.spec.num_paths) / sc.dims.block_dim();
  mc.prior_var = c.prior_var > 0.0 ? c.prior_var : 1.0 / sc.spec.num_paths;
  mc.prior_mean = c.prior_mean;
  mc.noise_var = std::max(sc.noise_var, 1e-12 * sc.y.squaredNorm() / sc.y.size());
  mc.seed = c.seed * 1000003 + trial;
  if (c.reference_matrix) {
    DenseOp op(sc.ref_phi);
    return mamp_estimate(op, sc.y, mc, &sc.h_tilde, &sc.ref_phi);
  }
  EffectiveOperator op(sc.frames, sc.dims);
  const Mat* hint = sc.phi.size() > 0 ? &sc.phi : nullptr;
  return mamp_estimate(op, sc.y, mc, &sc.h_tilde, hint);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return 0.5 * (hi + v[mid - 1]);
}

inline double median_nmse(const std::vector<TrialResult>& rows,
                          const std::string& estimator, double sweep_value) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.estimator == estimator &&
        std::abs(r.sweep_value - sweep_value) < 1e-12)
      v.push_back(r.nmse);
  return median(std::move(v));
}

}  // namespace oddm
