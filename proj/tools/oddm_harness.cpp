// Command-line driver for the channel estimation experiments.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oddm/angle.hpp"
#include "oddm/baselines.hpp"
#include "oddm/experiment.hpp"
#include "oddm/serialize.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

oddm::ExperimentConfig make_config(const std::string& config_path,
                                   const std::string& preset) {
  oddm::ExperimentConfig cfg;
  if (!preset.empty()) oddm::apply_preset(cfg, preset);
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw oddm::ConfigError("cannot open config file '" + config_path + "'");
    oddm::ExperimentConfig file_cfg = oddm::load_config(in);
    cfg = file_cfg;  // the file wins wholesale; its own preset key applies first
  }
  return cfg;
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw oddm::ConfigError("cannot open output file '" + path + "'");
  return file;
}

int cmd_run(const std::string& config_path, const std::string& preset,
            const std::string& out_path, int workers, bool timing) {
  auto cfg = make_config(config_path, preset);
  if (workers > 0) cfg.workers = workers;
  if (timing) cfg.timing = true;
  auto rows = oddm::run_experiment(cfg);
  std::ofstream file;
  oddm::write_csv(open_out(file, out_path), rows, cfg.timing);
  bool any_diverged = false;
  for (const auto& r : rows) any_diverged |= r.diverged;
  return any_diverged ? kExitDiverged : 0;
}

int cmd_converge(const std::string& config_path, const std::string& preset,
                 const std::string& out_path, std::uint64_t trial) {
  auto cfg = make_config(config_path, preset);
  auto result = oddm::convergence_trace(cfg, trial);
  std::ofstream file;
  auto& out = open_out(file, out_path);
  out << "iteration,nu_gamma,nu_theta,nmse\n";
  char buf[160];
  for (const auto& rec : result.trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", rec.iteration,
                  rec.nu_gamma, rec.nu_theta, rec.nmse);
    out << buf;
  }
  return result.diverged ? kExitDiverged : 0;
}

int cmd_random_ref(const std::string& config_path, const std::string& preset,
                   const std::string& out_path, int workers) {
  auto cfg = make_config(config_path, preset);
  cfg.reference_matrix = true;
  if (workers > 0) cfg.workers = workers;
  auto rows = oddm::run_experiment(cfg);
  std::ofstream file;
  oddm::write_csv(open_out(file, out_path), rows, cfg.timing);
  bool any_diverged = false;
  for (const auto& r : rows) any_diverged |= r.diverged;
  return any_diverged ? kExitDiverged : 0;
}

int cmd_angles(int antennas, double spacing, const std::string& angles_deg,
               const std::string& out_path) {
  std::vector<double> truth;
  for (const auto& tok : oddm::detail::split_list(angles_deg))
    truth.push_back(std::stod(tok) * oddm::kPi / 180.0);
  if (truth.empty()) throw oddm::ConfigError("no angles given");

  oddm::Vec gains = oddm::Vec::Zero(antennas);
  for (double theta : truth)
    gains += oddm::steering_vector(theta, antennas, spacing);

  std::string diag;
  auto est = oddm::estimate_angles(gains, static_cast<int>(truth.size()),
                                   spacing, &diag);
  std::ofstream file;
  auto& out = open_out(file, out_path);
  out << "bin,rotation,alpha,theta_deg\n";
  char buf[160];
  for (const auto& e : est) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", e.bin, e.rotation,
                  e.alpha, e.theta_rad * 180.0 / oddm::kPi);
    out << buf;
  }
  if (!diag.empty()) std::cerr << diag;
  return 0;
}

int cmd_validate(const std::string& config_path, const std::string& preset) {
  auto cfg = make_config(config_path, preset);
  cfg.validate();
  auto dims = oddm::dims_of(cfg.channel);
  std::cout << "ok: observation dim " << dims.obs_dim() << ", unknown dim "
            << dims.h_dim() << ", sparsity "
            << cfg.channel.num_paths * dims.antennas << " of " << dims.h_dim()
            << "\n";
  return 0;
}

int cmd_ber(const std::string& config_path, const std::string& preset,
            double snr_db, int trials, std::uint64_t seed) {
  auto cfg = make_config(config_path, preset);
  cfg.channel.validate();
  // flat-channel sanity check of the scalar MMSE symbol detector
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double noise_var = std::isinf(snr_db) ? 0.0 : std::pow(10.0, -snr_db / 10.0);
  double total_ser = 0.0;
  const int n = cfg.channel.num_slots * cfg.channel.num_subcarriers;
  for (int t = 0; t < trials; ++t) {
    auto fs = oddm::make_qam4_frames(cfg.channel.num_slots,
                                     cfg.channel.num_subcarriers, 1, rng);
    oddm::Vec x(n), h(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = fs.frames[0](i % cfg.channel.num_slots, i / cfg.channel.num_slots);
      h[i] = oddm::cplx(gauss(rng), gauss(rng)) * std::sqrt(0.5);
      oddm::cplx noise = noise_var > 0.0
                             ? oddm::cplx(gauss(rng), gauss(rng)) *
                                   std::sqrt(noise_var / 2.0)
                             : oddm::cplx(0.0, 0.0);
      y[i] = h[i] * x[i] + noise;
    }
    auto decided = oddm::qam4_equalize(y, h, noise_var);
    total_ser += oddm::symbol_error_rate(decided, x);
  }
  std::printf("ser %.6g over %d trials at snr %g dB\n", total_ser / trials,
              trials, snr_db);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay-Doppler channel estimation experiment harness"};
  app.require_subcommand(1);

  std::string config_path, preset, out_path = "-", angles = "0";
  int workers = 0, antennas = 64, trials = 10;
  bool timing = false;
  double spacing = 0.5, snr_db = 20.0;
  std::uint64_t trial = 0, seed = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--preset", preset, "built-in parameter set (desk, paper)");
  };

  auto* run = app.add_subcommand("run", "Monte-Carlo sweep, CSV output");
  add_common(run);
  run->add_option("--out", out_path, "output CSV path ('-' for stdout)");
  run->add_option("--workers", workers, "worker threads");
  run->add_flag("--timing", timing, "append a wall_ms column (non-deterministic)");

  auto* conv = app.add_subcommand("converge", "per-iteration error trace");
  add_common(conv);
  conv->add_option("--out", out_path, "output CSV path");
  conv->add_option("--trial", trial, "trial index to trace");

  auto* ref = app.add_subcommand("random-ref",
                                 "sweep with an i.i.d. Gaussian dictionary");
  add_common(ref);
  ref->add_option("--out", out_path, "output CSV path");
  ref->add_option("--workers", workers, "worker threads");

  auto* ang = app.add_subcommand("angles", "angle estimation round trip");
  ang->add_option("--antennas", antennas, "array size");
  ang->add_option("--spacing", spacing, "antenna spacing over wavelength");
  ang->add_option("--angles", angles, "true departure angles, degrees, comma separated");
  ang->add_option("--out", out_path, "output CSV path");

  auto* val = app.add_subcommand("validate-config", "parse and check a configuration");
  add_common(val);

  auto* ber = app.add_subcommand("ber", "flat-channel symbol detector sanity check");
  add_common(ber);
  ber->add_option("--snr", snr_db, "symbol SNR in dB");
  ber->add_option("--trials", trials, "number of frames");
  ber->add_option("--seed", seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, preset, out_path, workers, timing);
    if (conv->parsed()) return cmd_converge(config_path, preset, out_path, trial);
    if (ref->parsed()) return cmd_random_ref(config_path, preset, out_path, workers);
    if (ang->parsed()) return cmd_angles(antennas, spacing, angles, out_path);
    if (val->parsed()) return cmd_validate(config_path, preset);
    if (ber->parsed()) return cmd_ber(config_path, preset, snr_db, trials, seed);
  } catch (const oddm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const oddm::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
