// Command-line front end: loads a protocol config, runs the requested
// engine(s) and writes plot-ready CSV/JSON plus a run manifest.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "qdmem/analysis.hpp"
#include "qdmem/engine.hpp"
#include "qdmem/io.hpp"
#include "qdmem/optics.hpp"
#include "qdmem/pulses.hpp"

namespace fs = std::filesystem;
using namespace qdmem;

namespace {

// Stream id reserved for the detector so it never collides with the
// per-cycle simulation streams (plain cycle indices).
constexpr std::uint64_t kDetectorStream = 0xd1e7ec70a5e11ed0ULL;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  bool quiet = false;
  int jobs = 0;
};

struct LoadedRun {
  ExperimentProtocol protocol;
  RunManifest manifest;
};

LoadedRun prepare(const CommonArgs& args, std::uint64_t seed_override,
                  bool has_seed, std::uint64_t cycles_override,
                  bool has_cycles, const std::string& engine_override) {
  LoadedRun run{load_protocol_file(args.config_path), {}};
  if (has_seed) run.protocol.run.seed = seed_override;
  if (has_cycles) run.protocol.run.cycles = cycles_override;
  if (!engine_override.empty()) {
    run.protocol.run.engine = engine_override;
    run.protocol.validate();
  }
  run.manifest.config_path = args.config_path;
  run.manifest.config_hash = protocol_hash(run.protocol);
  run.manifest.seed = run.protocol.run.seed;
  run.manifest.cycles = run.protocol.run.cycles;
  run.manifest.engine = run.protocol.run.engine;
  run.manifest.output_directory = args.out_dir;
  fs::create_directories(args.out_dir);
  return run;
}

Histogram kmc_histogram(const ExperimentProtocol& protocol, int jobs) {
  const auto shots =
      run_shots(protocol, protocol.run.cycles, protocol.run.seed, jobs);
  RngStream detector_rng(protocol.run.seed, kDetectorStream);
  const auto records = apply_detector(shots.events, protocol.analyzer_pair(),
                                      protocol.detector, detector_rng);
  // Record times are cycle-relative for histogramming.
  std::vector<DetectionRecord> relative = records;
  for (auto& r : relative) {
    r.time_ns -= static_cast<double>(r.cycle) * protocol.run.period_ns;
  }
  Histogram h =
      build_histogram(relative, protocol.run.bin_width_ns, 0.0,
                      protocol.run.period_ns, RadiativeSpecies::trion_plus);
  h.total_cycles = protocol.run.cycles;
  return h;
}

Histogram master_histogram(const ExperimentProtocol& protocol) {
  const Trajectory traj = evolve_master(delta_distribution(kEmpty), protocol,
                                        protocol.run.master_dt_ns);
  const AnalyzerPair analyzers = protocol.analyzer_pair();
  double t_plus[2];   // channel fractions for sigma+/- emission
  double t_minus[2];
  for (int h = 0; h < 2; ++h) {
    const auto input = jones_circular(static_cast<Helicity>(h));
    t_plus[h] = transmitted_fraction(input, analyzers.sigma_plus_channel);
    t_minus[h] = transmitted_fraction(input, analyzers.sigma_minus_channel);
  }
  const int species = static_cast<int>(RadiativeSpecies::trion_plus);
  const auto cycles = static_cast<double>(protocol.run.cycles);
  const double eta = protocol.detector.efficiency;
  Histogram hist;
  hist.t0_ns = 0.0;
  hist.bin_width_ns = protocol.run.bin_width_ns;
  hist.total_cycles = protocol.run.cycles;
  for (int h = 0; h < 2; ++h) {
    const auto flux = traj.binned_flux(protocol.run.bin_width_ns, 0.0,
                                       protocol.run.period_ns, species, h);
    if (hist.counts_sigma_plus.empty()) {
      hist.counts_sigma_plus.assign(flux.size(), 0.0);
      hist.counts_sigma_minus.assign(flux.size(), 0.0);
    }
    for (std::size_t i = 0; i < flux.size(); ++i) {
      hist.counts_sigma_plus[i] += cycles * eta * t_plus[h] * flux[i];
      hist.counts_sigma_minus[i] += cycles * eta * t_minus[h] * flux[i];
    }
  }
  return hist;
}

RunSummary summarize(const ExperimentProtocol& protocol, const Histogram& h,
                     const std::string& engine,
                     const std::string& config_hash) {
  RunSummary summary;
  summary.config_hash = config_hash;
  summary.seed = protocol.run.seed;
  summary.cycles = protocol.run.cycles;
  summary.engine = engine;
  summary.total_counts = h.total_counts();
  const double w0 = protocol.read_window_start();
  const double w1 = protocol.read_window_end();
  summary.memory = memory_degree(h, w0, w1);
  // Fit the decay tail: from the peak bin inside the read window onward.
  if (summary.memory.has_signal) {
    std::size_t peak = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < h.bins(); ++i) {
      const double t = h.bin_center(i);
      if (t < w0 || t >= w1) continue;
      const double c = h.counts_sigma_plus[i] + h.counts_sigma_minus[i];
      if (c > best) {
        best = c;
        peak = i;
      }
    }
    try {
      summary.lifetime_fit =
          fit_exponential(h, h.bin_center(peak) + 0.5 * h.bin_width_ns, w1);
    } catch (const std::exception& e) {
      summary.fit_error = e.what();
    }
  } else {
    summary.fit_error = "no signal in the read window";
  }
  return summary;
}

int cmd_run(const CommonArgs& args, std::uint64_t seed, bool has_seed,
            std::uint64_t cycles, bool has_cycles,
            const std::string& engine) {
  LoadedRun run = prepare(args, seed, has_seed, cycles, has_cycles, engine);
  const fs::path dir(args.out_dir);
  // Manifest first, so interrupted long runs stay identifiable.
  write_manifest_json((dir / "manifest.json").string(), run.manifest);

  const std::string mode = run.protocol.run.engine;
  Histogram primary;
  if (mode == "master") {
    primary = master_histogram(run.protocol);
  } else {
    primary = kmc_histogram(run.protocol, args.jobs);
    if (mode == "both") {
      write_histogram_csv((dir / "histogram_master.csv").string(),
                          master_histogram(run.protocol));
    }
  }
  write_histogram_csv((dir / "histogram.csv").string(), primary);
  const RunSummary summary =
      summarize(run.protocol, primary, mode, run.manifest.config_hash);
  write_summary_json((dir / "summary.json").string(), summary);
  if (!args.quiet) {
    std::cout << "wrote " << (dir / "histogram.csv").string() << " ("
              << summary.total_counts << " counts";
    if (summary.memory.has_signal) {
      std::cout << ", memory degree " << summary.memory.degree << " +- "
                << summary.memory.uncertainty;
    }
    std::cout << ")\n";
  }
  return 0;
}

int cmd_sweep_bias(const CommonArgs& args, double v_min, double v_max,
                   int steps, int energy_points, double line_width_uev) {
  LoadedRun run = prepare(args, 0, false, 0, false, "");
  if (!(run.protocol.rates.generation_rate > 0.0)) {
    throw ConfigError(
        "rates.generation_rate: must be > 0 for a steady-state bias sweep");
  }
  const fs::path dir(args.out_dir);
  write_manifest_json((dir / "manifest.json").string(), run.manifest);

  const auto& energies = run.protocol.energies;
  double e_lo = energies.base_uev[0];
  double e_hi = energies.base_uev[0];
  for (double e : energies.base_uev) {
    e_lo = std::min(e_lo, e);
    e_hi = std::max(e_hi, e);
  }
  const double margin =
      3.0 * line_width_uev +
      0.5 * energies.zeeman_splitting_uev(RadiativeSpecies::neutral_exciton) +
      std::abs(energies.stark_uev_per_v) * (std::abs(v_max - v_min) + 1.0);
  const SpectralMap map = spectral_map(
      run.protocol.rates, energies, linspace(v_min, v_max, steps),
      linspace(e_lo - margin, e_hi + margin, energy_points), line_width_uev);
  write_spectral_map_csv((dir / "spectral_map.csv").string(), map);
  if (!args.quiet) {
    std::cout << "wrote " << (dir / "spectral_map.csv").string() << " ("
              << steps << " bias points x " << energy_points
              << " energies)\n";
  }
  return 0;
}

int cmd_compare(const CommonArgs& args, std::uint64_t seed, bool has_seed,
                std::uint64_t cycles, bool has_cycles) {
  LoadedRun run = prepare(args, seed, has_seed, cycles, has_cycles, "both");
  const fs::path dir(args.out_dir);
  write_manifest_json((dir / "manifest.json").string(), run.manifest);

  const auto& protocol = run.protocol;
  const auto shots =
      run_shots(protocol, protocol.run.cycles, protocol.run.seed, args.jobs);
  const auto observed = binned_event_counts(
      shots.events, protocol.run.period_ns, protocol.run.bin_width_ns);

  const Trajectory traj = evolve_master(delta_distribution(kEmpty), protocol,
                                        protocol.run.master_dt_ns);
  auto expected = traj.binned_flux(protocol.run.bin_width_ns, 0.0,
                                   protocol.run.period_ns);
  for (auto& v : expected) v *= static_cast<double>(protocol.run.cycles);

  const CompareReport report =
      compare_histograms(observed, expected, protocol.run.bin_width_ns,
                         protocol.run.cycles);
  write_compare_json((dir / "compare_report.json").string(), report);
  if (!args.quiet) {
    std::cout << "relative L2 = " << report.relative_l2
              << ", max |z| = " << report.max_abs_z << ", bins over 4 sigma: "
              << report.bins_over_4_sigma
              << (report.sufficient_statistics ? ""
                                               : " (insufficient statistics)")
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single quantum-dot spin-memory simulator"};
  app.set_version_flag("--version", std::string("qdmem ") + kToolVersion +
                                        " (config schema " +
                                        std::to_string(kConfigSchemaVersion) +
                                        ")");
  app.require_subcommand(1);

  CommonArgs common;
  std::uint64_t seed = 0;
  std::uint64_t cycles = 0;
  std::string engine;
  double v_min = 1.0, v_max = 1.5;
  int steps = 101;
  int energy_points = 601;
  double line_width = 30.0;

  auto add_common = [&common](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "protocol config file")
        ->required();
    cmd->add_option("--out", common.out_dir, "output directory");
    cmd->add_option("--jobs", common.jobs,
                    "worker threads (0 = all); never affects results");
    cmd->add_flag("--quiet", common.quiet, "suppress progress output");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "simulate one protocol");
  add_common(run_cmd);
  auto* run_seed = run_cmd->add_option("--seed", seed, "RNG seed override");
  auto* run_cycles =
      run_cmd->add_option("--cycles", cycles, "cycle count override");
  run_cmd->add_option("--engine", engine, "kmc | master | both")
      ->check(CLI::IsMember({"kmc", "master", "both"}));

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep-bias", "steady-state spectral map vs bias");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--v-min", v_min, "sweep start (V)")->required();
  sweep_cmd->add_option("--v-max", v_max, "sweep end (V)")->required();
  sweep_cmd->add_option("--steps", steps, "bias points (>= 2)")->required();
  sweep_cmd->add_option("--energy-points", energy_points,
                        "energy grid points");
  sweep_cmd->add_option("--line-width", line_width,
                        "spectral line width (ueV)");

  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "KMC vs master-equation distance report");
  add_common(compare_cmd);
  auto* cmp_seed =
      compare_cmd->add_option("--seed", seed, "RNG seed override");
  auto* cmp_cycles =
      compare_cmd->add_option("--cycles", cycles, "cycle count override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return cmd_run(common, seed, run_seed->count() > 0, cycles,
                     run_cycles->count() > 0, engine);
    }
    if (sweep_cmd->parsed()) {
      if (steps < 2) {
        std::cerr << "qdmem: sweep-bias requires --steps >= 2\n";
        return 1;
      }
      if (!(v_min < v_max)) {
        std::cerr << "qdmem: sweep-bias requires --v-min < --v-max\n";
        return 1;
      }
      return cmd_sweep_bias(common, v_min, v_max, steps, energy_points,
                            line_width);
    }
    if (compare_cmd->parsed()) {
      return cmd_compare(common, seed, cmp_seed->count() > 0, cycles,
                         cmp_cycles->count() > 0);
    }
  } catch (const ConfigError& e) {
    std::cerr << "qdmem: config error: " << common.config_path << ": "
              << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "qdmem: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
