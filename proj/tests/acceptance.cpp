// Acceptance suite: one pass/fail line per criterion, nonzero exit if
// any fail. Invoked by ctest with the CLI binary and configs directory
// so the determinism criterion can exercise the real tool.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "qdmem/analysis.hpp"
#include "qdmem/engine.hpp"
#include "qdmem/io.hpp"
#include "qdmem/optics.hpp"
#include "qdmem/pulses.hpp"
#include "test_protocols.hpp"

using namespace qdmem;
using qdmem::testing::all_rates_off;
using qdmem::testing::storage_protocol;
using qdmem::testing::storage_protocol_no_flips;

namespace fs = std::filesystem;

namespace {

int failures = 0;

void criterion(int number, const std::string& name,
               const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " C" << number << " " << name;
  if (!detail.empty()) std::cout << " -- " << detail;
  std::cout << "\n" << std::flush;
  if (!ok) ++failures;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Full measurement pipeline: KMC shots -> analyser/detector -> trion
// histogram -> memory degree over the read window.
MemoryResult pipeline_memory_degree(const ExperimentProtocol& protocol) {
  const auto shots =
      run_shots(protocol, protocol.run.cycles, protocol.run.seed);
  RngStream detector_rng(protocol.run.seed, 0xd1e7ec70a5e11ed0ULL);
  auto records = apply_detector(shots.events, protocol.analyzer_pair(),
                                protocol.detector, detector_rng);
  for (auto& r : records) {
    r.time_ns -= static_cast<double>(r.cycle) * protocol.run.period_ns;
  }
  const Histogram h =
      build_histogram(records, protocol.run.bin_width_ns, 0.0,
                      protocol.run.period_ns, RadiativeSpecies::trion_plus);
  return memory_degree(h, protocol.read_window_start(),
                       protocol.read_window_end());
}

ExperimentProtocol delayed_protocol(double delay_ns, PumpPolarization pump) {
  auto p = storage_protocol(delay_ns, pump, 0.9, 1250.0);
  p.rates.t1_electron_ns = 1.0e6;
  p.run.cycles = 100000;
  p.run.seed = 1;
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const fs::path configs = argc > 2 ? argv[2] : ".";

  // C1 -------------------------------------------------------------------
  criterion(1, "conservation through a full write-store-read integration",
            [&](std::string& detail) {
    const auto p = storage_protocol();  // 1000 ns = write, store, read
    const Trajectory traj =
        evolve_master(delta_distribution(kEmpty), p, 0.01, 100);
    double worst = 0.0;
    for (const auto& occ : traj.occupation) {
      double sum = 0.0;
      for (double v : occ) sum += v;
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    double worst_column = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const RateMatrix q = build_generator(1.0 + 0.5 * i / 200.0, p.rates);
      for (int from = 0; from < kStateCount; ++from) {
        double sum = 0.0;
        for (int to = 0; to < kStateCount; ++to) sum += q.entry(to, from);
        worst_column = std::max(worst_column, std::abs(sum));
      }
    }
    std::ostringstream os;
    os << "max |sum p - 1| = " << worst << ", max column residual = "
       << worst_column;
    detail = os.str();
    return worst <= 1e-8 && worst_column <= 1e-12;
  });

  // C2 -------------------------------------------------------------------
  criterion(2, "analytic exponential oracle (master, fit, KMC)",
            [&](std::string& detail) {
    RateParams decay = all_rates_off();
    decay.tau_x_ns = 1.0;

    ExperimentProtocol pure;
    pure.run.period_ns = 1.0;
    pure.rates = decay;
    pure.bias.dc_bias_v = 0.0;
    const Trajectory traj =
        evolve_master(delta_distribution(kBrightPlus), pure, 0.001);
    const double p_end = traj.occupation.back()[kBrightPlus];
    const bool master_ok = std::abs(p_end - std::exp(-1.0)) <= 1e-6;

    // Noiseless fit on the master flux of a longer decay.
    ExperimentProtocol longer = pure;
    longer.run.period_ns = 8.0;
    const Trajectory decay_traj =
        evolve_master(delta_distribution(kBrightPlus), longer, 0.01);
    std::vector<double> flux_total(decay_traj.time_ns.size());
    for (std::size_t i = 0; i < flux_total.size(); ++i) {
      for (double f : decay_traj.flux[i]) flux_total[i] += f;
    }
    const FitResult noiseless =
        fit_exponential_samples(decay_traj.time_ns, flux_total);
    const bool fit_ok = std::abs(noiseless.tau_ns - 1.0) <= 0.005;

    // KMC: inject a bright exciton each cycle and fit the photon stream.
    ExperimentProtocol kmc;
    kmc.run.period_ns = 20.0;
    kmc.rates = decay;
    kmc.rates.write_fidelity = 1.0;
    kmc.bias.dc_bias_v = 0.0;
    LaserPulse write;
    write.center_ns = 0.5;
    write.fwhm_ns = 0.001;
    write.polarization = PumpPolarization::right_circular;
    write.mean_injected_pairs = 50.0;
    kmc.laser_pulses.push_back(write);
    kmc.validate();
    const auto shots = run_shots(kmc, 100000, 5);
    const auto counts =
        binned_event_counts(shots.events, kmc.run.period_ns, 0.25);
    std::vector<double> t, y;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double center = (static_cast<double>(i) + 0.5) * 0.25;
      if (center < 0.75 || center > 9.0) continue;
      t.push_back(center);
      y.push_back(counts[i]);
    }
    const FitResult sampled = fit_exponential_samples(t, y);
    const bool kmc_ok = std::abs(sampled.tau_ns - 1.0) <= 0.01;

    std::ostringstream os;
    os << "p(1ns) err = " << std::abs(p_end - std::exp(-1.0))
       << ", noiseless tau = " << noiseless.tau_ns << ", KMC tau = "
       << sampled.tau_ns << " +- " << sampled.sigma_tau_ns;
    detail = os.str();
    return master_ok && fit_ok && kmc_ok;
  });

  // C3 -------------------------------------------------------------------
  criterion(3, "KMC equals the master equation on the storage protocol",
            [&](std::string& detail) {
    const auto p = storage_protocol();
    const std::uint64_t cycles = 100000;
    const auto shots = run_shots(p, cycles, p.run.seed);
    const auto observed =
        binned_event_counts(shots.events, p.run.period_ns, 1.0);
    const Trajectory traj =
        evolve_master(delta_distribution(kEmpty), p, 0.01);
    auto expected = traj.binned_flux(1.0, 0.0, p.run.period_ns);
    for (auto& v : expected) v *= static_cast<double>(cycles);
    const CompareReport report =
        compare_histograms(observed, expected, 1.0, cycles);
    std::ostringstream os;
    os << "relative L2 = " << report.relative_l2 << ", max |z| = "
       << report.max_abs_z;
    detail = os.str();
    return report.bins_over_4_sigma == 0 && report.relative_l2 <= 0.05;
  });

  // C4 -------------------------------------------------------------------
  criterion(4, "memory degree 0.80 +- 0.02 for both circular pumps",
            [&](std::string& detail) {
    // The 2f - 1 prediction applies to single-pair writes; keep the pump
    // weak so double injections (which store a spinless 2e singlet and
    // dilute the contrast) stay below the tolerance, and add cycles to
    // cover the statistics.
    auto right = delayed_protocol(1000.0, PumpPolarization::right_circular);
    auto left = delayed_protocol(1000.0, PumpPolarization::left_circular);
    for (auto* p : {&right, &left}) {
      p->laser_pulses[0].mean_injected_pairs = 0.015;
      p->run.cycles = 600000;
    }
    const MemoryResult d_r = pipeline_memory_degree(right);
    const MemoryResult d_l = pipeline_memory_degree(left);
    std::ostringstream os;
    os << "D(R) = " << d_r.degree << " +- " << d_r.uncertainty << ", D(L) = "
       << d_l.degree << " +- " << d_l.uncertainty << " (prediction 2f-1 = "
       << 2.0 * right.rates.write_fidelity - 1.0 << ")";
    detail = os.str();
    // R pumping stores down spins which emit sigma+, so I_R dominates and
    // the signed degree is negative; L pumping mirrors it.
    return d_r.has_signal && d_l.has_signal &&
           std::abs(d_r.degree + 0.80) <= 0.02 &&
           std::abs(d_l.degree - 0.80) <= 0.02;
  });

  // C5 -------------------------------------------------------------------
  criterion(5, "linear pump leaves no circular contrast",
            [&](std::string& detail) {
    const auto p = delayed_protocol(1000.0, PumpPolarization::horizontal);
    const MemoryResult d = pipeline_memory_degree(p);
    std::ostringstream os;
    os << "D(H) = " << d.degree << " +- " << d.uncertainty;
    detail = os.str();
    return d.has_signal && std::abs(d.degree) <= 0.01;
  });

  // C6 -------------------------------------------------------------------
  criterion(6, "memory degree is flat across 0.2-1.0 us storage",
            [&](std::string& detail) {
    double lo = 2.0, hi = -2.0;
    std::ostringstream os;
    os << "D(delay) =";
    for (double delay : {200.0, 400.0, 600.0, 800.0, 1000.0}) {
      const auto p = delayed_protocol(delay, PumpPolarization::left_circular);
      const MemoryResult d = pipeline_memory_degree(p);
      lo = std::min(lo, d.degree);
      hi = std::max(hi, d.degree);
      os << " " << d.degree;
    }
    const double tau = delayed_protocol(1000.0,
                                        PumpPolarization::left_circular)
                           .rates.tau_trion_plus_ns;
    const double ratio = 1000.0 / tau;
    os << ", spread = " << hi - lo << ", storage/lifetime = " << ratio;
    detail = os.str();
    return (hi - lo) < 0.01 && ratio >= 1000.0;
  });

  // C7 -------------------------------------------------------------------
  criterion(7, "readout is triggered by the electrical pulse only",
            [&](std::string& detail) {
    bool windows_ok = true;
    double worst_fraction = 1.0;
    for (double delay : {200.0, 600.0, 1000.0}) {
      auto p = delayed_protocol(delay, PumpPolarization::right_circular);
      p.run.cycles = 50000;
      const auto shots = run_shots(p, p.run.cycles, p.run.seed);
      RngStream det_rng(p.run.seed, 0xd1e7ec70a5e11ed0ULL);
      auto records = apply_detector(shots.events, p.analyzer_pair(),
                                    p.detector, det_rng);
      const double t_d = p.bias.pulses[0].start_ns;
      std::size_t read_photons = 0, in_window = 0;
      for (auto& r : records) {
        const double t_rel =
            r.time_ns - static_cast<double>(r.cycle) * p.run.period_ns;
        if (t_rel < t_d) continue;
        ++read_photons;
        if (t_rel <= t_d + 20.0) ++in_window;
      }
      if (read_photons == 0) {
        windows_ok = false;
        continue;
      }
      const double fraction = static_cast<double>(in_window) /
                              static_cast<double>(read_photons);
      worst_fraction = std::min(worst_fraction, fraction);
      if (fraction < 0.99) windows_ok = false;
    }

    // Electroluminescence control: no optical pulse, no events at all.
    auto dark = delayed_protocol(600.0, PumpPolarization::right_circular);
    dark.laser_pulses.clear();
    dark.run.cycles = 50000;
    const auto dark_shots = run_shots(dark, dark.run.cycles, dark.run.seed);

    std::ostringstream os;
    os << "worst in-window fraction = " << worst_fraction
       << ", events without laser = " << dark_shots.events.size();
    detail = os.str();
    return windows_ok && dark_shots.events.empty();
  });

  // C8 -------------------------------------------------------------------
  criterion(8, "bias map: X- / X / X+ windows with exact Zeeman doublets",
            [&](std::string& detail) {
    RateParams rates;
    rates.generation_rate = 0.02;
    EnergyTable energies;

    const SteadyState low = steady_state(1.10, rates);
    const SteadyState mid = steady_state(1.25, rates);
    const SteadyState high = steady_state(1.40, rates);

    auto flux = [](const SteadyState& ss, RadiativeSpecies s) {
      return ss.species_flux(s);
    };
    using RS = RadiativeSpecies;
    const bool low_ok =
        flux(low, RS::trion_minus) > flux(low, RS::neutral_exciton) &&
        flux(low, RS::trion_minus) > flux(low, RS::trion_plus) &&
        flux(low, RS::trion_minus) > flux(low, RS::biexciton);
    const double mid_neutral =
        flux(mid, RS::neutral_exciton) + flux(mid, RS::biexciton);
    const bool mid_ok = mid_neutral > flux(mid, RS::trion_minus) &&
                        mid_neutral > flux(mid, RS::trion_plus);
    const bool high_ok =
        flux(high, RS::trion_plus) > flux(high, RS::neutral_exciton) &&
        flux(high, RS::trion_plus) > flux(high, RS::trion_minus) &&
        flux(high, RS::trion_plus) > flux(high, RS::biexciton);

    // Doublet separation is exactly g mu_B B for every species, at any
    // bias, and it resolves against the 30 ueV default line width.
    bool doublets_ok = true;
    for (int s = 0; s < kRadiativeSpeciesCount; ++s) {
      const auto species = static_cast<RadiativeSpecies>(s);
      const double expected = energies.g_factor[s] *
                              kBohrMagnetonUevPerTesla *
                              energies.field_tesla;
      // find the two channels of this species
      double e_plus = 0.0, e_minus = 0.0;
      for (int st = 0; st < kStateCount; ++st) {
        for (const auto& tr : radiative_channels(st)) {
          if (tr.species != species) continue;
          if (tr.helicity == Helicity::plus) {
            e_plus = transition_energy(tr, 1.25, energies);
          } else {
            e_minus = transition_energy(tr, 1.25, energies);
          }
        }
      }
      if (std::abs((e_plus - e_minus) - expected) > 1e-9) doublets_ok = false;
      if (expected < 4.0 * 30.0) doublets_ok = false;  // must resolve
    }

    std::ostringstream os;
    os << "flux(X-)@1.10 = " << flux(low, RS::trion_minus) << ", flux(X)@1.25 = "
       << flux(mid, RS::neutral_exciton) << ", flux(X+)@1.40 = "
       << flux(high, RS::trion_plus)
       << ", doublet separation = " << 3.0 * kBohrMagnetonUevPerTesla * 2.0;
    detail = os.str();
    return low_ok && mid_ok && high_ok && doublets_ok;
  });

  // C9 -------------------------------------------------------------------
  criterion(9, "read-photon yield never grows with slower pulse edges",
            [&](std::string& detail) {
    double previous = std::numeric_limits<double>::infinity();
    bool monotone = true;
    std::ostringstream os;
    os << "yield(tau_rise) =";
    for (double rise : {0.1, 0.5, 1.0, 2.0, 3.5, 5.0}) {
      auto p = storage_protocol_no_flips(200.0);
      p.run.period_ns = 500.0;
      p.bias.pulses[0].rise_time_ns = rise;
      p.validate();
      const Trajectory traj =
          evolve_master(delta_distribution(kEmpty), p, 0.01);
      const double yield = traj.integrated_flux(
          p.bias.pulses[0].start_ns, p.run.period_ns,
          static_cast<int>(RadiativeSpecies::trion_plus));
      os << " " << yield;
      if (yield > previous + 1e-9) monotone = false;
      previous = yield;
    }
    detail = os.str();
    return monotone;
  });

  // C10 ------------------------------------------------------------------
  criterion(10, "analyser optics: unitary plates, complete channels",
            [&](std::string& detail) {
    RngStream rng(99, 0);
    const auto pair = AnalyzerPair::from_settings(45.0, 45.0, 0.0, 0.0, 0.0);
    double worst_unitarity = 0.0;
    double worst_completeness = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double retardance = rng.uniform() * 6.28;
      const double angle = rng.uniform() * 360.0;
      const JonesMatrix u = waveplate(retardance, angle);
      const Complex a = std::conj(u.hh) * u.hh + std::conj(u.vh) * u.vh;
      const Complex b = std::conj(u.hh) * u.hv + std::conj(u.vh) * u.vv;
      const Complex d = std::conj(u.hv) * u.hv + std::conj(u.vv) * u.vv;
      worst_unitarity = std::max(
          worst_unitarity,
          std::max({std::abs(a - Complex{1.0, 0.0}), std::abs(b),
                    std::abs(d - Complex{1.0, 0.0})}));

      const double theta = rng.uniform() * 3.141592653589793;
      const double phase = rng.uniform() * 6.283185307179586;
      const JonesVector input{Complex{std::cos(theta), 0.0},
                              std::polar(std::sin(theta), phase)};
      const double total =
          transmitted_fraction(input, pair.sigma_plus_channel) +
          transmitted_fraction(input, pair.sigma_minus_channel);
      worst_completeness =
          std::max(worst_completeness, std::abs(total - 1.0));
    }
    const double matched =
        transmitted_fraction(Helicity::plus, pair.sigma_plus_channel);
    const double crossed =
        transmitted_fraction(Helicity::plus, pair.sigma_minus_channel);
    std::ostringstream os;
    os << "unitarity defect = " << worst_unitarity
       << ", completeness defect = " << worst_completeness
       << ", matched = " << matched << ", crossed = " << crossed;
    detail = os.str();
    return worst_unitarity <= 1e-12 && worst_completeness <= 1e-12 &&
           std::abs(matched - 1.0) <= 1e-12 && std::abs(crossed) <= 1e-12;
  });

  // C11 ------------------------------------------------------------------
  criterion(11, "byte-identical outputs independent of --jobs",
            [&](std::string& detail) {
    if (cli.empty()) {
      detail = "CLI binary path not supplied";
      return false;
    }
    const fs::path work = fs::temp_directory_path() /
                          ("qdmem_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string config = (configs / "storage.cfg").string();
    const fs::path out1 = work / "jobs1";
    const fs::path out2 = work / "jobs4";
    const std::string base = cli + " run --config " + config +
                             " --cycles 20000 --quiet ";
    const int rc1 =
        std::system((base + "--jobs 1 --out " + out1.string()).c_str());
    const int rc2 =
        std::system((base + "--jobs 4 --out " + out2.string()).c_str());
    auto mask_outdir = [](std::string text) {
      std::istringstream in(text);
      std::ostringstream masked;
      std::string line;
      while (std::getline(in, line)) {
        if (line.find("output_directory") == std::string::npos) {
          masked << line << '\n';
        }
      }
      return masked.str();
    };
    const bool identical =
        slurp(out1 / "histogram.csv") == slurp(out2 / "histogram.csv") &&
        slurp(out1 / "summary.json") == slurp(out2 / "summary.json") &&
        mask_outdir(slurp(out1 / "manifest.json")) ==
            mask_outdir(slurp(out2 / "manifest.json"));
    fs::remove_all(work);
    std::ostringstream os;
    os << "exit codes " << rc1 << "/" << rc2
       << (identical ? ", outputs identical" : ", outputs differ");
    detail = os.str();
    return rc1 == 0 && rc2 == 0 && identical;
  });

  if (failures == 0) {
    std::cout << "all acceptance criteria passed\n";
    return 0;
  }
  std::cout << failures << " acceptance criteria failed\n";
  return 1;
}
