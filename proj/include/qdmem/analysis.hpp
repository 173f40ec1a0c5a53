#ifndef QDMEM_ANALYSIS_HPP
#define QDMEM_ANALYSIS_HPP

#include <optional>
#include <vector>

#include "qdmem/engine.hpp"
#include "qdmem/optics.hpp"
#include "qdmem/rates.hpp"

// Reductions from detection records to the published observables:
// polarisation-resolved arrival-time histograms, exponential lifetime
// fits, the polarisation-memory degree and bias-sweep spectral maps.

namespace qdmem {

struct Histogram {
  double t0_ns = 0.0;
  double bin_width_ns = 1.0;
  std::vector<double> counts_sigma_plus;
  std::vector<double> counts_sigma_minus;
  std::uint64_t total_cycles = 0;

  std::size_t bins() const { return counts_sigma_plus.size(); }
  double bin_center(std::size_t i) const {
    return t0_ns + (static_cast<double>(i) + 0.5) * bin_width_ns;
  }
  double total_counts() const;
};

// Counts per channel per uniform bin over [t0, t1); records outside the
// window are dropped. An optional species filter mimics the spectrometer
// selecting a single emission line.
Histogram build_histogram(const std::vector<DetectionRecord>& records,
                          double bin_width_ns, double t0_ns, double t1_ns,
                          std::optional<RadiativeSpecies> species = {});

struct MemoryResult {
  double intensity_left = 0.0;   // sigma- channel area
  double intensity_right = 0.0;  // sigma+ channel area
  double degree = 0.0;           // (I_L - I_R) / (I_L + I_R)
  double uncertainty = 0.0;      // binomial propagation
  bool has_signal = false;
};

// Integrates both channels over the read window and forms the
// polarisation-memory degree. An empty window yields has_signal = false
// rather than a division by zero.
MemoryResult memory_degree(const Histogram& h, double window_start_ns,
                           double window_end_ns);

struct FitResult {
  double tau_ns = 0.0;
  double sigma_tau_ns = 0.0;
  int bins_used = 0;
};

// Weighted least squares on log-counts (Poisson weights) over the fit
// window, summing the two channels. Throws std::runtime_error when fewer
// than five non-empty bins are available or when the window does not
// decay.
FitResult fit_exponential(const Histogram& h, double window_start_ns,
                          double window_end_ns);

// Same fit on raw (time, value) samples, e.g. master-equation flux.
FitResult fit_exponential_samples(const std::vector<double>& time_ns,
                                  const std::vector<double>& values);

struct SpectralMap {
  std::vector<double> bias_v;
  std::vector<double> energy_uev;
  // intensity[bias_index * energy_count + energy_index]
  std::vector<double> intensity;
  // Steady-state flux per species at each bias, for annotations.
  std::vector<std::array<double, kRadiativeSpeciesCount>> species_flux;

  double at(std::size_t bias_index, std::size_t energy_index) const {
    return intensity[bias_index * energy_uev.size() + energy_index];
  }
  // Species with the largest steady-state flux at the given bias point.
  RadiativeSpecies dominant_species(std::size_t bias_index) const;
};

// Steady-state emission intensity versus bias and photon energy: each
// radiative channel contributes a Gaussian line of the given width at its
// transition energy, weighted by the stationary flux.
SpectralMap spectral_map(const RateParams& rates, const EnergyTable& energies,
                         const std::vector<double>& bias_grid_v,
                         const std::vector<double>& energy_grid_uev,
                         double line_width_uev = 30.0);

// Uniform grid helper (inclusive endpoints).
std::vector<double> linspace(double lo, double hi, int points);

// Cycle-relative counts of raw emission events per uniform bin over one
// repetition period; the engine-equivalence comparison runs on these.
std::vector<double> binned_event_counts(const std::vector<PhotonEvent>& events,
                                        double period_ns, double bin_width_ns,
                                        int species = -1);

}  // namespace qdmem

#endif  // QDMEM_ANALYSIS_HPP
