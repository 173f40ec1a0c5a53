#include "qdmem/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qdmem {

double Histogram::total_counts() const {
  double total = 0.0;
  for (double c : counts_sigma_plus) total += c;
  for (double c : counts_sigma_minus) total += c;
  return total;
}

Histogram build_histogram(const std::vector<DetectionRecord>& records,
                          double bin_width_ns, double t0_ns, double t1_ns,
                          std::optional<RadiativeSpecies> species) {
  if (!(bin_width_ns > 0.0)) {
    throw std::invalid_argument("build_histogram: bin width must be > 0");
  }
  if (!(t1_ns > t0_ns)) {
    throw std::invalid_argument("build_histogram: window must be non-empty");
  }
  const auto bins = static_cast<std::size_t>(
      std::ceil((t1_ns - t0_ns) / bin_width_ns - 1e-9));
  Histogram h;
  h.t0_ns = t0_ns;
  h.bin_width_ns = bin_width_ns;
  h.counts_sigma_plus.assign(bins, 0.0);
  h.counts_sigma_minus.assign(bins, 0.0);
  for (const auto& r : records) {
    if (species && r.species != *species) continue;
    if (r.time_ns < t0_ns || r.time_ns >= t1_ns) continue;
    auto bin = static_cast<std::size_t>((r.time_ns - t0_ns) / bin_width_ns);
    if (bin >= bins) bin = bins - 1;  // right edge round-off
    if (r.channel == Channel::sigma_plus) {
      h.counts_sigma_plus[bin] += 1.0;
    } else {
      h.counts_sigma_minus[bin] += 1.0;
    }
  }
  return h;
}

MemoryResult memory_degree(const Histogram& h, double window_start_ns,
                           double window_end_ns) {
  MemoryResult result;
  for (std::size_t i = 0; i < h.bins(); ++i) {
    const double t = h.bin_center(i);
    if (t < window_start_ns || t >= window_end_ns) continue;
    result.intensity_right += h.counts_sigma_plus[i];
    result.intensity_left += h.counts_sigma_minus[i];
  }
  const double total = result.intensity_left + result.intensity_right;
  if (total <= 0.0) return result;  // explicit no-signal outcome
  result.has_signal = true;
  result.degree = (result.intensity_left - result.intensity_right) / total;
  result.uncertainty = 2.0 *
                       std::sqrt(result.intensity_left *
                                 result.intensity_right / (total * total *
                                                           total));
  return result;
}

FitResult fit_exponential_samples(const std::vector<double>& time_ns,
                                  const std::vector<double>& values) {
  // Weighted regression of ln(y) on t; Poisson statistics give each bin
  // weight y, which is also appropriate for noiseless flux samples.
  double sw = 0.0, swt = 0.0, swy = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < time_ns.size(); ++i) {
    if (values[i] <= 0.0) continue;
    const double w = values[i];
    sw += w;
    swt += w * time_ns[i];
    swy += w * std::log(values[i]);
    ++used;
  }
  if (used < 5) {
    throw std::runtime_error(
        "fit_exponential: fewer than 5 non-empty bins in the fit window");
  }
  const double t_bar = swt / sw;
  const double y_bar = swy / sw;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < time_ns.size(); ++i) {
    if (values[i] <= 0.0) continue;
    const double w = values[i];
    const double dt = time_ns[i] - t_bar;
    stt += w * dt * dt;
    sty += w * dt * (std::log(values[i]) - y_bar);
  }
  if (stt <= 0.0) {
    throw std::runtime_error("fit_exponential: degenerate time axis");
  }
  const double slope = sty / stt;
  if (slope >= 0.0) {
    throw std::runtime_error(
        "fit_exponential: window does not decay (non-negative rate)");
  }
  FitResult fit;
  fit.tau_ns = -1.0 / slope;
  fit.sigma_tau_ns = fit.tau_ns * fit.tau_ns / std::sqrt(stt);
  fit.bins_used = used;
  return fit;
}

FitResult fit_exponential(const Histogram& h, double window_start_ns,
                          double window_end_ns) {
  std::vector<double> t, y;
  for (std::size_t i = 0; i < h.bins(); ++i) {
    const double center = h.bin_center(i);
    if (center < window_start_ns || center >= window_end_ns) continue;
    t.push_back(center);
    y.push_back(h.counts_sigma_plus[i] + h.counts_sigma_minus[i]);
  }
  return fit_exponential_samples(t, y);
}

RadiativeSpecies SpectralMap::dominant_species(std::size_t bias_index) const {
  const auto& f = species_flux[bias_index];
  int best = 0;
  for (int s = 1; s < kRadiativeSpeciesCount; ++s) {
    if (f[static_cast<std::size_t>(s)] > f[static_cast<std::size_t>(best)]) {
      best = s;
    }
  }
  return static_cast<RadiativeSpecies>(best);
}

SpectralMap spectral_map(const RateParams& rates, const EnergyTable& energies,
                         const std::vector<double>& bias_grid_v,
                         const std::vector<double>& energy_grid_uev,
                         double line_width_uev) {
  for (std::size_t i = 1; i < bias_grid_v.size(); ++i) {
    if (!(bias_grid_v[i] > bias_grid_v[i - 1])) {
      throw std::invalid_argument("spectral_map: bias grid must be monotone");
    }
  }
  SpectralMap map;
  map.bias_v = bias_grid_v;
  map.energy_uev = energy_grid_uev;
  map.intensity.assign(bias_grid_v.size() * energy_grid_uev.size(), 0.0);
  map.species_flux.assign(bias_grid_v.size(), {});

  const double inv_two_sigma2 = 1.0 / (2.0 * line_width_uev * line_width_uev);
  const double norm =
      1.0 / (line_width_uev * std::sqrt(2.0 * 3.141592653589793));

  for (std::size_t b = 0; b < bias_grid_v.size(); ++b) {
    const double bias = bias_grid_v[b];
    const SteadyState ss = steady_state(bias, rates);
    for (int sp = 0; sp < kRadiativeSpeciesCount; ++sp) {
      map.species_flux[b][static_cast<std::size_t>(sp)] =
          ss.species_flux(static_cast<RadiativeSpecies>(sp));
    }
    // One Gaussian line per populated radiative channel, weighted by
    // its stationary flux (rate times occupation).
    for (int state = 0; state < kStateCount; ++state) {
      for (const auto& tr : radiative_channels(state)) {
        const double occupancy =
            ss.occupation[static_cast<std::size_t>(state)];
        if (occupancy <= 0.0) continue;
        const double center = transition_energy(tr, bias, energies);
        double rate = 0.0;
        switch (tr.species) {
          case RadiativeSpecies::neutral_exciton:
            rate = 1.0 / rates.tau_x_ns;
            break;
          case RadiativeSpecies::trion_plus:
            rate = 1.0 / rates.tau_trion_plus_ns;
            break;
          case RadiativeSpecies::trion_minus:
            rate = 1.0 / rates.tau_trion_minus_ns;
            break;
          case RadiativeSpecies::biexciton:
            rate = 0.5 / rates.tau_biexciton_ns;
            break;
        }
        const double line_flux = rate * occupancy;
        for (std::size_t e = 0; e < energy_grid_uev.size(); ++e) {
          const double d = energy_grid_uev[e] - center;
          map.intensity[b * energy_grid_uev.size() + e] +=
              line_flux * norm * std::exp(-d * d * inv_two_sigma2);
        }
      }
    }
  }
  return map;
}

std::vector<double> binned_event_counts(const std::vector<PhotonEvent>& events,
                                        double period_ns, double bin_width_ns,
                                        int species) {
  const auto bins = static_cast<std::size_t>(
      std::ceil(period_ns / bin_width_ns - 1e-9));
  std::vector<double> counts(bins, 0.0);
  for (const auto& ev : events) {
    if (species >= 0 && static_cast<int>(ev.species) != species) continue;
    const double t_rel =
        ev.time_ns - static_cast<double>(ev.cycle) * period_ns;
    auto bin = static_cast<std::size_t>(t_rel / bin_width_ns);
    if (bin >= bins) bin = bins - 1;
    counts[bin] += 1.0;
  }
  return counts;
}

std::vector<double> linspace(double lo, double hi, int points) {
  if (points < 2) throw std::invalid_argument("linspace: need >= 2 points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double step = (hi - lo) / (points - 1);
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] = lo + step * i;
  }
  grid.back() = hi;
  return grid;
}

}  // namespace qdmem
