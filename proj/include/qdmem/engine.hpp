#ifndef QDMEM_ENGINE_HPP
#define QDMEM_ENGINE_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "qdmem/levels.hpp"
#include "qdmem/pulses.hpp"
#include "qdmem/rates.hpp"
#include "qdmem/rng.hpp"

// The rate engine: builds the 16-state generator at a given bias and
// evolves it two ways. evolve_master integrates the master equation with
// fixed-step RK4 and is the deterministic oracle; run_shots samples the
// same process by kinetic Monte Carlo (thinning against piecewise rate
// bounds) and emits photon events. Cycles are independent work units with
// counter-based RNG streams, so the parallel driver reproduces the serial
// one bit for bit.

namespace qdmem {

// Continuous-time Markov generator over the 16 states. entry(to, from)
// is the rate from -> to; each diagonal holds minus its column sum.
struct RateMatrix {
  std::array<double, kStateCount * kStateCount> q{};

  double& entry(int to, int from) { return q[to * kStateCount + from]; }
  double entry(int to, int from) const { return q[to * kStateCount + from]; }

  // dp/dt = Q p
  void apply(const std::array<double, kStateCount>& p,
             std::array<double, kStateCount>& dp) const;
};

// All processes of one memory cycle at a fixed bias: radiative decay
// along the selection rules, per-carrier tunnelling, hole capture,
// carrier spin flips, and (for steady-state spectra) continuous pair
// generation.
RateMatrix build_generator(double bias_v, const RateParams& rates);

struct PhotonEvent {
  double time_ns = 0.0;  // absolute within the run
  std::uint64_t cycle = 0;
  RadiativeSpecies species = RadiativeSpecies::neutral_exciton;
  Helicity helicity = Helicity::plus;
  double energy_uev = 0.0;  // evaluated at the emission-time bias
};

using StateVector = std::array<double, kStateCount>;

StateVector delta_distribution(int state);

// One pair-injection attempt followed by Poisson weighting over attempt
// counts; used by both engines so they sample/propagate the same map.
// A single attempt adds the helicity-matched bright pair with probability
// `fidelity` (circular pump) and the mirrored pair otherwise; attempts the
// shell cannot accept are discarded.
int inject_excitation(int state, const LaserPulse& pulse, double fidelity,
                      RngStream& rng);
StateVector inject_excitation(const StateVector& p, const LaserPulse& pulse,
                              double fidelity);

// Deterministic trajectory: grid times, occupation vectors, and the
// per-(species, helicity) instantaneous emission flux in 1/ns.
struct Trajectory {
  std::vector<double> time_ns;
  std::vector<StateVector> occupation;
  // flux[i][s * 2 + h] at time_ns[i]
  std::vector<std::array<double, kRadiativeSpeciesCount * 2>> flux;

  // Trapezoid integral of the flux over [t0, t1], summed over species and
  // helicities unless a species filter is given.
  double integrated_flux(double t0_ns, double t1_ns, int species = -1,
                         int helicity = -1) const;

  // Expected per-cycle emission per uniform bin of the given width,
  // summed over species/helicity (optionally filtered).
  std::vector<double> binned_flux(double bin_width_ns, double t0_ns,
                                  double t1_ns, int species = -1,
                                  int helicity = -1) const;
};

// Fixed-step RK4 integration of dp/dt = Q(V(t)) p over one repetition
// period, applying the injection map at each laser pulse time. Throws
// std::invalid_argument if dt is non-positive or the stability guard
// dt * max_total_rate > 1 trips (the offending rate is named).
Trajectory evolve_master(const StateVector& p0,
                         const ExperimentProtocol& protocol, double dt_ns,
                         int record_stride = 1);

// Stationary solution of Q(V) p = 0 with sum(p) = 1, plus the
// species/helicity-resolved radiative flux it implies.
struct SteadyState {
  StateVector occupation{};
  std::array<double, kRadiativeSpeciesCount * 2> flux{};
  double residual_inf = 0.0;  // max |(Q p)_i|
  double condition_estimate = 0.0;

  double species_flux(RadiativeSpecies s) const {
    const int i = static_cast<int>(s);
    return flux[2 * i] + flux[2 * i + 1];
  }
};
SteadyState steady_state(double bias_v, const RateParams& rates);

// Precomputed per-(state, segment) exit-rate upper bounds for thinning.
// Segments are delimited by the a.c. pulse edges, so the bounds stay
// tight while the bias moves.
class ShotSampler {
 public:
  explicit ShotSampler(const ExperimentProtocol& protocol);

  // Simulates one repetition cycle starting from `state`; emitted photons
  // are appended with the given cycle index and time offset. Returns the
  // final state (carries into the next cycle of a chained stream).
  int run_cycle(int state, std::uint64_t cycle_index, double time_offset_ns,
                RngStream& rng, std::vector<PhotonEvent>& out) const;

  double max_exit_rate() const { return max_exit_rate_; }

 private:
  struct Segment {
    double t0 = 0.0;
    double t1 = 0.0;
    std::array<double, kStateCount> rate_bound{};
  };
  struct Channels;  // per-state process lists, shared with build_generator

  const ExperimentProtocol& protocol_;
  std::shared_ptr<const Channels> channels_;
  std::vector<Segment> segments_;
  double max_exit_rate_ = 0.0;
};

// One cycle by kinetic Monte Carlo from the vacuum state. The RNG stream
// is derived from (protocol seed, cycle_seed).
std::vector<PhotonEvent> simulate_shot(const ExperimentProtocol& protocol,
                                       std::uint64_t cycle_seed);

struct ShotSummary {
  std::uint64_t cycles = 0;
  std::uint64_t total_events = 0;
  std::array<std::uint64_t, kRadiativeSpeciesCount * 2> events_by_channel{};
};

struct ShotResult {
  std::vector<PhotonEvent> events;  // merged in time order
  ShotSummary summary;
};

// n_cycles independent cycles; cycle i consumes the counter-based stream
// (seed, i), so the result is identical for any `jobs`. jobs <= 0 means
// "library default" (all available threads).
ShotResult run_shots(const ExperimentProtocol& protocol,
                     std::uint64_t n_cycles, std::uint64_t seed,
                     int jobs = 0);

// Serial reference implementation; kept separate so tests and the
// benchmark can compare it against the OpenMP path.
ShotResult run_shots_serial(const ExperimentProtocol& protocol,
                            std::uint64_t n_cycles, std::uint64_t seed);

}  // namespace qdmem

#endif  // QDMEM_ENGINE_HPP
