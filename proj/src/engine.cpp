#include "qdmem/engine.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qdmem {

namespace {

// One elementary process out of a state. The instantaneous rate is
// fixed_rate + hole_coeff * gamma_h(V) + electron_coeff * gamma_e(V) +
// capture_coeff * gamma_cap(V); exactly one term is non-zero per channel.
struct ProcessChannel {
  int target = 0;
  double fixed_rate = 0.0;
  double hole_coeff = 0.0;
  double electron_coeff = 0.0;
  double capture_coeff = 0.0;
  const Transition* radiative = nullptr;

  double rate(double gamma_h, double gamma_e, double gamma_cap) const {
    return fixed_rate + hole_coeff * gamma_h + electron_coeff * gamma_e +
           capture_coeff * gamma_cap;
  }
};

using ChannelTable = std::array<std::vector<ProcessChannel>, kStateCount>;

double radiative_rate(const Transition& t, const RateParams& r) {
  switch (t.species) {
    case RadiativeSpecies::neutral_exciton: return 1.0 / r.tau_x_ns;
    case RadiativeSpecies::trion_plus: return 1.0 / r.tau_trion_plus_ns;
    case RadiativeSpecies::trion_minus: return 1.0 / r.tau_trion_minus_ns;
    case RadiativeSpecies::biexciton:
      // Two cascade channels share the biexciton lifetime equally.
      return 0.5 / r.tau_biexciton_ns;
  }
  return 0.0;
}

// Result of adding one carrier of the given spin; -1 if the shell is full
// or Pauli-blocked.
int add_hole(const DotState& s, bool up) {
  switch (s.holes) {
    case HoleConfig::none:
      return state_index({s.electrons, up ? HoleConfig::up : HoleConfig::down});
    case HoleConfig::up:
      return up ? -1 : state_index({s.electrons, HoleConfig::pair});
    case HoleConfig::down:
      return up ? state_index({s.electrons, HoleConfig::pair}) : -1;
    case HoleConfig::pair: return -1;
  }
  return -1;
}

int add_bright_pair(const DotState& s, bool jz_plus) {
  // J_z = +1 pair is (electron down, hole up); J_z = -1 the mirror.
  const ElectronConfig add_e = jz_plus ? ElectronConfig::down
                                       : ElectronConfig::up;
  const HoleConfig add_h = jz_plus ? HoleConfig::up : HoleConfig::down;
  ElectronConfig e = ElectronConfig::none;
  switch (s.electrons) {
    case ElectronConfig::none: e = add_e; break;
    case ElectronConfig::up:
      if (add_e == ElectronConfig::up) return -1;
      e = ElectronConfig::pair;
      break;
    case ElectronConfig::down:
      if (add_e == ElectronConfig::down) return -1;
      e = ElectronConfig::pair;
      break;
    case ElectronConfig::pair: return -1;
  }
  HoleConfig h = HoleConfig::none;
  switch (s.holes) {
    case HoleConfig::none: h = add_h; break;
    case HoleConfig::up:
      if (add_h == HoleConfig::up) return -1;
      h = HoleConfig::pair;
      break;
    case HoleConfig::down:
      if (add_h == HoleConfig::down) return -1;
      h = HoleConfig::pair;
      break;
    case HoleConfig::pair: return -1;
  }
  return state_index({e, h});
}

ChannelTable build_channel_table(const RateParams& rates) {
  ChannelTable table;
  const auto& states = enumerate_states();
  for (int i = 0; i < kStateCount; ++i) {
    const DotState& s = states[i];
    auto& channels = table[static_cast<std::size_t>(i)];

    // Radiative recombination along the selection rules.
    for (const auto& t : radiative_channels(i)) {
      ProcessChannel c;
      c.target = t.final;
      c.fixed_rate = radiative_rate(t, rates);
      c.radiative = &t;
      channels.push_back(c);
    }

    // Hole tunnelling, one channel per hole present. Removing a hole
    // from the singlet leaves either spin with equal weight.
    switch (s.holes) {
      case HoleConfig::none: break;
      case HoleConfig::up:
      case HoleConfig::down: {
        ProcessChannel c;
        c.target = state_index({s.electrons, HoleConfig::none});
        c.hole_coeff = 1.0;
        channels.push_back(c);
        break;
      }
      case HoleConfig::pair: {
        for (HoleConfig rem : {HoleConfig::up, HoleConfig::down}) {
          ProcessChannel c;
          c.target = state_index({s.electrons, rem});
          c.hole_coeff = 1.0;
          channels.push_back(c);
        }
        break;
      }
    }

    // Electron tunnelling, mirror image.
    switch (s.electrons) {
      case ElectronConfig::none: break;
      case ElectronConfig::up:
      case ElectronConfig::down: {
        ProcessChannel c;
        c.target = state_index({ElectronConfig::none, s.holes});
        c.electron_coeff = 1.0;
        channels.push_back(c);
        break;
      }
      case ElectronConfig::pair: {
        for (ElectronConfig rem : {ElectronConfig::up, ElectronConfig::down}) {
          ProcessChannel c;
          c.target = state_index({rem, s.holes});
          c.electron_coeff = 1.0;
          channels.push_back(c);
        }
        break;
      }
    }

    // Hole capture: each spin arrives at half the capture rate where the
    // shell can take it.
    for (bool up : {true, false}) {
      const int target = add_hole(s, up);
      if (target >= 0) {
        ProcessChannel c;
        c.target = target;
        c.capture_coeff = 0.5;
        channels.push_back(c);
      }
    }

    // Spin flips of lone carriers (bright <-> dark conversion included).
    if (s.electrons == ElectronConfig::up ||
        s.electrons == ElectronConfig::down) {
      ProcessChannel c;
      c.target = state_index(
          {s.electrons == ElectronConfig::up ? ElectronConfig::down
                                             : ElectronConfig::up,
           s.holes});
      c.fixed_rate = rates.electron_flip_rate();
      channels.push_back(c);
    }
    if (s.holes == HoleConfig::up || s.holes == HoleConfig::down) {
      ProcessChannel c;
      c.target = state_index(
          {s.electrons,
           s.holes == HoleConfig::up ? HoleConfig::down : HoleConfig::up});
      c.fixed_rate = rates.hole_flip_rate();
      channels.push_back(c);
    }

    // Continuous pair generation, split equally over the two bright
    // configurations (steady-state spectra only).
    if (rates.generation_rate > 0.0) {
      for (bool jz_plus : {true, false}) {
        const int target = add_bright_pair(s, jz_plus);
        if (target >= 0) {
          ProcessChannel c;
          c.target = target;
          c.fixed_rate = 0.5 * rates.generation_rate;
          channels.push_back(c);
        }
      }
    }
  }
  return table;
}

struct InstantRates {
  double gamma_h = 0.0;
  double gamma_e = 0.0;
  double gamma_cap = 0.0;
};

InstantRates rates_at(const RateParams& p, double bias_v) {
  return {p.hole_tunnel_rate(bias_v), p.electron_tunnel_rate(bias_v),
          p.hole_capture_rate(bias_v)};
}

// Worst-case total exit rate per state given upper bounds on the three
// bias-dependent rates.
std::array<double, kStateCount> exit_rate_bounds(const ChannelTable& table,
                                                 double gamma_h_max,
                                                 double gamma_e_max,
                                                 double gamma_cap_max) {
  std::array<double, kStateCount> bounds{};
  for (int i = 0; i < kStateCount; ++i) {
    double total = 0.0;
    for (const auto& c : table[static_cast<std::size_t>(i)]) {
      total += c.rate(gamma_h_max, gamma_e_max, gamma_cap_max);
    }
    bounds[static_cast<std::size_t>(i)] = total;
  }
  return bounds;
}

// Single-attempt injection map for one pulse: probability of each pair
// configuration and the resulting state (attempts the shell cannot take
// are discarded in place).
struct AttemptMap {
  double p_plus = 0.5;  // probability of attempting the J_z = +1 pair
  std::array<int, kStateCount> target_plus{};
  std::array<int, kStateCount> target_minus{};
};

AttemptMap make_attempt_map(const LaserPulse& pulse, double fidelity) {
  AttemptMap m;
  switch (pulse.polarization) {
    case PumpPolarization::right_circular: m.p_plus = fidelity; break;
    case PumpPolarization::left_circular: m.p_plus = 1.0 - fidelity; break;
    default: m.p_plus = 0.5; break;
  }
  const auto& states = enumerate_states();
  for (int i = 0; i < kStateCount; ++i) {
    const int plus = add_bright_pair(states[i], true);
    const int minus = add_bright_pair(states[i], false);
    m.target_plus[static_cast<std::size_t>(i)] = plus >= 0 ? plus : i;
    m.target_minus[static_cast<std::size_t>(i)] = minus >= 0 ? minus : i;
  }
  return m;
}

}  // namespace

void RateMatrix::apply(const std::array<double, kStateCount>& p,
                       std::array<double, kStateCount>& dp) const {
  for (int to = 0; to < kStateCount; ++to) {
    double acc = 0.0;
    for (int from = 0; from < kStateCount; ++from) {
      acc += entry(to, from) * p[static_cast<std::size_t>(from)];
    }
    dp[static_cast<std::size_t>(to)] = acc;
  }
}

RateMatrix build_generator(double bias_v, const RateParams& rates) {
  const ChannelTable table = build_channel_table(rates);
  const InstantRates r = rates_at(rates, bias_v);
  RateMatrix q;
  for (int from = 0; from < kStateCount; ++from) {
    double exit = 0.0;
    for (const auto& c : table[static_cast<std::size_t>(from)]) {
      const double rate = c.rate(r.gamma_h, r.gamma_e, r.gamma_cap);
      q.entry(c.target, from) += rate;
      exit += rate;
    }
    q.entry(from, from) = -exit;
  }
  return q;
}

StateVector delta_distribution(int state) {
  StateVector p{};
  p[static_cast<std::size_t>(state)] = 1.0;
  return p;
}

int inject_excitation(int state, const LaserPulse& pulse, double fidelity,
                      RngStream& rng) {
  const AttemptMap m = make_attempt_map(pulse, fidelity);
  const int attempts = rng.poisson(pulse.mean_injected_pairs);
  int s = state;
  for (int k = 0; k < attempts; ++k) {
    const bool plus = rng.uniform() < m.p_plus;
    s = plus ? m.target_plus[static_cast<std::size_t>(s)]
             : m.target_minus[static_cast<std::size_t>(s)];
  }
  return s;
}

StateVector inject_excitation(const StateVector& p, const LaserPulse& pulse,
                              double fidelity) {
  const AttemptMap m = make_attempt_map(pulse, fidelity);
  auto attempt = [&m](const StateVector& in) {
    StateVector out{};
    for (int i = 0; i < kStateCount; ++i) {
      const double w = in[static_cast<std::size_t>(i)];
      if (w == 0.0) continue;
      out[static_cast<std::size_t>(m.target_plus[static_cast<std::size_t>(i)])] +=
          m.p_plus * w;
      out[static_cast<std::size_t>(
          m.target_minus[static_cast<std::size_t>(i)])] += (1.0 - m.p_plus) * w;
    }
    return out;
  };
  // Poisson mixture over attempt counts, truncated once the tail weight
  // is negligible.
  const double mean = pulse.mean_injected_pairs;
  if (mean <= 0.0) return p;
  StateVector result{};
  StateVector current = p;
  double weight = std::exp(-mean);
  double cumulative = weight;
  for (int i = 0; i < kStateCount; ++i) {
    result[static_cast<std::size_t>(i)] =
        weight * current[static_cast<std::size_t>(i)];
  }
  for (int k = 1; k <= 80 && cumulative < 1.0 - 1e-15; ++k) {
    current = attempt(current);
    weight *= mean / k;
    cumulative += weight;
    for (int i = 0; i < kStateCount; ++i) {
      result[static_cast<std::size_t>(i)] +=
          weight * current[static_cast<std::size_t>(i)];
    }
  }
  // Fold the truncated tail into the last propagated vector so the map
  // stays stochastic to machine precision.
  if (cumulative < 1.0) {
    const double tail = 1.0 - cumulative;
    for (int i = 0; i < kStateCount; ++i) {
      result[static_cast<std::size_t>(i)] +=
          tail * current[static_cast<std::size_t>(i)];
    }
  }
  return result;
}

double Trajectory::integrated_flux(double t0_ns, double t1_ns, int species,
                                   int helicity) const {
  auto channel_sum = [&](std::size_t i) {
    double acc = 0.0;
    for (int s = 0; s < kRadiativeSpeciesCount; ++s) {
      if (species >= 0 && s != species) continue;
      for (int h = 0; h < 2; ++h) {
        if (helicity >= 0 && h != helicity) continue;
        acc += flux[i][static_cast<std::size_t>(2 * s + h)];
      }
    }
    return acc;
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < time_ns.size(); ++i) {
    const double a = std::max(time_ns[i], t0_ns);
    const double b = std::min(time_ns[i + 1], t1_ns);
    if (b <= a) continue;
    const double dt_full = time_ns[i + 1] - time_ns[i];
    if (dt_full <= 0.0) continue;
    // Linear interpolation of the flux onto the clipped interval.
    const double f0 = channel_sum(i);
    const double f1 = channel_sum(i + 1);
    const double wa = (a - time_ns[i]) / dt_full;
    const double wb = (b - time_ns[i]) / dt_full;
    const double fa = f0 + (f1 - f0) * wa;
    const double fb = f0 + (f1 - f0) * wb;
    total += 0.5 * (fa + fb) * (b - a);
  }
  return total;
}

std::vector<double> Trajectory::binned_flux(double bin_width_ns, double t0_ns,
                                            double t1_ns, int species,
                                            int helicity) const {
  const int bins = static_cast<int>(std::ceil((t1_ns - t0_ns) / bin_width_ns -
                                              1e-9));
  std::vector<double> out(static_cast<std::size_t>(std::max(bins, 0)), 0.0);
  for (int b = 0; b < bins; ++b) {
    const double lo = t0_ns + b * bin_width_ns;
    const double hi = std::min(t0_ns + (b + 1) * bin_width_ns, t1_ns);
    out[static_cast<std::size_t>(b)] =
        integrated_flux(lo, hi, species, helicity);
  }
  return out;
}

namespace {

std::string describe_rate_limits(const ChannelTable& table,
                                 const std::array<double, kStateCount>& bounds,
                                 double gamma_h_max, double gamma_e_max,
                                 double gamma_cap_max) {
  int worst = 0;
  for (int i = 1; i < kStateCount; ++i) {
    if (bounds[static_cast<std::size_t>(i)] >
        bounds[static_cast<std::size_t>(worst)]) {
      worst = i;
    }
  }
  double best_rate = 0.0;
  std::string what = "radiative decay";
  for (const auto& c : table[static_cast<std::size_t>(worst)]) {
    const double r = c.rate(gamma_h_max, gamma_e_max, gamma_cap_max);
    if (r <= best_rate) continue;
    best_rate = r;
    if (c.hole_coeff > 0.0) what = "hole tunnelling";
    else if (c.electron_coeff > 0.0) what = "electron tunnelling";
    else if (c.capture_coeff > 0.0) what = "hole capture";
    else if (c.radiative != nullptr) what = "radiative decay";
    else what = "spin flip / generation";
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "state %s, total exit rate %.6g /ns, dominated by %s at "
                "%.6g /ns",
                state_name(worst).c_str(),
                bounds[static_cast<std::size_t>(worst)], what.c_str(),
                best_rate);
  return buf;
}

}  // namespace

Trajectory evolve_master(const StateVector& p0,
                         const ExperimentProtocol& protocol, double dt_ns,
                         int record_stride) {
  if (!(dt_ns > 0.0)) {
    throw std::invalid_argument("evolve_master: dt must be > 0");
  }
  if (record_stride < 1) record_stride = 1;
  const double period = protocol.run.period_ns;
  const ChannelTable table = build_channel_table(protocol.rates);

  {
    const BiasRange vr = bias_range(protocol.bias, 0.0, period);
    const auto bounds = exit_rate_bounds(
        table, protocol.rates.hole_tunnel_rate(vr.low),
        protocol.rates.electron_tunnel_rate(vr.low),
        protocol.rates.hole_capture_rate(vr.high));
    const double max_rate = *std::max_element(bounds.begin(), bounds.end());
    if (dt_ns * max_rate > 1.0) {
      throw std::invalid_argument(
          "evolve_master: stability guard tripped, dt * max rate = " +
          std::to_string(dt_ns * max_rate) + " > 1 (" +
          describe_rate_limits(table, bounds,
                               protocol.rates.hole_tunnel_rate(vr.low),
                               protocol.rates.electron_tunnel_rate(vr.low),
                               protocol.rates.hole_capture_rate(vr.high)) +
          ")");
    }
  }

  // Laser pulses act as instantaneous maps between integration steps.
  std::vector<double> pulse_times;
  for (const auto& lp : protocol.laser_pulses) {
    pulse_times.push_back(lp.center_ns);
  }

  Trajectory traj;
  const std::size_t expected =
      static_cast<std::size_t>(period / (dt_ns * record_stride)) + 8;
  traj.time_ns.reserve(expected);
  traj.occupation.reserve(expected);
  traj.flux.reserve(expected);

  StateVector p = p0;

  auto flux_of = [&table](const StateVector& state) {
    std::array<double, kRadiativeSpeciesCount * 2> f{};
    for (int i = 0; i < kStateCount; ++i) {
      const double w = state[static_cast<std::size_t>(i)];
      if (w == 0.0) continue;
      for (const auto& c : table[static_cast<std::size_t>(i)]) {
        if (c.radiative == nullptr) continue;
        f[static_cast<std::size_t>(
            2 * static_cast<int>(c.radiative->species) +
            static_cast<int>(c.radiative->helicity))] += c.fixed_rate * w;
      }
    }
    return f;
  };

  auto record = [&](double t) {
    traj.time_ns.push_back(t);
    traj.occupation.push_back(p);
    traj.flux.push_back(flux_of(p));
  };

  auto derivative = [&](const StateVector& state, double t, StateVector& dp) {
    const InstantRates r = rates_at(protocol.rates, bias_at(protocol.bias, t));
    dp.fill(0.0);
    for (int from = 0; from < kStateCount; ++from) {
      const double w = state[static_cast<std::size_t>(from)];
      if (w == 0.0) continue;
      double exit = 0.0;
      for (const auto& c : table[static_cast<std::size_t>(from)]) {
        const double rate = c.rate(r.gamma_h, r.gamma_e, r.gamma_cap);
        dp[static_cast<std::size_t>(c.target)] += rate * w;
        exit += rate;
      }
      dp[static_cast<std::size_t>(from)] -= exit * w;
    }
  };

  StateVector k1{}, k2{}, k3{}, k4{}, tmp{};
  auto rk4_step = [&](double t, double h) {
    derivative(p, t, k1);
    for (int i = 0; i < kStateCount; ++i)
      tmp[static_cast<std::size_t>(i)] =
          p[static_cast<std::size_t>(i)] +
          0.5 * h * k1[static_cast<std::size_t>(i)];
    derivative(tmp, t + 0.5 * h, k2);
    for (int i = 0; i < kStateCount; ++i)
      tmp[static_cast<std::size_t>(i)] =
          p[static_cast<std::size_t>(i)] +
          0.5 * h * k2[static_cast<std::size_t>(i)];
    derivative(tmp, t + 0.5 * h, k3);
    for (int i = 0; i < kStateCount; ++i)
      tmp[static_cast<std::size_t>(i)] =
          p[static_cast<std::size_t>(i)] + h * k3[static_cast<std::size_t>(i)];
    derivative(tmp, t + h, k4);
    for (int i = 0; i < kStateCount; ++i) {
      p[static_cast<std::size_t>(i)] +=
          h / 6.0 *
          (k1[static_cast<std::size_t>(i)] +
           2.0 * k2[static_cast<std::size_t>(i)] +
           2.0 * k3[static_cast<std::size_t>(i)] +
           k4[static_cast<std::size_t>(i)]);
    }
  };

  record(0.0);
  double t = 0.0;
  std::size_t next_pulse = 0;
  long step_count = 0;
  // Pulses exactly at t = 0 apply before any evolution.
  while (next_pulse < pulse_times.size() && pulse_times[next_pulse] <= 0.0) {
    p = inject_excitation(p, protocol.laser_pulses[next_pulse],
                          protocol.rates.write_fidelity);
    ++next_pulse;
  }
  while (t < period - 1e-12) {
    double t_stop = period;
    if (next_pulse < pulse_times.size()) {
      t_stop = std::min(t_stop, pulse_times[next_pulse]);
    }
    const double h = std::min(dt_ns, t_stop - t);
    if (h > 1e-15) {
      rk4_step(t, h);
      t += h;
      ++step_count;
      if (step_count % record_stride == 0 || t >= t_stop - 1e-12) record(t);
    } else {
      t = t_stop;
    }
    if (next_pulse < pulse_times.size() && t >= pulse_times[next_pulse] - 1e-12) {
      p = inject_excitation(p, protocol.laser_pulses[next_pulse],
                            protocol.rates.write_fidelity);
      ++next_pulse;
      record(t);
    }
  }
  if (traj.time_ns.back() < period) record(period);
  return traj;
}

SteadyState steady_state(double bias_v, const RateParams& rates) {
  const ChannelTable table = build_channel_table(rates);
  const InstantRates r = rates_at(rates, bias_v);

  // Restrict to the class reachable from the vacuum; with generation off
  // parts of the state space are simply never populated.
  std::array<bool, kStateCount> reachable{};
  reachable[kEmpty] = true;
  std::vector<int> frontier{kEmpty};
  while (!frontier.empty()) {
    const int s = frontier.back();
    frontier.pop_back();
    for (const auto& c : table[static_cast<std::size_t>(s)]) {
      if (c.rate(r.gamma_h, r.gamma_e, r.gamma_cap) <= 0.0) continue;
      if (!reachable[static_cast<std::size_t>(c.target)]) {
        reachable[static_cast<std::size_t>(c.target)] = true;
        frontier.push_back(c.target);
      }
    }
  }
  std::vector<int> index_of;  // dense index -> state
  for (int i = 0; i < kStateCount; ++i) {
    if (reachable[static_cast<std::size_t>(i)]) index_of.push_back(i);
  }
  const int n = static_cast<int>(index_of.size());
  std::array<int, kStateCount> dense{};
  dense.fill(-1);
  for (int d = 0; d < n; ++d) dense[static_cast<std::size_t>(index_of[d])] = d;

  const RateMatrix q = build_generator(bias_v, rates);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int to = 0; to < kStateCount; ++to) {
    for (int from = 0; from < kStateCount; ++from) {
      if (dense[static_cast<std::size_t>(to)] < 0 ||
          dense[static_cast<std::size_t>(from)] < 0) {
        continue;
      }
      a(dense[static_cast<std::size_t>(to)],
        dense[static_cast<std::size_t>(from)]) = q.entry(to, from);
    }
  }
  // Replace the first balance equation by the normalisation.
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int col = 0; col < n; ++col) a(0, col) = 1.0;
  b(0) = 1.0;

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    throw std::runtime_error(
        "steady_state: generator solve is singular or ill-conditioned "
        "(reciprocal condition estimate " +
        std::to_string(rcond) + ")");
  }
  const Eigen::VectorXd x = lu.solve(b);

  SteadyState out;
  out.condition_estimate = rcond;
  for (int d = 0; d < n; ++d) {
    out.occupation[static_cast<std::size_t>(index_of[d])] =
        std::max(x(d), 0.0);
  }
  // Residual against the full generator.
  StateVector qp{};
  q.apply(out.occupation, qp);
  for (double v : qp) out.residual_inf = std::max(out.residual_inf, std::abs(v));

  for (int i = 0; i < kStateCount; ++i) {
    const double w = out.occupation[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    for (const auto& c : table[static_cast<std::size_t>(i)]) {
      if (c.radiative == nullptr) continue;
      out.flux[static_cast<std::size_t>(
          2 * static_cast<int>(c.radiative->species) +
          static_cast<int>(c.radiative->helicity))] += c.fixed_rate * w;
    }
  }
  return out;
}

struct ShotSampler::Channels {
  ChannelTable table;
};

ShotSampler::ShotSampler(const ExperimentProtocol& protocol)
    : protocol_(protocol),
      channels_(std::make_shared<Channels>(
          Channels{build_channel_table(protocol.rates)})) {
  const ChannelTable& table = channels_->table;

  // Segment boundaries at every a.c. pulse edge, with extra cuts along
  // the exponential rise and fall, keep the per-segment bias range (and
  // therefore the thinning bound) tight; a single segment spanning a
  // whole edge would pin every bound at the worst end of the swing.
  std::vector<double> cuts{0.0, protocol.run.period_ns};
  auto add_cut = [&cuts, &protocol](double t) {
    if (t > 0.0 && t < protocol.run.period_ns) cuts.push_back(t);
  };
  static constexpr double kEdgeLadder[] = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0,
                                           4.0, 5.0, 7.0, 10.0, 14.0,
                                           20.0, 28.0, 40.0};
  for (const auto& ap : protocol.bias.pulses) {
    add_cut(ap.start_ns);
    add_cut(ap.end_ns());
    for (double k : kEdgeLadder) {
      const double offset = k * ap.rise_time_ns;
      if (offset < ap.duration_ns) add_cut(ap.start_ns + offset);
      add_cut(ap.end_ns() + offset);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Segment seg;
    seg.t0 = cuts[i];
    seg.t1 = cuts[i + 1];
    const BiasRange vr = bias_range(protocol.bias, seg.t0, seg.t1);
    seg.rate_bound = exit_rate_bounds(
        table, protocol.rates.hole_tunnel_rate(vr.low),
        protocol.rates.electron_tunnel_rate(vr.low),
        protocol.rates.hole_capture_rate(vr.high));
    max_exit_rate_ = std::max(
        max_exit_rate_,
        *std::max_element(seg.rate_bound.begin(), seg.rate_bound.end()));
    segments_.push_back(seg);
  }

  bool pump_present = false;
  for (const auto& lp : protocol.laser_pulses) {
    if (lp.mean_injected_pairs > 0.0) pump_present = true;
  }
  if (pump_present && max_exit_rate_ <= 0.0) {
    throw std::runtime_error(
        "simulate_shot: degenerate protocol, all transition rates are zero "
        "but optical pulses are pending");
  }
}

int ShotSampler::run_cycle(int state, std::uint64_t cycle_index,
                           double time_offset_ns, RngStream& rng,
                           std::vector<PhotonEvent>& out) const {
  const auto& rates = protocol_.rates;
  const double period = protocol_.run.period_ns;

  // Per-cycle injection schedule: pulse centres smeared uniformly over
  // the optical pulse width.
  struct Injection {
    double time;
    const LaserPulse* pulse;
  };
  std::vector<Injection> injections;
  injections.reserve(protocol_.laser_pulses.size());
  for (const auto& lp : protocol_.laser_pulses) {
    const double t = lp.center_ns + (rng.uniform() - 0.5) * lp.fwhm_ns;
    injections.push_back({std::clamp(t, 0.0, period), &lp});
  }
  std::sort(injections.begin(), injections.end(),
            [](const Injection& a, const Injection& b) {
              return a.time < b.time;
            });

  double t = 0.0;
  std::size_t seg = 0;
  std::size_t next_inj = 0;
  int s = state;

  while (t < period) {
    while (seg + 1 < segments_.size() && t >= segments_[seg].t1) ++seg;
    double boundary = segments_[seg].t1;
    bool injection_boundary = false;
    if (next_inj < injections.size() &&
        injections[next_inj].time <= boundary) {
      boundary = injections[next_inj].time;
      injection_boundary = true;
    }

    const double bound = segments_[seg].rate_bound[static_cast<std::size_t>(s)];
    double t_next = boundary;
    bool jump = false;
    if (bound > 0.0) {
      const double candidate = t + rng.exponential(bound);
      if (candidate < boundary) {
        t_next = candidate;
        jump = true;
      }
    }

    if (!jump) {
      t = t_next;
      if (injection_boundary) {
        const LaserPulse& lp = *injections[next_inj].pulse;
        s = inject_excitation(s, lp, rates.write_fidelity, rng);
        ++next_inj;
      }
      continue;
    }

    t = t_next;
    const double bias = bias_at(protocol_.bias, t);
    const InstantRates inst = rates_at(rates, bias);
    // Thinning: u is uniform on [0, bound); the candidate fires iff u
    // lands below the actual total rate, and then u doubles as the
    // channel selector.
    const double u = rng.uniform() * bound;
    double cumulative = 0.0;
    const ProcessChannel* chosen = nullptr;
    for (const auto& c : channels_->table[static_cast<std::size_t>(s)]) {
      cumulative += c.rate(inst.gamma_h, inst.gamma_e, inst.gamma_cap);
      if (u < cumulative) {
        chosen = &c;
        break;
      }
    }
    if (chosen == nullptr) continue;  // rejected candidate

    if (chosen->radiative != nullptr) {
      PhotonEvent ev;
      ev.time_ns = time_offset_ns + t;
      ev.cycle = cycle_index;
      ev.species = chosen->radiative->species;
      ev.helicity = chosen->radiative->helicity;
      ev.energy_uev =
          transition_energy(*chosen->radiative, bias, protocol_.energies);
      out.push_back(ev);
    }
    s = chosen->target;
  }
  return s;
}

std::vector<PhotonEvent> simulate_shot(const ExperimentProtocol& protocol,
                                       std::uint64_t cycle_seed) {
  const ShotSampler sampler(protocol);
  RngStream rng(protocol.run.seed, cycle_seed);
  std::vector<PhotonEvent> events;
  sampler.run_cycle(kEmpty, cycle_seed, 0.0, rng, events);
  return events;
}

namespace {

ShotResult collect_cycles(const ExperimentProtocol& protocol,
                          std::uint64_t n_cycles, std::uint64_t seed,
                          int jobs) {
  const ShotSampler sampler(protocol);
  const double period = protocol.run.period_ns;

  // Cycles are grouped into contiguous blocks, one event buffer each;
  // concatenating the blocks in order reproduces the serial stream
  // exactly since event times never cross cycle boundaries.
  constexpr std::uint64_t kBlock = 256;
  const std::uint64_t n_blocks = (n_cycles + kBlock - 1) / kBlock;
  std::vector<std::vector<PhotonEvent>> per_block(n_blocks);

  auto run_block = [&](std::uint64_t b) {
    auto& buf = per_block[b];
    const std::uint64_t end = std::min(n_cycles, (b + 1) * kBlock);
    for (std::uint64_t i = b * kBlock; i < end; ++i) {
      RngStream rng(seed, i);
      sampler.run_cycle(kEmpty, i, static_cast<double>(i) * period, rng, buf);
    }
  };

#ifdef _OPENMP
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long b = 0; b < static_cast<long>(n_blocks); ++b) {
    run_block(static_cast<std::uint64_t>(b));
  }
#else
  (void)jobs;
  for (std::uint64_t b = 0; b < n_blocks; ++b) run_block(b);
#endif

  ShotResult result;
  result.summary.cycles = n_cycles;
  std::size_t total = 0;
  for (const auto& v : per_block) total += v.size();
  result.events.reserve(total);
  for (const auto& v : per_block) {
    result.events.insert(result.events.end(), v.begin(), v.end());
  }
  result.summary.total_events = result.events.size();
  for (const auto& ev : result.events) {
    result.summary.events_by_channel[static_cast<std::size_t>(
        2 * static_cast<int>(ev.species) + static_cast<int>(ev.helicity))]++;
  }
  return result;
}

}  // namespace

ShotResult run_shots(const ExperimentProtocol& protocol,
                     std::uint64_t n_cycles, std::uint64_t seed, int jobs) {
  return collect_cycles(protocol, n_cycles, seed, jobs);
}

ShotResult run_shots_serial(const ExperimentProtocol& protocol,
                            std::uint64_t n_cycles, std::uint64_t seed) {
  const ShotSampler sampler(protocol);
  const double period = protocol.run.period_ns;
  ShotResult result;
  result.summary.cycles = n_cycles;
  for (std::uint64_t i = 0; i < n_cycles; ++i) {
    RngStream rng(seed, i);
    sampler.run_cycle(kEmpty, i, static_cast<double>(i) * period, rng,
                      result.events);
  }
  result.summary.total_events = result.events.size();
  for (const auto& ev : result.events) {
    result.summary.events_by_channel[static_cast<std::size_t>(
        2 * static_cast<int>(ev.species) + static_cast<int>(ev.helicity))]++;
  }
  return result;
}

}  // namespace qdmem
