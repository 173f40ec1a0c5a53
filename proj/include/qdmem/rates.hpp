#ifndef QDMEM_RATES_HPP
#define QDMEM_RATES_HPP

#include <algorithm>
#include <cmath>

// Phenomenological bias-dependent rate models. The diode gives only two
// regimes (hole tunnelling dominant at low bias, hole capture dominant at
// high bias); the curves interpolating between them are an exponential
// tunnelling law with a saturation cap and a logistic capture onset,
// calibrated so that the negative / neutral / positive charge-state
// windows sit at 1.10, 1.25 and 1.40 V.

namespace qdmem {

// All rates in 1/ns, times in ns, biases in volts.
struct RateParams {
  // Hole tunnel-out: gamma_h0 * exp((v_h_threshold - V) / v_h_scale),
  // saturating at gamma_h_max once the barrier is pulled flat.
  double gamma_h0 = 1.0;
  double v_h_threshold = 1.25;
  double v_h_scale = 0.075;
  double gamma_h_max = 25.0;

  // Electron tunnel-out, same law; off by default (blocking barrier).
  double gamma_e0 = 0.0;
  double v_e_threshold = 0.0;
  double v_e_scale = 0.1;
  double gamma_e_max = 25.0;

  // Hole capture from the contact: gamma_c0 * logistic((V - v_c_threshold)
  // / v_c_scale).
  double gamma_c0 = 10.0;
  double v_c_threshold = 1.38;
  double v_c_scale = 0.045;

  // Radiative lifetimes per species.
  double tau_x_ns = 1.0;
  double tau_trion_plus_ns = 1.0;
  double tau_trion_minus_ns = 1.0;
  double tau_biexciton_ns = 1.0;

  // Longitudinal spin-flip times of lone carriers.
  double t1_electron_ns = 1.0e6;
  double t1_hole_ns = 1.0e6;

  // Probability that a circularly polarised pump creates the
  // helicity-matched bright exciton (0.5 = full scrambling).
  double write_fidelity = 0.9;

  // Continuous pair generation for steady-state spectra; zero in pulsed
  // operation.
  double generation_rate = 0.0;

  void validate() const;  // throws std::invalid_argument

  double hole_tunnel_rate(double bias_v) const {
    return capped_exponential(gamma_h0, v_h_threshold, v_h_scale,
                              gamma_h_max, bias_v);
  }

  double electron_tunnel_rate(double bias_v) const {
    return capped_exponential(gamma_e0, v_e_threshold, v_e_scale,
                              gamma_e_max, bias_v);
  }

  double hole_capture_rate(double bias_v) const {
    const double x = (bias_v - v_c_threshold) / v_c_scale;
    return gamma_c0 / (1.0 + std::exp(-x));
  }

  double electron_flip_rate() const { return 1.0 / t1_electron_ns; }
  double hole_flip_rate() const { return 1.0 / t1_hole_ns; }

 private:
  static double capped_exponential(double amplitude, double threshold,
                                   double scale, double cap, double bias_v) {
    if (amplitude <= 0.0) return 0.0;
    const double exponent = (threshold - bias_v) / scale;
    // Evaluate in the log domain so far-below-threshold biases saturate
    // instead of overflowing.
    const double log_cap = std::log(cap / amplitude);
    if (exponent >= log_cap) return cap;
    return amplitude * std::exp(exponent);
  }
};

}  // namespace qdmem

#endif  // QDMEM_RATES_HPP
