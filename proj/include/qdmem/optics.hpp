#ifndef QDMEM_OPTICS_HPP
#define QDMEM_OPTICS_HPP

#include <complex>
#include <vector>

#include "qdmem/levels.hpp"
#include "qdmem/rng.hpp"

// Jones-calculus model of the polarisation analyser (quarter-waveplate,
// half-waveplate, fixed linear polariser) and of the single-photon
// detector (efficiency, Gaussian timing jitter, optional dead time).

namespace qdmem {

using Complex = std::complex<double>;

// Two-component field in the {H, V} linear basis.
struct JonesVector {
  Complex h{0.0, 0.0};
  Complex v{0.0, 0.0};

  double norm2() const { return std::norm(h) + std::norm(v); }
};

struct JonesMatrix {
  // Row-major 2x2.
  Complex hh{1.0, 0.0}, hv{0.0, 0.0};
  Complex vh{0.0, 0.0}, vv{1.0, 0.0};

  JonesVector apply(const JonesVector& in) const {
    return {hh * in.h + hv * in.v, vh * in.h + vv * in.v};
  }

  JonesMatrix times(const JonesMatrix& rhs) const {
    return {hh * rhs.hh + hv * rhs.vh, hh * rhs.hv + hv * rhs.vv,
            vh * rhs.hh + vv * rhs.vh, vh * rhs.hv + vv * rhs.vv};
  }
};

// Standard basis states.
JonesVector jones_horizontal();
JonesVector jones_vertical();
JonesVector jones_diagonal();       // +45 deg linear
JonesVector jones_circular(Helicity h);

// Retarder with the given retardance (rad) and fast-axis angle (deg):
// rotation(-theta) * diag(1, e^{i delta}) * rotation(theta).
JonesMatrix waveplate(double retardance_rad, double angle_deg);

inline JonesMatrix quarter_waveplate(double angle_deg) {
  return waveplate(1.5707963267948966, angle_deg);
}
inline JonesMatrix half_waveplate(double angle_deg) {
  return waveplate(3.141592653589793, angle_deg);
}

// One analyser configuration: QWP, HWP, then a fixed linear polariser.
// The two measurement channels of a run differ only in the HWP angle.
struct AnalyzerChain {
  double qwp_angle_deg = 45.0;
  double hwp_angle_deg = 45.0;
  double polarizer_angle_deg = 0.0;
  // Deviation of both retardances from nominal, to emulate imperfect
  // broadband plates. Zero = ideal.
  double retardance_error_rad = 0.0;

  void validate() const;  // throws std::invalid_argument
};

// Intensity fraction of the input state transmitted by the chain's
// polariser, in [0, 1].
double transmitted_fraction(const JonesVector& input,
                            const AnalyzerChain& chain);
double transmitted_fraction(Helicity h, const AnalyzerChain& chain);

// The two cross-polarised channels used throughout: with the QWP at +45
// and the polariser along H, the HWP-at-45 chain passes sigma+ fully and
// the HWP-at-0 chain passes sigma-.
struct AnalyzerPair {
  AnalyzerChain sigma_plus_channel;
  AnalyzerChain sigma_minus_channel;

  static AnalyzerPair from_settings(double qwp_angle_deg,
                                    double hwp_plus_deg, double hwp_minus_deg,
                                    double polarizer_angle_deg,
                                    double retardance_error_rad);
};

struct DetectorModel {
  double jitter_sigma_ns = 0.35;
  double efficiency = 1.0;
  double dead_time_ns = 0.0;

  void validate() const;  // throws std::invalid_argument
};

enum class Channel : int { sigma_plus = 0, sigma_minus = 1 };

struct PhotonEvent;  // engine.hpp

struct DetectionRecord {
  double time_ns = 0.0;
  int cycle = 0;
  Channel channel = Channel::sigma_plus;
  RadiativeSpecies species = RadiativeSpecies::neutral_exciton;
};

// Streams time-sorted emission events through the analyser pair and the
// detector: each event lands in a channel with probability
// efficiency * transmitted_fraction, then gets Gaussian time jitter.
std::vector<DetectionRecord> apply_detector(
    const std::vector<PhotonEvent>& events, const AnalyzerPair& analyzers,
    const DetectorModel& model, RngStream& rng);

}  // namespace qdmem

#endif  // QDMEM_OPTICS_HPP
