#ifndef QDMEM_PULSES_HPP
#define QDMEM_PULSES_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdmem/levels.hpp"
#include "qdmem/optics.hpp"
#include "qdmem/rates.hpp"

// The timed experiment protocol: optical write pulses and the bias
// waveform (d.c. level plus a.c. read pulses with exponential edges),
// together with everything needed to run one memory cycle. Protocols are
// parsed from a line-oriented "key = value" config with [section] headers
// and are immutable once built.

namespace qdmem {

enum class PumpPolarization : std::uint8_t {
  right_circular = 0,  // sigma+
  left_circular,       // sigma-
  horizontal,
  vertical,
  unpolarized
};

std::string pump_polarization_name(PumpPolarization p);

struct LaserPulse {
  double center_ns = 0.0;
  double fwhm_ns = 0.1;
  PumpPolarization polarization = PumpPolarization::right_circular;
  double mean_injected_pairs = 0.3;  // Poisson mean per pulse
};

struct AcPulse {
  double start_ns = 0.0;
  double duration_ns = 0.0;
  double amplitude_v = 0.0;
  double rise_time_ns = 1.0;

  double end_ns() const { return start_ns + duration_ns; }

  // Edge profile in [0, 1]: rises as 1 - exp(-(t-start)/tau) during the
  // pulse, falls from the attained level as exp(-(t-end)/tau) after it.
  double edge(double t_ns) const;
};

struct BiasWaveform {
  double dc_bias_v = -0.05;
  std::vector<AcPulse> pulses;  // kept sorted by start time
};

// Instantaneous bias; continuous and piecewise smooth in t.
double bias_at(const BiasWaveform& w, double t_ns);

// Smallest and largest bias the waveform can reach on [t0, t1]. Exact on
// intervals not containing pulse starts/ends; conservative otherwise.
struct BiasRange {
  double low = 0.0;
  double high = 0.0;
};
BiasRange bias_range(const BiasWaveform& w, double t0_ns, double t1_ns);

struct RunSettings {
  double period_ns = 1000.0;
  std::uint64_t cycles = 100000;
  std::uint64_t seed = 1;
  std::string engine = "kmc";  // kmc | master | both
  double master_dt_ns = 0.01;
  double bin_width_ns = 1.0;
  // Read-window bounds for the memory-degree analysis; negative start
  // means "first a.c. pulse start", negative end means "start + 10 trion
  // lifetimes".
  double read_window_start_ns = -1.0;
  double read_window_end_ns = -1.0;
};

struct AnalyzerSettings {
  double qwp_angle_deg = 45.0;
  double hwp_plus_deg = 45.0;
  double hwp_minus_deg = 0.0;
  double polarizer_angle_deg = 0.0;
  double retardance_error_rad = 0.0;
};

struct ExperimentProtocol {
  std::vector<LaserPulse> laser_pulses;
  BiasWaveform bias;
  EnergyTable energies;
  RateParams rates;
  AnalyzerSettings analyzer;
  DetectorModel detector;
  RunSettings run;

  AnalyzerPair analyzer_pair() const {
    return AnalyzerPair::from_settings(
        analyzer.qwp_angle_deg, analyzer.hwp_plus_deg, analyzer.hwp_minus_deg,
        analyzer.polarizer_angle_deg, analyzer.retardance_error_rad);
  }

  // Resolved read window (see RunSettings).
  double read_window_start() const;
  double read_window_end() const;

  void validate() const;  // throws ConfigError on invariant violations
};

// Parse / serialize errors carry the offending line when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string message, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " +
                                          message
                                    : message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

// Parses the documented config format. Unknown keys and invariant
// violations are rejected with the offending line or key named.
ExperimentProtocol parse_protocol(const std::string& text);
ExperimentProtocol load_protocol_file(const std::string& path);

// Canonical text form; parse(serialize(p)) reproduces p exactly.
std::string serialize_protocol(const ExperimentProtocol& p);

// FNV-1a hash of the canonical form, as a 16-digit hex string.
std::string protocol_hash(const ExperimentProtocol& p);

inline constexpr int kConfigSchemaVersion = 1;

}  // namespace qdmem

#endif  // QDMEM_PULSES_HPP
