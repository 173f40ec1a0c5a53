#include "qdmem/optics.hpp"

#include <cmath>
#include <stdexcept>

#include "qdmem/engine.hpp"

namespace qdmem {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kSqrtHalf = 0.70710678118654752440084436210485;
}  // namespace

JonesVector jones_horizontal() { return {Complex{1.0, 0.0}, Complex{0.0, 0.0}}; }
JonesVector jones_vertical() { return {Complex{0.0, 0.0}, Complex{1.0, 0.0}}; }
JonesVector jones_diagonal() {
  return {Complex{kSqrtHalf, 0.0}, Complex{kSqrtHalf, 0.0}};
}

JonesVector jones_circular(Helicity h) {
  // sigma+ (R) = (H - iV)/sqrt(2), sigma- (L) = (H + iV)/sqrt(2).
  const double sign = h == Helicity::plus ? -1.0 : +1.0;
  return {Complex{kSqrtHalf, 0.0}, Complex{0.0, sign * kSqrtHalf}};
}

JonesMatrix waveplate(double retardance_rad, double angle_deg) {
  const double theta = angle_deg * kPi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const Complex retard = std::exp(Complex{0.0, retardance_rad});
  // rotation(-theta) * diag(1, e^{i delta}) * rotation(theta)
  return {c * c + retard * s * s, c * s - retard * c * s,
          c * s - retard * c * s, s * s + retard * c * c};
}

void AnalyzerChain::validate() const {
  auto in_range = [](double a) { return a >= 0.0 && a < 360.0; };
  if (!in_range(qwp_angle_deg) || !in_range(hwp_angle_deg) ||
      !in_range(polarizer_angle_deg)) {
    throw std::invalid_argument(
        "analyzer: waveplate/polarizer angles must lie in [0, 360)");
  }
}

double transmitted_fraction(const JonesVector& input,
                            const AnalyzerChain& chain) {
  const JonesMatrix qwp =
      waveplate(kPi / 2.0 + chain.retardance_error_rad, chain.qwp_angle_deg);
  const JonesMatrix hwp =
      waveplate(kPi + chain.retardance_error_rad, chain.hwp_angle_deg);
  const JonesVector after = hwp.apply(qwp.apply(input));
  // Projection onto the polariser's transmission axis.
  const double phi = chain.polarizer_angle_deg * kPi / 180.0;
  const Complex amplitude =
      std::cos(phi) * after.h + std::sin(phi) * after.v;
  return std::norm(amplitude);
}

double transmitted_fraction(Helicity h, const AnalyzerChain& chain) {
  return transmitted_fraction(jones_circular(h), chain);
}

AnalyzerPair AnalyzerPair::from_settings(double qwp_angle_deg,
                                         double hwp_plus_deg,
                                         double hwp_minus_deg,
                                         double polarizer_angle_deg,
                                         double retardance_error_rad) {
  AnalyzerPair pair;
  pair.sigma_plus_channel = {qwp_angle_deg, hwp_plus_deg, polarizer_angle_deg,
                             retardance_error_rad};
  pair.sigma_minus_channel = {qwp_angle_deg, hwp_minus_deg,
                              polarizer_angle_deg, retardance_error_rad};
  return pair;
}

void DetectorModel::validate() const {
  if (jitter_sigma_ns < 0.0) {
    throw std::invalid_argument("detector.jitter_sigma_ns: must be >= 0");
  }
  if (!(efficiency > 0.0) || efficiency > 1.0) {
    throw std::invalid_argument("detector.efficiency: must lie in (0, 1]");
  }
  if (dead_time_ns < 0.0) {
    throw std::invalid_argument("detector.dead_time_ns: must be >= 0");
  }
}

std::vector<DetectionRecord> apply_detector(
    const std::vector<PhotonEvent>& events, const AnalyzerPair& analyzers,
    const DetectorModel& model, RngStream& rng) {
  std::vector<DetectionRecord> records;
  records.reserve(events.size());
  // Channel fractions depend only on helicity; cache the four values.
  double fraction[2][2];
  for (int h = 0; h < 2; ++h) {
    const auto input = jones_circular(static_cast<Helicity>(h));
    fraction[h][0] = transmitted_fraction(input, analyzers.sigma_plus_channel);
    fraction[h][1] =
        transmitted_fraction(input, analyzers.sigma_minus_channel);
  }
  double last_kept = -1.0e300;
  for (const auto& ev : events) {
    const int h = static_cast<int>(ev.helicity);
    const double p_plus = model.efficiency * fraction[h][0];
    const double p_minus = model.efficiency * fraction[h][1];
    const double u = rng.uniform();
    Channel channel;
    if (u < p_plus) {
      channel = Channel::sigma_plus;
    } else if (u < p_plus + p_minus) {
      channel = Channel::sigma_minus;
    } else {
      continue;
    }
    if (model.dead_time_ns > 0.0 &&
        ev.time_ns - last_kept < model.dead_time_ns) {
      continue;
    }
    last_kept = ev.time_ns;
    DetectionRecord rec;
    // The jitter draw is consumed even at sigma = 0 so that the kept set
    // is a function of the stream position alone, not of the jitter value.
    rec.time_ns = rng.normal(ev.time_ns, model.jitter_sigma_ns);
    rec.cycle = static_cast<int>(ev.cycle);
    rec.channel = channel;
    rec.species = ev.species;
    records.push_back(rec);
  }
  return records;
}

}  // namespace qdmem
