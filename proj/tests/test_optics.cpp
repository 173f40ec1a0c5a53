#include <doctest.h>

#include <cmath>

#include "qdmem/engine.hpp"
#include "qdmem/optics.hpp"
#include "qdmem/rng.hpp"

using namespace qdmem;

namespace {

double matrix_unitarity_defect(const JonesMatrix& u) {
  // max-abs entry of U^dagger U - I
  const Complex a = std::conj(u.hh) * u.hh + std::conj(u.vh) * u.vh;
  const Complex b = std::conj(u.hh) * u.hv + std::conj(u.vh) * u.vv;
  const Complex c = std::conj(u.hv) * u.hh + std::conj(u.vv) * u.vh;
  const Complex d = std::conj(u.hv) * u.hv + std::conj(u.vv) * u.vv;
  double defect = std::abs(a - Complex{1.0, 0.0});
  defect = std::max(defect, std::abs(b));
  defect = std::max(defect, std::abs(c));
  defect = std::max(defect, std::abs(d - Complex{1.0, 0.0}));
  return defect;
}

JonesVector random_polarization(RngStream& rng) {
  const double theta = rng.uniform() * 3.141592653589793;
  const double phase = rng.uniform() * 6.283185307179586;
  return {Complex{std::cos(theta), 0.0},
          std::polar(std::sin(theta), phase)};
}

AnalyzerPair ideal_pair() {
  return AnalyzerPair::from_settings(45.0, 45.0, 0.0, 0.0, 0.0);
}

}  // namespace

TEST_CASE("waveplates are unitary") {
  RngStream rng(11, 0);
  for (int i = 0; i < 100; ++i) {
    const double angle = rng.uniform() * 360.0;
    const double retardance = rng.uniform() * 6.28;
    CHECK(matrix_unitarity_defect(waveplate(retardance, angle)) < 1e-12);
  }
}

TEST_CASE("half-waveplate basics") {
  SUBCASE("HWP at 0 leaves H alone up to phase") {
    const auto out = half_waveplate(0.0).apply(jones_horizontal());
    CHECK(std::norm(out.h) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::norm(out.v) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("HWP at 22.5 rotates H to the diagonal") {
    const auto out = half_waveplate(22.5).apply(jones_horizontal());
    const auto d = jones_diagonal();
    const Complex overlap = std::conj(d.h) * out.h + std::conj(d.v) * out.v;
    CHECK(std::norm(overlap) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("QWP at 45 maps circular light onto the linear basis") {
  const auto qwp = quarter_waveplate(45.0);
  const auto from_r = qwp.apply(jones_circular(Helicity::plus));
  // Output is linear: one basis component carries everything.
  CHECK(std::norm(from_r.v) == doctest::Approx(1.0).epsilon(1e-12));
  // A polariser along that axis transmits the full intensity.
  AnalyzerChain chain{45.0, 45.0, 0.0, 0.0};
  CHECK(transmitted_fraction(Helicity::plus, chain) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cross-polarised channels") {
  const auto pair = ideal_pair();

  SUBCASE("sigma+ goes fully into its channel and not the crossed one") {
    CHECK(transmitted_fraction(Helicity::plus, pair.sigma_plus_channel) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(transmitted_fraction(Helicity::plus, pair.sigma_minus_channel) ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(transmitted_fraction(Helicity::minus, pair.sigma_minus_channel) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("linear light splits evenly between the circular channels") {
    CHECK(transmitted_fraction(jones_horizontal(), pair.sigma_plus_channel) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(transmitted_fraction(jones_horizontal(), pair.sigma_minus_channel) ==
          doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("channel fractions sum to one for any input") {
    RngStream rng(12, 0);
    for (int i = 0; i < 100; ++i) {
      const auto input = random_polarization(rng);
      const double total =
          transmitted_fraction(input, pair.sigma_plus_channel) +
          transmitted_fraction(input, pair.sigma_minus_channel);
      CHECK(total == doctest::Approx(input.norm2()).epsilon(1e-12));
    }
  }
}

TEST_CASE("detector") {
  std::vector<PhotonEvent> events;
  for (int i = 0; i < 100000; ++i) {
    PhotonEvent ev;
    ev.time_ns = 100.0;
    ev.cycle = static_cast<std::uint64_t>(i);
    ev.species = RadiativeSpecies::trion_plus;
    ev.helicity = Helicity::plus;
    events.push_back(ev);
  }

  SUBCASE("unit efficiency, zero jitter, matched channel keeps everything") {
    DetectorModel ideal{0.0, 1.0, 0.0};
    RngStream rng(1, 0);
    const auto records = apply_detector(events, ideal_pair(), ideal, rng);
    REQUIRE(records.size() == events.size());
    for (std::size_t i = 0; i < 100; ++i) {
      CHECK(records[i].time_ns == events[i].time_ns);
      CHECK(records[i].channel == Channel::sigma_plus);
    }
  }

  SUBCASE("jitter shows up as the recorded standard deviation") {
    DetectorModel jittery{0.35, 1.0, 0.0};
    RngStream rng(2, 0);
    const auto records = apply_detector(events, ideal_pair(), jittery, rng);
    double mean = 0.0;
    for (const auto& r : records) mean += r.time_ns;
    mean /= static_cast<double>(records.size());
    double var = 0.0;
    for (const auto& r : records) {
      var += (r.time_ns - mean) * (r.time_ns - mean);
    }
    var /= static_cast<double>(records.size() - 1);
    CHECK(std::sqrt(var) == doctest::Approx(0.35).epsilon(0.02));
  }

  SUBCASE("low efficiency keeps a binomial share") {
    DetectorModel lossy{0.0, 0.01, 0.0};
    RngStream rng(3, 0);
    const auto records = apply_detector(events, ideal_pair(), lossy, rng);
    // 1000 +- 3 sqrt(990) ~ 1000 +- 95 at three sigma
    CHECK(records.size() > 905);
    CHECK(records.size() < 1095);
  }

  SUBCASE("dead time drops events that follow too closely") {
    std::vector<PhotonEvent> burst;
    for (int i = 0; i < 4; ++i) {
      PhotonEvent ev;
      ev.time_ns = 10.0 + 5.0 * i;
      ev.helicity = Helicity::plus;
      burst.push_back(ev);
    }
    DetectorModel gated{0.0, 1.0, 8.0};
    RngStream rng(6, 0);
    const auto records = apply_detector(burst, ideal_pair(), gated, rng);
    REQUIRE(records.size() == 2);  // 10 and 20 survive, 15 and 25 do not
    CHECK(records[0].time_ns == 10.0);
    CHECK(records[1].time_ns == 20.0);
  }

  SUBCASE("the kept set does not depend on the jitter width") {
    DetectorModel narrow{0.0, 0.37, 0.0};
    DetectorModel wide{2.0, 0.37, 0.0};
    RngStream rng_a(4, 0);
    RngStream rng_b(4, 0);
    const auto a = apply_detector(events, ideal_pair(), narrow, rng_a);
    const auto b = apply_detector(events, ideal_pair(), wide, rng_b);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].cycle == b[i].cycle);
    }
  }
}
