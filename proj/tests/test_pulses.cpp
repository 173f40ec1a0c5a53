#include <doctest.h>

#include <cmath>

#include "qdmem/pulses.hpp"

using namespace qdmem;

namespace {

const char* kReplicaConfig = R"(
# storage/readout replica: 1 MHz repetition, write at 10.5 ns,
# read pulse 600 ns later
[device]
dc_bias_v = -0.05

[laser.1]
t0_ns = 10.5
polarization = R
mean_pairs = 0.4

[acpulse.1]
start_ns = 610.5
duration_ns = 200
amplitude_v = 1.45
rise_time_ns = 1.0

[run]
period_ns = 1000
cycles = 1000
seed = 7
)";

}  // namespace

TEST_CASE("bias waveform") {
  BiasWaveform w;
  w.dc_bias_v = -0.05;
  w.pulses.push_back({600.0, 200.0, 1.45, 1.0});

  SUBCASE("holds the d.c. level before any pulse") {
    CHECK(bias_at(w, 0.0) == doctest::Approx(-0.05).epsilon(1e-15));
    CHECK(bias_at(w, 599.9) == doctest::Approx(-0.05).epsilon(1e-9));
  }

  SUBCASE("one rise time reaches 1 - 1/e of the step") {
    const double expected = -0.05 + 1.45 * (1.0 - std::exp(-1.0));
    CHECK(bias_at(w, 601.0) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("ten rise times settle within 0.005% of the plateau") {
    const double plateau = -0.05 + 1.45;
    const double v = bias_at(w, 610.0);
    CHECK(std::abs(v - plateau) / std::abs(plateau) < 5e-5);
  }

  SUBCASE("continuous at every pulse edge") {
    for (double edge : {600.0, 800.0}) {
      const double eps = 1e-9;
      CHECK(std::abs(bias_at(w, edge + eps) - bias_at(w, edge - eps)) <
            1e-6);
    }
  }

  SUBCASE("strictly increasing during the rise for positive amplitude") {
    // checked over the first 30 rise times; beyond that the exponential
    // saturates below double resolution
    double prev = bias_at(w, 600.0);
    for (double t = 600.5; t < 630.0; t += 0.5) {
      const double v = bias_at(w, t);
      CHECK(v > prev);
      prev = v;
    }
  }

  SUBCASE("bias_range bounds the waveform on every subinterval") {
    for (double t0 = 0.0; t0 < 1000.0; t0 += 83.0) {
      const double t1 = t0 + 83.0;
      const BiasRange r = bias_range(w, t0, t1);
      for (double t = t0; t <= t1; t += 0.37) {
        const double v = bias_at(w, t);
        CHECK(v >= r.low - 1e-12);
        CHECK(v <= r.high + 1e-12);
      }
    }
  }
}

TEST_CASE("minimal config gets defaults populated") {
  const auto p = parse_protocol(kReplicaConfig);
  CHECK(p.run.period_ns == 1000.0);
  CHECK(p.run.cycles == 1000);
  CHECK(p.laser_pulses.size() == 1);
  CHECK(p.laser_pulses[0].fwhm_ns == doctest::Approx(0.1));
  CHECK(p.bias.pulses.size() == 1);
  CHECK(p.rates.tau_trion_plus_ns == doctest::Approx(1.0));
  CHECK(p.rates.write_fidelity == doctest::Approx(0.9));
  CHECK(p.energies.field_tesla == doctest::Approx(2.0));
  CHECK(p.detector.efficiency == doctest::Approx(1.0));
  // default read window: a.c. pulse start to start + 10 trion lifetimes
  CHECK(p.read_window_start() == doctest::Approx(610.5));
  CHECK(p.read_window_end() == doctest::Approx(620.5));
}

TEST_CASE("parsed replica waveform reaches the read level after the edge") {
  const auto p = parse_protocol(kReplicaConfig);
  const double v = bias_at(p.bias, 610.5 + 5.0 * 1.0);
  CHECK(v == doctest::Approx(-0.05 + 1.45).epsilon(1e-2));
}

TEST_CASE("config errors") {
  SUBCASE("a.c. pulse beyond the period is rejected naming the pulse") {
    const std::string text = R"(
[acpulse.1]
start_ns = 1100
duration_ns = 50
amplitude_v = 1.0

[run]
period_ns = 1000
)";
    CHECK_THROWS_WITH_AS(parse_protocol(text),
                         doctest::Contains("acpulse.1"), ConfigError);
  }

  SUBCASE("unknown keys are rejected with their line number") {
    const std::string text = "[run]\nperiod_ns = 100\nbogus_key = 1\n";
    CHECK_THROWS_WITH_AS(parse_protocol(text), doctest::Contains("line 3"),
                         ConfigError);
  }

  SUBCASE("syntax errors carry the line number") {
    const std::string text = "[run]\nperiod_ns 100\n";
    CHECK_THROWS_WITH_AS(parse_protocol(text), doctest::Contains("line 2"),
                         ConfigError);
  }

  SUBCASE("negative lifetime is rejected naming the key") {
    const std::string text =
        "[rates]\ntau_x_ns = -1\n\n[run]\nperiod_ns = 100\n";
    CHECK_THROWS_WITH_AS(parse_protocol(text),
                         doctest::Contains("tau_x_ns"), ConfigError);
  }

  SUBCASE("missing required period") {
    CHECK_THROWS_WITH_AS(parse_protocol("[device]\ndc_bias_v = 0\n"),
                         doctest::Contains("period_ns"), ConfigError);
  }

  SUBCASE("overlapping a.c. pulses are rejected") {
    const std::string text = R"(
[acpulse.1]
start_ns = 100
duration_ns = 100
amplitude_v = 1.0

[acpulse.2]
start_ns = 150
duration_ns = 50
amplitude_v = 1.0

[run]
period_ns = 1000
)";
    CHECK_THROWS_WITH_AS(parse_protocol(text),
                         doctest::Contains("overlaps"), ConfigError);
  }

  SUBCASE("write fidelity outside [0.5, 1] is rejected") {
    const std::string text =
        "[rates]\nwrite_fidelity = 0.3\n\n[run]\nperiod_ns = 100\n";
    CHECK_THROWS_WITH_AS(parse_protocol(text),
                         doctest::Contains("write_fidelity"), ConfigError);
  }
}

TEST_CASE("serialize/parse round trip is exact") {
  const auto p = parse_protocol(kReplicaConfig);
  const std::string canonical = serialize_protocol(p);
  const auto q = parse_protocol(canonical);
  CHECK(serialize_protocol(q) == canonical);
  CHECK(protocol_hash(q) == protocol_hash(p));
  // spot checks through the round trip
  CHECK(q.laser_pulses[0].center_ns == p.laser_pulses[0].center_ns);
  CHECK(q.bias.pulses[0].amplitude_v == p.bias.pulses[0].amplitude_v);
  CHECK(q.run.seed == p.run.seed);
}
