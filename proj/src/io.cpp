#include "qdmem/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace qdmem {

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // fixed newlines everywhere
  if (!out) {
    throw std::runtime_error("cannot open output file '" + path + "'");
  }
  return out;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void write_histogram_csv(const std::string& path, const Histogram& h) {
  auto out = open_output(path);
  out << "time_ns,counts_sigma_plus,counts_sigma_minus\n";
  for (std::size_t i = 0; i < h.bins(); ++i) {
    out << fmt(h.bin_center(i)) << ',' << fmt(h.counts_sigma_plus[i]) << ','
        << fmt(h.counts_sigma_minus[i]) << '\n';
  }
}

void write_spectral_map_csv(const std::string& path, const SpectralMap& map) {
  auto out = open_output(path);
  out << "bias_V,energy_ueV,intensity\n";
  for (std::size_t b = 0; b < map.bias_v.size(); ++b) {
    for (std::size_t e = 0; e < map.energy_uev.size(); ++e) {
      out << fmt(map.bias_v[b]) << ',' << fmt(map.energy_uev[e]) << ','
          << fmt(map.at(b, e)) << '\n';
    }
  }
}

void write_summary_json(const std::string& path, const RunSummary& summary) {
  nlohmann::ordered_json j;
  j["config_hash"] = summary.config_hash;
  j["seed"] = summary.seed;
  j["cycles"] = summary.cycles;
  j["engine"] = summary.engine;
  j["total_counts"] = summary.total_counts;
  j["memory"] = {
      {"intensity_left", summary.memory.intensity_left},
      {"intensity_right", summary.memory.intensity_right},
      {"degree", summary.memory.degree},
      {"uncertainty", summary.memory.uncertainty},
      {"has_signal", summary.memory.has_signal},
  };
  if (summary.lifetime_fit) {
    j["lifetime_fit"] = {
        {"tau_ns", summary.lifetime_fit->tau_ns},
        {"sigma_tau_ns", summary.lifetime_fit->sigma_tau_ns},
        {"bins_used", summary.lifetime_fit->bins_used},
    };
  } else {
    j["lifetime_fit"] = nullptr;
    if (!summary.fit_error.empty()) j["fit_error"] = summary.fit_error;
  }
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

void write_manifest_json(const std::string& path, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["config_path"] = m.config_path;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["cycles"] = m.cycles;
  j["engine"] = m.engine;
  j["output_directory"] = m.output_directory;
  j["tool_version"] = m.tool_version;
  j["config_schema"] = m.config_schema;
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

CompareReport compare_histograms(const std::vector<double>& observed,
                                 const std::vector<double>& expected,
                                 double bin_width_ns, std::uint64_t cycles) {
  if (observed.size() != expected.size()) {
    throw std::invalid_argument(
        "compare_histograms: bin count mismatch between engines");
  }
  CompareReport report;
  report.bin_width_ns = bin_width_ns;
  report.cycles = cycles;
  report.observed = observed;
  report.expected = expected;
  report.z_scores.resize(observed.size());

  double diff2 = 0.0;
  double ref2 = 0.0;
  double expected_total = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double n = observed[i];
    const double lambda = expected[i];
    expected_total += lambda;
    // Poisson sigma floored at one count so that nearly-empty bins do not
    // produce spurious detections.
    const double sigma = std::sqrt(std::max(lambda, 1.0));
    const double z = (n - lambda) / sigma;
    report.z_scores[i] = z;
    report.max_abs_z = std::max(report.max_abs_z, std::abs(z));
    if (std::abs(z) > 4.0) ++report.bins_over_4_sigma;
    diff2 += (n - lambda) * (n - lambda);
    ref2 += lambda * lambda;
  }
  report.relative_l2 = ref2 > 0.0 ? std::sqrt(diff2 / ref2)
                                  : std::sqrt(diff2);
  report.sufficient_statistics = expected_total >= 100.0;
  return report;
}

void write_compare_json(const std::string& path,
                        const CompareReport& report) {
  nlohmann::ordered_json j;
  j["bin_width_ns"] = report.bin_width_ns;
  j["cycles"] = report.cycles;
  j["relative_l2"] = report.relative_l2;
  j["max_abs_z"] = report.max_abs_z;
  j["bins_over_4_sigma"] = report.bins_over_4_sigma;
  j["sufficient_statistics"] = report.sufficient_statistics;
  j["expected"] = report.expected;
  j["observed"] = report.observed;
  j["z_scores"] = report.z_scores;
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

}  // namespace qdmem
