#ifndef QDMEM_IO_HPP
#define QDMEM_IO_HPP

#include <optional>
#include <string>
#include <vector>

#include "qdmem/analysis.hpp"
#include "qdmem/pulses.hpp"

// Plot-ready output files. All writers format numbers identically on
// every run so that byte-for-byte reproducibility can be asserted.

namespace qdmem {

inline constexpr const char* kToolVersion = "1.0.0";

struct RunManifest {
  std::string config_path;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::uint64_t cycles = 0;
  std::string engine;
  std::string output_directory;
  std::string tool_version = kToolVersion;
  int config_schema = kConfigSchemaVersion;
};

// time_ns,counts_sigma_plus,counts_sigma_minus per bin (bin centres).
void write_histogram_csv(const std::string& path, const Histogram& h);

// bias_V,energy_ueV,intensity rows, bias-major.
void write_spectral_map_csv(const std::string& path, const SpectralMap& map);

struct RunSummary {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::uint64_t cycles = 0;
  std::string engine;
  double total_counts = 0.0;
  MemoryResult memory;
  std::optional<FitResult> lifetime_fit;
  std::string fit_error;  // set when the fit was attempted and failed
};
void write_summary_json(const std::string& path, const RunSummary& summary);

void write_manifest_json(const std::string& path, const RunManifest& m);

struct CompareReport {
  double bin_width_ns = 0.0;
  std::uint64_t cycles = 0;
  double relative_l2 = 0.0;
  double max_abs_z = 0.0;
  int bins_over_4_sigma = 0;
  bool sufficient_statistics = true;
  std::vector<double> expected;  // master-equation counts per bin
  std::vector<double> observed;  // KMC counts per bin
  std::vector<double> z_scores;
};

// Per-bin z-scores (Poisson sigma, floored at one count) and relative L2
// distance between a KMC histogram and the master-equation expectation.
CompareReport compare_histograms(const std::vector<double>& observed,
                                 const std::vector<double>& expected,
                                 double bin_width_ns, std::uint64_t cycles);

void write_compare_json(const std::string& path, const CompareReport& report);

}  // namespace qdmem

#endif  // QDMEM_IO_HPP
