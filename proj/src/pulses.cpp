#include "qdmem/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace qdmem {

std::string pump_polarization_name(PumpPolarization p) {
  switch (p) {
    case PumpPolarization::right_circular: return "R";
    case PumpPolarization::left_circular: return "L";
    case PumpPolarization::horizontal: return "H";
    case PumpPolarization::vertical: return "V";
    case PumpPolarization::unpolarized: return "U";
  }
  return "?";
}

double AcPulse::edge(double t_ns) const {
  if (t_ns <= start_ns) return 0.0;
  if (t_ns < end_ns()) {
    return 1.0 - std::exp(-(t_ns - start_ns) / rise_time_ns);
  }
  const double level_at_end = 1.0 - std::exp(-duration_ns / rise_time_ns);
  return level_at_end * std::exp(-(t_ns - end_ns()) / rise_time_ns);
}

double bias_at(const BiasWaveform& w, double t_ns) {
  double v = w.dc_bias_v;
  for (const auto& p : w.pulses) v += p.amplitude_v * p.edge(t_ns);
  return v;
}

BiasRange bias_range(const BiasWaveform& w, double t0_ns, double t1_ns) {
  double lo = w.dc_bias_v;
  double hi = w.dc_bias_v;
  for (const auto& p : w.pulses) {
    double e_min = std::min(p.edge(t0_ns), p.edge(t1_ns));
    double e_max = std::max(p.edge(t0_ns), p.edge(t1_ns));
    if (t0_ns < p.end_ns() && p.end_ns() < t1_ns) {
      // The edge peaks at the pulse end.
      e_max = std::max(e_max, p.edge(p.end_ns()));
    }
    const double a = p.amplitude_v * e_min;
    const double b = p.amplitude_v * e_max;
    lo += std::min(a, b);
    hi += std::max(a, b);
  }
  return {lo, hi};
}

double ExperimentProtocol::read_window_start() const {
  if (run.read_window_start_ns >= 0.0) return run.read_window_start_ns;
  if (!bias.pulses.empty()) return bias.pulses.front().start_ns;
  return 0.0;
}

double ExperimentProtocol::read_window_end() const {
  if (run.read_window_end_ns >= 0.0) return run.read_window_end_ns;
  return read_window_start() + 10.0 * rates.tau_trion_plus_ns;
}

void RateParams::validate() const {
  auto require = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) throw std::invalid_argument("rates." + key + ": " + why);
  };
  require(gamma_h0 >= 0.0, "gamma_h0", "must be >= 0");
  require(gamma_e0 >= 0.0, "gamma_e0", "must be >= 0");
  require(gamma_c0 >= 0.0, "gamma_c0", "must be >= 0");
  require(v_h_scale > 0.0, "v_h_scale", "must be > 0");
  require(v_e_scale > 0.0, "v_e_scale", "must be > 0");
  require(v_c_scale > 0.0, "v_c_scale", "must be > 0");
  require(gamma_h_max > 0.0, "gamma_h_max", "must be > 0");
  require(gamma_e_max > 0.0, "gamma_e_max", "must be > 0");
  require(tau_x_ns > 0.0, "tau_x_ns", "lifetime must be > 0");
  require(tau_trion_plus_ns > 0.0, "tau_trion_plus_ns",
          "lifetime must be > 0");
  require(tau_trion_minus_ns > 0.0, "tau_trion_minus_ns",
          "lifetime must be > 0");
  require(tau_biexciton_ns > 0.0, "tau_biexciton_ns", "lifetime must be > 0");
  require(t1_electron_ns > 0.0, "t1_electron_ns", "must be > 0");
  require(t1_hole_ns > 0.0, "t1_hole_ns", "must be > 0");
  require(write_fidelity >= 0.5 && write_fidelity <= 1.0, "write_fidelity",
          "must lie in [0.5, 1]");
  require(generation_rate >= 0.0, "generation_rate", "must be >= 0");
}

void ExperimentProtocol::validate() const {
  if (!(run.period_ns > 0.0)) {
    throw ConfigError("run.period_ns: must be > 0");
  }
  if (run.cycles < 1) throw ConfigError("run.cycles: must be >= 1");
  if (!(run.master_dt_ns > 0.0)) {
    throw ConfigError("run.master_dt_ns: must be > 0");
  }
  if (!(run.bin_width_ns > 0.0)) {
    throw ConfigError("run.bin_width_ns: must be > 0");
  }
  if (run.engine != "kmc" && run.engine != "master" && run.engine != "both") {
    throw ConfigError("run.engine: must be one of kmc|master|both");
  }
  for (std::size_t i = 0; i < laser_pulses.size(); ++i) {
    const auto& lp = laser_pulses[i];
    const std::string key = "laser." + std::to_string(i + 1);
    if (!(lp.fwhm_ns > 0.0)) throw ConfigError(key + ".fwhm_ns: must be > 0");
    if (lp.mean_injected_pairs < 0.0) {
      throw ConfigError(key + ".mean_pairs: must be >= 0");
    }
    if (lp.center_ns - 0.5 * lp.fwhm_ns < 0.0 ||
        lp.center_ns + 0.5 * lp.fwhm_ns > run.period_ns) {
      throw ConfigError(key + ": pulse lies outside the repetition period");
    }
  }
  for (std::size_t i = 0; i < bias.pulses.size(); ++i) {
    const auto& ap = bias.pulses[i];
    const std::string key = "acpulse." + std::to_string(i + 1);
    if (!(ap.duration_ns > 0.0)) {
      throw ConfigError(key + ".duration_ns: must be > 0");
    }
    if (!(ap.rise_time_ns > 0.0)) {
      throw ConfigError(key + ".rise_time_ns: must be > 0");
    }
    if (ap.start_ns < 0.0 || ap.end_ns() > run.period_ns) {
      throw ConfigError(key + ": pulse extends outside the repetition period");
    }
    if (i > 0 && ap.start_ns < bias.pulses[i - 1].end_ns()) {
      throw ConfigError(key + ": overlaps the previous a.c. pulse");
    }
  }
  rates.validate();
  energies.validate();
  detector.validate();
  AnalyzerChain probe{analyzer.qwp_angle_deg, analyzer.hwp_plus_deg,
                      analyzer.polarizer_angle_deg,
                      analyzer.retardance_error_rad};
  probe.validate();
  probe.hwp_angle_deg = analyzer.hwp_minus_deg;
  probe.validate();
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct ParsedLine {
  int number = 0;
  std::string key;
  std::string value;
};

struct Section {
  int line = 0;
  std::vector<ParsedLine> entries;
};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_number(const ParsedLine& l) {
  try {
    std::size_t used = 0;
    const double v = std::stod(l.value, &used);
    if (used != l.value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + l.key + "': '" + l.value +
                          "' is not a number",
                      l.number);
  }
}

std::uint64_t parse_count(const ParsedLine& l) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(l.value, &used);
    if (used != l.value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + l.key + "': '" + l.value +
                          "' is not a non-negative integer",
                      l.number);
  }
}

PumpPolarization parse_polarization(const ParsedLine& l) {
  if (l.value == "R") return PumpPolarization::right_circular;
  if (l.value == "L") return PumpPolarization::left_circular;
  if (l.value == "H") return PumpPolarization::horizontal;
  if (l.value == "V") return PumpPolarization::vertical;
  if (l.value == "U") return PumpPolarization::unpolarized;
  throw ConfigError("key 'polarization': '" + l.value +
                        "' is not one of R|L|H|V|U",
                    l.number);
}

// Applies one section's entries through a key dispatch table; unknown
// keys are rejected with their line number.
template <typename Handler>
void apply_section(const Section& sec, const std::string& name,
                   Handler&& handle) {
  for (const auto& entry : sec.entries) {
    if (!handle(entry)) {
      throw ConfigError("unknown key '" + entry.key + "' in section [" +
                            name + "]",
                        entry.number);
    }
  }
}

}  // namespace

ExperimentProtocol parse_protocol(const std::string& text) {
  std::map<std::string, Section> sections;
  {
    std::istringstream in(text);
    std::string raw;
    std::string current;
    int line_number = 0;
    while (std::getline(in, raw)) {
      ++line_number;
      const auto comment = raw.find_first_of("#;");
      if (comment != std::string::npos) raw.erase(comment);
      const std::string line = trim(raw);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          throw ConfigError("unterminated section header", line_number);
        }
        current = trim(line.substr(1, line.size() - 2));
        if (current.empty()) {
          throw ConfigError("empty section name", line_number);
        }
        auto [it, inserted] = sections.try_emplace(current);
        if (inserted) it->second.line = line_number;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("expected 'key = value'", line_number);
      }
      if (current.empty()) {
        throw ConfigError("key outside any [section]", line_number);
      }
      ParsedLine pl;
      pl.number = line_number;
      pl.key = trim(line.substr(0, eq));
      pl.value = trim(line.substr(eq + 1));
      if (pl.key.empty()) throw ConfigError("empty key", line_number);
      sections[current].entries.push_back(std::move(pl));
    }
  }

  ExperimentProtocol p;
  std::vector<std::pair<int, LaserPulse>> lasers;
  std::vector<std::pair<int, AcPulse>> acpulses;
  bool have_period = false;

  for (const auto& [name, sec] : sections) {
    if (name == "device") {
      apply_section(sec, name, [&](const ParsedLine& l) {
        if (l.key == "dc_bias_v") p.bias.dc_bias_v = parse_number(l);
        else if (l.key == "field_tesla")
          p.energies.field_tesla = parse_number(l);
        else return false;
        return true;
      });
    } else if (name == "energies") {
      auto species_slot = [&](RadiativeSpecies s) -> double& {
        return p.energies.base_uev[static_cast<int>(s)];
      };
      auto g_slot = [&](RadiativeSpecies s) -> double& {
        return p.energies.g_factor[static_cast<int>(s)];
      };
      apply_section(sec, name, [&](const ParsedLine& l) {
        if (l.key == "x_uev")
          species_slot(RadiativeSpecies::neutral_exciton) = parse_number(l);
        else if (l.key == "trion_plus_uev")
          species_slot(RadiativeSpecies::trion_plus) = parse_number(l);
        else if (l.key == "trion_minus_uev")
          species_slot(RadiativeSpecies::trion_minus) = parse_number(l);
        else if (l.key == "biexciton_uev")
          species_slot(RadiativeSpecies::biexciton) = parse_number(l);
        else if (l.key == "g_x")
          g_slot(RadiativeSpecies::neutral_exciton) = parse_number(l);
        else if (l.key == "g_trion_plus")
          g_slot(RadiativeSpecies::trion_plus) = parse_number(l);
        else if (l.key == "g_trion_minus")
          g_slot(RadiativeSpecies::trion_minus) = parse_number(l);
        else if (l.key == "g_biexciton")
          g_slot(RadiativeSpecies::biexciton) = parse_number(l);
        else if (l.key == "stark_uev_per_v")
          p.energies.stark_uev_per_v = parse_number(l);
        else if (l.key == "reference_bias_v")
          p.energies.reference_bias_v = parse_number(l);
        else return false;
        return true;
      });
    } else if (name == "rates") {
      apply_section(sec, name, [&](const ParsedLine& l) {
        auto& r = p.rates;
        if (l.key == "gamma_h0") r.gamma_h0 = parse_number(l);
        else if (l.key == "v_h_threshold") r.v_h_threshold = parse_number(l);
        else if (l.key == "v_h_scale") r.v_h_scale = parse_number(l);
        else if (l.key == "gamma_h_max") r.gamma_h_max = parse_number(l);
        else if (l.key == "gamma_e0") r.gamma_e0 = parse_number(l);
        else if (l.key == "v_e_threshold") r.v_e_threshold = parse_number(l);
        else if (l.key == "v_e_scale") r.v_e_scale = parse_number(l);
        else if (l.key == "gamma_e_max") r.gamma_e_max = parse_number(l);
        else if (l.key == "gamma_c0") r.gamma_c0 = parse_number(l);
        else if (l.key == "v_c_threshold") r.v_c_threshold = parse_number(l);
        else if (l.key == "v_c_scale") r.v_c_scale = parse_number(l);
        else if (l.key == "tau_x_ns") r.tau_x_ns = parse_number(l);
        else if (l.key == "tau_trion_plus_ns")
          r.tau_trion_plus_ns = parse_number(l);
        else if (l.key == "tau_trion_minus_ns")
          r.tau_trion_minus_ns = parse_number(l);
        else if (l.key == "tau_biexciton_ns")
          r.tau_biexciton_ns = parse_number(l);
        else if (l.key == "t1_electron_ns") r.t1_electron_ns = parse_number(l);
        else if (l.key == "t1_hole_ns") r.t1_hole_ns = parse_number(l);
        else if (l.key == "write_fidelity") r.write_fidelity = parse_number(l);
        else if (l.key == "generation_rate")
          r.generation_rate = parse_number(l);
        else return false;
        return true;
      });
    } else if (name.rfind("laser.", 0) == 0) {
      int index = 0;
      try {
        index = std::stoi(name.substr(6));
      } catch (const std::exception&) {
        throw ConfigError("bad laser section name [" + name + "]", sec.line);
      }
      LaserPulse lp;
      apply_section(sec, name, [&](const ParsedLine& l) {
        if (l.key == "t0_ns") lp.center_ns = parse_number(l);
        else if (l.key == "fwhm_ns") lp.fwhm_ns = parse_number(l);
        else if (l.key == "polarization")
          lp.polarization = parse_polarization(l);
        else if (l.key == "mean_pairs")
          lp.mean_injected_pairs = parse_number(l);
        else return false;
        return true;
      });
      lasers.emplace_back(index, lp);
    } else if (name.rfind("acpulse.", 0) == 0) {
      int index = 0;
      try {
        index = std::stoi(name.substr(8));
      } catch (const std::exception&) {
        throw ConfigError("bad acpulse section name [" + name + "]",
                          sec.line);
      }
      AcPulse ap;
      bool have_start = false, have_duration = false, have_amplitude = false;
      apply_section(sec, name, [&](const ParsedLine& l) {
        if (l.key == "start_ns") ap.start_ns = parse_number(l), have_start = true;
        else if (l.key == "duration_ns")
          ap.duration_ns = parse_number(l), have_duration = true;
        else if (l.key == "amplitude_v")
          ap.amplitude_v = parse_number(l), have_amplitude = true;
        else if (l.key == "rise_time_ns") ap.rise_time_ns = parse_number(l);
        else return false;
        return true;
      });
      if (!have_start || !have_duration || !have_amplitude) {
        throw ConfigError("section [" + name +
                              "] requires start_ns, duration_ns and "
                              "amplitude_v",
                          sec.line);
      }
      acpulses.emplace_back(index, ap);
    } else if (name == "analyzer") {
      apply_section(sec, name, [&](const ParsedLine& l) {
        auto& a = p.analyzer;
        if (l.key == "qwp_angle_deg") a.qwp_angle_deg = parse_number(l);
        else if (l.key == "hwp_plus_deg") a.hwp_plus_deg = parse_number(l);
        else if (l.key == "hwp_minus_deg") a.hwp_minus_deg = parse_number(l);
        else if (l.key == "polarizer_angle_deg")
          a.polarizer_angle_deg = parse_number(l);
        else if (l.key == "retardance_error_rad")
          a.retardance_error_rad = parse_number(l);
        else return false;
        return true;
      });
    } else if (name == "detector") {
      apply_section(sec, name, [&](const ParsedLine& l) {
        if (l.key == "jitter_sigma_ns")
          p.detector.jitter_sigma_ns = parse_number(l);
        else if (l.key == "efficiency") p.detector.efficiency = parse_number(l);
        else if (l.key == "dead_time_ns")
          p.detector.dead_time_ns = parse_number(l);
        else return false;
        return true;
      });
    } else if (name == "run") {
      apply_section(sec, name, [&](const ParsedLine& l) {
        auto& r = p.run;
        if (l.key == "period_ns") r.period_ns = parse_number(l), have_period = true;
        else if (l.key == "cycles") r.cycles = parse_count(l);
        else if (l.key == "seed") r.seed = parse_count(l);
        else if (l.key == "engine") r.engine = l.value;
        else if (l.key == "master_dt_ns") r.master_dt_ns = parse_number(l);
        else if (l.key == "bin_width_ns") r.bin_width_ns = parse_number(l);
        else if (l.key == "read_window_start_ns")
          r.read_window_start_ns = parse_number(l);
        else if (l.key == "read_window_end_ns")
          r.read_window_end_ns = parse_number(l);
        else return false;
        return true;
      });
    } else {
      throw ConfigError("unknown section [" + name + "]", sec.line);
    }
  }

  if (!have_period) throw ConfigError("missing required key run.period_ns");

  std::sort(lasers.begin(), lasers.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [index, lp] : lasers) p.laser_pulses.push_back(lp);
  std::sort(acpulses.begin(), acpulses.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [index, ap] : acpulses) p.bias.pulses.push_back(ap);
  std::sort(p.bias.pulses.begin(), p.bias.pulses.end(),
            [](const AcPulse& a, const AcPulse& b) {
              return a.start_ns < b.start_ns;
            });

  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

ExperimentProtocol load_protocol_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_protocol(buf.str());
}

std::string serialize_protocol(const ExperimentProtocol& p) {
  std::ostringstream out;
  auto kv = [&out](const std::string& key, double value) {
    out << key << " = " << format_double(value) << "\n";
  };
  out << "[device]\n";
  kv("dc_bias_v", p.bias.dc_bias_v);
  kv("field_tesla", p.energies.field_tesla);
  out << "\n[energies]\n";
  kv("x_uev", p.energies.base_uev[0]);
  kv("trion_plus_uev", p.energies.base_uev[1]);
  kv("trion_minus_uev", p.energies.base_uev[2]);
  kv("biexciton_uev", p.energies.base_uev[3]);
  kv("g_x", p.energies.g_factor[0]);
  kv("g_trion_plus", p.energies.g_factor[1]);
  kv("g_trion_minus", p.energies.g_factor[2]);
  kv("g_biexciton", p.energies.g_factor[3]);
  kv("stark_uev_per_v", p.energies.stark_uev_per_v);
  kv("reference_bias_v", p.energies.reference_bias_v);
  out << "\n[rates]\n";
  kv("gamma_h0", p.rates.gamma_h0);
  kv("v_h_threshold", p.rates.v_h_threshold);
  kv("v_h_scale", p.rates.v_h_scale);
  kv("gamma_h_max", p.rates.gamma_h_max);
  kv("gamma_e0", p.rates.gamma_e0);
  kv("v_e_threshold", p.rates.v_e_threshold);
  kv("v_e_scale", p.rates.v_e_scale);
  kv("gamma_e_max", p.rates.gamma_e_max);
  kv("gamma_c0", p.rates.gamma_c0);
  kv("v_c_threshold", p.rates.v_c_threshold);
  kv("v_c_scale", p.rates.v_c_scale);
  kv("tau_x_ns", p.rates.tau_x_ns);
  kv("tau_trion_plus_ns", p.rates.tau_trion_plus_ns);
  kv("tau_trion_minus_ns", p.rates.tau_trion_minus_ns);
  kv("tau_biexciton_ns", p.rates.tau_biexciton_ns);
  kv("t1_electron_ns", p.rates.t1_electron_ns);
  kv("t1_hole_ns", p.rates.t1_hole_ns);
  kv("write_fidelity", p.rates.write_fidelity);
  kv("generation_rate", p.rates.generation_rate);
  for (std::size_t i = 0; i < p.laser_pulses.size(); ++i) {
    const auto& lp = p.laser_pulses[i];
    out << "\n[laser." << i + 1 << "]\n";
    kv("t0_ns", lp.center_ns);
    kv("fwhm_ns", lp.fwhm_ns);
    out << "polarization = " << pump_polarization_name(lp.polarization)
        << "\n";
    kv("mean_pairs", lp.mean_injected_pairs);
  }
  for (std::size_t i = 0; i < p.bias.pulses.size(); ++i) {
    const auto& ap = p.bias.pulses[i];
    out << "\n[acpulse." << i + 1 << "]\n";
    kv("start_ns", ap.start_ns);
    kv("duration_ns", ap.duration_ns);
    kv("amplitude_v", ap.amplitude_v);
    kv("rise_time_ns", ap.rise_time_ns);
  }
  out << "\n[analyzer]\n";
  kv("qwp_angle_deg", p.analyzer.qwp_angle_deg);
  kv("hwp_plus_deg", p.analyzer.hwp_plus_deg);
  kv("hwp_minus_deg", p.analyzer.hwp_minus_deg);
  kv("polarizer_angle_deg", p.analyzer.polarizer_angle_deg);
  kv("retardance_error_rad", p.analyzer.retardance_error_rad);
  out << "\n[detector]\n";
  kv("jitter_sigma_ns", p.detector.jitter_sigma_ns);
  kv("efficiency", p.detector.efficiency);
  kv("dead_time_ns", p.detector.dead_time_ns);
  out << "\n[run]\n";
  kv("period_ns", p.run.period_ns);
  out << "cycles = " << p.run.cycles << "\n";
  out << "seed = " << p.run.seed << "\n";
  out << "engine = " << p.run.engine << "\n";
  kv("master_dt_ns", p.run.master_dt_ns);
  kv("bin_width_ns", p.run.bin_width_ns);
  kv("read_window_start_ns", p.run.read_window_start_ns);
  kv("read_window_end_ns", p.run.read_window_end_ns);
  return out.str();
}

std::string protocol_hash(const ExperimentProtocol& p) {
  const std::string text = serialize_protocol(p);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qdmem
