#include "qdmem/levels.hpp"

#include <stdexcept>

namespace qdmem {

const std::array<DotState, kStateCount>& enumerate_states() {
  using E = ElectronConfig;
  using H = HoleConfig;
  static const std::array<DotState, kStateCount> states = {{
      {E::none, H::none},  // 0  vacuum
      {E::up, H::none},    // 1  e up
      {E::down, H::none},  // 2  e down
      {E::none, H::up},    // 3  h up
      {E::none, H::down},  // 4  h down
      {E::pair, H::none},  // 5  2e
      {E::none, H::pair},  // 6  2h
      {E::down, H::up},    // 7  bright exciton J_z = +1
      {E::up, H::down},    // 8  bright exciton J_z = -1
      {E::up, H::up},      // 9  dark exciton J_z = +2
      {E::down, H::down},  // 10 dark exciton J_z = -2
      {E::up, H::pair},    // 11 positive trion, electron up
      {E::down, H::pair},  // 12 positive trion, electron down
      {E::pair, H::up},    // 13 negative trion, hole up
      {E::pair, H::down},  // 14 negative trion, hole down
      {E::pair, H::pair},  // 15 biexciton
  }};
  return states;
}

int state_index(const DotState& s) {
  const auto& states = enumerate_states();
  for (int i = 0; i < kStateCount; ++i) {
    if (states[i] == s) return i;
  }
  throw std::invalid_argument("state_index: not a valid dot state");
}

int electron_count(const DotState& s) {
  switch (s.electrons) {
    case ElectronConfig::none: return 0;
    case ElectronConfig::pair: return 2;
    default: return 1;
  }
}

int hole_count(const DotState& s) {
  switch (s.holes) {
    case HoleConfig::none: return 0;
    case HoleConfig::pair: return 2;
    default: return 1;
  }
}

Species classify(const DotState& s) {
  const int ne = electron_count(s);
  const int nh = hole_count(s);
  if (ne == 0 && nh == 0) return Species::empty;
  if (ne == 1 && nh == 0) return Species::single_electron;
  if (ne == 0 && nh == 1) return Species::single_hole;
  if (ne == 2 && nh == 0) return Species::two_electrons;
  if (ne == 0 && nh == 2) return Species::two_holes;
  if (ne == 1 && nh == 2) return Species::trion_plus;
  if (ne == 2 && nh == 1) return Species::trion_minus;
  if (ne == 2 && nh == 2) return Species::biexciton;
  // one electron + one hole: bright if spins are antiparallel (|J_z| = 1)
  const bool electron_up = s.electrons == ElectronConfig::up;
  const bool hole_up = s.holes == HoleConfig::up;
  return electron_up == hole_up ? Species::dark_exciton
                                : Species::bright_exciton;
}

Species classify(int index) { return classify(enumerate_states()[index]); }

std::string state_name(int index) {
  static const std::array<std::string, kStateCount> names = {
      "0",    "e_up", "e_dn", "h_up", "h_dn",  "2e",    "2h",    "Xb+",
      "Xb-",  "Xd+",  "Xd-",  "T+up", "T+dn",  "T-up",  "T-dn",  "XX"};
  return names.at(static_cast<std::size_t>(index));
}

std::string species_name(Species s) {
  switch (s) {
    case Species::empty: return "empty";
    case Species::single_electron: return "electron";
    case Species::single_hole: return "hole";
    case Species::two_electrons: return "two_electrons";
    case Species::two_holes: return "two_holes";
    case Species::bright_exciton: return "bright_exciton";
    case Species::dark_exciton: return "dark_exciton";
    case Species::trion_plus: return "trion_plus";
    case Species::trion_minus: return "trion_minus";
    case Species::biexciton: return "biexciton";
  }
  return "?";
}

std::string radiative_species_name(RadiativeSpecies s) {
  switch (s) {
    case RadiativeSpecies::neutral_exciton: return "X";
    case RadiativeSpecies::trion_plus: return "X+";
    case RadiativeSpecies::trion_minus: return "X-";
    case RadiativeSpecies::biexciton: return "XX";
  }
  return "?";
}

std::string helicity_name(Helicity h) {
  return h == Helicity::plus ? "sigma+" : "sigma-";
}

namespace {

std::array<std::vector<Transition>, kStateCount> make_channel_table() {
  std::array<std::vector<Transition>, kStateCount> table;
  auto add = [&table](int from, int to, Helicity h, RadiativeSpecies sp) {
    table[static_cast<std::size_t>(from)].push_back(
        Transition{from, to, h, sp});
  };
  // Bright excitons: the J_z = +1 configuration (e down, h up) emits
  // sigma+, its mirror emits sigma-.
  add(kBrightPlus, kEmpty, Helicity::plus, RadiativeSpecies::neutral_exciton);
  add(kBrightMinus, kEmpty, Helicity::minus,
      RadiativeSpecies::neutral_exciton);
  // Positive trion: the down electron recombines with the up hole of the
  // singlet (J_z = +1, sigma+), leaving the down hole; mirrored for up.
  add(kTrionPlusDown, kHoleDown, Helicity::plus, RadiativeSpecies::trion_plus);
  add(kTrionPlusUp, kHoleUp, Helicity::minus, RadiativeSpecies::trion_plus);
  // Negative trion: helicity labelled by the hole, mirroring the electron
  // convention of the positive trion (see README polarimetry notes).
  add(kTrionMinusDown, kElectronDown, Helicity::plus,
      RadiativeSpecies::trion_minus);
  add(kTrionMinusUp, kElectronUp, Helicity::minus,
      RadiativeSpecies::trion_minus);
  // Biexciton: either singlet pair may recombine, leaving the opposite
  // bright exciton behind.
  add(kBiexciton, kBrightPlus, Helicity::minus, RadiativeSpecies::biexciton);
  add(kBiexciton, kBrightMinus, Helicity::plus, RadiativeSpecies::biexciton);
  return table;
}

}  // namespace

const std::vector<Transition>& radiative_channels(int state) {
  static const auto table = make_channel_table();
  return table.at(static_cast<std::size_t>(state));
}

void EnergyTable::validate() const {
  for (int s = 0; s < kRadiativeSpeciesCount; ++s) {
    if (!(base_uev[static_cast<std::size_t>(s)] > 0.0)) {
      throw std::invalid_argument(
          "EnergyTable: base energy must be positive for species " +
          radiative_species_name(static_cast<RadiativeSpecies>(s)));
    }
    if (zeeman_splitting_uev(static_cast<RadiativeSpecies>(s)) < 0.0) {
      throw std::invalid_argument(
          "EnergyTable: Zeeman splitting must be non-negative for species " +
          radiative_species_name(static_cast<RadiativeSpecies>(s)));
    }
  }
}

double transition_energy(const Transition& t, double bias_v,
                         const EnergyTable& table) {
  const auto& channels = radiative_channels(t.initial);
  bool known = false;
  for (const auto& c : channels) {
    if (c.final == t.final && c.helicity == t.helicity &&
        c.species == t.species) {
      known = true;
      break;
    }
  }
  if (!known) {
    throw std::invalid_argument("transition_energy: " + state_name(t.initial) +
                                " -> " + state_name(t.final) +
                                " is not a radiative channel");
  }
  const double half_zeeman = 0.5 * table.zeeman_splitting_uev(t.species);
  const double sign = t.helicity == Helicity::plus ? +1.0 : -1.0;
  const double stark =
      table.stark_uev_per_v * (bias_v - table.reference_bias_v);
  return table.base_uev[static_cast<int>(t.species)] + sign * half_zeeman +
         stark;
}

}  // namespace qdmem
