#ifndef QDMEM_LEVELS_HPP
#define QDMEM_LEVELS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

// Discrete level structure of a single quantum dot's ground shell:
// the 16 charge/spin configurations, the optical selection rules between
// them, and the transition energies including Zeeman and Stark terms.

namespace qdmem {

// Occupation of the electron s-shell. A doubly occupied shell is a spin
// singlet and carries no net spin label.
enum class ElectronConfig : std::uint8_t {
  none = 0,
  up,    // m_s = +1/2
  down,  // m_s = -1/2
  pair   // two electrons, singlet
};

// Occupation of the heavy-hole shell (pseudo-spin +-3/2).
enum class HoleConfig : std::uint8_t {
  none = 0,
  up,    // m_j = +3/2
  down,  // m_j = -3/2
  pair   // two holes, singlet
};

struct DotState {
  ElectronConfig electrons = ElectronConfig::none;
  HoleConfig holes = HoleConfig::none;

  friend bool operator==(const DotState&, const DotState&) = default;
};

// Mutually exclusive classification of the 16 states.
enum class Species : std::uint8_t {
  empty = 0,
  single_electron,
  single_hole,
  two_electrons,
  two_holes,
  bright_exciton,  // |J_z| = 1, optically active
  dark_exciton,    // |J_z| = 2, radiatively forbidden
  trion_plus,      // electron + two holes
  trion_minus,     // two electrons + hole
  biexciton
};

inline constexpr int kStateCount = 16;

// Canonical state order: vacuum, single carriers, doubly charged shells,
// bright and dark excitons, trions, biexciton.
enum StateIndex : int {
  kEmpty = 0,
  kElectronUp = 1,
  kElectronDown = 2,
  kHoleUp = 3,
  kHoleDown = 4,
  kTwoElectrons = 5,
  kTwoHoles = 6,
  kBrightPlus = 7,   // e_down + h_up, J_z = +1
  kBrightMinus = 8,  // e_up + h_down, J_z = -1
  kDarkPlus = 9,     // e_up + h_up, J_z = +2
  kDarkMinus = 10,   // e_down + h_down, J_z = -2
  kTrionPlusUp = 11,    // e_up + 2h
  kTrionPlusDown = 12,  // e_down + 2h
  kTrionMinusUp = 13,   // 2e + h_up
  kTrionMinusDown = 14, // 2e + h_down
  kBiexciton = 15
};

// Circular photon helicity. Plus is sigma+ (R), minus is sigma- (L).
enum class Helicity : std::uint8_t { plus = 0, minus = 1 };

// Radiative species of a recombination channel (biexciton emission is the
// cascade line into the bright excitons).
enum class RadiativeSpecies : std::uint8_t {
  neutral_exciton = 0,
  trion_plus,
  trion_minus,
  biexciton
};
inline constexpr int kRadiativeSpeciesCount = 4;

struct Transition {
  int initial = 0;  // state index
  int final = 0;    // state index
  Helicity helicity = Helicity::plus;
  RadiativeSpecies species = RadiativeSpecies::neutral_exciton;
};

// Bohr magneton in ueV/T (CODATA value rounded to the precision used
// throughout: Zeeman splitting = g * mu_B * B).
inline constexpr double kBohrMagnetonUevPerTesla = 57.88;

// Transition energies per radiative species plus Zeeman and Stark terms.
// base_uev[s]: zero-field line position of species s in ueV; g_factor[s]:
// dimensionless exciton g-factor; the Stark shift is linear in the applied
// bias relative to reference_bias_v.
struct EnergyTable {
  std::array<double, kRadiativeSpeciesCount> base_uev{
      1384000.0,            // neutral exciton, ~896 nm
      1384000.0 - 2000.0,   // positive trion
      1384000.0 + 4000.0,   // negative trion
      1384000.0 - 3000.0};  // biexciton cascade line
  std::array<double, kRadiativeSpeciesCount> g_factor{3.0, 3.0, 3.0, 3.0};
  double stark_uev_per_v = 50.0;
  double reference_bias_v = 1.25;
  double field_tesla = 2.0;

  void validate() const;  // throws std::invalid_argument on bad entries

  double zeeman_splitting_uev(RadiativeSpecies s) const {
    return g_factor[static_cast<int>(s)] * kBohrMagnetonUevPerTesla *
           field_tesla;
  }
};

// All 16 states in canonical order; enumerate_states()[i] has index i.
const std::array<DotState, kStateCount>& enumerate_states();

// Index of a state in the canonical order.
int state_index(const DotState& s);

Species classify(const DotState& s);
Species classify(int index);

int electron_count(const DotState& s);
int hole_count(const DotState& s);

// Short display names ("0", "e+", "Xb+", "T+dn", ...).
std::string state_name(int index);
std::string species_name(Species s);
std::string radiative_species_name(RadiativeSpecies s);
std::string helicity_name(Helicity h);

// Dipole-allowed recombination channels out of a state. Bright excitons
// and trions have one channel each, the biexciton two (opposite
// helicities), dark excitons and non-excitonic states none.
const std::vector<Transition>& radiative_channels(int state);
inline const std::vector<Transition>& radiative_channels(const DotState& s) {
  return radiative_channels(state_index(s));
}

// Line position of a radiative channel at the given instantaneous bias:
// base energy, +-Zeeman/2 by helicity (sigma+ takes the upper branch),
// and the linear Stark term. Throws std::invalid_argument if the
// transition is not one returned by radiative_channels.
double transition_energy(const Transition& t, double bias_v,
                         const EnergyTable& table);

}  // namespace qdmem

#endif  // QDMEM_LEVELS_HPP
