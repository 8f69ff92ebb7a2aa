#pragma once

#include "spinclock/linalg.hpp"

#include <array>
#include <vector>

namespace spinclock {

// S = 1 central spin with axial/transverse zero-field splitting D, E (GHz)
// and scalar g-factor. `frame_euler_rad` rotates the molecular ZFS frame into
// the laboratory frame (ZYZ convention): v_lab = R v_mol. All spin operators
// of the central spin are expressed in the molecular-frame basis
// m = +1, 0, -1; laboratory-frame vectors are rotated in as needed.
struct SpinSystem {
  double D_GHz = 0.0;
  double E_GHz = 0.0;
  double g = 2.0023;
  Eigen::Vector3d frame_euler_rad = Eigen::Vector3d::Zero();

  // D >= 0, 0 <= E <= D/3 (canonical ZFS ordering), g > 0. Out-of-range
  // parameters are rejected rather than re-canonicalized.
  void validate() const;
  Eigen::Matrix3d frame_rotation() const;
  double gamma_GHz_per_mT() const;
};

struct MagneticField {
  Eigen::Vector3d mT = Eigen::Vector3d::Zero();  // laboratory frame
};

enum class Level : int { Zero = 0, Minus = 1, Plus = 2 };
const char* to_string(Level level);
Level level_from_string(const std::string& s);

// Eigenstructure at one field point. Columns of `states` are the eigenvectors
// in the molecular-frame basis, ascending in energy, gauge fixed so the
// largest-magnitude component is real and non-negative. labels[i] tags column
// i; at B = 0 the ascending order is |0>, |->, |+>.
struct LevelSet {
  Eigen::Vector3d energies_GHz = Eigen::Vector3d::Zero();
  Eigen::Matrix3cd states = Eigen::Matrix3cd::Identity();
  std::array<Level, 3> labels = {Level::Zero, Level::Minus, Level::Plus};
  bool resolved = true;  // false if adiabatic tracking became ambiguous

  int index_of(Level level) const;
  double energy_of(Level level) const;
  Eigen::Vector3cd state_of(Level level) const;
};

// H = D (Sz^2 - 2/3) + E (Sx^2 - Sy^2) + gamma_e B.S, molecular frame, GHz.
Eigen::Matrix3cd build_hamiltonian(const SpinSystem& sys,
                                   const MagneticField& field);

// Plain eigensolve with deterministic gauge; labels default to ascending
// order. Throws if the input is non-Hermitian beyond 1e-10.
LevelSet diagonalize(const Eigen::Matrix3cd& h);

// Labels carried adiabatically from B = 0 to the working field. Degenerate
// starting points are seeded with a 1e-3 mT symmetry-breaking field along
// `seed_axis` (laboratory frame).
LevelSet labeled_levels(const SpinSystem& sys, const MagneticField& field,
                        const Eigen::Vector3d& seed_axis = Eigen::Vector3d::UnitZ());

// One row of the field-frequency map. Pair order: (0,-), (0,+), (-,+).
struct TransitionEntry {
  double freq_GHz = 0.0;
  double dfreq_dB = 0.0;     // GHz/mT, vs |B| along the sweep axis
  double d2freq_dB2 = 0.0;   // GHz/mT^2
};
struct TransitionTable {
  double B_mT = 0.0;
  std::array<TransitionEntry, 3> pairs;
  bool has_derivatives = false;  // absent for grids with < 3 points
};

std::vector<TransitionTable> transition_map(const SpinSystem& sys,
                                            const Eigen::Vector3d& axis,
                                            const std::vector<double>& b_grid_mT);

// Curvature of each transition at B = 0 from a 5-point stencil. For E = 0 the
// curvature diverges into the linear regime and the first-order slope is
// reported instead.
struct ClockFigure {
  std::array<double, 3> per_pair = {0.0, 0.0, 0.0};  // GHz/mT^2 or GHz/mT
  bool linear_regime = false;
  double stencil_step_mT = 0.1;
};
ClockFigure clock_figure(const SpinSystem& sys, const Eigen::Vector3d& axis);

}  // namespace spinclock
