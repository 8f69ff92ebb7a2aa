#pragma once

#include "spinclock/linalg.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace spinclock {

struct Isotope {
  std::string label;
  double abundance = 1.0;        // fraction; per-site abundances sum to <= 1
  double spin = 0.5;             // I, multiple of 1/2
  double gamma_MHz_per_T = 0.0;  // gamma/2pi
};

struct CrystalSite {
  Eigen::Vector3d frac = Eigen::Vector3d::Zero();  // fractional, in [0,1)
  std::string element;
  std::vector<Isotope> isotopes;
};

struct CrystalSpec {
  Eigen::Matrix3d lattice_nm = Eigen::Matrix3d::Identity();  // rows = a1,a2,a3
  std::vector<CrystalSite> sites;
  Eigen::Vector3d central_frac = Eigen::Vector3d::Zero();
  double exclusion_radius_nm = 0.05;

  void validate() const;
};

// JSON document with keys lattice_nm (3x3), sites[], central,
// exclusion_radius_nm. Throws on malformed syntax or invariant violations.
CrystalSpec parse_crystal(const std::string& text);
std::string serialize_crystal(const CrystalSpec& spec);

struct BathSpin {
  int id = 0;
  Eigen::Vector3d position_nm = Eigen::Vector3d::Zero();  // relative to center
  std::string isotope;
  double spin = 0.5;
  double gamma_MHz_per_T = 0.0;
  Eigen::Matrix3d hyperfine_MHz = Eigen::Matrix3d::Zero();
  bool hyperfine_override = false;
  bool hyperfine_symmetric = true;
  // provenance, used by override matchers
  int site_index = 0;
  Eigen::Vector3i cell = Eigen::Vector3i::Zero();
};

struct NuclearPair {
  int i = 0, j = 0;  // i < j, bath spin ids
  Eigen::Matrix3d tensor_kHz = Eigen::Matrix3d::Zero();
};

struct BathModel {
  std::vector<BathSpin> spins;
  std::vector<NuclearPair> pairs;       // within r_dipole
  std::vector<std::vector<int>> adjacency;  // spin id -> indices into pairs
  double r_bath_nm = 0.0;
  double r_dipole_nm = 0.0;
  uint64_t seed = 0;

  const NuclearPair* find_pair(int i, int j) const;
  void rebuild_adjacency();
  std::string hash() const;  // hex digest over positions/tensors
};

struct BathOptions {
  double r_dipole_nm = 0.8;
  double g_electron = 2.0023;
  int max_spins = 20000;
};

// Supercell replication over a sphere of radius r_bath, seeded isotope
// sampling against the abundance tables, point-dipole hyperfine and
// nuclear-pair tensors. Pure function of (spec, r_bath, seed, opts).
BathModel generate_bath(const CrystalSpec& spec, double r_bath_nm,
                        uint64_t seed, const BathOptions& opts = {});

// T = (mu0 h g1 g2 / 4 pi r^3)(1 - 3 rr^T), returned in MHz.
// gammas in MHz/T, separation in nm. Throws for |r| < 1e-6 nm.
Eigen::Matrix3d dipolar_tensor_MHz(double gamma1_MHz_per_T,
                                   double gamma2_MHz_per_T,
                                   const Eigen::Vector3d& r_nm);

struct HyperfineOverride {
  std::optional<int> id;
  std::optional<int> site_index;
  std::optional<Eigen::Vector3i> cell;
  Eigen::Matrix3d tensor_MHz = Eigen::Matrix3d::Zero();
};

// Parses a JSON list of {id | (site_index, cell_offset), tensor_MHz}.
std::vector<HyperfineOverride> parse_hyperfine_overrides(const std::string& text);

// Matched spins carry the imported tensor verbatim; symmetry is not enforced
// (asymmetric tensors are flagged). A matcher resolving to zero or multiple
// spins is an error listing the candidates.
BathModel apply_hyperfine_overrides(const BathModel& bath,
                                    const std::vector<HyperfineOverride>& table);

// CSV export: id,x_nm,y_nm,z_nm,isotope,I,gamma_MHz_per_T,A tensor entries.
std::string bath_to_csv(const BathModel& bath);

}  // namespace spinclock
