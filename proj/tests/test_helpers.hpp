#pragma once

#include "spinclock/bath.hpp"
#include "spinclock/constants.hpp"

#include <cmath>

namespace spinclock::testing {

// Protons at random positions in a shell around the central spin, with a
// minimum separation so couplings stay physical. Point-dipole hyperfine;
// every pair carried (r_dipole large).
inline BathModel random_proton_bath(int n_spins, uint64_t seed,
                                    double r_min = 0.35, double r_max = 0.8,
                                    double min_sep = 0.25) {
  SplitMix rng(seed);
  BathModel bath;
  bath.r_bath_nm = r_max;
  bath.r_dipole_nm = 100.0;
  bath.seed = seed;
  const double gamma_e = electron_gamma_MHz_per_T(2.0023);
  int guard = 0;
  while (static_cast<int>(bath.spins.size()) < n_spins) {
    if (++guard > 100000) throw std::runtime_error("bath sampling stuck");
    Eigen::Vector3d pos(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0,
                        2.0 * rng.uniform() - 1.0);
    pos *= r_max;
    const double r = pos.norm();
    if (r < r_min || r > r_max) continue;
    bool crowded = false;
    for (const auto& s : bath.spins)
      if ((s.position_nm - pos).norm() < min_sep) {
        crowded = true;
        break;
      }
    if (crowded) continue;
    BathSpin s;
    s.id = static_cast<int>(bath.spins.size());
    s.position_nm = pos;
    s.isotope = "1H";
    s.spin = 0.5;
    s.gamma_MHz_per_T = k_gamma_1H_MHz_per_T;
    s.hyperfine_MHz = dipolar_tensor_MHz(gamma_e, s.gamma_MHz_per_T, pos);
    bath.spins.push_back(s);
  }
  for (size_t i = 0; i < bath.spins.size(); ++i)
    for (size_t j = i + 1; j < bath.spins.size(); ++j) {
      NuclearPair p;
      p.i = static_cast<int>(i);
      p.j = static_cast<int>(j);
      p.tensor_kHz =
          1e3 * dipolar_tensor_MHz(bath.spins[i].gamma_MHz_per_T,
                                   bath.spins[j].gamma_MHz_per_T,
                                   bath.spins[j].position_nm -
                                       bath.spins[i].position_nm);
      bath.pairs.push_back(p);
    }
  bath.rebuild_adjacency();
  return bath;
}

inline BathModel single_spin_bath(const Eigen::Matrix3d& hyperfine_MHz,
                                  double gamma_MHz_per_T = k_gamma_1H_MHz_per_T,
                                  double spin = 0.5) {
  BathModel bath;
  bath.r_bath_nm = 1.0;
  bath.r_dipole_nm = 1.0;
  BathSpin s;
  s.id = 0;
  s.position_nm = Eigen::Vector3d(0, 0, 0.3);
  s.isotope = "test";
  s.spin = spin;
  s.gamma_MHz_per_T = gamma_MHz_per_T;
  s.hyperfine_MHz = hyperfine_MHz;
  bath.spins.push_back(s);
  bath.rebuild_adjacency();
  return bath;
}

}  // namespace spinclock::testing
