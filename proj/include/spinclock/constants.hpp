#pragma once

// Unit conventions used throughout: energies and frequencies in GHz, magnetic
// field in mT, time in us, distance in nm. Coupling tensors are stored in MHz
// (hyperfine) and kHz (nuclear pairs) and converted at Hamiltonian assembly.

namespace spinclock {

// CODATA 2018: mu_B = 9.2740100783e-24 J/T, h = 6.62607015e-34 J s.
inline constexpr double k_bohr_magneton_over_h_GHz_per_T = 13.996244936;
inline constexpr double k_planck_Js = 6.62607015e-34;
inline constexpr double k_mu0_over_4pi_T2m3_per_J = 1e-7;

// gamma/2pi of common bath nuclei, MHz/T. Crystal files carry their own
// values; these are the defaults used by shipped specs and tests.
inline constexpr double k_gamma_1H_MHz_per_T = 42.577478518;
inline constexpr double k_gamma_19F_MHz_per_T = 40.077;

inline double electron_gamma_GHz_per_mT(double g) {
  return g * k_bohr_magneton_over_h_GHz_per_T * 1e-3;
}
inline double electron_gamma_MHz_per_T(double g) {
  return g * k_bohr_magneton_over_h_GHz_per_T * 1e3;
}

// Propagator convention: U(t) = exp(-i 2 pi H t). With H in GHz and t in us
// the phase advances 1000 cycles per GHz*us.
inline constexpr double k_cycles_per_GHz_us = 1.0e3;

}  // namespace spinclock
