#pragma once

#include "spinclock/cce.hpp"
#include "spinclock/fit.hpp"
#include "spinclock/spin_system.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace spinclock {

// Rate-equation picture of the spin-optical interface: three ground sublevels
// (indexed in label order |0>, |->, |+>) plus one excited singlet. All rates
// are 1/us; populations always sum to 1.
struct OpticsModel {
  Eigen::Vector3d ground_energies_GHz = Eigen::Vector3d::Zero();  // mean zero
  double pump_peak_rate_per_us = 0.1;   // R0
  double homogeneous_fwhm_GHz = 3.0;    // Gamma_h (Lorentzian)
  double decay_rate_per_us = 10.0;      // k_dec
  Eigen::Vector3d branching = Eigen::Vector3d::Constant(1.0 / 3.0);
  double T1_us = 1210.0;                // pairwise ground rate = 1/(3 T1)
  double mw_rate_per_us = 0.0;          // k_mw between mw_pair sublevels
  std::array<int, 2> mw_pair = {0, 1};

  void validate() const;
  static OpticsModel from_levels(const LevelSet& levels);

  // Lorentzian pump rate of sublevel s for a laser tone at offset
  // `tone_GHz` from the ensemble ZPL center, for a member detuned by
  // `member_GHz`.
  double pump_rate(int sublevel, double tone_GHz, double member_GHz) const;
};

struct EnsembleSpec {
  double zpl_center_GHz = 295071.0;  // 1016 nm; metadata only
  double inhomogeneous_fwhm_GHz = 50.0;
  int samples = 801;

  void validate() const;
};

// ------------------------------- time traces -------------------------------

struct LaserSegment {
  double duration_us = 0.0;
  std::vector<double> tone_offsets_GHz;  // empty = laser off
  bool mw_on = false;
};

struct PopulationTrace {
  std::vector<double> t_us;
  std::vector<Eigen::Vector4d> populations;  // (n0, n-, n+, ne)
  std::vector<double> pl;                    // sum_s R_s n_s
};

// Piecewise-constant schedule integrated by exact matrix-exponential
// stepping; dt sets the output sampling. Throws if populations go negative
// beyond 1e-9 or dt > 0.1 / max rate.
PopulationTrace evolve_populations(const OpticsModel& model,
                                   const std::vector<LaserSegment>& schedule,
                                   double dt_us, double member_GHz = 0.0,
                                   const Eigen::Vector4d& initial =
                                       Eigen::Vector4d(1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0));

// ------------------------------- pulsed ODMR -------------------------------

struct OdmrSequence {
  double t_init_us = 500.0;
  double t_read_us = 50.0;
  double dt_us = 0.5;
  double mw_linewidth_GHz = 0.05;  // resonance window for the pi swap
};

struct OdmrSpectrum {
  std::vector<double> f_GHz;
  std::vector<double> contrast;  // (PL_mw - PL_off) / PL_off
};

// init pulse -> pi-equivalent swap of sublevels resonant with the microwave
// frequency -> read pulse; degenerate pairs are swapped in pair order
// (0,-), (0,+), (-,+).
OdmrSpectrum pulsed_odmr_contrast(const OpticsModel& model,
                                  const std::vector<double>& mw_freqs_GHz,
                                  const OdmrSequence& seq = {});

// ------------------------------ T1 relaxometry ------------------------------

struct T1Result {
  std::vector<double> wait_us;
  std::vector<double> pl_read;
  double fitted_T1_us = 0.0;
  bool flagged = false;  // wait grid spans < ~3 T1
};

T1Result t1_sequence(const OpticsModel& model,
                     const std::vector<double>& wait_grid_us,
                     const OdmrSequence& seq = {});

// ------------------------------ hole burning ------------------------------

struct HoleBurnSpectrum {
  std::vector<double> delta_f_GHz;
  std::vector<double> pl;
  std::vector<double> pl_mw;     // present when a microwave drive is given
  std::vector<double> dodmr;     // pl_mw - pl
  bool has_mw = false;
  std::vector<std::string> warnings;
};

// Two-tone steady state integrated over the Gaussian inhomogeneous ensemble.
// The tones sit symmetrically at f_L -/+ df/2, which keeps PL(df) = PL(-df)
// exact for any ensemble. A hole appears at df = 0 and anti-holes at every
// ground-sublevel splitting.
HoleBurnSpectrum hole_burning_spectrum(const OpticsModel& model,
                                       const EnsembleSpec& ensemble,
                                       double f_L_GHz,
                                       const std::vector<double>& delta_f_GHz,
                                       bool with_mw = false,
                                       ExecPolicy policy = ExecPolicy::OpenMP);

}  // namespace spinclock
