#pragma once

#include "spinclock/bath.hpp"
#include "spinclock/spin_system.hpp"

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace spinclock {

enum class ExecPolicy { Serial, OpenMP };

// Qubit levels resolved at the working field; eigenvectors in the
// molecular-frame basis from the spin-core gauge.
struct QubitSubspace {
  Level a = Level::Zero;
  Level b = Level::Minus;
  Eigen::Vector3cd state_a, state_b, state_c;
};

// Throws if adiabatic labeling is ambiguous at the working field.
QubitSubspace resolve_qubit(const SpinSystem& sys, const MagneticField& field,
                            Level a = Level::Zero, Level b = Level::Minus);

struct Cluster {
  std::vector<int> ids;  // sorted ascending
  int order() const { return static_cast<int>(ids.size()); }
};

// All singletons plus every set of 2..max_order spins that are mutually
// within r_dipole, in lexicographic id order (sizes ascending).
std::vector<Cluster> enumerate_clusters(const BathModel& bath, int max_order,
                                        double r_dipole_nm);

// Hahn echo pi/2 - tau - pi - tau - pi/2 with instantaneous pulses acting on
// the qubit pair subspace only.
struct EchoProtocol {
  std::vector<double> tau_us;  // free-evolution half-times, >= 0, ascending
  static EchoProtocol linear(double two_tau_max_us, int points);
  void validate() const;
};

enum class BathStateMode { Mixed, Sampled };
enum class MeanFieldAxis { LabZ, LocalHyperfine };

struct CceOptions {
  int max_order = 2;
  BathStateMode mode = BathStateMode::Sampled;
  int n_mc = 100;
  uint64_t seed = 0;
  MeanFieldAxis mean_field_axis = MeanFieldAxis::LabZ;
  ExecPolicy policy = ExecPolicy::OpenMP;
  int cluster_dim_cap = 4096;
};

struct CceDiagnostics {
  std::vector<long> clusters_per_order;  // index 0 = singletons
  long skipped_divisors = 0;
  double wall_time_s = 0.0;
};

struct CoherenceCurve {
  std::vector<double> two_tau_us;
  std::vector<complexd> L;
  std::string mode;  // "mixed", "sampled" or "exact"
  int n_mc = 0;
  uint64_t seed = 0;
  std::string bath_hash;
  CceDiagnostics diagnostics;
};

// Fixed projection for every bath spin (units of m), quantized along the
// chosen axis; used for cluster initial product states and mean-field shifts.
struct OuterState {
  std::vector<double> m;
  MeanFieldAxis axis = MeanFieldAxis::LabZ;
};

// H = H_S x 1 + sum_k S.A_k.I_k + sum_k gamma_k B.I_k + sum_{k<l} I_k.J_kl.I_l
// over the cluster, in GHz, plus mean-field shifts from outer spins when an
// OuterState is given. Dimension 3 * prod(2 I_k + 1).
Eigen::MatrixXcd cluster_hamiltonian(const SpinSystem& sys,
                                     const MagneticField& field,
                                     const BathModel& bath,
                                     const Cluster& cluster,
                                     const OuterState* outer = nullptr,
                                     int dim_cap = 4096);

// Normalized echo amplitude L_C(2 tau) for one cluster. Mixed initial bath
// state when `outer` is null, sampled product state (plus mean field)
// otherwise.
std::vector<complexd> cluster_coherence(const SpinSystem& sys,
                                        const MagneticField& field,
                                        const BathModel& bath,
                                        const Cluster& cluster,
                                        const QubitSubspace& qubit,
                                        const EchoProtocol& protocol,
                                        const OuterState* outer = nullptr,
                                        int dim_cap = 4096);

// Generalized cluster-correlation expansion of the Hahn-echo coherence.
CoherenceCurve gcce_coherence(const SpinSystem& sys, const MagneticField& field,
                              const BathModel& bath, const QubitSubspace& qubit,
                              const EchoProtocol& protocol,
                              const CceOptions& opts);

// Full-Hilbert-space oracle, fully mixed bath; dimension capped at 1024.
CoherenceCurve exact_coherence(const SpinSystem& sys, const MagneticField& field,
                               const BathModel& bath, const QubitSubspace& qubit,
                               const EchoProtocol& protocol);

// U(t) = exp(-i 2 pi H t), H Hermitian in GHz, t in us.
Eigen::MatrixXcd propagator(const Eigen::MatrixXcd& h_GHz, double t_us);

}  // namespace spinclock
