// Compares the serial and OpenMP execution policies of the gCCE engine and
// the hole-burning ensemble integral on synthetic workloads, and checks that
// both policies produce identical results.

#include "spinclock/cce.hpp"
#include "spinclock/optics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

using namespace spinclock;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

BathModel synthetic_proton_bath(int n_spins, uint64_t seed) {
  SplitMix rng(seed);
  BathModel bath;
  bath.r_bath_nm = 1.5;
  bath.r_dipole_nm = 0.8;
  bath.seed = seed;
  const double gamma_e = electron_gamma_MHz_per_T(2.0023);
  while (static_cast<int>(bath.spins.size()) < n_spins) {
    Eigen::Vector3d pos(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0,
                        2.0 * rng.uniform() - 1.0);
    pos *= 1.5;
    const double r = pos.norm();
    if (r < 0.3 || r > 1.5) continue;
    bool crowded = false;
    for (const auto& s : bath.spins)
      if ((s.position_nm - pos).norm() < 0.2) {
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
      const Eigen::Vector3d r =
          bath.spins[j].position_nm - bath.spins[i].position_nm;
      if (r.norm() > bath.r_dipole_nm) continue;
      NuclearPair p;
      p.i = static_cast<int>(i);
      p.j = static_cast<int>(j);
      p.tensor_kHz = 1e3 * dipolar_tensor_MHz(bath.spins[i].gamma_MHz_per_T,
                                              bath.spins[j].gamma_MHz_per_T, r);
      bath.pairs.push_back(p);
    }
  bath.rebuild_adjacency();
  return bath;
}

}  // namespace

int main() {
  SpinSystem sys;
  sys.D_GHz = 5.55;
  sys.E_GHz = 1.85;
  MagneticField field;

  const BathModel bath = synthetic_proton_bath(120, 42);
  const QubitSubspace qubit = resolve_qubit(sys, field);
  const EchoProtocol protocol = EchoProtocol::linear(40.0, 31);

  CceOptions opts;
  opts.max_order = 2;
  opts.mode = BathStateMode::Sampled;
  opts.n_mc = 16;
  opts.seed = 7;

  std::printf("gCCE benchmark: %zu spins, %zu pairs, %zu tau points, %d samples\n",
              bath.spins.size(), bath.pairs.size(), protocol.tau_us.size(),
              opts.n_mc);

  opts.policy = ExecPolicy::Serial;
  auto t0 = std::chrono::steady_clock::now();
  const CoherenceCurve serial =
      gcce_coherence(sys, field, bath, qubit, protocol, opts);
  const double t_serial = seconds_since(t0);

  opts.policy = ExecPolicy::OpenMP;
  t0 = std::chrono::steady_clock::now();
  const CoherenceCurve parallel =
      gcce_coherence(sys, field, bath, qubit, protocol, opts);
  const double t_parallel = seconds_since(t0);

  double max_diff = 0.0;
  for (size_t i = 0; i < serial.L.size(); ++i)
    max_diff = std::max(max_diff, std::abs(serial.L[i] - parallel.L[i]));

  std::printf("  serial : %8.3f s\n", t_serial);
  std::printf("  openmp : %8.3f s  (speedup %.2fx)\n", t_parallel,
              t_serial / t_parallel);
  std::printf("  max |L_serial - L_openmp| = %.3e %s\n", max_diff,
              max_diff == 0.0 ? "(identical)" : "");

  OpticsModel model;
  model.ground_energies_GHz = Eigen::Vector3d(-3.7, 0.0, 3.7);
  EnsembleSpec ensemble;
  ensemble.samples = 1201;
  std::vector<double> grid;
  for (double x = -10.0; x <= 10.0 + 1e-9; x += 0.02) grid.push_back(x);

  std::printf("hole-burning benchmark: %d members x %zu detunings\n",
              ensemble.samples, grid.size());
  t0 = std::chrono::steady_clock::now();
  const HoleBurnSpectrum hb_serial =
      hole_burning_spectrum(model, ensemble, 0.0, grid, false, ExecPolicy::Serial);
  const double hb_t_serial = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const HoleBurnSpectrum hb_parallel =
      hole_burning_spectrum(model, ensemble, 0.0, grid, false, ExecPolicy::OpenMP);
  const double hb_t_parallel = seconds_since(t0);

  double hb_diff = 0.0;
  for (size_t i = 0; i < grid.size(); ++i)
    hb_diff = std::max(hb_diff, std::abs(hb_serial.pl[i] - hb_parallel.pl[i]));
  std::printf("  serial : %8.3f s\n", hb_t_serial);
  std::printf("  openmp : %8.3f s  (speedup %.2fx)\n", hb_t_parallel,
              hb_t_serial / hb_t_parallel);
  std::printf("  max |PL_serial - PL_openmp| = %.3e %s\n", hb_diff,
              hb_diff == 0.0 ? "(identical)" : "");
  return 0;
}
