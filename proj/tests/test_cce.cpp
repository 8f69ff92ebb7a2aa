#include "spinclock/cce.hpp"

#include "spinclock/constants.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace spinclock;
using spinclock::testing::random_proton_bath;
using spinclock::testing::single_spin_bath;

namespace {

SpinSystem compound2() {
  SpinSystem sys;
  sys.D_GHz = 5.55;
  sys.E_GHz = 1.85;
  return sys;
}

double max_abs_diff(const std::vector<complexd>& a, const std::vector<complexd>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("propagator convention: Larmor precession of a proton") {
  // gamma_H B at 1 T is 42.577 MHz; with H in GHz and t in us one period
  // is 1/42.577 us ~ 23.49 ns.
  const SpinOps half = spin_operators(0.5);
  const double splitting_GHz = k_gamma_1H_MHz_per_T * 1000.0 * 1e-6;  // 1 T
  const Eigen::MatrixXcd h = splitting_GHz * half.z;
  Eigen::VectorXcd plus_x(2);
  plus_x << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);

  const double period_us = 1.0 / (splitting_GHz * k_cycles_per_GHz_us);
  CHECK(period_us == doctest::Approx(0.0234867).epsilon(1e-4));

  auto ix_at = [&](double t_us) {
    const Eigen::VectorXcd psi = propagator(h, t_us) * plus_x;
    return (psi.adjoint() * half.x * psi)(0).real();
  };
  CHECK(ix_at(0.0) == doctest::Approx(0.5));
  CHECK(ix_at(period_us) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(ix_at(period_us / 2.0) == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(ix_at(period_us / 4.0) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("propagator unitarity on random cluster Hamiltonians") {
  const SpinSystem sys = compound2();
  MagneticField f;
  f.mT = Eigen::Vector3d(3.0, -2.0, 8.0);
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    const BathModel bath = random_proton_bath(3, seed);
    Cluster c;
    c.ids = {0, 1, 2};
    const Eigen::MatrixXcd h = cluster_hamiltonian(sys, f, bath, c);
    CHECK(hermiticity_defect(h) < 1e-12);
    for (double t : {0.13, 5.0, 42.0}) {
      const Eigen::MatrixXcd u = propagator(h, t);
      CHECK(max_abs(u.adjoint() * u -
                    Eigen::MatrixXcd::Identity(h.rows(), h.cols())) < 1e-10);
    }
  }
}

TEST_CASE("enumerate_clusters") {
  BathModel bath = random_proton_bath(3, 9, 0.4, 0.6, 0.02);

  SUBCASE("all mutually close: complete pair set") {
    auto clusters = enumerate_clusters(bath, 2, 10.0);
    REQUIRE(clusters.size() == 6);  // 3 singletons + 3 pairs
    CHECK(clusters[0].ids == std::vector<int>{0});
    CHECK(clusters[3].ids == std::vector<int>{0, 1});
    CHECK(clusters[5].ids == std::vector<int>{1, 2});
    auto triples = enumerate_clusters(bath, 3, 10.0);
    CHECK(triples.size() == 7);
  }

  SUBCASE("far apart: singletons only") {
    auto clusters = enumerate_clusters(bath, 2, 1e-4);
    CHECK(clusters.size() == 3);
  }

  SUBCASE("pair count matches a brute-force distance oracle") {
    const BathModel big = random_proton_bath(20, 123, 0.3, 1.0, 0.12);
    const double r_dip = 0.35;
    size_t expected = 0;
    for (size_t i = 0; i < big.spins.size(); ++i)
      for (size_t j = i + 1; j < big.spins.size(); ++j)
        if ((big.spins[i].position_nm - big.spins[j].position_nm).norm() <= r_dip)
          ++expected;
    auto clusters = enumerate_clusters(big, 2, r_dip);
    CHECK(clusters.size() == big.spins.size() + expected);
  }
}

TEST_CASE("cluster_hamiltonian: empty cluster is the bare central spin") {
  const SpinSystem sys = compound2();
  MagneticField f;
  f.mT = Eigen::Vector3d(0, 0, 10.0);
  const BathModel bath = random_proton_bath(2, 5);
  const Eigen::MatrixXcd h = cluster_hamiltonian(sys, f, bath, Cluster{});
  CHECK(h.rows() == 3);
  CHECK(max_abs(h - build_hamiltonian(sys, f)) < 1e-14);
}

TEST_CASE("cluster_hamiltonian: analytic 6x6 eigenvalues for diagonal A at B=0") {
  SpinSystem sys;
  sys.D_GHz = 3.0;
  sys.E_GHz = 0.0;
  const double ax = 4.0, az = 6.0;  // MHz
  const BathModel bath =
      single_spin_bath(Eigen::Vector3d(ax, ax, az).asDiagonal());
  Cluster c;
  c.ids = {0};
  const Eigen::MatrixXcd h = cluster_hamiltonian(sys, {}, bath, c);
  REQUIRE(h.rows() == 6);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);

  // Total-m blocks: two 1x1 at D/3 + az/2, two identical 2x2 blocks mixing
  // |+-1, -+1/2> with |0, +-1/2> through ax/sqrt(2).
  const double d3 = sys.D_GHz / 3.0;
  const double azg = az * 1e-3, axg = ax * 1e-3;
  const double e_stretch = d3 + 0.5 * azg;
  const double e1 = d3 - 0.5 * azg, e2 = -2.0 * d3;
  const double mean = 0.5 * (e1 + e2), delta = 0.5 * (e1 - e2);
  const double rad = std::sqrt(delta * delta + 0.5 * axg * axg);
  std::vector<double> expected = {mean - rad, mean - rad, mean + rad,
                                  mean + rad, e_stretch, e_stretch};
  std::sort(expected.begin(), expected.end());
  for (int i = 0; i < 6; ++i)
    CHECK(es.eigenvalues()(i) == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("mean field of a distant outer spin shifts the qubit transition") {
  SpinSystem sys;
  sys.D_GHz = 3.63;
  sys.E_GHz = 0.0;
  MagneticField f;
  f.mT = Eigen::Vector3d(0, 0, 50.0);

  BathModel bath = random_proton_bath(1, 3);
  Eigen::Matrix3d a;
  a << 0.8, 0.1, 0.0, 0.1, -0.3, 0.2, 0.0, 0.2, 1.9;  // MHz
  bath.spins[0].hyperfine_MHz = a;

  OuterState outer;
  outer.axis = MeanFieldAxis::LabZ;
  outer.m = {0.5};

  // Empty cluster: the 3x3 electron Hamiltonian carries the Knight shift.
  const Eigen::MatrixXcd h0 = cluster_hamiltonian(sys, f, bath, Cluster{});
  const Eigen::MatrixXcd h1 = cluster_hamiltonian(sys, f, bath, Cluster{}, &outer);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es0(h0), es1(h1);

  // First-order oracle: shift_i = m * <i| S.(A z) |i> * 1e-3, evaluated in
  // the unperturbed eigenbasis (at 50 mT along z the eigenstates are m-states
  // ordered m = 0, -1, +1 by energy).
  const SpinOps s1 = spin_operators(1.0);
  const Eigen::Vector3d knight = a * Eigen::Vector3d::UnitZ();  // MHz
  const Eigen::Matrix3cd v =
      1e-3 * 0.5 * (knight(0) * s1.x + knight(1) * s1.y + knight(2) * s1.z);
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3cd state = es0.eigenvectors().col(i);
    const double shift = (state.adjoint() * v * state)(0).real();
    if (std::abs(shift) < 1e-6) continue;  // m = +1,0 carry no z moment here
    CHECK(es1.eigenvalues()(i) - es0.eigenvalues()(i) ==
          doctest::Approx(shift).epsilon(0.05));
  }
  // The dominant effect on the (0, -1) transition is m * A_zz / 2 in MHz.
  const double f0 = es0.eigenvalues()(1) - es0.eigenvalues()(0);
  const double f1 = es1.eigenvalues()(1) - es1.eigenvalues()(0);
  CHECK(std::abs((f1 - f0) * 1e3) == doctest::Approx(0.5 * a(2, 2)).epsilon(0.05));
}

TEST_CASE("cluster_coherence: decoupled and secular baths refocus fully") {
  const SpinSystem sys = compound2();
  const QubitSubspace qubit = resolve_qubit(sys, {});
  const EchoProtocol protocol = EchoProtocol::linear(20.0, 11);

  SUBCASE("zero hyperfine") {
    BathModel bath = single_spin_bath(Eigen::Matrix3d::Zero());
    Cluster c;
    c.ids = {0};
    const auto L = cluster_coherence(sys, {}, bath, c, qubit, protocol);
    for (const auto& l : L) CHECK(std::abs(l - complexd(1.0, 0.0)) < 1e-12);
  }

  SUBCASE("purely secular coupling at finite field") {
    SpinSystem axial;
    axial.D_GHz = 3.63;
    MagneticField f;
    f.mT = Eigen::Vector3d(0, 0, 50.0);
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    a(2, 2) = 2.5;  // only S_z A_zz I_z in the qubit eigenbasis
    const BathModel bath = single_spin_bath(a);
    const QubitSubspace q50 = resolve_qubit(axial, f);
    Cluster c;
    c.ids = {0};
    const auto L = cluster_coherence(axial, f, bath, c, q50, protocol);
    for (const auto& l : L) CHECK(std::abs(std::abs(l) - 1.0) < 1e-10);
  }
}

TEST_CASE("ESEEM: engine reproduces the closed-form two-frequency envelope") {
  // Anisotropic coupling limited to the S_z row keeps the Hamiltonian block
  // diagonal in the electron basis, where the echo envelope for one I=1/2 is
  // exactly L = 1 - 2 (1 - cos^2 theta) sin^2(pi w_a t) sin^2(pi w_b t) with
  // w_a, w_b the conditional nuclear frequencies of the two qubit levels.
  SpinSystem sys;
  sys.D_GHz = 3.63;
  sys.E_GHz = 0.0;
  sys.g = 2.0023;
  MagneticField f;
  f.mT = Eigen::Vector3d(0, 0, 50.0);

  const double azx = 2.0, azz = 1.5;  // MHz
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  a(2, 0) = azx;
  a(2, 2) = azz;
  const BathModel bath = single_spin_bath(a);
  const QubitSubspace qubit = resolve_qubit(sys, f);  // (|0>, m=-1)

  const EchoProtocol protocol = EchoProtocol::linear(8.0, 161);
  Cluster c;
  c.ids = {0};
  const auto L = cluster_coherence(sys, f, bath, c, qubit, protocol);

  const double w_i = k_gamma_1H_MHz_per_T * 50.0 * 1e-6;  // GHz
  const Eigen::Vector3d h_a(0.0, 0.0, w_i);
  const Eigen::Vector3d h_b(-azx * 1e-3, 0.0, w_i - azz * 1e-3);
  const double w_a = h_a.norm(), w_b = h_b.norm();
  const double cos_t = h_a.dot(h_b) / (w_a * w_b);
  const double k_mod = 1.0 - cos_t * cos_t;
  CHECK(k_mod > 0.5);  // deep modulation, a meaningful test

  for (size_t i = 0; i < protocol.tau_us.size(); ++i) {
    const double tau = protocol.tau_us[i];
    const double sa = std::sin(M_PI * k_cycles_per_GHz_us * w_a * tau);
    const double sb = std::sin(M_PI * k_cycles_per_GHz_us * w_b * tau);
    const double expected = 1.0 - 2.0 * k_mod * sa * sa * sb * sb;
    CHECK(std::abs(L[i].real() - expected) < 1e-6);
    CHECK(std::abs(L[i].imag()) < 1e-6);
  }
}

TEST_CASE("gcce: empty bath gives L = 1") {
  const SpinSystem sys = compound2();
  BathModel bath;
  bath.rebuild_adjacency();
  const QubitSubspace qubit = resolve_qubit(sys, {});
  CceOptions opts;
  opts.mode = BathStateMode::Mixed;
  const CoherenceCurve curve = gcce_coherence(
      sys, {}, bath, qubit, EchoProtocol::linear(10.0, 6), opts);
  for (const auto& l : curve.L) CHECK(std::abs(l - complexd(1, 0)) < 1e-12);
}

TEST_CASE("gcce at full order equals the exact oracle; order 2 is close") {
  const SpinSystem sys = compound2();
  MagneticField f;
  f.mT = Eigen::Vector3d(0, 0, 5.0);
  const QubitSubspace qubit = resolve_qubit(sys, f);
  const EchoProtocol protocol = EchoProtocol::linear(20.0, 21);

  for (uint64_t seed : {11ull, 22ull, 33ull}) {
    const BathModel bath = random_proton_bath(5, seed);
    const CoherenceCurve exact = exact_coherence(sys, f, bath, qubit, protocol);
    CHECK(std::abs(exact.L.front() - complexd(1, 0)) < 1e-9);
    for (const auto& l : exact.L) CHECK(std::abs(l) <= 1.0 + 1e-6);

    CceOptions full;
    full.max_order = 5;
    full.mode = BathStateMode::Mixed;
    const CoherenceCurve gcce_full =
        gcce_coherence(sys, f, bath, qubit, protocol, full);
    CHECK(max_abs_diff(gcce_full.L, exact.L) < 1e-8);

    CceOptions order2;
    order2.max_order = 2;
    order2.mode = BathStateMode::Mixed;
    const CoherenceCurve gcce2 =
        gcce_coherence(sys, f, bath, qubit, protocol, order2);
    CHECK(max_abs_diff(gcce2.L, exact.L) < 0.05);
    for (const auto& l : gcce2.L) CHECK(std::abs(l) <= 1.0 + 1e-6);
  }
}

TEST_CASE("single-spin bath: exact equals the singleton cluster") {
  SpinSystem sys = compound2();
  MagneticField f;
  f.mT = Eigen::Vector3d(0, 0, 20.0);
  const BathModel bath = random_proton_bath(1, 77);
  const QubitSubspace qubit = resolve_qubit(sys, f);
  const EchoProtocol protocol = EchoProtocol::linear(15.0, 16);
  const CoherenceCurve exact = exact_coherence(sys, f, bath, qubit, protocol);
  Cluster c;
  c.ids = {0};
  const auto single = cluster_coherence(sys, f, bath, c, qubit, protocol);
  CHECK(max_abs_diff(exact.L, single) < 1e-12);
}

TEST_CASE("permuting bath spin ids leaves L unchanged") {
  const SpinSystem sys = compound2();
  MagneticField f;
  f.mT = Eigen::Vector3d(0, 0, 8.0);
  const BathModel bath = random_proton_bath(6, 4242, 0.3, 0.7, 0.2);

  // reversed id order
  BathModel permuted = bath;
  const int n = static_cast<int>(bath.spins.size());
  for (int i = 0; i < n; ++i) {
    permuted.spins[i] = bath.spins[n - 1 - i];
    permuted.spins[i].id = i;
  }
  permuted.pairs.clear();
  for (const auto& p : bath.pairs) {
    NuclearPair q;
    q.i = n - 1 - p.j;
    q.j = n - 1 - p.i;
    q.tensor_kHz = p.tensor_kHz;  // symmetric, orientation unchanged
    if (q.i > q.j) std::swap(q.i, q.j);
    permuted.pairs.push_back(q);
  }
  permuted.rebuild_adjacency();

  const QubitSubspace qubit = resolve_qubit(sys, f);
  const EchoProtocol protocol = EchoProtocol::linear(20.0, 11);
  CceOptions opts;
  opts.max_order = 2;
  opts.mode = BathStateMode::Mixed;
  const CoherenceCurve a = gcce_coherence(sys, f, bath, qubit, protocol, opts);
  const CoherenceCurve b = gcce_coherence(sys, f, permuted, qubit, protocol, opts);
  CHECK(max_abs_diff(a.L, b.L) < 1e-10);
}

TEST_CASE("sampled mode: determinism and serial/openmp equality") {
  const SpinSystem sys = compound2();
  const BathModel bath = random_proton_bath(8, 99, 0.3, 0.8, 0.18);
  const QubitSubspace qubit = resolve_qubit(sys, {});
  const EchoProtocol protocol = EchoProtocol::linear(20.0, 11);

  CceOptions opts;
  opts.max_order = 2;
  opts.mode = BathStateMode::Sampled;
  opts.n_mc = 10;
  opts.seed = 1234;

  const CoherenceCurve a = gcce_coherence(sys, {}, bath, qubit, protocol, opts);
  const CoherenceCurve b = gcce_coherence(sys, {}, bath, qubit, protocol, opts);
  CHECK(max_abs_diff(a.L, b.L) == 0.0);

  opts.policy = ExecPolicy::Serial;
  const CoherenceCurve c = gcce_coherence(sys, {}, bath, qubit, protocol, opts);
  CHECK(max_abs_diff(a.L, c.L) == 0.0);

  opts.seed = 4321;
  opts.policy = ExecPolicy::OpenMP;
  const CoherenceCurve d = gcce_coherence(sys, {}, bath, qubit, protocol, opts);
  CHECK(max_abs_diff(a.L, d.L) > 0.0);

  CHECK(a.L.front().real() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(a.diagnostics.clusters_per_order.size() == 2);
  CHECK(a.diagnostics.clusters_per_order[0] == 8);
}

TEST_CASE("sampled mode converges with N_mc") {
  const SpinSystem sys = compound2();
  const BathModel bath = random_proton_bath(10, 7, 0.3, 0.8, 0.16);
  const QubitSubspace qubit = resolve_qubit(sys, {});
  const EchoProtocol protocol = EchoProtocol::linear(30.0, 8);

  CceOptions opts;
  opts.max_order = 2;
  opts.mode = BathStateMode::Sampled;
  opts.seed = 2024;

  opts.n_mc = 100;
  const CoherenceCurve a = gcce_coherence(sys, {}, bath, qubit, protocol, opts);
  opts.n_mc = 200;
  const CoherenceCurve b = gcce_coherence(sys, {}, bath, qubit, protocol, opts);

  double rms = 0.0;
  for (size_t i = 0; i < a.L.size(); ++i) {
    const double d = std::abs(a.L[i]) - std::abs(b.L[i]);
    rms += d * d;
  }
  rms = std::sqrt(rms / a.L.size());
  CHECK(rms < 2.0 / std::sqrt(100.0));
}

TEST_CASE("mean-field axis option changes the sampled result only mildly") {
  const SpinSystem sys = compound2();
  const BathModel bath = random_proton_bath(6, 15, 0.3, 0.7, 0.2);
  const QubitSubspace qubit = resolve_qubit(sys, {});
  const EchoProtocol protocol = EchoProtocol::linear(20.0, 6);

  CceOptions opts;
  opts.mode = BathStateMode::Sampled;
  opts.n_mc = 8;
  opts.seed = 5;
  const CoherenceCurve labz = gcce_coherence(sys, {}, bath, qubit, protocol, opts);
  opts.mean_field_axis = MeanFieldAxis::LocalHyperfine;
  const CoherenceCurve hf = gcce_coherence(sys, {}, bath, qubit, protocol, opts);
  CHECK(labz.L.size() == hf.L.size());
  // both are valid coherences
  for (size_t i = 0; i < labz.L.size(); ++i) {
    CHECK(std::abs(labz.L[i]) < 1.3);
    CHECK(std::abs(hf.L[i]) < 1.3);
  }
}

TEST_CASE("exact oracle enforces its dimension cap") {
  const SpinSystem sys = compound2();
  const BathModel bath = random_proton_bath(9, 3, 0.3, 0.9, 0.15);  // 3*2^9 > 1024
  const QubitSubspace qubit = resolve_qubit(sys, {});
  CHECK_THROWS_AS(
      exact_coherence(sys, {}, bath, qubit, EchoProtocol::linear(1.0, 2)),
      std::runtime_error);
}

TEST_CASE("resolve_qubit rejects identical labels") {
  CHECK_THROWS_AS(resolve_qubit(compound2(), {}, Level::Zero, Level::Zero),
                  std::invalid_argument);
}
