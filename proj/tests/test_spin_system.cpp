#include "spinclock/spin_system.hpp"

#include "spinclock/constants.hpp"

#include <doctest.h>

using namespace spinclock;

namespace {

SpinSystem compound2() {
  SpinSystem sys;
  sys.D_GHz = 5.55;
  sys.E_GHz = 1.85;
  return sys;
}

SpinSystem compound1() {
  SpinSystem sys;
  sys.D_GHz = 3.63;
  sys.E_GHz = 0.0;
  return sys;
}

}  // namespace

TEST_CASE("zero-field spectrum matches the analytic ZFS eigenvalues") {
  const Eigen::Matrix3cd h = build_hamiltonian(compound2(), {});
  CHECK(hermiticity_defect(h) < 1e-14);
  CHECK(std::abs(h.trace()) < 1e-14);
  const LevelSet ls = diagonalize(h);
  CHECK(ls.energies_GHz(0) == doctest::Approx(-3.70).epsilon(1e-12));
  CHECK(ls.energies_GHz(1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ls.energies_GHz(2) == doctest::Approx(3.70).epsilon(1e-12));

  // generic (D, E): {-2D/3, D/3 - E, D/3 + E}
  SplitMix rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    SpinSystem sys;
    sys.D_GHz = 10.0 * rng.uniform();
    sys.E_GHz = sys.D_GHz / 3.0 * rng.uniform();
    const LevelSet l = diagonalize(build_hamiltonian(sys, {}));
    CHECK(std::abs(l.energies_GHz(0) + 2.0 * sys.D_GHz / 3.0) < 1e-9);
    CHECK(std::abs(l.energies_GHz(1) - (sys.D_GHz / 3.0 - sys.E_GHz)) < 1e-9);
    CHECK(std::abs(l.energies_GHz(2) - (sys.D_GHz / 3.0 + sys.E_GHz)) < 1e-9);
  }
}

TEST_CASE("D = E = 0 gives the zero matrix") {
  SpinSystem sys;
  sys.D_GHz = 0.0;
  sys.E_GHz = 0.0;
  const Eigen::Matrix3cd h = build_hamiltonian(sys, {});
  CHECK(max_abs(h) == 0.0);
  const LevelSet ls = diagonalize(Eigen::Matrix3cd::Zero());
  CHECK(ls.energies_GHz.norm() == 0.0);
  CHECK(max_abs(ls.states - Eigen::Matrix3cd::Identity()) < 1e-12);
}

TEST_CASE("axial system splits the |+-1> levels by 2 gamma B") {
  SpinSystem sys = compound1();
  sys.g = 2.0023;
  MagneticField f;
  f.mT = Eigen::Vector3d(0, 0, 100.0);
  const LevelSet ls = diagonalize(build_hamiltonian(sys, f));
  const double gamma = electron_gamma_GHz_per_mT(2.0023);
  CHECK(gamma == doctest::Approx(0.0280249).epsilon(2e-5));
  // m = +-1 levels: D/3 +- gamma B
  const double split = ls.energies_GHz(2) - ls.energies_GHz(0);
  CHECK(split == doctest::Approx(2.0 * gamma * 100.0).epsilon(1e-10));
  CHECK(split == doctest::Approx(2.0 * 2.8025).epsilon(1e-4));
}

TEST_CASE("diagonalize rejects non-Hermitian input and is a proper eigensolve") {
  Eigen::Matrix3cd bad = Eigen::Matrix3cd::Zero();
  bad(0, 1) = 1.0;  // no conjugate partner
  CHECK_THROWS_AS(diagonalize(bad), std::invalid_argument);

  SplitMix rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    Eigen::Matrix3cd a;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        a(i, j) = complexd(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
    const Eigen::Matrix3cd h = 0.5 * (a + a.adjoint());
    const LevelSet ls = diagonalize(h);
    CHECK(max_abs(ls.states.adjoint() * ls.states -
                  Eigen::Matrix3cd::Identity()) < 1e-12);
    const Eigen::Matrix3cd rebuilt = ls.states *
                                     ls.energies_GHz.cast<complexd>().asDiagonal() *
                                     ls.states.adjoint();
    CHECK(max_abs(rebuilt - h) < 1e-12);
    CHECK(ls.energies_GHz(0) <= ls.energies_GHz(1));
    CHECK(ls.energies_GHz(1) <= ls.energies_GHz(2));
  }
}

TEST_CASE("labels at zero field: |0> lowest, |-> at D/3 - E") {
  const LevelSet ls = labeled_levels(compound2(), {});
  CHECK(ls.energy_of(Level::Zero) == doctest::Approx(-3.70));
  CHECK(ls.energy_of(Level::Minus) == doctest::Approx(0.0));
  CHECK(ls.energy_of(Level::Plus) == doctest::Approx(3.70));
  // |-> = (|+1> - |-1>)/sqrt(2) up to gauge
  const Eigen::Vector3cd minus = ls.state_of(Level::Minus);
  CHECK(std::abs(minus(0)) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(std::abs(minus(2)) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(std::abs(minus(1)) < 1e-12);
  CHECK((minus(0) * std::conj(-minus(2))).real() > 0.0);
}

TEST_CASE("Zeeman parity: spectrum is even in B") {
  const SpinSystem sys = compound2();
  SplitMix rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::Vector3d b(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5);
    b *= 40.0;
    MagneticField fp, fm;
    fp.mT = b;
    fm.mT = -b;
    const LevelSet lp = diagonalize(build_hamiltonian(sys, fp));
    const LevelSet lm = diagonalize(build_hamiltonian(sys, fm));
    CHECK((lp.energies_GHz - lm.energies_GHz).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("frame invariance: rotating frame and field together") {
  SpinSystem sys = compound2();
  MagneticField f;
  f.mT = Eigen::Vector3d(12.0, -3.0, 7.0);
  const LevelSet base = diagonalize(build_hamiltonian(sys, f));

  SpinSystem rotated = sys;
  rotated.frame_euler_rad = Eigen::Vector3d(0.4, 0.9, -1.3);
  MagneticField f2;
  f2.mT = rotated.frame_rotation() * f.mT;
  const LevelSet rot = diagonalize(build_hamiltonian(rotated, f2));
  CHECK((base.energies_GHz - rot.energies_GHz).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("label continuity along a field sweep") {
  const SpinSystem sys = compound2();
  std::vector<double> grid;
  for (int i = 0; i <= 60; ++i) grid.push_back(i * 1.0);
  const auto rows = transition_map(sys, Eigen::Vector3d::UnitZ(), grid);
  REQUIRE(rows.size() == grid.size());
  // adjacent labeled eigenvectors overlap strongly (checked indirectly: the
  // transition frequencies evolve smoothly, no swaps)
  for (size_t i = 1; i < rows.size(); ++i)
    for (int p = 0; p < 3; ++p)
      CHECK(std::abs(rows[i].pairs[p].freq_GHz - rows[i - 1].pairs[p].freq_GHz) < 0.2);
}

TEST_CASE("transition map: compound 2 degeneracy and clock behavior at B = 0") {
  const SpinSystem sys = compound2();
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(0.1 * i);
  const auto rows = transition_map(sys, Eigen::Vector3d::UnitZ(), grid);
  const auto& first = rows.front();
  CHECK(first.pairs[0].freq_GHz == doctest::Approx(3.70));   // (0,-)
  CHECK(first.pairs[1].freq_GHz == doctest::Approx(7.40));   // (0,+)
  CHECK(first.pairs[2].freq_GHz == doctest::Approx(3.70));   // (-,+)
  CHECK(first.has_derivatives);
  for (int p = 0; p < 3; ++p)
    CHECK(std::abs(first.pairs[p].dfreq_dB) < 1e-4);
}

TEST_CASE("transition map: E = 0 Zeeman slopes are +-gamma") {
  SpinSystem sys = compound1();
  std::vector<double> grid;
  for (int i = 0; i <= 30; ++i) grid.push_back(0.05 * i);
  const auto rows = transition_map(sys, Eigen::Vector3d::UnitZ(), grid);
  const double gamma = sys.gamma_GHz_per_mT();
  // check at an interior point to avoid the one-sided end stencils
  const auto& mid = rows[15];
  CHECK(mid.pairs[0].dfreq_dB == doctest::Approx(-gamma).epsilon(1e-6));  // (0,-)
  CHECK(mid.pairs[1].dfreq_dB == doctest::Approx(gamma).epsilon(1e-6));   // (0,+)
  CHECK(mid.pairs[2].dfreq_dB == doctest::Approx(2 * gamma).epsilon(1e-6));
}

TEST_CASE("transition map with < 3 points flags missing derivatives") {
  const auto rows =
      transition_map(compound2(), Eigen::Vector3d::UnitZ(), {0.0, 1.0});
  CHECK_FALSE(rows.front().has_derivatives);
  CHECK_THROWS(transition_map(compound2(), Eigen::Vector3d::UnitZ(), {1.0, 0.5}));
}

namespace {

// Second-order perturbation oracle for the curvature of f = E_Y - E_X at
// B = 0, from the analytic zero-field eigensystem.
double curvature_oracle(const SpinSystem& sys, const Eigen::Vector3d& axis,
                        Level x, Level y) {
  const LevelSet ls = labeled_levels(sys, {});
  const SpinOps s1 = spin_operators(1.0);
  const Eigen::Vector3d n = axis.normalized();
  const Eigen::Matrix3cd v =
      sys.gamma_GHz_per_mT() * (n(0) * s1.x + n(1) * s1.y + n(2) * s1.z);
  auto shift = [&](Level lvl) {
    const int i = ls.index_of(lvl);
    double acc = 0.0;
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      const complexd vij = (ls.states.col(j).adjoint() * v * ls.states.col(i))(0);
      acc += std::norm(vij) / (ls.energies_GHz(i) - ls.energies_GHz(j));
    }
    return acc;
  };
  return 2.0 * (shift(y) - shift(x));
}

}  // namespace

TEST_CASE("clock figure matches second-order perturbation theory") {
  const SpinSystem sys = compound2();
  const ClockFigure fig = clock_figure(sys, Eigen::Vector3d::UnitZ());
  CHECK_FALSE(fig.linear_regime);
  CHECK(fig.stencil_step_mT == doctest::Approx(0.1));
  const double c01 = curvature_oracle(sys, Eigen::Vector3d::UnitZ(),
                                      Level::Zero, Level::Minus);
  const double c02 = curvature_oracle(sys, Eigen::Vector3d::UnitZ(),
                                      Level::Zero, Level::Plus);
  CHECK(fig.per_pair[0] == doctest::Approx(c01).epsilon(1e-4));
  CHECK(fig.per_pair[1] == doctest::Approx(c02).epsilon(1e-4));
  // hand value: transition (0,-) curves as -2 gamma^2 / (D/3 + E)
  const double gamma = sys.gamma_GHz_per_mT();
  CHECK(c01 == doctest::Approx(-2.0 * gamma * gamma / 3.70).epsilon(1e-12));
}

TEST_CASE("clock figure in the linear regime reports the Zeeman slope") {
  const ClockFigure fig = clock_figure(compound1(), Eigen::Vector3d::UnitZ());
  CHECK(fig.linear_regime);
  CHECK(std::abs(fig.per_pair[0]) == doctest::Approx(0.0280).epsilon(2e-3));
  CHECK(std::abs(fig.per_pair[2]) == doctest::Approx(0.0560).epsilon(2e-3));
}

TEST_CASE("clock curvature is anisotropic for E > 0") {
  const SpinSystem sys = compound2();
  const ClockFigure fx = clock_figure(sys, Eigen::Vector3d::UnitX());
  const ClockFigure fz = clock_figure(sys, Eigen::Vector3d::UnitZ());
  CHECK_FALSE(fx.linear_regime);
  for (int p = 0; p < 3; ++p) {
    CHECK(std::isfinite(fx.per_pair[p]));
    CHECK(std::isfinite(fz.per_pair[p]));
  }
  CHECK(std::abs(fx.per_pair[0] - fz.per_pair[0]) > 1e-6);
}

TEST_CASE("spin system validation") {
  SpinSystem sys;
  sys.D_GHz = 3.0;
  sys.E_GHz = 1.5;  // above D/3
  CHECK_THROWS_AS(sys.validate(), std::invalid_argument);
  sys.E_GHz = 1.0;  // exactly D/3 is allowed
  CHECK_NOTHROW(sys.validate());
  sys.g = -1.0;
  CHECK_THROWS_AS(sys.validate(), std::invalid_argument);
}
