#include "spinclock/spin_system.hpp"

#include "spinclock/constants.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace spinclock {

namespace {

// S = 1 operators in the m = +1, 0, -1 basis (cached).
const SpinOps& s1_ops() {
  static const SpinOps ops = spin_operators(1.0);
  return ops;
}

constexpr double k_seed_field_mT = 1e-3;
constexpr double k_degenerate_gap_GHz = 1e-9;

// Reference eigenvectors at B = 0: |0> = m0, |-> = (|+1> - |-1>)/sqrt(2),
// |+> = (|+1> + |-1>)/sqrt(2).
Eigen::Matrix3cd reference_states() {
  Eigen::Matrix3cd ref = Eigen::Matrix3cd::Zero();
  const double s = 1.0 / std::sqrt(2.0);
  ref(1, 0) = 1.0;            // |0>
  ref(0, 1) = s; ref(2, 1) = -s;  // |->
  ref(0, 2) = s; ref(2, 2) = s;   // |+>
  return ref;
}

// Greedy maximal-overlap assignment of labels from reference columns to the
// columns of `states`; ties broken by lowest label index, then column index.
std::array<Level, 3> assign_by_overlap(const Eigen::Matrix3cd& reference,
                                       const std::array<Level, 3>& ref_labels,
                                       const Eigen::Matrix3cd& states,
                                       double* worst_overlap = nullptr) {
  Eigen::Matrix3d ov;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      ov(r, c) = std::abs(reference.col(r).adjoint() * states.col(c));
  std::array<Level, 3> labels{Level::Zero, Level::Minus, Level::Plus};
  std::array<bool, 3> ref_used{false, false, false}, col_used{false, false, false};
  double worst = 1.0;
  for (int pick = 0; pick < 3; ++pick) {
    int best_r = -1, best_c = -1;
    double best = -1.0;
    for (int r = 0; r < 3; ++r) {
      if (ref_used[r]) continue;
      for (int c = 0; c < 3; ++c) {
        if (col_used[c]) continue;
        if (ov(r, c) > best + 1e-12) {
          best = ov(r, c);
          best_r = r;
          best_c = c;
        }
      }
    }
    ref_used[best_r] = col_used[best_c] = true;
    labels[best_c] = ref_labels[best_r];
    worst = std::min(worst, best);
  }
  if (worst_overlap) *worst_overlap = worst;
  return labels;
}

LevelSet labeled_at(const SpinSystem& sys, const Eigen::Vector3d& b_mT,
                    const LevelSet& previous, double* overlap) {
  MagneticField f;
  f.mT = b_mT;
  LevelSet ls = diagonalize(build_hamiltonian(sys, f));
  ls.labels = assign_by_overlap(previous.states, previous.labels, ls.states, overlap);
  return ls;
}

}  // namespace

void SpinSystem::validate() const {
  if (!(g > 0.0)) throw std::invalid_argument("SpinSystem: g must be positive");
  if (D_GHz < 0.0 || E_GHz < 0.0)
    throw std::invalid_argument("SpinSystem: D and E are taken non-negative");
  if (E_GHz > D_GHz / 3.0 + 1e-12)
    throw std::invalid_argument("SpinSystem: requires |E| <= |D|/3 (canonical axes)");
  if (!frame_euler_rad.allFinite() || !std::isfinite(D_GHz) || !std::isfinite(E_GHz))
    throw std::invalid_argument("SpinSystem: non-finite parameter");
}

Eigen::Matrix3d SpinSystem::frame_rotation() const {
  return rotation_zyz(frame_euler_rad(0), frame_euler_rad(1), frame_euler_rad(2));
}

double SpinSystem::gamma_GHz_per_mT() const {
  return electron_gamma_GHz_per_mT(g);
}

const char* to_string(Level level) {
  switch (level) {
    case Level::Zero: return "0";
    case Level::Minus: return "-";
    case Level::Plus: return "+";
  }
  return "?";
}

Level level_from_string(const std::string& s) {
  if (s == "0") return Level::Zero;
  if (s == "-") return Level::Minus;
  if (s == "+") return Level::Plus;
  throw std::invalid_argument("unknown level label '" + s + "' (expected 0, - or +)");
}

int LevelSet::index_of(Level level) const {
  for (int i = 0; i < 3; ++i)
    if (labels[i] == level) return i;
  throw std::logic_error("LevelSet: label not present");
}

double LevelSet::energy_of(Level level) const {
  return energies_GHz(index_of(level));
}

Eigen::Vector3cd LevelSet::state_of(Level level) const {
  return states.col(index_of(level));
}

Eigen::Matrix3cd build_hamiltonian(const SpinSystem& sys, const MagneticField& field) {
  sys.validate();
  if (!field.mT.allFinite())
    throw std::invalid_argument("MagneticField: non-finite component");
  const SpinOps& s = s1_ops();
  const Eigen::Vector3d b_mol = sys.frame_rotation().transpose() * field.mT;
  const double gamma = sys.gamma_GHz_per_mT();
  Eigen::Matrix3cd h =
      sys.D_GHz * (s.z * s.z - (2.0 / 3.0) * Eigen::Matrix3cd::Identity()) +
      sys.E_GHz * (s.x * s.x - s.y * s.y) +
      gamma * (b_mol(0) * s.x + b_mol(1) * s.y + b_mol(2) * s.z);
  return h;
}

LevelSet diagonalize(const Eigen::Matrix3cd& h) {
  if (hermiticity_defect(h) > 1e-10)
    throw std::invalid_argument("diagonalize: input is not Hermitian within 1e-10");
  const Eigen::Matrix3cd hs = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> solver(hs);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("diagonalize: eigensolver failed");
  LevelSet ls;
  ls.energies_GHz = solver.eigenvalues();
  ls.states = solver.eigenvectors();

  // Re-orthonormalize degenerate pairs deterministically in index order.
  for (int i = 0; i + 1 < 3; ++i) {
    if (ls.energies_GHz(i + 1) - ls.energies_GHz(i) < k_degenerate_gap_GHz) {
      Eigen::Vector3cd a = ls.states.col(i);
      Eigen::Vector3cd b = ls.states.col(i + 1);
      b -= a * (a.adjoint() * b)(0);
      ls.states.col(i + 1) = b.normalized();
    }
  }
  gauge_fix_columns(ls.states);
  ls.labels = {Level::Zero, Level::Minus, Level::Plus};
  return ls;
}

LevelSet labeled_levels(const SpinSystem& sys, const MagneticField& field,
                        const Eigen::Vector3d& seed_axis) {
  sys.validate();
  const double b_mag = field.mT.norm();
  Eigen::Vector3d axis = b_mag > k_seed_field_mT ? field.mT.normalized()
                                                 : seed_axis;
  if (axis.norm() < 1e-12) axis = Eigen::Vector3d::UnitZ();
  axis.normalize();

  // Label the seed point against the analytic B = 0 eigenbasis.
  LevelSet ref;
  ref.states = reference_states();
  ref.labels = {Level::Zero, Level::Minus, Level::Plus};
  double worst = 1.0;
  LevelSet current = labeled_at(sys, k_seed_field_mT * axis, ref, &worst);

  if (b_mag <= k_seed_field_mT) {
    // Working point is (numerically) zero field: evaluate there, carrying
    // the seeded labels across any degeneracy.
    double ov = 1.0;
    LevelSet at_field = labeled_at(sys, field.mT, current, &ov);
    at_field.resolved = true;
    return at_field;
  }

  // Ramp |B| from the seed to the target in steps of at most 1 mT.
  const int steps = std::max(8, static_cast<int>(std::ceil(b_mag)));
  for (int k = 1; k <= steps; ++k) {
    const double b = k_seed_field_mT +
                     (b_mag - k_seed_field_mT) * static_cast<double>(k) / steps;
    double ov = 1.0;
    current = labeled_at(sys, b * axis, current, &ov);
    worst = std::min(worst, ov);
  }
  current.resolved = worst > 0.6;
  return current;
}

std::vector<TransitionTable> transition_map(const SpinSystem& sys,
                                            const Eigen::Vector3d& axis,
                                            const std::vector<double>& b_grid_mT) {
  sys.validate();
  if (axis.norm() < 1e-12)
    throw std::invalid_argument("transition_map: zero axis");
  for (size_t i = 1; i < b_grid_mT.size(); ++i)
    if (b_grid_mT[i] <= b_grid_mT[i - 1])
      throw std::invalid_argument("transition_map: field grid must be ascending");
  const Eigen::Vector3d n = axis.normalized();

  const size_t npts = b_grid_mT.size();
  std::vector<TransitionTable> out(npts);
  // freq[p][i]: pair p frequency at grid point i.
  std::array<std::vector<double>, 3> freq;
  for (auto& f : freq) f.resize(npts);

  LevelSet prev;
  for (size_t i = 0; i < npts; ++i) {
    LevelSet ls;
    if (i == 0) {
      MagneticField f;
      f.mT = b_grid_mT[0] * n;
      ls = labeled_levels(sys, f, n);
    } else {
      ls = labeled_at(sys, b_grid_mT[i] * n, prev, nullptr);
    }
    prev = ls;
    const double e0 = ls.energy_of(Level::Zero);
    const double em = ls.energy_of(Level::Minus);
    const double ep = ls.energy_of(Level::Plus);
    freq[0][i] = std::abs(em - e0);
    freq[1][i] = std::abs(ep - e0);
    freq[2][i] = std::abs(ep - em);
    out[i].B_mT = b_grid_mT[i];
    for (int p = 0; p < 3; ++p) out[i].pairs[p].freq_GHz = freq[p][i];
  }

  if (npts >= 3) {
    for (size_t i = 0; i < npts; ++i) {
      out[i].has_derivatives = true;
      for (int p = 0; p < 3; ++p) {
        const auto& f = freq[p];
        double d1 = 0.0, d2 = 0.0;
        if (i == 0) {
          const double h1 = b_grid_mT[1] - b_grid_mT[0];
          const double h2 = b_grid_mT[2] - b_grid_mT[1];
          d1 = (f[1] - f[0]) / h1;
          d2 = 2.0 * (h1 * (f[2] - f[1]) - h2 * (f[1] - f[0])) /
               (h1 * h2 * (h1 + h2));
        } else if (i + 1 == npts) {
          const double h1 = b_grid_mT[i - 1] - b_grid_mT[i - 2];
          const double h2 = b_grid_mT[i] - b_grid_mT[i - 1];
          d1 = (f[i] - f[i - 1]) / h2;
          d2 = 2.0 * ((f[i] - f[i - 1]) / h2 - (f[i - 1] - f[i - 2]) / h1) /
               (h1 + h2);
        } else {
          const double hm = b_grid_mT[i] - b_grid_mT[i - 1];
          const double hp = b_grid_mT[i + 1] - b_grid_mT[i];
          d1 = (hm * hm * f[i + 1] - hp * hp * f[i - 1] +
                (hp * hp - hm * hm) * f[i]) /
               (hm * hp * (hm + hp));
          d2 = 2.0 * (hm * f[i + 1] + hp * f[i - 1] - (hm + hp) * f[i]) /
               (hm * hp * (hm + hp));
        }
        out[i].pairs[p].dfreq_dB = d1;
        out[i].pairs[p].d2freq_dB2 = d2;
      }
    }
  }
  return out;
}

ClockFigure clock_figure(const SpinSystem& sys, const Eigen::Vector3d& axis) {
  sys.validate();
  if (axis.norm() < 1e-12)
    throw std::invalid_argument("clock_figure: zero axis");
  const Eigen::Vector3d n = axis.normalized();
  const double h = 0.1;  // mT

  ClockFigure fig;
  fig.stencil_step_mT = h;

  auto freqs_at = [&](double b, const LevelSet& from) {
    LevelSet ls = labeled_at(sys, b * n, from, nullptr);
    std::array<double, 3> f;
    const double e0 = ls.energy_of(Level::Zero);
    const double em = ls.energy_of(Level::Minus);
    const double ep = ls.energy_of(Level::Plus);
    f = {std::abs(em - e0), std::abs(ep - e0), std::abs(ep - em)};
    return std::pair(f, ls);
  };

  MagneticField zero;
  LevelSet at0 = labeled_levels(sys, zero, n);

  if (sys.E_GHz == 0.0) {
    // Linear regime: transitions are not smooth through B = 0; report the
    // first-order slope from a forward 5-point stencil on [0, 4h].
    fig.linear_regime = true;
    std::array<std::array<double, 3>, 5> f;
    LevelSet prev = at0;
    for (int k = 0; k < 5; ++k) {
      auto [fk, ls] = freqs_at(k * h, prev);
      f[k] = fk;
      prev = ls;
    }
    for (int p = 0; p < 3; ++p) {
      fig.per_pair[p] = (-25.0 * f[0][p] + 48.0 * f[1][p] - 36.0 * f[2][p] +
                         16.0 * f[3][p] - 3.0 * f[4][p]) /
                        (12.0 * h);
    }
    return fig;
  }

  // Central 5-point second-derivative stencil; labels tracked outward from 0.
  std::array<std::array<double, 3>, 5> f;  // at -2h, -h, 0, +h, +2h
  {
    const double e0 = at0.energy_of(Level::Zero);
    const double em = at0.energy_of(Level::Minus);
    const double ep = at0.energy_of(Level::Plus);
    f[2] = {std::abs(em - e0), std::abs(ep - e0), std::abs(ep - em)};
  }
  LevelSet prev = at0;
  for (int k = 1; k <= 2; ++k) {
    auto [fk, ls] = freqs_at(k * h, prev);
    f[2 + k] = fk;
    prev = ls;
  }
  prev = at0;
  for (int k = 1; k <= 2; ++k) {
    auto [fk, ls] = freqs_at(-k * h, prev);
    f[2 - k] = fk;
    prev = ls;
  }
  for (int p = 0; p < 3; ++p) {
    fig.per_pair[p] = (-f[0][p] + 16.0 * f[1][p] - 30.0 * f[2][p] +
                       16.0 * f[3][p] - f[4][p]) /
                      (12.0 * h * h);
  }
  return fig;
}

}  // namespace spinclock
