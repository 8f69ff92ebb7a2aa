#include "spinclock/cce.hpp"

#include "spinclock/constants.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

namespace spinclock {

namespace {

constexpr double k_divisor_floor = 1e-10;

Eigen::Vector3d mean_field_axis_for(const BathSpin& spin, MeanFieldAxis axis) {
  if (axis == MeanFieldAxis::LabZ) return Eigen::Vector3d::UnitZ();
  // Local hyperfine axis: principal axis of sym(A) with the largest
  // |eigenvalue|, sign fixed so the largest component is positive.
  const Eigen::Matrix3d sym =
      0.5 * (spin.hyperfine_MHz + spin.hyperfine_MHz.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(sym);
  int imax = 0;
  es.eigenvalues().cwiseAbs().maxCoeff(&imax);
  Eigen::Vector3d n = es.eigenvectors().col(imax);
  int cmax = 0;
  n.cwiseAbs().maxCoeff(&cmax);
  if (n(cmax) < 0.0) n = -n;
  return n;
}

struct ClusterSpace {
  std::vector<int> dims;        // 3, then 2I+1 per member
  std::vector<SpinOps> ops;     // per member
  int dim_bath = 1;
  int dim_total = 3;
};

ClusterSpace make_space(const BathModel& bath, const Cluster& cluster, int dim_cap) {
  ClusterSpace sp;
  sp.dims.push_back(3);
  for (int id : cluster.ids) {
    const auto& s = bath.spins.at(id);
    SpinOps ops = spin_operators(s.spin);
    sp.dim_bath *= ops.dim;
    sp.dims.push_back(ops.dim);
    sp.ops.push_back(std::move(ops));
  }
  sp.dim_total = 3 * sp.dim_bath;
  if (sp.dim_total > dim_cap)
    throw std::runtime_error("cluster dimension " + std::to_string(sp.dim_total) +
                             " exceeds cap " + std::to_string(dim_cap));
  return sp;
}

}  // namespace

QubitSubspace resolve_qubit(const SpinSystem& sys, const MagneticField& field,
                            Level a, Level b) {
  if (a == b) throw std::invalid_argument("resolve_qubit: levels must differ");
  const LevelSet ls = labeled_levels(sys, field);
  if (!ls.resolved)
    throw std::runtime_error(
        "resolve_qubit: adiabatic labeling ambiguous at the working field");
  QubitSubspace q;
  q.a = a;
  q.b = b;
  q.state_a = ls.state_of(a);
  q.state_b = ls.state_of(b);
  for (Level c : {Level::Zero, Level::Minus, Level::Plus})
    if (c != a && c != b) q.state_c = ls.state_of(c);
  return q;
}

std::vector<Cluster> enumerate_clusters(const BathModel& bath, int max_order,
                                        double r_dipole_nm) {
  if (max_order < 1)
    throw std::invalid_argument("enumerate_clusters: max_order must be >= 1");
  const int n = static_cast<int>(bath.spins.size());
  std::vector<Cluster> out;
  for (int i = 0; i < n; ++i) out.push_back({{i}});
  if (max_order == 1 || n < 2) return out;

  auto close = [&](int i, int j) {
    return (bath.spins[i].position_nm - bath.spins[j].position_nm).norm() <=
           r_dipole_nm;
  };

  // Grow size-k sets into size-k+1 sets by appending larger ids that are
  // within r_dipole of every member; lexicographic order is preserved.
  std::vector<std::vector<int>> current;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (close(i, j)) current.push_back({i, j});
  for (const auto& c : current) out.push_back({c});

  for (int order = 3; order <= max_order; ++order) {
    std::vector<std::vector<int>> next;
    for (const auto& c : current)
      for (int cand = c.back() + 1; cand < n; ++cand) {
        bool ok = true;
        for (int m : c)
          if (!close(m, cand)) {
            ok = false;
            break;
          }
        if (ok) {
          auto grown = c;
          grown.push_back(cand);
          next.push_back(std::move(grown));
        }
      }
    for (const auto& c : next) out.push_back({c});
    current = std::move(next);
    if (current.empty()) break;
  }
  return out;
}

EchoProtocol EchoProtocol::linear(double two_tau_max_us, int points) {
  if (points < 2 || two_tau_max_us <= 0.0)
    throw std::invalid_argument("EchoProtocol::linear: bad grid");
  EchoProtocol p;
  p.tau_us.resize(points);
  for (int i = 0; i < points; ++i)
    p.tau_us[i] = 0.5 * two_tau_max_us * i / (points - 1);
  return p;
}

void EchoProtocol::validate() const {
  if (tau_us.empty()) throw std::invalid_argument("EchoProtocol: empty tau grid");
  for (size_t i = 0; i < tau_us.size(); ++i) {
    if (tau_us[i] < 0.0)
      throw std::invalid_argument("EchoProtocol: tau must be >= 0");
    if (i > 0 && tau_us[i] < tau_us[i - 1])
      throw std::invalid_argument("EchoProtocol: tau grid must be ascending");
  }
}

Eigen::MatrixXcd cluster_hamiltonian(const SpinSystem& sys,
                                     const MagneticField& field,
                                     const BathModel& bath,
                                     const Cluster& cluster,
                                     const OuterState* outer, int dim_cap) {
  for (int id : cluster.ids)
    if (id < 0 || id >= static_cast<int>(bath.spins.size()))
      throw std::invalid_argument("cluster_hamiltonian: id out of range");
  if (outer && outer->m.size() != bath.spins.size())
    throw std::invalid_argument("cluster_hamiltonian: outer state size mismatch");

  const ClusterSpace sp = make_space(bath, cluster, dim_cap);
  const int nmem = cluster.order();
  const Eigen::Matrix3d frame = sys.frame_rotation();

  // Electron operators in the molecular-frame basis; laboratory components
  // are frame * S_mol.
  const SpinOps s1 = spin_operators(1.0);
  std::array<Eigen::MatrixXcd, 3> s_lab;
  for (int u = 0; u < 3; ++u)
    s_lab[u] = frame(u, 0) * s1.x + frame(u, 1) * s1.y + frame(u, 2) * s1.z;

  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(sp.dim_total, sp.dim_total);

  // Central-spin part, including the mean field of outer spins.
  Eigen::Matrix3cd hs = build_hamiltonian(sys, field);
  if (outer) {
    Eigen::Vector3d knight = Eigen::Vector3d::Zero();  // lab frame, MHz
    for (const auto& s : bath.spins) {
      if (std::find(cluster.ids.begin(), cluster.ids.end(), s.id) !=
          cluster.ids.end())
        continue;
      const Eigen::Vector3d axis = mean_field_axis_for(s, outer->axis);
      knight += outer->m[s.id] * (s.hyperfine_MHz * axis);
    }
    for (int u = 0; u < 3; ++u) hs += 1e-3 * knight(u) * s_lab[u];
  }
  h += embed(hs, 0, sp.dims);

  for (int k = 0; k < nmem; ++k) {
    const BathSpin& spin_k = bath.spins[cluster.ids[k]];
    const auto& ik = sp.ops[k];
    const std::array<const Eigen::MatrixXcd*, 3> i_ops = {&ik.x, &ik.y, &ik.z};

    // Hyperfine S.A.I (A in MHz -> GHz).
    for (int v = 0; v < 3; ++v) {
      Eigen::Matrix3cd ev = Eigen::Matrix3cd::Zero();
      for (int u = 0; u < 3; ++u)
        ev += 1e-3 * spin_k.hyperfine_MHz(u, v) * s_lab[u];
      h += kron(embed(ev, 0, {3}),
                embed(*i_ops[v], k, std::vector<int>(sp.dims.begin() + 1, sp.dims.end())));
    }

    // Nuclear Zeeman gamma_k B.I (MHz/T * mT -> GHz is 1e-6).
    Eigen::MatrixXcd zk = Eigen::MatrixXcd::Zero(ik.dim, ik.dim);
    for (int v = 0; v < 3; ++v)
      zk += 1e-6 * spin_k.gamma_MHz_per_T * field.mT(v) * *i_ops[v];

    // Mean field of outer spins on this nucleus (J in kHz -> GHz is 1e-6).
    if (outer) {
      if (bath.adjacency.size() != bath.spins.size())
        throw std::logic_error(
            "cluster_hamiltonian: bath adjacency missing; call rebuild_adjacency()");
      Eigen::Vector3d local = Eigen::Vector3d::Zero();  // kHz
      for (int pk : bath.adjacency[spin_k.id]) {
        const NuclearPair& p = bath.pairs[pk];
        const bool outer_is_first = (p.j == spin_k.id);
        const int other = outer_is_first ? p.i : p.j;
        if (std::find(cluster.ids.begin(), cluster.ids.end(), other) !=
            cluster.ids.end())
          continue;
        const Eigen::Vector3d axis =
            mean_field_axis_for(bath.spins[other], outer->axis);
        // (m n).J.I contracts the outer spin with the tensor slot it owns.
        local += outer->m[other] * (outer_is_first
                                        ? Eigen::Vector3d(p.tensor_kHz.transpose() * axis)
                                        : Eigen::Vector3d(p.tensor_kHz * axis));
      }
      for (int v = 0; v < 3; ++v) zk += 1e-6 * local(v) * *i_ops[v];
    }
    h += embed(zk, 1 + k, sp.dims);

    // Nuclear pair couplings inside the cluster.
    for (int l = k + 1; l < nmem; ++l) {
      const NuclearPair* pair = bath.find_pair(cluster.ids[k], cluster.ids[l]);
      if (!pair) continue;
      const auto& il = sp.ops[l];
      const std::array<const Eigen::MatrixXcd*, 3> l_ops = {&il.x, &il.y, &il.z};
      const bool swapped = pair->i != cluster.ids[k];
      for (int u = 0; u < 3; ++u)
        for (int v = 0; v < 3; ++v) {
          const double j_kHz =
              swapped ? pair->tensor_kHz(v, u) : pair->tensor_kHz(u, v);
          if (j_kHz == 0.0) continue;
          h += 1e-6 * j_kHz *
               (embed(*i_ops[u], 1 + k, sp.dims) *
                embed(*l_ops[v], 1 + l, sp.dims));
        }
    }
  }
  return h;
}

Eigen::MatrixXcd propagator(const Eigen::MatrixXcd& h_GHz, double t_us) {
  if (hermiticity_defect(h_GHz) > 1e-9)
    throw std::invalid_argument("propagator: Hamiltonian is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h_GHz);
  const double phase_scale = -2.0 * M_PI * k_cycles_per_GHz_us * t_us;
  Eigen::VectorXcd e(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < e.size(); ++i)
    e(i) = std::polar(1.0, phase_scale * es.eigenvalues()(i));
  return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().adjoint();
}

std::vector<complexd> cluster_coherence(const SpinSystem& sys,
                                        const MagneticField& field,
                                        const BathModel& bath,
                                        const Cluster& cluster,
                                        const QubitSubspace& qubit,
                                        const EchoProtocol& protocol,
                                        const OuterState* outer, int dim_cap) {
  protocol.validate();
  const ClusterSpace sp = make_space(bath, cluster, dim_cap);
  const int dim = sp.dim_total;
  const int dc = sp.dim_bath;

  const Eigen::MatrixXcd h =
      cluster_hamiltonian(sys, field, bath, cluster, outer, dim_cap);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("cluster_coherence: eigensolver failed");
  const Eigen::MatrixXcd& v = es.eigenvectors();
  const Eigen::VectorXd& lam = es.eigenvalues();

  // pi pulse on the qubit pair, identity elsewhere.
  Eigen::Matrix3cd p3 = qubit.state_a * qubit.state_b.adjoint() +
                        qubit.state_b * qubit.state_a.adjoint() +
                        qubit.state_c * qubit.state_c.adjoint();
  const Eigen::MatrixXcd pulse =
      kron(p3, Eigen::MatrixXcd::Identity(dc, dc));
  const Eigen::MatrixXcd w = v.adjoint() * pulse * v;

  const Eigen::Vector3cd psi0 =
      (qubit.state_a + qubit.state_b) / std::sqrt(2.0);

  // Columns of the initial block: psi0 x |j> for the mixed state, or the
  // single product state |chi> in sampled mode.
  Eigen::MatrixXcd y0;
  int ncols = 0;
  if (!outer) {
    ncols = dc;
    Eigen::MatrixXcd psi_block(dim, dc);
    psi_block.setZero();
    for (int j = 0; j < dc; ++j)
      for (int s = 0; s < 3; ++s) psi_block(s * dc + j, j) = psi0(s);
    y0 = v.adjoint() * psi_block;
  } else {
    ncols = 1;
    int idx = 0;
    for (int k = 0; k < cluster.order(); ++k) {
      const BathSpin& s = bath.spins[cluster.ids[k]];
      // m runs I, I-1, ..., -I down the basis; pick the sampled projection.
      const int pos = static_cast<int>(std::lround(s.spin - outer->m[s.id]));
      idx = idx * sp.ops[k].dim + pos;
    }
    Eigen::VectorXcd chi_col = Eigen::VectorXcd::Zero(dim);
    for (int s = 0; s < 3; ++s) chi_col(s * dc + idx) = psi0(s);
    y0 = v.adjoint() * chi_col;
  }

  const double phase_scale = -2.0 * M_PI * k_cycles_per_GHz_us;

  auto amplitude_at = [&](double tau) {
    Eigen::VectorXcd e(dim);
    for (int i = 0; i < dim; ++i)
      e(i) = std::polar(1.0, phase_scale * lam(i) * tau);
    // X = V E W E y0: evolve, pulse, evolve.
    Eigen::MatrixXcd x = e.asDiagonal() * y0;
    x = w * x;
    x = e.asDiagonal() * x;
    x = v * x;
    // L = (1/ncols) sum_j <a| tr_C |psi_j><psi_j| |b>.
    complexd acc(0.0, 0.0);
    for (int j = 0; j < ncols; ++j)
      for (int m = 0; m < dc; ++m) {
        complexd xa(0.0, 0.0), xb(0.0, 0.0);
        for (int s = 0; s < 3; ++s) {
          xa += std::conj(qubit.state_a(s)) * x(s * dc + m, j);
          xb += std::conj(qubit.state_b(s)) * x(s * dc + m, j);
        }
        acc += xa * std::conj(xb);
      }
    return acc / static_cast<double>(ncols);
  };

  const complexd norm = amplitude_at(0.0);
  if (std::abs(norm) < 1e-12)
    throw std::runtime_error("cluster_coherence: vanishing tau=0 amplitude");

  std::vector<complexd> out(protocol.tau_us.size());
  for (size_t t = 0; t < protocol.tau_us.size(); ++t)
    out[t] = amplitude_at(protocol.tau_us[t]) / norm;
  return out;
}

namespace {

struct ClusterKey {
  std::vector<int> ids;
  bool operator<(const ClusterKey& o) const { return ids < o.ids; }
};

// L-tilde bookkeeping for one pass over the cluster list (which is ordered by
// size): divide each raw L_C by the already-computed factors of its proper
// subclusters, guarding vanishing divisors.
class CceAccumulator {
 public:
  CceAccumulator(const std::vector<Cluster>& clusters, size_t n_tau)
      : clusters_(clusters), n_tau_(n_tau) {
    for (size_t i = 0; i < clusters.size(); ++i)
      index_[ClusterKey{clusters[i].ids}] = i;
    tildes_.assign(clusters.size(), {});
    total_.assign(n_tau_, complexd(1.0, 0.0));
  }

  // raw: L_C per tau for clusters_[ci]; returns skipped-divisor count.
  long feed(size_t ci, std::vector<complexd> raw) {
    long skipped = 0;
    const auto& ids = clusters_[ci].ids;
    const int k = static_cast<int>(ids.size());
    if (k > 1) {
      std::vector<char> guarded(n_tau_, 0);
      for (unsigned mask = 1; mask + 1 < (1u << k); ++mask) {
        std::vector<int> sub;
        for (int b = 0; b < k; ++b)
          if (mask & (1u << b)) sub.push_back(ids[b]);
        auto it = index_.find(ClusterKey{sub});
        if (it == index_.end()) continue;
        const auto& div = tildes_[it->second];
        for (size_t t = 0; t < n_tau_; ++t) {
          if (guarded[t]) continue;
          if (std::abs(div[t]) < k_divisor_floor) {
            raw[t] = complexd(1.0, 0.0);
            guarded[t] = 1;
            ++skipped;
          } else {
            raw[t] /= div[t];
          }
        }
      }
    }
    for (size_t t = 0; t < n_tau_; ++t) total_[t] *= raw[t];
    tildes_[ci] = std::move(raw);
    return skipped;
  }

  const std::vector<complexd>& total() const { return total_; }

 private:
  const std::vector<Cluster>& clusters_;
  size_t n_tau_;
  std::map<ClusterKey, size_t> index_;
  std::vector<std::vector<complexd>> tildes_;
  std::vector<complexd> total_;
};

}  // namespace

CoherenceCurve gcce_coherence(const SpinSystem& sys, const MagneticField& field,
                              const BathModel& bath, const QubitSubspace& qubit,
                              const EchoProtocol& protocol,
                              const CceOptions& opts) {
  protocol.validate();
  const auto t_start = std::chrono::steady_clock::now();

  const std::vector<Cluster> clusters =
      enumerate_clusters(bath, opts.max_order, bath.r_dipole_nm);
  const size_t n_tau = protocol.tau_us.size();

  CoherenceCurve curve;
  curve.two_tau_us.resize(n_tau);
  for (size_t t = 0; t < n_tau; ++t) curve.two_tau_us[t] = 2.0 * protocol.tau_us[t];
  curve.mode = opts.mode == BathStateMode::Mixed ? "mixed" : "sampled";
  curve.seed = opts.seed;
  curve.bath_hash = bath.hash();
  curve.diagnostics.clusters_per_order.assign(
      static_cast<size_t>(std::max(opts.max_order, 1)), 0);
  for (const auto& c : clusters)
    ++curve.diagnostics.clusters_per_order[c.order() - 1];

  const bool parallel = opts.policy == ExecPolicy::OpenMP;

  if (opts.mode == BathStateMode::Mixed || bath.spins.empty()) {
    // Raw cluster amplitudes are independent work items; combine serially in
    // enumeration order for a deterministic product.
    std::vector<std::vector<complexd>> raw(clusters.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (long ci = 0; ci < static_cast<long>(clusters.size()); ++ci)
      raw[ci] = cluster_coherence(sys, field, bath, clusters[ci], qubit,
                                  protocol, nullptr, opts.cluster_dim_cap);
    CceAccumulator acc(clusters, n_tau);
    long skipped = 0;
    for (size_t ci = 0; ci < clusters.size(); ++ci)
      skipped += acc.feed(ci, std::move(raw[ci]));
    curve.L = acc.total();
    curve.diagnostics.skipped_divisors = skipped;
  } else {
    if (opts.n_mc < 1)
      throw std::invalid_argument("gcce_coherence: n_mc must be >= 1");
    curve.n_mc = opts.n_mc;

    // Pre-draw every sample's projections so results do not depend on
    // scheduling: sample s uses the stream splitmix64(seed ^ s).
    std::vector<OuterState> states(opts.n_mc);
    for (int s = 0; s < opts.n_mc; ++s) {
      SplitMix rng(splitmix64(opts.seed ^ static_cast<uint64_t>(s)));
      states[s].axis = opts.mean_field_axis;
      states[s].m.resize(bath.spins.size());
      for (size_t i = 0; i < bath.spins.size(); ++i) {
        const double spin = bath.spins[i].spin;
        const int levels = static_cast<int>(std::lround(2.0 * spin)) + 1;
        states[s].m[i] = spin - rng.uniform_int(levels);
      }
    }

    std::vector<std::vector<complexd>> totals(opts.n_mc);
    std::vector<long> skipped(opts.n_mc, 0);
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int s = 0; s < opts.n_mc; ++s) {
      CceAccumulator acc(clusters, n_tau);
      for (size_t ci = 0; ci < clusters.size(); ++ci) {
        auto raw = cluster_coherence(sys, field, bath, clusters[ci], qubit,
                                     protocol, &states[s], opts.cluster_dim_cap);
        skipped[s] += acc.feed(ci, std::move(raw));
      }
      totals[s] = acc.total();
    }

    curve.L.assign(n_tau, complexd(0.0, 0.0));
    for (int s = 0; s < opts.n_mc; ++s)
      for (size_t t = 0; t < n_tau; ++t) curve.L[t] += totals[s][t];
    for (size_t t = 0; t < n_tau; ++t) curve.L[t] /= double(opts.n_mc);
    for (int s = 0; s < opts.n_mc; ++s)
      curve.diagnostics.skipped_divisors += skipped[s];
  }

  curve.diagnostics.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return curve;
}

CoherenceCurve exact_coherence(const SpinSystem& sys, const MagneticField& field,
                               const BathModel& bath, const QubitSubspace& qubit,
                               const EchoProtocol& protocol) {
  protocol.validate();
  long dim = 3;
  for (const auto& s : bath.spins)
    dim *= static_cast<long>(std::lround(2.0 * s.spin)) + 1;
  if (dim > 1024)
    throw std::runtime_error("exact_coherence: joint dimension " +
                             std::to_string(dim) + " exceeds 1024");
  Cluster all;
  for (const auto& s : bath.spins) all.ids.push_back(s.id);

  CoherenceCurve curve;
  curve.two_tau_us.resize(protocol.tau_us.size());
  for (size_t t = 0; t < protocol.tau_us.size(); ++t)
    curve.two_tau_us[t] = 2.0 * protocol.tau_us[t];
  curve.L = cluster_coherence(sys, field, bath, all, qubit, protocol, nullptr,
                              1024);
  curve.mode = "exact";
  curve.bath_hash = bath.hash();
  curve.diagnostics.clusters_per_order.assign(
      std::max<size_t>(bath.spins.size(), 1), 0);
  if (!bath.spins.empty())
    curve.diagnostics.clusters_per_order[bath.spins.size() - 1] = 1;
  return curve;
}

}  // namespace spinclock
