#include "spinclock/optics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <omp.h>

#include <cmath>
#include <stdexcept>

namespace spinclock {

namespace {

double lorentzian(double detuning_GHz, double fwhm_GHz) {
  const double hw = 0.5 * fwhm_GHz;
  return hw * hw / (detuning_GHz * detuning_GHz + hw * hw);
}

// Generator of the 4-level rate equations for one schedule segment.
Eigen::Matrix4d rate_matrix(const OpticsModel& m,
                            const std::vector<double>& tones, bool mw_on,
                            double member_GHz) {
  Eigen::Matrix4d gen = Eigen::Matrix4d::Zero();
  for (int s = 0; s < 3; ++s) {
    double rs = 0.0;
    for (double tone : tones) rs += m.pump_rate(s, tone, member_GHz);
    gen(3, s) += rs;
    gen(s, s) -= rs;
    gen(s, 3) += m.branching(s) * m.decay_rate_per_us;
  }
  gen(3, 3) -= m.decay_rate_per_us;
  if (m.T1_us > 0.0 && std::isfinite(m.T1_us)) {
    const double w = 1.0 / (3.0 * m.T1_us);
    for (int s = 0; s < 3; ++s)
      for (int t = 0; t < 3; ++t) {
        if (s == t) continue;
        gen(s, t) += w;
        gen(s, s) -= w;
      }
  }
  if (mw_on && m.mw_rate_per_us > 0.0) {
    const int p = m.mw_pair[0], q = m.mw_pair[1];
    gen(p, q) += m.mw_rate_per_us;
    gen(q, q) -= m.mw_rate_per_us;
    gen(q, p) += m.mw_rate_per_us;
    gen(p, p) -= m.mw_rate_per_us;
  }
  return gen;
}

double max_rate(const Eigen::Matrix4d& gen) {
  return gen.diagonal().cwiseAbs().maxCoeff();
}

double pl_of(const OpticsModel& m, const std::vector<double>& tones,
             double member_GHz, const Eigen::Vector4d& n) {
  double pl = 0.0;
  for (int s = 0; s < 3; ++s)
    for (double tone : tones) pl += m.pump_rate(s, tone, member_GHz) * n(s);
  return pl;
}

// Steady state of gen n = 0 with sum n = 1.
Eigen::Vector4d steady_state(const Eigen::Matrix4d& gen) {
  Eigen::Matrix4d a = gen;
  a.row(3).setOnes();
  Eigen::Vector4d rhs(0.0, 0.0, 0.0, 1.0);
  return a.fullPivLu().solve(rhs);
}

}  // namespace

void OpticsModel::validate() const {
  if (pump_peak_rate_per_us < 0.0 || decay_rate_per_us < 0.0 ||
      mw_rate_per_us < 0.0 || homogeneous_fwhm_GHz <= 0.0)
    throw std::invalid_argument("OpticsModel: rates must be >= 0, Gamma_h > 0");
  if (T1_us <= 0.0)
    throw std::invalid_argument("OpticsModel: T1 must be positive (may be inf)");
  if (std::abs(branching.sum() - 1.0) > 1e-9 || branching.minCoeff() < 0.0)
    throw std::invalid_argument("OpticsModel: branching must be a distribution");
  if (mw_pair[0] == mw_pair[1] || mw_pair[0] < 0 || mw_pair[0] > 2 ||
      mw_pair[1] < 0 || mw_pair[1] > 2)
    throw std::invalid_argument("OpticsModel: mw_pair must name two ground sublevels");
}

OpticsModel OpticsModel::from_levels(const LevelSet& levels) {
  OpticsModel m;
  for (Level l : {Level::Zero, Level::Minus, Level::Plus})
    m.ground_energies_GHz(static_cast<int>(l)) = levels.energy_of(l);
  m.ground_energies_GHz.array() -= m.ground_energies_GHz.mean();
  return m;
}

double OpticsModel::pump_rate(int sublevel, double tone_GHz,
                              double member_GHz) const {
  // Optical transition of sublevel s sits at member_GHz - eps_s; the tone is
  // detuned from it by tone - member + eps_s.
  const double detuning = tone_GHz - member_GHz + ground_energies_GHz(sublevel);
  return pump_peak_rate_per_us * lorentzian(detuning, homogeneous_fwhm_GHz);
}

void EnsembleSpec::validate() const {
  if (inhomogeneous_fwhm_GHz <= 0.0)
    throw std::invalid_argument("EnsembleSpec: Gamma_inh must be positive");
  if (samples < 3) throw std::invalid_argument("EnsembleSpec: samples < 3");
}

PopulationTrace evolve_populations(const OpticsModel& model,
                                   const std::vector<LaserSegment>& schedule,
                                   double dt_us, double member_GHz,
                                   const Eigen::Vector4d& initial) {
  model.validate();
  if (dt_us <= 0.0) throw std::invalid_argument("evolve_populations: dt <= 0");
  if (std::abs(initial.sum() - 1.0) > 1e-9 || initial.minCoeff() < -1e-12)
    throw std::invalid_argument("evolve_populations: initial state invalid");

  PopulationTrace trace;
  Eigen::Vector4d n = initial;
  double t = 0.0;
  trace.t_us.push_back(t);
  trace.populations.push_back(n);
  trace.pl.push_back(pl_of(model, schedule.empty() ? std::vector<double>{}
                                                   : schedule.front().tone_offsets_GHz,
                           member_GHz, n));

  for (const auto& seg : schedule) {
    const Eigen::Matrix4d gen =
        rate_matrix(model, seg.tone_offsets_GHz, seg.mw_on, member_GHz);
    const double rmax = max_rate(gen);
    if (rmax > 0.0 && dt_us > 0.1 / rmax)
      throw std::invalid_argument(
          "evolve_populations: dt exceeds 0.1/max rate for a segment");
    const Eigen::Matrix4d step = (gen * dt_us).exp();
    const int nsteps = static_cast<int>(std::ceil(seg.duration_us / dt_us - 1e-12));
    for (int k = 0; k < nsteps; ++k) {
      const double remain = seg.duration_us - k * dt_us;
      if (remain < dt_us - 1e-12) {
        n = ((gen * remain).exp() * n).eval();
        t += remain;
      } else {
        n = (step * n).eval();
        t += dt_us;
      }
      if (n.minCoeff() < -1e-9)
        throw std::runtime_error("evolve_populations: negative population");
      trace.t_us.push_back(t);
      trace.populations.push_back(n);
      trace.pl.push_back(pl_of(model, seg.tone_offsets_GHz, member_GHz, n));
    }
  }
  return trace;
}

OdmrSpectrum pulsed_odmr_contrast(const OpticsModel& model,
                                  const std::vector<double>& mw_freqs_GHz,
                                  const OdmrSequence& seq) {
  model.validate();
  const std::vector<double> laser = {0.0};  // on the member's reference line

  const Eigen::Matrix4d gen_on = rate_matrix(model, laser, false, 0.0);

  const Eigen::Vector4d thermal(1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0);
  const Eigen::Vector4d after_init =
      (gen_on * seq.t_init_us).exp() * thermal;

  // Read-pulse PL integral over t_read via fine stepping.
  auto read_pl = [&](Eigen::Vector4d n) {
    const double rmax = std::max(max_rate(gen_on), 1e-12);
    const double dt = std::min(seq.dt_us, 0.1 / rmax);
    const int nsteps = std::max(1, static_cast<int>(std::ceil(seq.t_read_us / dt)));
    const double h = seq.t_read_us / nsteps;
    const Eigen::Matrix4d step = (gen_on * h).exp();
    double integral = 0.0;
    for (int k = 0; k < nsteps; ++k) {
      const double pl0 = pl_of(model, laser, 0.0, n);
      n = (step * n).eval();
      const double pl1 = pl_of(model, laser, 0.0, n);
      integral += 0.5 * (pl0 + pl1) * h;  // trapezoid
    }
    return integral;
  };

  // Ground splittings in pair order (0,-), (0,+), (-,+).
  const std::array<std::pair<int, int>, 3> level_pairs = {
      std::make_pair(0, 1), std::make_pair(0, 2), std::make_pair(1, 2)};
  std::array<double, 3> splittings;
  for (int p = 0; p < 3; ++p)
    splittings[p] = std::abs(model.ground_energies_GHz(level_pairs[p].second) -
                             model.ground_energies_GHz(level_pairs[p].first));

  const double pl_off = read_pl(after_init);

  OdmrSpectrum spec;
  spec.f_GHz = mw_freqs_GHz;
  spec.contrast.resize(mw_freqs_GHz.size());
  for (size_t i = 0; i < mw_freqs_GHz.size(); ++i) {
    Eigen::Vector4d n = after_init;
    for (int p = 0; p < 3; ++p) {
      if (std::abs(mw_freqs_GHz[i] - splittings[p]) <= 0.5 * seq.mw_linewidth_GHz)
        std::swap(n(level_pairs[p].first), n(level_pairs[p].second));
    }
    spec.contrast[i] = (read_pl(n) - pl_off) / pl_off;
  }
  return spec;
}

T1Result t1_sequence(const OpticsModel& model,
                     const std::vector<double>& wait_grid_us,
                     const OdmrSequence& seq) {
  model.validate();
  if (wait_grid_us.size() < 4)
    throw std::invalid_argument("t1_sequence: wait grid too short");

  const std::vector<double> laser = {0.0};
  const Eigen::Matrix4d gen_on = rate_matrix(model, laser, false, 0.0);
  const Eigen::Matrix4d gen_dark = rate_matrix(model, {}, false, 0.0);
  const Eigen::Vector4d thermal(1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0);
  const Eigen::Vector4d after_init = (gen_on * seq.t_init_us).exp() * thermal;

  auto read_pl = [&](Eigen::Vector4d n) {
    const double rmax = std::max(max_rate(gen_on), 1e-12);
    const double dt = std::min(seq.dt_us, 0.1 / rmax);
    const int nsteps = std::max(1, static_cast<int>(std::ceil(seq.t_read_us / dt)));
    const double h = seq.t_read_us / nsteps;
    const Eigen::Matrix4d step = (gen_on * h).exp();
    double integral = 0.0;
    for (int k = 0; k < nsteps; ++k) {
      const double pl0 = pl_of(model, laser, 0.0, n);
      n = (step * n).eval();
      integral += 0.5 * (pl0 + pl_of(model, laser, 0.0, n)) * h;
    }
    return integral;
  };

  T1Result result;
  result.wait_us = wait_grid_us;
  for (double T : wait_grid_us) {
    const Eigen::Vector4d relaxed = (gen_dark * T).exp() * after_init;
    result.pl_read.push_back(read_pl(relaxed));
  }

  // Single-exponential recovery y(T) = c0 - c1 exp(-T / T1).
  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(result.wait_us.size());
    for (size_t i = 0; i < result.wait_us.size(); ++i)
      r(i) = p(0) - p(1) * std::exp(-result.wait_us[i] / std::exp(p(2))) -
             result.pl_read[i];
    return r;
  };
  Eigen::VectorXd x0(3);
  const double span = wait_grid_us.back() - wait_grid_us.front();
  x0 << result.pl_read.back(), result.pl_read.back() - result.pl_read.front(),
      std::log(std::max(span / 3.0, 1e-6));
  const LmResult lm = lm_minimize(residuals, x0);
  result.fitted_T1_us = std::exp(lm.params(2));
  result.flagged = wait_grid_us.back() < 3.0 * result.fitted_T1_us;
  return result;
}

HoleBurnSpectrum hole_burning_spectrum(const OpticsModel& model,
                                       const EnsembleSpec& ensemble,
                                       double f_L_GHz,
                                       const std::vector<double>& delta_f_GHz,
                                       bool with_mw, ExecPolicy policy) {
  model.validate();
  ensemble.validate();
  if (delta_f_GHz.empty())
    throw std::invalid_argument("hole_burning_spectrum: empty grid");
  const double span_needed = model.ground_energies_GHz.maxCoeff() -
                             model.ground_energies_GHz.minCoeff();
  double grid_max = 0.0;
  for (double d : delta_f_GHz) grid_max = std::max(grid_max, std::abs(d));
  if (grid_max < span_needed - 1e-9)
    throw std::invalid_argument(
        "hole_burning_spectrum: detuning grid must cover +/-(D+E)");

  HoleBurnSpectrum spec;
  spec.delta_f_GHz = delta_f_GHz;
  spec.has_mw = with_mw;
  if (ensemble.samples < 200)
    spec.warnings.push_back("ensemble samples < 200; integration may be coarse");

  // Uniform member grid over +/- 4 sigma with Gaussian weights.
  const double sigma =
      ensemble.inhomogeneous_fwhm_GHz / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const int ns = ensemble.samples;
  std::vector<double> member(ns), weight(ns);
  double wsum = 0.0;
  for (int i = 0; i < ns; ++i) {
    member[i] = -4.0 * sigma + 8.0 * sigma * i / (ns - 1);
    weight[i] = std::exp(-0.5 * member[i] * member[i] / (sigma * sigma));
    wsum += weight[i];
  }
  for (double& w : weight) w /= wsum;

  spec.pl.assign(delta_f_GHz.size(), 0.0);
  if (with_mw) spec.pl_mw.assign(delta_f_GHz.size(), 0.0);

  const bool parallel = policy == ExecPolicy::OpenMP;
#pragma omp parallel for schedule(static) if (parallel)
  for (long di = 0; di < static_cast<long>(delta_f_GHz.size()); ++di) {
    const double df = delta_f_GHz[di];
    const std::vector<double> tones = {f_L_GHz - 0.5 * df, f_L_GHz + 0.5 * df};
    double pl = 0.0, pl_mw = 0.0;
    for (int i = 0; i < ns; ++i) {
      const Eigen::Matrix4d gen = rate_matrix(model, tones, false, member[i]);
      pl += weight[i] * pl_of(model, tones, member[i], steady_state(gen));
      if (with_mw) {
        const Eigen::Matrix4d gen_mw = rate_matrix(model, tones, true, member[i]);
        pl_mw += weight[i] * pl_of(model, tones, member[i], steady_state(gen_mw));
      }
    }
    spec.pl[di] = pl;
    if (with_mw) spec.pl_mw[di] = pl_mw;
  }

  if (with_mw) {
    spec.dodmr.resize(delta_f_GHz.size());
    for (size_t i = 0; i < delta_f_GHz.size(); ++i)
      spec.dodmr[i] = spec.pl_mw[i] - spec.pl[i];
  }
  return spec;
}

}  // namespace spinclock
