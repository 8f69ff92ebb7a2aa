#include "spinclock/fit.hpp"

#include "spinclock/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spinclock {

LmResult lm_minimize(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
                     const Eigen::VectorXd& x0,
                     const std::function<void(Eigen::VectorXd&)>& clamp,
                     const LmOptions& opts) {
  LmResult res;
  res.params = x0;
  if (clamp) clamp(res.params);
  Eigen::VectorXd r = residuals(res.params);
  res.sse = r.squaredNorm();
  const int np = static_cast<int>(x0.size());
  double lambda = opts.lambda0;

  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it + 1;
    // numeric central-difference Jacobian
    Eigen::MatrixXd jac(r.size(), np);
    for (int p = 0; p < np; ++p) {
      const double h = 1e-6 * std::max(1.0, std::abs(res.params(p)));
      Eigen::VectorXd xp = res.params, xm = res.params;
      xp(p) += h;
      xm(p) -= h;
      jac.col(p) = (residuals(xp) - residuals(xm)) / (2.0 * h);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    res.jtj = jtj;

    bool improved = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd step = damped.ldlt().solve(jtr);
      Eigen::VectorXd trial = res.params - step;
      if (clamp) clamp(trial);
      const Eigen::VectorXd rt = residuals(trial);
      const double sse_t = rt.squaredNorm();
      if (sse_t < res.sse) {
        const double rel = (res.sse - sse_t) / std::max(res.sse, 1e-300);
        res.params = trial;
        r = rt;
        res.sse = sse_t;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (rel < opts.tolerance) {
          res.converged = true;
          return res;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) {
      res.converged = true;  // stuck at a (local) minimum
      return res;
    }
  }
  return res;
}

// ------------------------------ stretched exp ------------------------------

StretchedExpFit fit_stretched_exp(const std::vector<double>& two_tau_us,
                                  const std::vector<double>& abs_L) {
  if (two_tau_us.size() != abs_L.size())
    throw std::invalid_argument("fit_stretched_exp: size mismatch");
  if (two_tau_us.size() < 6)
    throw std::invalid_argument("fit_stretched_exp: needs at least 6 points");
  double min_l = 1e300, max_l = -1e300;
  for (double l : abs_L) {
    if (l < -1e-9 || l > 1.1)
      throw std::invalid_argument("fit_stretched_exp: |L| outside [0, 1.1]");
    min_l = std::min(min_l, l);
    max_l = std::max(max_l, l);
  }

  StretchedExpFit fit;
  if (min_l > 0.9) {
    fit.no_decay = true;
    fit.amplitude = max_l;
    const double t_max = two_tau_us.back();
    // Exponential bound consistent with the observed floor.
    fit.T2_lower_bound_us =
        min_l < 1.0 ? t_max / (-std::log(min_l)) : std::numeric_limits<double>::infinity();
    fit.T2_us = fit.T2_lower_bound_us;
    return fit;
  }

  // Empirical 1/e crossing seeds the coarse grid.
  const double target = abs_L.front() / M_E;
  double t_e = two_tau_us.back();
  for (size_t i = 1; i < abs_L.size(); ++i) {
    if (abs_L[i] <= target) {
      const double f = (abs_L[i - 1] - target) /
                       std::max(abs_L[i - 1] - abs_L[i], 1e-300);
      t_e = two_tau_us[i - 1] + f * (two_tau_us[i] - two_tau_us[i - 1]);
      break;
    }
  }
  t_e = std::max(t_e, 1e-12);

  // Coarse grid: 40 log-spaced T2 in [0.1, 10] x t_e, 15 linear n in [0.5, 4];
  // amplitude solved linearly per candidate.
  double best_sse = 1e300, best_t2 = t_e, best_n = 1.0, best_a = 1.0;
  for (int i = 0; i < 40; ++i) {
    const double t2 = t_e * std::pow(10.0, -1.0 + 2.0 * i / 39.0);
    for (int j = 0; j < 15; ++j) {
      const double n = 0.5 + 3.5 * j / 14.0;
      double sy = 0.0, ss = 0.0;
      std::vector<double> shape(abs_L.size());
      for (size_t k = 0; k < abs_L.size(); ++k) {
        shape[k] = std::exp(-std::pow(two_tau_us[k] / t2, n));
        sy += abs_L[k] * shape[k];
        ss += shape[k] * shape[k];
      }
      const double a = ss > 0.0 ? sy / ss : 1.0;
      double sse = 0.0;
      for (size_t k = 0; k < abs_L.size(); ++k) {
        const double d = a * shape[k] - abs_L[k];
        sse += d * d;
      }
      if (sse < best_sse) {
        best_sse = sse;
        best_t2 = t2;
        best_n = n;
        best_a = a;
      }
    }
  }

  // Local refinement in (log T2, n, A).
  auto residuals = [&](const Eigen::VectorXd& p) {
    const double t2 = std::exp(p(0));
    Eigen::VectorXd r(abs_L.size());
    for (size_t k = 0; k < abs_L.size(); ++k)
      r(k) = p(2) * std::exp(-std::pow(two_tau_us[k] / t2, p(1))) - abs_L[k];
    return r;
  };
  auto clamp = [](Eigen::VectorXd& p) {
    p(1) = std::clamp(p(1), 0.5, 4.0);
    p(2) = std::clamp(p(2), 0.0, 1.5);
  };
  Eigen::VectorXd x0(3);
  x0 << std::log(best_t2), best_n, best_a;
  const LmResult lm = lm_minimize(residuals, x0, clamp);

  fit.T2_us = std::exp(lm.params(0));
  fit.n = lm.params(1);
  fit.amplitude = lm.params(2);
  fit.residual_rms = std::sqrt(lm.sse / abs_L.size());
  // First-order variance diagnostics from (J^T J)^-1, mapped out of log T2.
  if (lm.jtj.size() > 0) {
    const Eigen::Matrix3d cov =
        lm.jtj.ldlt().solve(Eigen::Matrix3d::Identity()) *
        (lm.sse / std::max<double>(1, static_cast<double>(abs_L.size()) - 3));
    fit.param_variance(0) = cov(0, 0) * fit.T2_us * fit.T2_us;
    fit.param_variance(1) = cov(1, 1);
    fit.param_variance(2) = cov(2, 2);
  }
  return fit;
}

StretchedExpFit fit_stretched_exp(const CoherenceCurve& curve) {
  std::vector<double> absl(curve.L.size());
  for (size_t i = 0; i < curve.L.size(); ++i) absl[i] = std::abs(curve.L[i]);
  return fit_stretched_exp(curve.two_tau_us, absl);
}

// --------------------------------- sweeps ---------------------------------

SweepVariable sweep_variable_from_string(const std::string& s) {
  if (s == "E") return SweepVariable::TransverseE;
  if (s == "B") return SweepVariable::FieldB;
  if (s == "r_bath") return SweepVariable::BathRadius;
  throw std::invalid_argument("unknown sweep variable '" + s +
                              "' (expected E, B or r_bath)");
}

const char* to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::TransverseE: return "E";
    case SweepVariable::FieldB: return "B";
    case SweepVariable::BathRadius: return "r_bath";
  }
  return "?";
}

SweepResult sweep_T2(const CoherenceSetup& base, SweepVariable variable,
                     const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("sweep_T2: empty grid");
  for (size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw std::invalid_argument("sweep_T2: grid must be ascending");

  SweepResult result;
  result.variable = variable;

  BathModel shared_bath;
  if (variable != SweepVariable::BathRadius)
    shared_bath = generate_bath(base.crystal, base.r_bath_nm, base.bath_seed,
                                base.bath_opts);

  for (double x : grid) {
    SweepPoint point;
    point.x = x;
    try {
      CoherenceSetup run = base;
      const BathModel* bath = &shared_bath;
      BathModel local;
      switch (variable) {
        case SweepVariable::TransverseE:
          run.sys.E_GHz = x;
          break;
        case SweepVariable::FieldB:
          run.field_mT = x;
          break;
        case SweepVariable::BathRadius:
          local = generate_bath(base.crystal, x, base.bath_seed, base.bath_opts);
          bath = &local;
          break;
      }
      MagneticField field;
      field.mT = run.field_mT * run.field_axis.normalized();
      const QubitSubspace qubit =
          resolve_qubit(run.sys, field, run.qubit_a, run.qubit_b);
      const CoherenceCurve curve =
          gcce_coherence(run.sys, field, *bath, qubit, run.protocol, run.cce);
      point.fit = fit_stretched_exp(curve);
      if (point.fit.no_decay) {
        point.flagged = true;
        point.flag = "no_decay";
      }
    } catch (const std::exception& e) {
      point.flagged = true;
      point.flag = e.what();
    }
    result.points.push_back(std::move(point));
  }
  return result;
}

// -------------------------------- lineshapes --------------------------------

namespace {

double peak_value(PeakModel model, double x, double center, double fwhm) {
  const double w = std::max(std::abs(fwhm), 1e-12);
  if (model == PeakModel::Gaussian) {
    const double sigma = w / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double z = (x - center) / sigma;
    return std::exp(-0.5 * z * z);
  }
  const double hw = 0.5 * w;
  const double d = x - center;
  return hw * hw / (d * d + hw * hw);
}

std::vector<size_t> local_maxima_desc(const std::vector<double>& y) {
  std::vector<size_t> idx;
  for (size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] > y[i - 1] && y[i] >= y[i + 1]) idx.push_back(i);
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return y[a] > y[b]; });
  return idx;
}

LineshapeFit run_peak_fit(const std::vector<double>& x,
                          const std::vector<double>& y, PeakModel model,
                          const std::vector<Peak>& init, bool fix_centers,
                          bool shared_fwhm) {
  const int np = static_cast<int>(init.size());
  const double span = x.back() - x.front();

  // Parameter layout: [baseline, (amp, center?, fwhm?) per peak, shared fwhm?]
  int per_peak = 1 + (fix_centers ? 0 : 1) + (shared_fwhm ? 0 : 1);
  const int n_params = 1 + per_peak * np + (shared_fwhm ? 1 : 0);
  Eigen::VectorXd p0(n_params);
  double ymin = *std::min_element(y.begin(), y.end());
  p0(0) = ymin;
  for (int k = 0; k < np; ++k) {
    int off = 1 + per_peak * k;
    p0(off) = init[k].amplitude;
    int slot = 1;
    if (!fix_centers) p0(off + slot++) = init[k].center;
    if (!shared_fwhm) p0(off + slot) = init[k].fwhm;
  }
  if (shared_fwhm) p0(n_params - 1) = init.front().fwhm;

  auto unpack = [&](const Eigen::VectorXd& p, int k) {
    Peak pk;
    int off = 1 + per_peak * k;
    pk.amplitude = p(off);
    int slot = 1;
    pk.center = fix_centers ? init[k].center : p(off + slot++);
    pk.fwhm = shared_fwhm ? p(p.size() - 1) : p(off + slot);
    return pk;
  };

  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      double v = p(0);
      for (int k = 0; k < np; ++k) {
        const Peak pk = unpack(p, k);
        v += pk.amplitude * peak_value(model, x[i], pk.center, pk.fwhm);
      }
      r(i) = v - y[i];
    }
    return r;
  };
  auto clamp = [&](Eigen::VectorXd& p) {
    const double w_lo = span * 1e-4, w_hi = span * 10.0;
    if (shared_fwhm) {
      p(p.size() - 1) = std::clamp(p(p.size() - 1), w_lo, w_hi);
    } else {
      for (int k = 0; k < np; ++k)
        p(1 + per_peak * k + (fix_centers ? 1 : 2)) =
            std::clamp(p(1 + per_peak * k + (fix_centers ? 1 : 2)), w_lo, w_hi);
    }
  };

  const LmResult lm = lm_minimize(residuals, p0, clamp);
  LineshapeFit fit;
  fit.model = model;
  fit.baseline = lm.params(0);
  for (int k = 0; k < np; ++k) fit.peaks.push_back(unpack(lm.params, k));
  fit.residual_rms = std::sqrt(lm.sse / x.size());
  return fit;
}

}  // namespace

LineshapeFit fit_lineshape(const std::vector<double>& x,
                           const std::vector<double>& y, PeakModel model,
                           int n_peaks) {
  if (n_peaks < 1) throw std::invalid_argument("fit_lineshape: n_peaks >= 1");
  if (x.size() != y.size() || x.size() < static_cast<size_t>(3 * n_peaks + 1))
    throw std::invalid_argument("fit_lineshape: curve too short");

  const std::vector<size_t> maxima = local_maxima_desc(y);
  if (static_cast<int>(maxima.size()) < n_peaks) {
    std::string msg = "fit_lineshape: found " + std::to_string(maxima.size()) +
                      " local maxima, need " + std::to_string(n_peaks) +
                      " (candidates:";
    for (size_t i : maxima) msg += " " + csv_format(x[i]);
    msg += ")";
    throw std::runtime_error(msg);
  }

  const double ymin = *std::min_element(y.begin(), y.end());
  std::vector<Peak> init;
  for (int k = 0; k < n_peaks; ++k) {
    Peak pk;
    pk.center = x[maxima[k]];
    pk.amplitude = y[maxima[k]] - ymin;
    // initial width: distance until the peak falls to half prominence
    const double half = ymin + 0.5 * pk.amplitude;
    double left = x.front(), right = x.back();
    for (size_t i = maxima[k]; i > 0; --i)
      if (y[i] < half) {
        left = x[i];
        break;
      }
    for (size_t i = maxima[k]; i < y.size(); ++i)
      if (y[i] < half) {
        right = x[i];
        break;
      }
    pk.fwhm = std::max(right - left, (x.back() - x.front()) / x.size());
    init.push_back(pk);
  }
  std::sort(init.begin(), init.end(),
            [](const Peak& a, const Peak& b) { return a.center < b.center; });
  return run_peak_fit(x, y, model, init, false, false);
}

LineshapeFit fit_lineshape_fixed_centers(const std::vector<double>& x,
                                         const std::vector<double>& y,
                                         PeakModel model,
                                         const std::vector<double>& centers) {
  if (centers.empty())
    throw std::invalid_argument("fit_lineshape_fixed_centers: no centers");
  std::vector<Peak> init;
  const double ymid = (*std::max_element(y.begin(), y.end()) +
                       *std::min_element(y.begin(), y.end())) / 2.0;
  for (double c : centers) {
    // amplitude seeded from the sample nearest the center
    size_t nearest = 0;
    for (size_t i = 1; i < x.size(); ++i)
      if (std::abs(x[i] - c) < std::abs(x[nearest] - c)) nearest = i;
    init.push_back({c, (x.back() - x.front()) / 10.0, y[nearest] - ymid});
  }
  return run_peak_fit(x, y, model, init, true, true);
}

}  // namespace spinclock
