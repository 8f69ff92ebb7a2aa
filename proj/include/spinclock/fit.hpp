#pragma once

#include "spinclock/cce.hpp"

#include <functional>
#include <string>
#include <vector>

namespace spinclock {

// ------------------------------ generic LM core ------------------------------

struct LmOptions {
  int max_iterations = 200;
  double tolerance = 1e-12;   // relative SSE improvement
  double lambda0 = 1e-3;
};

struct LmResult {
  Eigen::VectorXd params;
  double sse = 0.0;
  int iterations = 0;
  bool converged = false;
  Eigen::MatrixXd jtj;  // at the solution, for covariance diagnostics
};

// Deterministic damped Gauss-Newton with numeric central-difference Jacobian.
// `clamp` projects parameters back into their feasible box after each step.
LmResult lm_minimize(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
                     const Eigen::VectorXd& x0,
                     const std::function<void(Eigen::VectorXd&)>& clamp = {},
                     const LmOptions& opts = {});

// ------------------------------ stretched exp ------------------------------

// |L|(2 tau) = A exp(-((2 tau)/T2)^n); T2 is the 1/e time of the fitted model.
struct StretchedExpFit {
  double T2_us = 0.0;
  double n = 1.0;
  double amplitude = 1.0;
  double residual_rms = 0.0;
  Eigen::Vector3d param_variance = Eigen::Vector3d::Zero();  // (T2, n, A)
  bool no_decay = false;
  double T2_lower_bound_us = 0.0;  // set when no_decay
};

StretchedExpFit fit_stretched_exp(const std::vector<double>& two_tau_us,
                                  const std::vector<double>& abs_L);
StretchedExpFit fit_stretched_exp(const CoherenceCurve& curve);

// --------------------------------- sweeps ---------------------------------

enum class SweepVariable { TransverseE, FieldB, BathRadius };
SweepVariable sweep_variable_from_string(const std::string& s);
const char* to_string(SweepVariable v);

// Everything needed to regenerate the pipeline at one sweep point.
struct CoherenceSetup {
  SpinSystem sys;
  Eigen::Vector3d field_axis = Eigen::Vector3d::UnitZ();
  double field_mT = 0.0;
  CrystalSpec crystal;
  double r_bath_nm = 1.0;
  uint64_t bath_seed = 0;
  BathOptions bath_opts;
  Level qubit_a = Level::Zero;
  Level qubit_b = Level::Minus;
  EchoProtocol protocol;
  CceOptions cce;
};

struct SweepPoint {
  double x = 0.0;
  StretchedExpFit fit;
  bool flagged = false;
  std::string flag;
};

struct SweepResult {
  SweepVariable variable = SweepVariable::TransverseE;
  std::vector<SweepPoint> points;
};

// One gCCE run plus fit per grid point. The bath is generated once and shared
// for E and B sweeps (fixed seed); it is regenerated per point for radius
// sweeps. A failed fit flags its point instead of aborting the sweep.
SweepResult sweep_T2(const CoherenceSetup& base, SweepVariable variable,
                     const std::vector<double>& grid);

// -------------------------------- lineshapes --------------------------------

enum class PeakModel { Gaussian, Lorentzian };

struct Peak {
  double center = 0.0;
  double fwhm = 0.0;
  double amplitude = 0.0;
};

struct LineshapeFit {
  PeakModel model = PeakModel::Gaussian;
  std::vector<Peak> peaks;
  double baseline = 0.0;
  double residual_rms = 0.0;
};

// Least-squares multi-peak fit with a constant baseline, initialized
// deterministically from the n_peaks largest local maxima.
LineshapeFit fit_lineshape(const std::vector<double>& x,
                           const std::vector<double>& y, PeakModel model,
                           int n_peaks);

// Same model with fixed, known peak centers (amplitudes free, one shared
// FWHM); used for spectra whose peak positions follow from level arithmetic.
LineshapeFit fit_lineshape_fixed_centers(const std::vector<double>& x,
                                         const std::vector<double>& y,
                                         PeakModel model,
                                         const std::vector<double>& centers);

}  // namespace spinclock
