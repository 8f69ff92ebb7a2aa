#pragma once

#include "spinclock/fit.hpp"
#include "spinclock/optics.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace spinclock {

inline constexpr const char* k_tool_version = "0.1.0";

// Grid given either as an explicit array or as {min, max, step|points}.
std::vector<double> parse_grid(const nlohmann::json& j, const char* what);

struct FieldConfig {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double B_mT = 0.0;
  std::vector<double> grid_mT;  // for levels / odmr-map
};

struct BathConfig {
  std::string crystal_file;
  double r_bath_nm = 2.0;
  double r_dipole_nm = 0.8;
  std::optional<uint64_t> seed;  // defaults to child_seed(root, "bath")
  std::string overrides_file;    // optional
  int max_spins = 20000;
};

struct CceConfig {
  int max_order = 2;
  BathStateMode mode = BathStateMode::Sampled;
  int n_mc = 100;
  Level qubit_a = Level::Zero;
  Level qubit_b = Level::Minus;
  double two_tau_max_us = 40.0;
  int tau_points = 41;
  std::vector<double> tau_values_us;  // overrides the linear grid if set
  MeanFieldAxis mean_field_axis = MeanFieldAxis::LabZ;
  ExecPolicy policy = ExecPolicy::OpenMP;
};

struct HoleburnConfig {
  double f_L_GHz = 0.0;
  std::vector<double> grid_GHz;  // defaults to +/- 1.5 (D+E), 0.05 steps
  bool with_mw = false;
};

struct OpticsConfig {
  double R0_per_us = 0.0023;
  double Gamma_h_GHz = 3.0;
  double k_dec_per_us = 10.0;
  Eigen::Vector3d branching = Eigen::Vector3d::Constant(1.0 / 3.0);
  double T1_us = 1210.0;
  double k_mw_per_us = 1.0;
  Level mw_a = Level::Zero;
  Level mw_b = Level::Minus;
  double pulse_duration_us = 2000.0;
  double dt_us = 0.5;
  double t_init_us = 500.0;
  double t_read_us = 50.0;
  double mw_linewidth_GHz = 0.05;
  std::vector<double> odmr_grid_GHz;
  std::vector<double> t1_grid_us;
  HoleburnConfig holeburn;
  EnsembleSpec ensemble;
};

struct OutputConfig {
  std::string dir = "out";
  std::string format = "csv";
};

struct RunConfig {
  uint64_t seed = 0;
  SpinSystem system;
  FieldConfig field;
  BathConfig bath;
  CceConfig cce;
  OpticsConfig optics;
  OutputConfig output;

  nlohmann::json resolved;   // snapshot after overrides
  std::string config_path;
  std::string config_dir;

  // Loads, applies --section.key=value overrides and the SPINCLOCK_OUTDIR
  // environment variable, and validates (including referenced files).
  static RunConfig load(const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& overrides);

  uint64_t bath_seed() const;
  uint64_t cce_seed() const;
  std::string resolve_path(const std::string& rel) const;

  CrystalSpec load_crystal() const;
  BathModel build_bath() const;
  EchoProtocol protocol() const;
  CceOptions cce_options() const;
  CoherenceSetup coherence_setup() const;
  OpticsModel optics_model() const;
};

struct RunManifest {
  std::string command;
  nlohmann::json config_snapshot;
  uint64_t seed_root = 0, seed_bath = 0, seed_cce = 0;
  nlohmann::json input_hashes;
  std::vector<std::string> outputs;
  double wall_time_s = 0.0;

  nlohmann::json to_json() const;
  void write(const std::string& dir) const;  // atomic
};

}  // namespace spinclock
