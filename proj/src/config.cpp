#include "spinclock/config.hpp"

#include "spinclock/csv.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>

namespace spinclock {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::vector<double> parse_grid(const json& j, const char* what) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const auto& v : j) out.push_back(v.get<double>());
  } else if (j.is_object()) {
    const double lo = j.at("min").get<double>();
    const double hi = j.at("max").get<double>();
    if (j.contains("step")) {
      const double step = j.at("step").get<double>();
      if (step <= 0.0)
        throw std::invalid_argument(std::string(what) + ": step must be > 0");
      const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
      for (int i = 0; i < n; ++i) out.push_back(lo + i * step);
    } else {
      const int n = j.at("points").get<int>();
      if (n < 2) throw std::invalid_argument(std::string(what) + ": points < 2");
      for (int i = 0; i < n; ++i)
        out.push_back(lo + (hi - lo) * i / (n - 1));
    }
  } else {
    throw std::invalid_argument(std::string(what) +
                                ": expected array or {min,max,step|points}");
  }
  if (out.empty()) throw std::invalid_argument(std::string(what) + ": empty grid");
  return out;
}

namespace {

Eigen::Vector3d json_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument(std::string(what) + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);  // bare strings stay strings
  }
}

}  // namespace

RunConfig RunConfig::load(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  if (!fs::exists(path))
    throw std::runtime_error("config file not found: " + path);
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }

  for (const auto& [key, value] : overrides) {
    std::string pointer = "/" + key;
    for (auto& c : pointer)
      if (c == '.') c = '/';
    j[json::json_pointer(pointer)] = parse_override_value(value);
  }
  if (const char* env = std::getenv("SPINCLOCK_OUTDIR"); env && *env)
    j["output"]["dir"] = std::string(env);

  RunConfig cfg;
  cfg.resolved = j;
  cfg.config_path = path;
  cfg.config_dir = fs::path(path).parent_path().string();

  try {
    cfg.seed = j.value("seed", 0ULL);

    if (j.contains("system")) {
      const auto& js = j["system"];
      cfg.system.D_GHz = js.value("D_GHz", 0.0);
      cfg.system.E_GHz = js.value("E_GHz", 0.0);
      cfg.system.g = js.value("g", 2.0023);
      if (js.contains("frame_euler_rad"))
        cfg.system.frame_euler_rad = json_vec3(js["frame_euler_rad"], "frame_euler_rad");
    }

    if (j.contains("field")) {
      const auto& jf = j["field"];
      if (jf.contains("axis")) cfg.field.axis = json_vec3(jf["axis"], "field.axis");
      cfg.field.B_mT = jf.value("B_mT", 0.0);
      if (jf.contains("grid_mT"))
        cfg.field.grid_mT = parse_grid(jf["grid_mT"], "field.grid_mT");
    }

    if (j.contains("bath")) {
      const auto& jb = j["bath"];
      cfg.bath.crystal_file = jb.value("crystal_file", "");
      cfg.bath.r_bath_nm = jb.value("r_bath_nm", 2.0);
      cfg.bath.r_dipole_nm = jb.value("r_dipole_nm", 0.8);
      if (jb.contains("seed") && !jb["seed"].is_null())
        cfg.bath.seed = jb["seed"].get<uint64_t>();
      cfg.bath.overrides_file = jb.value("overrides_file", "");
      cfg.bath.max_spins = jb.value("max_spins", 20000);
    }

    if (j.contains("cce")) {
      const auto& jc = j["cce"];
      cfg.cce.max_order = jc.value("max_order", 2);
      const std::string mode = jc.value("mode", "sampled");
      if (mode == "mixed") cfg.cce.mode = BathStateMode::Mixed;
      else if (mode == "sampled") cfg.cce.mode = BathStateMode::Sampled;
      else throw std::invalid_argument("cce.mode must be 'mixed' or 'sampled'");
      cfg.cce.n_mc = jc.value("n_mc", 100);
      if (jc.contains("qubit_pair")) {
        const auto& qp = jc["qubit_pair"];
        if (!qp.is_array() || qp.size() != 2)
          throw std::invalid_argument("cce.qubit_pair must be two labels");
        cfg.cce.qubit_a = level_from_string(qp[0].get<std::string>());
        cfg.cce.qubit_b = level_from_string(qp[1].get<std::string>());
      }
      if (jc.contains("tau")) {
        const auto& jt = jc["tau"];
        if (jt.contains("values_2tau_us")) {
          cfg.cce.tau_values_us.clear();
          for (const auto& v : jt["values_2tau_us"])
            cfg.cce.tau_values_us.push_back(0.5 * v.get<double>());
        } else {
          cfg.cce.two_tau_max_us = jt.value("two_tau_max_us", 40.0);
          cfg.cce.tau_points = jt.value("points", 41);
        }
      }
      const std::string axis = jc.value("mean_field_axis", "lab_z");
      if (axis == "lab_z") cfg.cce.mean_field_axis = MeanFieldAxis::LabZ;
      else if (axis == "hyperfine") cfg.cce.mean_field_axis = MeanFieldAxis::LocalHyperfine;
      else throw std::invalid_argument("cce.mean_field_axis must be 'lab_z' or 'hyperfine'");
      const std::string policy = jc.value("policy", "openmp");
      if (policy == "serial") cfg.cce.policy = ExecPolicy::Serial;
      else if (policy == "openmp") cfg.cce.policy = ExecPolicy::OpenMP;
      else throw std::invalid_argument("cce.policy must be 'serial' or 'openmp'");
    }

    if (j.contains("optics")) {
      const auto& jo = j["optics"];
      cfg.optics.R0_per_us = jo.value("R0_per_us", 0.0023);
      cfg.optics.Gamma_h_GHz = jo.value("Gamma_h_GHz", 3.0);
      cfg.optics.k_dec_per_us = jo.value("k_dec_per_us", 10.0);
      if (jo.contains("branching"))
        cfg.optics.branching = json_vec3(jo["branching"], "optics.branching");
      cfg.optics.T1_us = jo.value("T1_us", 1210.0);
      cfg.optics.k_mw_per_us = jo.value("k_mw_per_us", 1.0);
      if (jo.contains("mw_pair")) {
        const auto& mp = jo["mw_pair"];
        cfg.optics.mw_a = level_from_string(mp.at(0).get<std::string>());
        cfg.optics.mw_b = level_from_string(mp.at(1).get<std::string>());
      }
      cfg.optics.pulse_duration_us = jo.value("pulse_duration_us", 2000.0);
      cfg.optics.dt_us = jo.value("dt_us", 0.5);
      cfg.optics.t_init_us = jo.value("t_init_us", 500.0);
      cfg.optics.t_read_us = jo.value("t_read_us", 50.0);
      cfg.optics.mw_linewidth_GHz = jo.value("mw_linewidth_GHz", 0.05);
      if (jo.contains("odmr_grid_GHz"))
        cfg.optics.odmr_grid_GHz = parse_grid(jo["odmr_grid_GHz"], "odmr_grid_GHz");
      if (jo.contains("t1_grid_us"))
        cfg.optics.t1_grid_us = parse_grid(jo["t1_grid_us"], "t1_grid_us");
      if (jo.contains("holeburn")) {
        const auto& jh = jo["holeburn"];
        cfg.optics.holeburn.f_L_GHz = jh.value("f_L_GHz", 0.0);
        if (jh.contains("grid_GHz"))
          cfg.optics.holeburn.grid_GHz = parse_grid(jh["grid_GHz"], "holeburn.grid_GHz");
        cfg.optics.holeburn.with_mw = jh.value("with_mw", false);
      }
      if (jo.contains("ensemble")) {
        const auto& je = jo["ensemble"];
        cfg.optics.ensemble.zpl_center_GHz = je.value("zpl_center_GHz", 295071.0);
        cfg.optics.ensemble.inhomogeneous_fwhm_GHz =
            je.value("Gamma_inh_GHz", 50.0);
        cfg.optics.ensemble.samples = je.value("samples", 801);
      }
    }

    if (j.contains("output")) {
      cfg.output.dir = j["output"].value("dir", "out");
      cfg.output.format = j["output"].value("format", "csv");
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }

  // Domain validation up front.
  cfg.system.validate();
  if (cfg.field.axis.norm() < 1e-12)
    throw std::runtime_error("config: field.axis must be nonzero");
  if (!cfg.bath.crystal_file.empty()) {
    const std::string p = cfg.resolve_path(cfg.bath.crystal_file);
    if (!fs::exists(p))
      throw std::runtime_error("config: crystal file not found: " + p);
  }
  if (!cfg.bath.overrides_file.empty()) {
    const std::string p = cfg.resolve_path(cfg.bath.overrides_file);
    if (!fs::exists(p))
      throw std::runtime_error("config: overrides file not found: " + p);
  }
  if (cfg.cce.max_order < 1)
    throw std::runtime_error("config: cce.max_order must be >= 1");
  if (cfg.output.format != "csv")
    throw std::runtime_error("config: only csv output is supported");
  return cfg;
}

uint64_t RunConfig::bath_seed() const {
  return bath.seed ? *bath.seed : child_seed(seed, "bath");
}

uint64_t RunConfig::cce_seed() const { return child_seed(seed, "cce-mc"); }

std::string RunConfig::resolve_path(const std::string& rel) const {
  fs::path p(rel);
  if (p.is_absolute()) return rel;
  return (fs::path(config_dir) / p).string();
}

CrystalSpec RunConfig::load_crystal() const {
  if (bath.crystal_file.empty())
    throw std::runtime_error("config: bath.crystal_file is required");
  return parse_crystal(read_file(resolve_path(bath.crystal_file)));
}

BathModel RunConfig::build_bath() const {
  BathOptions opts;
  opts.r_dipole_nm = bath.r_dipole_nm;
  opts.g_electron = system.g;
  opts.max_spins = bath.max_spins;
  BathModel model = generate_bath(load_crystal(), bath.r_bath_nm, bath_seed(), opts);
  if (!bath.overrides_file.empty()) {
    const auto table =
        parse_hyperfine_overrides(read_file(resolve_path(bath.overrides_file)));
    model = apply_hyperfine_overrides(model, table);
  }
  return model;
}

EchoProtocol RunConfig::protocol() const {
  if (!cce.tau_values_us.empty()) {
    EchoProtocol p;
    p.tau_us = cce.tau_values_us;
    p.validate();
    return p;
  }
  return EchoProtocol::linear(cce.two_tau_max_us, cce.tau_points);
}

CceOptions RunConfig::cce_options() const {
  CceOptions opts;
  opts.max_order = cce.max_order;
  opts.mode = cce.mode;
  opts.n_mc = cce.n_mc;
  opts.seed = cce_seed();
  opts.mean_field_axis = cce.mean_field_axis;
  opts.policy = cce.policy;
  return opts;
}

CoherenceSetup RunConfig::coherence_setup() const {
  CoherenceSetup setup;
  setup.sys = system;
  setup.field_axis = field.axis.normalized();
  setup.field_mT = field.B_mT;
  setup.crystal = load_crystal();
  setup.r_bath_nm = bath.r_bath_nm;
  setup.bath_seed = bath_seed();
  setup.bath_opts.r_dipole_nm = bath.r_dipole_nm;
  setup.bath_opts.g_electron = system.g;
  setup.bath_opts.max_spins = bath.max_spins;
  setup.qubit_a = cce.qubit_a;
  setup.qubit_b = cce.qubit_b;
  setup.protocol = protocol();
  setup.cce = cce_options();
  return setup;
}

OpticsModel RunConfig::optics_model() const {
  MagneticField f;
  f.mT = field.B_mT * field.axis.normalized();
  const LevelSet levels = labeled_levels(system, f);
  OpticsModel m = OpticsModel::from_levels(levels);
  m.pump_peak_rate_per_us = optics.R0_per_us;
  m.homogeneous_fwhm_GHz = optics.Gamma_h_GHz;
  m.decay_rate_per_us = optics.k_dec_per_us;
  m.branching = optics.branching;
  m.T1_us = optics.T1_us;
  m.mw_rate_per_us = optics.k_mw_per_us;
  m.mw_pair = {static_cast<int>(optics.mw_a), static_cast<int>(optics.mw_b)};
  m.validate();
  return m;
}

json RunManifest::to_json() const {
  json j;
  j["tool"] = "spinclock";
  j["version"] = k_tool_version;
  j["command"] = command;
  j["config"] = config_snapshot;
  j["seeds"] = {{"root", seed_root}, {"bath", seed_bath}, {"cce_mc", seed_cce}};
  j["input_hashes"] = input_hashes;
  j["outputs"] = outputs;
  j["timings"] = {{"wall_s", wall_time_s}};
  return j;
}

void RunManifest::write(const std::string& dir) const {
  write_file_atomic((fs::path(dir) / "manifest.json").string(),
                    to_json().dump(2) + "\n");
}

}  // namespace spinclock
