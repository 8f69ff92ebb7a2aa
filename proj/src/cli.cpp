#include "spinclock/cli.hpp"

#include "spinclock/config.hpp"
#include "spinclock/csv.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <clocale>
#include <filesystem>
#include <iostream>
#include <regex>

namespace spinclock {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

struct CommonArgs {
  std::string config_path = "config.json";
  std::string out_dir;  // overrides output.dir when set
  std::vector<std::pair<std::string, std::string>> overrides;
};

RunConfig load_config(const CommonArgs& args) {
  auto overrides = args.overrides;
  if (!args.out_dir.empty()) overrides.emplace_back("output.dir", args.out_dir);
  return RunConfig::load(args.config_path, overrides);
}

RunManifest start_manifest(const RunConfig& cfg, const std::string& command) {
  RunManifest m;
  m.command = command;
  m.config_snapshot = cfg.resolved;
  m.seed_root = cfg.seed;
  m.seed_bath = cfg.bath_seed();
  m.seed_cce = cfg.cce_seed();
  char buf[17];
  auto hex = [&buf](uint64_t h) {
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
  };
  m.input_hashes["config"] = hex(fnv1a64(read_file(cfg.config_path)));
  if (!cfg.bath.crystal_file.empty())
    m.input_hashes["crystal"] =
        hex(fnv1a64(read_file(cfg.resolve_path(cfg.bath.crystal_file))));
  if (!cfg.bath.overrides_file.empty())
    m.input_hashes["overrides"] =
        hex(fnv1a64(read_file(cfg.resolve_path(cfg.bath.overrides_file))));
  return m;
}

void emit(const RunConfig& cfg, RunManifest& manifest, const std::string& name,
          const std::string& content) {
  write_file_atomic((fs::path(cfg.output.dir) / name).string(), content);
  manifest.outputs.push_back(name);
}

MagneticField working_field(const RunConfig& cfg) {
  MagneticField f;
  f.mT = cfg.field.B_mT * cfg.field.axis.normalized();
  return f;
}

std::vector<double> field_grid(const RunConfig& cfg) {
  if (!cfg.field.grid_mT.empty()) return cfg.field.grid_mT;
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(2.0 * i);  // 0..200 mT
  return grid;
}

int cmd_validate(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  if (!cfg.bath.crystal_file.empty()) cfg.load_crystal();
  if (!cfg.bath.overrides_file.empty())
    parse_hyperfine_overrides(read_file(cfg.resolve_path(cfg.bath.overrides_file)));
  cfg.protocol();
  cfg.optics_model();
  std::cout << "config OK: " << args.config_path << "\n";
  return 0;
}

int cmd_levels(const CommonArgs& args) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_config(args);
  RunManifest manifest = start_manifest(cfg, "levels");

  const std::vector<double> grid = field_grid(cfg);
  const Eigen::Vector3d axis = cfg.field.axis.normalized();
  CsvBuilder csv({"B_mT", "E0_GHz", "Em_GHz", "Ep_GHz"});
  for (double b : grid) {
    MagneticField f;
    f.mT = b * axis;
    const LevelSet ls = labeled_levels(cfg.system, f, axis);
    csv.begin_row();
    csv.add(b);
    csv.add(ls.energy_of(Level::Zero));
    csv.add(ls.energy_of(Level::Minus));
    csv.add(ls.energy_of(Level::Plus));
    csv.end_row();
  }
  emit(cfg, manifest, "levels.csv", csv.str());
  manifest.wall_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  manifest.write(cfg.output.dir);
  std::cout << "levels: " << grid.size() << " field points -> "
            << cfg.output.dir << "/levels.csv\n";
  return 0;
}

int cmd_odmr_map(const CommonArgs& args) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_config(args);
  RunManifest manifest = start_manifest(cfg, "odmr-map");

  const std::vector<double> grid = field_grid(cfg);
  const auto table = transition_map(cfg.system, cfg.field.axis, grid);
  CsvBuilder csv({"B_mT", "f01_GHz", "f02_GHz", "f12_GHz", "df01_dB", "df02_dB",
                  "df12_dB", "d2f01_dB2", "d2f02_dB2", "d2f12_dB2"});
  for (const auto& row : table) {
    csv.begin_row();
    csv.add(row.B_mT);
    for (int p = 0; p < 3; ++p) csv.add(row.pairs[p].freq_GHz);
    for (int p = 0; p < 3; ++p) csv.add(row.pairs[p].dfreq_dB);
    for (int p = 0; p < 3; ++p) csv.add(row.pairs[p].d2freq_dB2);
    csv.end_row();
  }
  emit(cfg, manifest, "odmr_map.csv", csv.str());
  manifest.wall_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  manifest.write(cfg.output.dir);
  if (!table.empty() && !table.front().has_derivatives)
    std::cout << "note: < 3 field points, derivative columns are zero\n";
  std::cout << "odmr-map: " << table.size() << " field points -> "
            << cfg.output.dir << "/odmr_map.csv\n";
  return 0;
}

int cmd_bath(const CommonArgs& args) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_config(args);
  RunManifest manifest = start_manifest(cfg, "bath");

  const BathModel bath = cfg.build_bath();
  emit(cfg, manifest, "bath.csv", bath_to_csv(bath));

  json meta;
  meta["spins"] = bath.spins.size();
  meta["pairs"] = bath.pairs.size();
  meta["r_bath_nm"] = bath.r_bath_nm;
  meta["r_dipole_nm"] = bath.r_dipole_nm;
  meta["seed"] = bath.seed;
  meta["hash"] = bath.hash();
  emit(cfg, manifest, "bath_meta.json", meta.dump(2) + "\n");

  manifest.wall_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  manifest.write(cfg.output.dir);
  std::cout << "bath: " << bath.spins.size() << " spins, " << bath.pairs.size()
            << " pairs (hash " << bath.hash() << ")\n";
  return 0;
}

json fit_to_json(const StretchedExpFit& fit) {
  json j;
  j["no_decay"] = fit.no_decay;
  if (fit.no_decay) {
    j["T2_lower_bound_us"] = fit.T2_lower_bound_us;
  } else {
    j["T2_us"] = fit.T2_us;
    j["n"] = fit.n;
    j["amplitude"] = fit.amplitude;
    j["residual_rms"] = fit.residual_rms;
    j["param_variance"] = {fit.param_variance(0), fit.param_variance(1),
                           fit.param_variance(2)};
  }
  return j;
}

int cmd_coherence(const CommonArgs& args) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_config(args);
  RunManifest manifest = start_manifest(cfg, "coherence");

  const BathModel bath = cfg.build_bath();
  const MagneticField f = working_field(cfg);
  const QubitSubspace qubit =
      resolve_qubit(cfg.system, f, cfg.cce.qubit_a, cfg.cce.qubit_b);
  const CoherenceCurve curve =
      gcce_coherence(cfg.system, f, bath, qubit, cfg.protocol(), cfg.cce_options());

  CsvBuilder csv({"two_tau_us", "Re_L", "Im_L", "abs_L"});
  for (size_t i = 0; i < curve.two_tau_us.size(); ++i) {
    csv.begin_row();
    csv.add(curve.two_tau_us[i]);
    csv.add(curve.L[i].real());
    csv.add(curve.L[i].imag());
    csv.add(std::abs(curve.L[i]));
    csv.end_row();
  }
  emit(cfg, manifest, "coherence.csv", csv.str());

  json meta;
  meta["mode"] = curve.mode;
  meta["n_mc"] = curve.n_mc;
  meta["seed"] = curve.seed;
  meta["bath_hash"] = curve.bath_hash;
  meta["bath_spins"] = bath.spins.size();
  meta["cluster_counts"] = curve.diagnostics.clusters_per_order;
  meta["skipped_divisors"] = curve.diagnostics.skipped_divisors;
  meta["engine_wall_s"] = curve.diagnostics.wall_time_s;
  meta["cutoffs"] = {{"r_bath_nm", bath.r_bath_nm},
                     {"r_dipole_nm", bath.r_dipole_nm}};

  try {
    const StretchedExpFit fit = fit_stretched_exp(curve);
    meta["fit"] = fit_to_json(fit);
    if (fit.no_decay)
      std::cout << "T2: no decay (lower bound "
                << csv_format(fit.T2_lower_bound_us) << " us)\n";
    else
      std::cout << "T2 = " << csv_format(fit.T2_us) << " us, n = "
                << csv_format(fit.n) << "\n";
  } catch (const std::exception& e) {
    meta["fit"] = {{"error", e.what()}};
    std::cout << "fit failed: " << e.what() << " (curve retained)\n";
  }
  emit(cfg, manifest, "coherence_meta.json", meta.dump(2) + "\n");

  manifest.wall_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  manifest.write(cfg.output.dir);
  return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& var,
              const std::string& grid_text) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_config(args);
  RunManifest manifest = start_manifest(cfg, "sweep");

  const SweepVariable variable = sweep_variable_from_string(var);
  std::vector<double> grid;
  {
    std::string item;
    std::stringstream ss(grid_text);
    while (std::getline(ss, item, ','))
      if (!item.empty()) grid.push_back(std::stod(item));
  }
  if (grid.empty()) throw std::runtime_error("sweep: empty --grid");

  const SweepResult result = sweep_T2(cfg.coherence_setup(), variable, grid);

  CsvBuilder csv({"variable", "T2_us", "n", "residual", "flags"});
  for (const auto& p : result.points) {
    csv.begin_row();
    csv.add(p.x);
    csv.add(p.fit.no_decay ? p.fit.T2_lower_bound_us : p.fit.T2_us);
    csv.add(p.fit.n);
    csv.add(p.fit.residual_rms);
    csv.add(p.flagged ? p.flag : std::string("ok"));
    csv.end_row();
  }
  emit(cfg, manifest, "sweep.csv", csv.str());
  manifest.wall_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  manifest.write(cfg.output.dir);
  for (const auto& p : result.points)
    std::cout << to_string(variable) << " = " << csv_format(p.x) << ": T2 = "
              << csv_format(p.fit.T2_us) << " us"
              << (p.flagged ? " [" + p.flag + "]" : "") << "\n";
  return 0;
}

int cmd_optics(const CommonArgs& args, const std::string& what) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_config(args);
  RunManifest manifest = start_manifest(cfg, "optics " + what);
  const OpticsModel model = cfg.optics_model();

  if (what == "pulse") {
    LaserSegment seg;
    seg.duration_us = cfg.optics.pulse_duration_us;
    seg.tone_offsets_GHz = {0.0};
    const PopulationTrace trace =
        evolve_populations(model, {seg}, cfg.optics.dt_us);
    CsvBuilder csv({"t_us", "n0", "nm", "np", "ne", "PL"});
    for (size_t i = 0; i < trace.t_us.size(); ++i) {
      csv.begin_row();
      csv.add(trace.t_us[i]);
      for (int s = 0; s < 4; ++s) csv.add(trace.populations[i](s));
      csv.add(trace.pl[i]);
      csv.end_row();
    }
    emit(cfg, manifest, "optics_pulse.csv", csv.str());
    const double contrast =
        (trace.pl.front() - trace.pl.back()) / trace.pl.front();
    std::cout << "pulse: PL transient contrast = " << csv_format(contrast) << "\n";
  } else if (what == "odmr") {
    std::vector<double> grid = cfg.optics.odmr_grid_GHz;
    if (grid.empty()) {
      const double fmax =
          1.2 * (model.ground_energies_GHz.maxCoeff() -
                 model.ground_energies_GHz.minCoeff());
      for (double x = 0.0; x <= fmax; x += 0.02) grid.push_back(x);
    }
    OdmrSequence seq;
    seq.t_init_us = cfg.optics.t_init_us;
    seq.t_read_us = cfg.optics.t_read_us;
    seq.dt_us = cfg.optics.dt_us;
    seq.mw_linewidth_GHz = cfg.optics.mw_linewidth_GHz;
    const OdmrSpectrum spec = pulsed_odmr_contrast(model, grid, seq);
    CsvBuilder csv({"f_GHz", "contrast"});
    for (size_t i = 0; i < spec.f_GHz.size(); ++i) {
      csv.begin_row();
      csv.add(spec.f_GHz[i]);
      csv.add(spec.contrast[i]);
      csv.end_row();
    }
    emit(cfg, manifest, "optics_odmr.csv", csv.str());
    std::cout << "odmr: " << spec.f_GHz.size() << " points -> "
              << cfg.output.dir << "/optics_odmr.csv\n";
  } else if (what == "t1") {
    std::vector<double> grid = cfg.optics.t1_grid_us;
    if (grid.empty()) {
      for (int i = 0; i <= 25; ++i)
        grid.push_back(4.0 * cfg.optics.T1_us * i / 25.0);
    }
    OdmrSequence seq;
    seq.t_init_us = cfg.optics.t_init_us;
    seq.t_read_us = cfg.optics.t_read_us;
    seq.dt_us = cfg.optics.dt_us;
    const T1Result result = t1_sequence(model, grid, seq);
    CsvBuilder csv({"T_us", "PL_read", "fitted_T1_us"});
    for (size_t i = 0; i < result.wait_us.size(); ++i) {
      csv.begin_row();
      csv.add(result.wait_us[i]);
      csv.add(result.pl_read[i]);
      csv.add(result.fitted_T1_us);
      csv.end_row();
    }
    emit(cfg, manifest, "optics_t1.csv", csv.str());
    std::cout << "t1: fitted T1 = " << csv_format(result.fitted_T1_us) << " us"
              << (result.flagged ? " [grid shorter than ~3 T1]" : "") << "\n";
  } else if (what == "holeburn") {
    std::vector<double> grid = cfg.optics.holeburn.grid_GHz;
    if (grid.empty()) {
      const double span = 1.5 * (model.ground_energies_GHz.maxCoeff() -
                                 model.ground_energies_GHz.minCoeff());
      for (double x = -span; x <= span + 1e-9; x += 0.05) grid.push_back(x);
    }
    const HoleBurnSpectrum spec = hole_burning_spectrum(
        model, cfg.optics.ensemble, cfg.optics.holeburn.f_L_GHz, grid,
        cfg.optics.holeburn.with_mw, cfg.cce.policy);
    std::vector<std::string> cols = {"delta_f_GHz", "PL"};
    if (spec.has_mw) {
      cols.push_back("PL_mw");
      cols.push_back("dODMR");
    }
    CsvBuilder csv(cols);
    for (size_t i = 0; i < spec.delta_f_GHz.size(); ++i) {
      csv.begin_row();
      csv.add(spec.delta_f_GHz[i]);
      csv.add(spec.pl[i]);
      if (spec.has_mw) {
        csv.add(spec.pl_mw[i]);
        csv.add(spec.dodmr[i]);
      }
      csv.end_row();
    }
    emit(cfg, manifest, "optics_holeburn.csv", csv.str());
    for (const auto& w : spec.warnings) std::cout << "warning: " << w << "\n";
    std::cout << "holeburn: " << spec.delta_f_GHz.size() << " points -> "
              << cfg.output.dir << "/optics_holeburn.csv\n";
  } else {
    throw std::runtime_error("unknown optics subcommand '" + what +
                             "' (expected pulse, odmr, t1 or holeburn)");
  }

  manifest.wall_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  manifest.write(cfg.output.dir);
  return 0;
}

// --section.key=value tokens are config overrides, everything else goes to
// the regular parser.
std::vector<std::string> extract_overrides(
    int argc, const char* const* argv,
    std::vector<std::pair<std::string, std::string>>& overrides) {
  static const std::regex pattern(R"(^--([a-z_][a-z0-9_]*(?:\.[a-z0-9_]+)+)=(.*)$)");
  std::vector<std::string> rest;
  for (int i = 0; i < argc; ++i) {
    std::cmatch m;
    if (std::regex_match(argv[i], m, pattern))
      overrides.emplace_back(m[1].str(), m[2].str());
    else
      rest.emplace_back(argv[i]);
  }
  return rest;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  std::setlocale(LC_NUMERIC, "C");

  CommonArgs common;
  const std::vector<std::string> rest = extract_overrides(argc, argv, common.overrides);
  std::vector<const char*> argv2;
  for (const auto& s : rest) argv2.push_back(s.c_str());

  CLI::App app{"spinclock: S=1 molecular spin qubit simulator (levels, ODMR maps, "
               "nuclear-bath Hahn-echo coherence via gCCE, optics rate model)"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "print help for every subcommand");
  app.add_option("--config", common.config_path, "JSON run configuration")
      ->capture_default_str();
  app.add_option("--out", common.out_dir,
                 "output directory (overrides output.dir and SPINCLOCK_OUTDIR)");
  app.footer("Any --section.key=value flag overrides the matching config entry.");

  auto* validate = app.add_subcommand("validate", "check the config and referenced files");
  auto* levels = app.add_subcommand("levels", "spin-sublevel energies vs field");
  auto* odmr_map = app.add_subcommand("odmr-map", "transition frequencies and field derivatives");
  auto* bath_cmd = app.add_subcommand("bath", "generate the nuclear bath and export it");
  auto* coherence = app.add_subcommand("coherence", "gCCE Hahn-echo coherence and T2 fit");

  auto* sweep = app.add_subcommand("sweep", "T2 sweep over E, B or r_bath");
  std::string sweep_var = "E", sweep_grid;
  sweep->add_option("--var", sweep_var, "sweep variable: E, B or r_bath")
      ->capture_default_str();
  sweep->add_option("--grid", sweep_grid, "comma-separated grid values")->required();

  auto* optics = app.add_subcommand("optics", "rate-equation optics simulations");
  optics->require_subcommand(1);
  auto* opt_pulse = optics->add_subcommand("pulse", "optical pumping transient");
  auto* opt_odmr = optics->add_subcommand("odmr", "pulsed ODMR contrast spectrum");
  auto* opt_t1 = optics->add_subcommand("t1", "all-optical T1 sequence");
  auto* opt_holeburn = optics->add_subcommand("holeburn", "two-tone hole burning spectrum");

  try {
    app.parse(static_cast<int>(argv2.size()), argv2.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (validate->parsed()) return cmd_validate(common);
    if (levels->parsed()) return cmd_levels(common);
    if (odmr_map->parsed()) return cmd_odmr_map(common);
    if (bath_cmd->parsed()) return cmd_bath(common);
    if (coherence->parsed()) return cmd_coherence(common);
    if (sweep->parsed()) return cmd_sweep(common, sweep_var, sweep_grid);
    if (optics->parsed()) {
      if (opt_pulse->parsed()) return cmd_optics(common, "pulse");
      if (opt_odmr->parsed()) return cmd_optics(common, "odmr");
      if (opt_t1->parsed()) return cmd_optics(common, "t1");
      if (opt_holeburn->parsed()) return cmd_optics(common, "holeburn");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}

}  // namespace spinclock
