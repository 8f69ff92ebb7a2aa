#include "spinclock/bath.hpp"

#include "spinclock/constants.hpp"
#include "spinclock/csv.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace spinclock {

using json = nlohmann::json;

namespace {

Eigen::Vector3d to_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument(std::string(what) + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Matrix3d to_mat3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument(std::string(what) + ": expected 3x3 matrix");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) m.row(r) = to_vec3(j[r], what).transpose();
  return m;
}

json from_mat3(const Eigen::Matrix3d& m) {
  json j = json::array();
  for (int r = 0; r < 3; ++r) j.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return j;
}

bool is_half_integer(double x) {
  return std::abs(2.0 * x - std::lround(2.0 * x)) < 1e-9;
}

}  // namespace

void CrystalSpec::validate() const {
  if (std::abs(lattice_nm.determinant()) < 1e-12)
    throw std::invalid_argument("crystal: lattice vectors are linearly dependent");
  if (exclusion_radius_nm < 0.0)
    throw std::invalid_argument("crystal: exclusion_radius_nm must be >= 0");
  if (sites.empty())
    throw std::invalid_argument("crystal: no sites");
  for (size_t s = 0; s < sites.size(); ++s) {
    double total = 0.0;
    for (const auto& iso : sites[s].isotopes) {
      if (iso.abundance < 0.0)
        throw std::invalid_argument("crystal: negative abundance at site " +
                                    std::to_string(s));
      if (!is_half_integer(iso.spin) || iso.spin < 0.0)
        throw std::invalid_argument("crystal: spin must be a multiple of 1/2 at site " +
                                    std::to_string(s));
      if (!std::isfinite(iso.gamma_MHz_per_T))
        throw std::invalid_argument("crystal: non-finite gamma at site " +
                                    std::to_string(s));
      total += iso.abundance;
    }
    if (total > 1.0 + 1e-9)
      throw std::invalid_argument("crystal: abundances sum to " +
                                  std::to_string(total) + " > 1 at site " +
                                  std::to_string(s));
  }
}

CrystalSpec parse_crystal(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("crystal: JSON parse error: ") + e.what());
  }
  CrystalSpec spec;
  try {
    spec.lattice_nm = to_mat3(j.at("lattice_nm"), "lattice_nm");
    spec.central_frac = to_vec3(j.at("central"), "central");
    spec.exclusion_radius_nm = j.value("exclusion_radius_nm", 0.05);
    for (const auto& js : j.at("sites")) {
      CrystalSite site;
      site.frac = to_vec3(js.at("frac"), "site frac");
      site.element = js.value("element", "");
      for (const auto& ji : js.at("isotopes")) {
        Isotope iso;
        iso.label = ji.at("label").get<std::string>();
        iso.abundance = ji.value("abundance", 1.0);
        iso.spin = ji.at("I").get<double>();
        iso.gamma_MHz_per_T = ji.at("gamma_MHz_per_T").get<double>();
        site.isotopes.push_back(iso);
      }
      spec.sites.push_back(site);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("crystal: missing or ill-typed field: ") +
                                e.what());
  }
  spec.validate();
  return spec;
}

std::string serialize_crystal(const CrystalSpec& spec) {
  json j;
  j["lattice_nm"] = from_mat3(spec.lattice_nm);
  j["central"] = {spec.central_frac(0), spec.central_frac(1), spec.central_frac(2)};
  j["exclusion_radius_nm"] = spec.exclusion_radius_nm;
  j["sites"] = json::array();
  for (const auto& site : spec.sites) {
    json js;
    js["frac"] = {site.frac(0), site.frac(1), site.frac(2)};
    js["element"] = site.element;
    js["isotopes"] = json::array();
    for (const auto& iso : site.isotopes) {
      js["isotopes"].push_back({{"label", iso.label},
                                {"abundance", iso.abundance},
                                {"I", iso.spin},
                                {"gamma_MHz_per_T", iso.gamma_MHz_per_T}});
    }
    j["sites"].push_back(js);
  }
  return j.dump(2) + "\n";
}

Eigen::Matrix3d dipolar_tensor_MHz(double gamma1_MHz_per_T,
                                   double gamma2_MHz_per_T,
                                   const Eigen::Vector3d& r_nm) {
  const double r = r_nm.norm();
  if (r < 1e-6)
    throw std::invalid_argument("dipolar_tensor: separation below 1e-6 nm");
  // mu0/4pi * h * g1 * g2 / r^3 with gammas in Hz/T and r in m, folded into
  // nm/MHz units: 6.62607015e-8 * g1 * g2 / r^3 [MHz]. The 1e33 carries
  // (1e6)^2 from MHz/T inputs, 1e27 from nm^-3, and 1e-6 Hz -> MHz.
  const double prefactor_MHz = k_mu0_over_4pi_T2m3_per_J * k_planck_Js * 1e33 *
                               gamma1_MHz_per_T * gamma2_MHz_per_T / (r * r * r);
  const Eigen::Vector3d n = r_nm / r;
  return prefactor_MHz *
         (Eigen::Matrix3d::Identity() - 3.0 * n * n.transpose());
}

const NuclearPair* BathModel::find_pair(int i, int j) const {
  if (i > j) std::swap(i, j);
  for (const auto& p : pairs)
    if (p.i == i && p.j == j) return &p;
  return nullptr;
}

void BathModel::rebuild_adjacency() {
  adjacency.assign(spins.size(), {});
  for (size_t k = 0; k < pairs.size(); ++k) {
    adjacency[pairs[k].i].push_back(static_cast<int>(k));
    adjacency[pairs[k].j].push_back(static_cast<int>(k));
  }
}

std::string BathModel::hash() const {
  std::string blob;
  blob.reserve(spins.size() * 96);
  auto put = [&blob](double x) {
    const char* p = reinterpret_cast<const char*>(&x);
    blob.append(p, sizeof(double));
  };
  for (const auto& s : spins) {
    put(static_cast<double>(s.id));
    for (int k = 0; k < 3; ++k) put(s.position_nm(k));
    put(s.spin);
    put(s.gamma_MHz_per_T);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) put(s.hyperfine_MHz(r, c));
  }
  put(r_bath_nm);
  put(r_dipole_nm);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(blob)));
  return std::string(buf);
}

BathModel generate_bath(const CrystalSpec& spec, double r_bath_nm,
                        uint64_t seed, const BathOptions& opts) {
  spec.validate();
  if (!(r_bath_nm > 0.0))
    throw std::invalid_argument("generate_bath: r_bath must be positive");

  const Eigen::Matrix3d a = spec.lattice_nm;  // rows are lattice vectors
  const Eigen::Vector3d center = a.transpose() * spec.central_frac;

  // Conservative per-axis cell counts: reach = r_bath plus one cell diagonal,
  // divided by the cell height along each axis.
  const double diag = a.row(0).norm() + a.row(1).norm() + a.row(2).norm();
  const double volume = std::abs(a.determinant());
  int nmax[3];
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d aj = a.row((i + 1) % 3);
    const Eigen::Vector3d ak = a.row((i + 2) % 3);
    const double height = volume / aj.cross(ak).norm();
    nmax[i] = static_cast<int>(std::ceil((r_bath_nm + diag) / height));
  }

  SplitMix rng(seed);
  BathModel bath;
  bath.r_bath_nm = r_bath_nm;
  bath.r_dipole_nm = opts.r_dipole_nm;
  bath.seed = seed;

  const double gamma_e = electron_gamma_MHz_per_T(opts.g_electron);

  for (int n1 = -nmax[0]; n1 <= nmax[0]; ++n1)
    for (int n2 = -nmax[1]; n2 <= nmax[1]; ++n2)
      for (int n3 = -nmax[2]; n3 <= nmax[2]; ++n3) {
        const Eigen::Vector3d cell_origin =
            a.transpose() * Eigen::Vector3d(n1, n2, n3);
        for (size_t s = 0; s < spec.sites.size(); ++s) {
          const auto& site = spec.sites[s];
          const Eigen::Vector3d pos =
              cell_origin + a.transpose() * site.frac - center;
          const double dist = pos.norm();
          if (dist > r_bath_nm || dist < spec.exclusion_radius_nm) continue;

          // Deterministic occupation for single full-abundance tables; seeded
          // sampling otherwise. Remainder above the abundance sum is spinless.
          const Isotope* picked = nullptr;
          if (site.isotopes.size() == 1 &&
              site.isotopes[0].abundance >= 1.0 - 1e-12) {
            picked = &site.isotopes[0];
          } else {
            const double u = rng.uniform();
            double acc = 0.0;
            for (const auto& iso : site.isotopes) {
              acc += iso.abundance;
              if (u < acc) {
                picked = &iso;
                break;
              }
            }
          }
          if (!picked || picked->spin == 0.0) continue;

          BathSpin spin;
          spin.id = static_cast<int>(bath.spins.size());
          spin.position_nm = pos;
          spin.isotope = picked->label;
          spin.spin = picked->spin;
          spin.gamma_MHz_per_T = picked->gamma_MHz_per_T;
          spin.hyperfine_MHz =
              dipolar_tensor_MHz(gamma_e, picked->gamma_MHz_per_T, pos);
          spin.site_index = static_cast<int>(s);
          spin.cell = Eigen::Vector3i(n1, n2, n3);
          bath.spins.push_back(spin);
          if (static_cast<int>(bath.spins.size()) > opts.max_spins)
            throw std::runtime_error(
                "generate_bath: spin count exceeds cap of " +
                std::to_string(opts.max_spins) + " (r_bath too large?)");
        }
      }

  for (size_t i = 0; i < bath.spins.size(); ++i)
    for (size_t j = i + 1; j < bath.spins.size(); ++j) {
      const Eigen::Vector3d r =
          bath.spins[j].position_nm - bath.spins[i].position_nm;
      if (r.norm() > opts.r_dipole_nm) continue;
      NuclearPair p;
      p.i = static_cast<int>(i);
      p.j = static_cast<int>(j);
      p.tensor_kHz = 1e3 * dipolar_tensor_MHz(bath.spins[i].gamma_MHz_per_T,
                                              bath.spins[j].gamma_MHz_per_T, r);
      bath.pairs.push_back(p);
    }
  bath.rebuild_adjacency();
  return bath;
}

std::vector<HyperfineOverride> parse_hyperfine_overrides(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("overrides: JSON parse error: ") + e.what());
  }
  if (!j.is_array())
    throw std::invalid_argument("overrides: expected a JSON list");
  std::vector<HyperfineOverride> table;
  for (const auto& je : j) {
    HyperfineOverride ov;
    if (je.contains("id")) ov.id = je["id"].get<int>();
    if (je.contains("site_index")) ov.site_index = je["site_index"].get<int>();
    if (je.contains("cell_offset")) {
      const Eigen::Vector3d c = to_vec3(je["cell_offset"], "cell_offset");
      ov.cell = c.cast<int>();
    }
    if (!ov.id && !(ov.site_index && ov.cell))
      throw std::invalid_argument(
          "overrides: entry needs id or (site_index, cell_offset)");
    ov.tensor_MHz = to_mat3(je.at("tensor_MHz"), "tensor_MHz");
    table.push_back(ov);
  }
  return table;
}

BathModel apply_hyperfine_overrides(const BathModel& bath,
                                    const std::vector<HyperfineOverride>& table) {
  BathModel out = bath;
  for (const auto& ov : table) {
    std::vector<int> matches;
    for (const auto& s : out.spins) {
      if (ov.id && s.id != *ov.id) continue;
      if (ov.site_index && s.site_index != *ov.site_index) continue;
      if (ov.cell && s.cell != *ov.cell) continue;
      matches.push_back(s.id);
    }
    if (matches.size() != 1) {
      std::ostringstream oss;
      oss << "hyperfine override matched " << matches.size() << " spins";
      if (!matches.empty()) {
        oss << " (candidates:";
        for (int id : matches) oss << ' ' << id;
        oss << ')';
      }
      throw std::invalid_argument(oss.str());
    }
    BathSpin& s = out.spins[matches[0]];
    s.hyperfine_MHz = ov.tensor_MHz;
    s.hyperfine_override = true;
    s.hyperfine_symmetric =
        (ov.tensor_MHz - ov.tensor_MHz.transpose()).cwiseAbs().maxCoeff() < 1e-12;
  }
  return out;
}

std::string bath_to_csv(const BathModel& bath) {
  CsvBuilder csv({"id", "x_nm", "y_nm", "z_nm", "isotope", "I",
                  "gamma_MHz_per_T", "Axx_MHz", "Axy_MHz", "Axz_MHz",
                  "Ayx_MHz", "Ayy_MHz", "Ayz_MHz", "Azx_MHz", "Azy_MHz",
                  "Azz_MHz"});
  for (const auto& s : bath.spins) {
    csv.begin_row();
    csv.add(s.id);
    csv.add(s.position_nm(0));
    csv.add(s.position_nm(1));
    csv.add(s.position_nm(2));
    csv.add(s.isotope);
    csv.add(s.spin);
    csv.add(s.gamma_MHz_per_T);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) csv.add(s.hyperfine_MHz(r, c));
    csv.end_row();
  }
  return csv.str();
}

}  // namespace spinclock
