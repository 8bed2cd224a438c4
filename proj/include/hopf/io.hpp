#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hopf/adiabatic.hpp"
#include "hopf/bzgrid.hpp"
#include "hopf/invariants.hpp"
#include "hopf/preimage.hpp"
#include "json.hpp"

namespace hopf::io {

using json = nlohmann::json;

/// UTC time as ISO-8601, e.g. 2026-10-18T12:00:00Z.
inline std::string iso8601_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Writes through a sibling temp file and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path() && !path.parent_path().empty()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) fail(ErrorKind::IoError, "write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::IoError, "cannot move output into " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::IoError, what + " is not valid JSON: " + e.what());
  }
}

inline json vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorKind::IoError, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// --- state fields --------------------------------------------------------

inline json to_json(const StateField& f) {
  json entries = json::array();
  if (f.is_pure()) {
    for (const Spinor& s : f.spinors()) {
      for (int c = 0; c < 2; ++c) {
        entries.push_back(s(c).real());
        entries.push_back(s(c).imag());
      }
    }
  } else {
    for (const DensityMatrix& rho : f.density_matrices()) {
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
          entries.push_back(rho(r, c).real());
          entries.push_back(rho(r, c).imag());
        }
      }
    }
  }
  return {{"kind", "state_field"},
          {"n", f.mesh().n},
          {"h", f.params().h},
          {"omega", f.params().omega},
          {"provenance", std::string(to_string(f.provenance()))},
          {"entry", f.is_pure() ? "spinor" : "density_matrix"},
          {"entries", std::move(entries)}};
}

inline StateField state_field_from_json(const json& j) {
  try {
    const MeshSpec mesh(j.at("n").get<int>());
    const HopfParams p{j.at("h").get<double>(), j.value("omega", 1.0)};
    const std::string prov = j.at("provenance").get<std::string>();
    const Provenance provenance = prov == "analytic" ? Provenance::Analytic : Provenance::SimulatedExperiment;
    const std::string entry = j.at("entry").get<std::string>();
    const auto& e = j.at("entries");
    const std::size_t N = mesh.sites();
    if (entry == "spinor") {
      if (e.size() != 4 * N) fail(ErrorKind::IoError, "spinor field needs 4 reals per site");
      std::vector<Spinor> s(N);
      for (std::size_t i = 0; i < N; ++i) {
        s[i] << complex(e[4 * i].get<double>(), e[4 * i + 1].get<double>()),
            complex(e[4 * i + 2].get<double>(), e[4 * i + 3].get<double>());
      }
      return {mesh, p, provenance, std::move(s)};
    }
    if (entry == "density_matrix") {
      if (e.size() != 8 * N) fail(ErrorKind::IoError, "density-matrix field needs 8 reals per site");
      std::vector<DensityMatrix> rho(N);
      for (std::size_t i = 0; i < N; ++i) {
        for (int r = 0; r < 2; ++r) {
          for (int c = 0; c < 2; ++c) {
            const std::size_t o = 8 * i + 4 * r + 2 * c;
            rho[i](r, c) = complex(e[o].get<double>(), e[o + 1].get<double>());
          }
        }
      }
      return {mesh, p, provenance, std::move(rho)};
    }
    fail(ErrorKind::IoError, "unknown entry type '" + entry + "'");
  } catch (const json::exception& ex) {
    fail(ErrorKind::IoError, std::string("malformed state field: ") + ex.what());
  }
}

/// Spin texture export, one row per site: jx,jy,jz,sx,sy,sz.
inline std::string texture_csv(const StateField& f) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "jx,jy,jz,sx,sy,sz\n";
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto j = f.mesh().coords(i);
    const BlochVector s = f.bloch(i);
    os << j[0] << ',' << j[1] << ',' << j[2] << ',' << s.x() << ',' << s.y() << ',' << s.z() << '\n';
  }
  return os.str();
}

inline json texture_json(const StateField& f) {
  json rows = json::array();
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto j = f.mesh().coords(i);
    const BlochVector s = f.bloch(i);
    rows.push_back({j[0], j[1], j[2], s.x(), s.y(), s.z()});
  }
  return {{"kind", "spin_texture"}, {"n", f.mesh().n}, {"h", f.params().h},
          {"columns", {"jx", "jy", "jz", "sx", "sy", "sz"}}, {"rows", std::move(rows)}};
}

// --- invariants ----------------------------------------------------------

inline json chern_json(const std::array<std::vector<int>, 3>& c) {
  return {{"x", c[0]}, {"y", c[1]}, {"z", c[2]}};
}

inline json to_json(const HopfIndexResult& r) {
  return {{"kind", "hopf_index"},
          {"h", r.h},
          {"n", r.n},
          {"chi", r.chi},
          {"nearest_integer", r.nearest_integer},
          {"deviation", r.deviation},
          {"scheme", std::string(to_string(r.scheme))},
          {"chern_numbers", chern_json(r.chern_numbers)}};
}

inline HopfIndexResult hopf_index_from_json(const json& j) {
  HopfIndexResult r;
  r.h = j.at("h").get<double>();
  r.n = j.at("n").get<int>();
  r.chi = j.at("chi").get<double>();
  r.nearest_integer = j.at("nearest_integer").get<int>();
  r.deviation = j.at("deviation").get<double>();
  r.scheme = j.value("scheme", std::string("central")) == "exact" ? ConnectionScheme::Exact : ConnectionScheme::Central;
  const auto& c = j.at("chern_numbers");
  r.chern_numbers = {c.at("x").get<std::vector<int>>(), c.at("y").get<std::vector<int>>(),
                     c.at("z").get<std::vector<int>>()};
  return r;
}

inline json to_json(const std::vector<ScalingRow>& rows, double h, std::optional<int> target) {
  json out = json::array();
  for (const auto& r : rows) out.push_back({{"n", r.n}, {"chi", r.chi}, {"deviation", r.deviation}});
  json j{{"h", h}, {"rows", std::move(out)}};
  j["chi_infinity"] = target ? json(*target) : json(nullptr);
  return j;
}

// --- curves --------------------------------------------------------------

inline json to_json(const Polyline& c) {
  json verts = json::array();
  for (const Vec3& v : c.vertices) verts.push_back(vec3(v));
  json j{{"coords", std::string(to_string(c.coords))}, {"closed", c.closed}, {"vertices", std::move(verts)}};
  j["target"] = c.target ? vec3(*c.target) : json(nullptr);
  j["h"] = c.h ? json(*c.h) : json(nullptr);
  if (c.chart) j["chart"] = std::string(to_string(*c.chart));
  return j;
}

inline Polyline polyline_from_json(const json& j) {
  try {
    Polyline c;
    const std::string coords = j.at("coords").get<std::string>();
    if (coords == "T3") c.coords = Coords::T3;
    else if (coords == "R3") c.coords = Coords::R3;
    else fail(ErrorKind::IoError, "unknown coords '" + coords + "'");
    c.closed = j.at("closed").get<bool>();
    for (const auto& v : j.at("vertices")) c.vertices.push_back(vec3_from(v));
    if (j.contains("target") && !j["target"].is_null()) c.target = vec3_from(j["target"]);
    if (j.contains("h") && !j["h"].is_null()) c.h = j["h"].get<double>();
    if (j.contains("chart")) c.chart = j["chart"].get<std::string>() == "north" ? Chart::North : Chart::South;
    return c;
  } catch (const json::exception& ex) {
    fail(ErrorKind::IoError, std::string("malformed polyline: ") + ex.what());
  }
}

inline json to_json(const LinkMatrix& m) {
  json targets = json::array();
  for (const auto& t : m.targets) targets.push_back(vec3(t));
  json matrix = json::array();
  json residuals = json::array();
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    json row = json::array();
    for (const auto& v : m.values[i]) row.push_back(v ? json(*v) : json(nullptr));
    matrix.push_back(std::move(row));
    residuals.push_back(m.residuals[i]);
  }
  json j{{"kind", "link_matrix"},   {"h", m.h},
         {"targets", targets},      {"loop_counts", m.loop_counts},
         {"matrix", matrix},        {"residuals", residuals}};
  j["method"] = "torus";
  return j;
}

inline LinkMatrix link_matrix_from_json(const json& j) {
  LinkMatrix m;
  m.h = j.at("h").get<double>();
  for (const auto& t : j.at("targets")) m.targets.push_back(vec3_from(t));
  m.loop_counts = j.at("loop_counts").get<std::vector<int>>();
  for (const auto& row : j.at("matrix")) {
    std::vector<std::optional<int>> r;
    for (const auto& v : row) r.push_back(v.is_null() ? std::nullopt : std::optional<int>(v.get<int>()));
    m.values.push_back(std::move(r));
  }
  m.residuals = j.at("residuals").get<std::vector<std::vector<double>>>();
  return m;
}

// --- campaign ------------------------------------------------------------

inline json to_json(const FidelityStats& s) {
  return {{"mean_fidelity", s.mean},
          {"median_fidelity", s.median},
          {"ci95", {s.ci95[0], s.ci95[1]}},
          {"min_fidelity", s.min},
          {"histogram", {{"edges", s.histogram_edges}, {"counts", s.histogram_counts}}}};
}

inline json campaign_stats_json(const CampaignResult& r) {
  json j = to_json(r.stats);
  j["kind"] = "campaign_stats";
  j["h"] = r.field.params().h;
  j["n"] = r.field.mesh().n;
  j["photons_per_site"] = r.photons_per_site;
  j["seed"] = r.seed;
  j["per_site"] = r.fidelities;
  json failures = json::array();
  for (const auto& f : r.failures) failures.push_back({{"site", f.site}, {"error", f.message}});
  j["failures"] = failures;
  return j;
}

inline json to_json(const RampSchedule& s, std::size_t stride = 1) {
  stride = std::max<std::size_t>(stride, 1);
  json t = json::array(), amp = json::array(), ph = json::array(), det = json::array();
  for (std::size_t i = 0; i < s.samples.size(); i += stride) {
    t.push_back(double(i) * s.sample_spacing);
    amp.push_back(s.samples[i].amplitude);
    ph.push_back(s.samples[i].phase);
    det.push_back(s.samples[i].detuning);
  }
  return {{"sample_spacing", s.sample_spacing},
          {"stride", stride},
          {"boundaries", s.boundaries},
          {"time", t},
          {"amplitude", amp},
          {"phase", ph},
          {"detuning", det}};
}

/// Serializes with a trailing newline; doubles use shortest round-trip form.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace hopf::io
