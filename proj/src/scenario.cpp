#include "scenario.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"

namespace wardforge::cli {

using nlohmann::json;

namespace {

std::string child(const std::string& path, const std::string& key) {
  std::string escaped;
  for (char c : key) {
    if (c == '~') escaped += "~0";
    else if (c == '/') escaped += "~1";
    else escaped += c;
  }
  return path + "/" + escaped;
}
std::string child(const std::string& path, std::size_t index) { return path + "/" + std::to_string(index); }

void expect_object(const json& j, const std::string& path, const std::set<std::string>& required,
                   const std::set<std::string>& optional) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  for (const auto& key : required)
    if (!j.contains(key)) throw SchemaError(child(path, key), "missing required key");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!required.count(it.key()) && !optional.count(it.key())) throw SchemaError(child(path, it.key()), "unknown key");
}

const json& expect_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  return j;
}

/// Numbers may be written as JSON numbers or as constant expressions such as "2*pi".
double real_value(const json& j, const std::string& path, const Params& names = {}) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      const auto v = eval(parse(j.get<std::string>()), 0.0, names);
      if (!v || std::abs(v->imag()) > 1e-12 * (1.0 + std::abs(v->real())))
        throw SchemaError(path, "expression does not evaluate to a finite real number");
      return v->real();
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError(path, e.what());
    }
  }
  throw SchemaError(path, "expected a number");
}

long long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<long long>();
}

Complex complex_value(const json& j, const std::string& path) {
  if (j.is_number() || j.is_string()) return real_value(j, path);
  expect_object(j, path, {"re", "im"}, {});
  return {real_value(j["re"], child(path, "re")), real_value(j["im"], child(path, "im"))};
}

SpectralPole pole_value(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected a pole object");
  try {
    if (j.contains("r") || j.contains("theta")) {
      expect_object(j, path, {"r", "theta"}, {});
      return SpectralPole::from_polar(real_value(j["r"], child(path, "r")), real_value(j["theta"], child(path, "theta")));
    }
    expect_object(j, path, {"re", "im"}, {});
    return SpectralPole::from_complex(complex_value(j, path));
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(path, e.what());
  }
}

Params params_value(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object of named complex values");
  Params p;
  for (auto it = j.begin(); it != j.end(); ++it) p[it.key()] = complex_value(it.value(), child(path, it.key()));
  return p;
}

std::optional<Lattice> lattice_value(const json& j, const std::string& path) {
  expect_object(j, path, {"omega1", "omega2"}, {});
  try {
    return Lattice(complex_value(j["omega1"], child(path, "omega1")), complex_value(j["omega2"], child(path, "omega2")));
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(path, e.what());
  }
}

/// columns: n rows, each an array of k expression strings.
MeromorphicColumnSpec columns_value(const json& obj, const std::string& path,
                                    const std::optional<Lattice>& fallback = std::nullopt) {
  const std::string cpath = child(path, "columns");
  const json& rows = expect_array(obj["columns"], cpath);
  if (rows.empty()) throw SchemaError(cpath, "need at least one row");
  MeromorphicColumnSpec spec;
  spec.n = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json& row = expect_array(rows[i], child(cpath, i));
    if (i == 0) spec.k = row.size();
    if (row.size() != spec.k || spec.k == 0) throw SchemaError(child(cpath, i), "rows must have equal nonzero length");
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string epath = child(child(cpath, i), c);
      if (!row[c].is_string()) throw SchemaError(epath, "expected an expression string");
      try {
        spec.entries.push_back(parse(row[c].get<std::string>()));
      } catch (const Error& e) {
        throw SchemaError(epath, e.what());
      }
    }
  }
  if (obj.contains("params")) spec.params = params_value(obj["params"], child(path, "params"));
  if (obj.contains("lattice")) spec.lattice = lattice_value(obj["lattice"], child(path, "lattice"));
  else spec.lattice = fallback;
  try {
    spec.validate();
  } catch (const Error& e) {
    throw SchemaError(cpath, e.what());
  }
  return spec;
}

VacuumBase base_value(const json& j, const std::string& path, std::size_t default_n) {
  expect_object(j, path, {"type"}, {"n", "p", "m"});
  const std::string type = j["type"].is_string() ? j["type"].get<std::string>() : "";
  const std::size_t n = j.contains("n") ? std::size_t(integer(j["n"], child(path, "n"))) : default_n;
  if (n < 1) throw SchemaError(child(path, "n"), "n must be positive");
  if (type == "identity") return VacuumBase::identity(n);
  if (type != "A" && type != "B") throw SchemaError(child(path, "type"), "expected \"identity\", \"A\" or \"B\"");
  if (!j.contains("m")) throw SchemaError(child(path, "m"), "missing required key");
  const long long p = j.contains("p") ? integer(j["p"], child(path, "p")) : 1;
  const double m = real_value(j["m"], child(path, "m"));
  if (n < 2 || p < 1 || p >= static_cast<long long>(n)) throw SchemaError(path, "need n >= 2 and 1 <= p <= n-1");
  const auto d = VacuumBase::block_diagonal(n, std::size_t(p), m);
  return type == "A" ? VacuumBase::type_a(d) : VacuumBase::type_b(d);
}

Complex tau_value(const json& obj, const std::string& path) {
  return obj.contains("tau") ? complex_value(obj["tau"], child(path, "tau")) : Complex{0.0, 2.0 * kPi};
}

Lattice induced_lattice_value(const json& obj, const std::string& path, const SpectralPole& z) {
  try {
    return induced_lattice(tau_value(obj, path), z);
  } catch (const Error& e) {
    throw SchemaError(child(path, "tau"), e.what());
  }
}

std::pair<int, int> mode_value(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw SchemaError(path, "expected [j, l]");
  return {int(integer(j[0], child(path, 0))), int(integer(j[1], child(path, 1)))};
}

const std::map<std::string, std::set<std::string>>& construction_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"one_soliton", {"pole", "columns", "params", "lattice", "base"}},
      {"custom_stack", {"steps", "base"}},
      {"doubly_periodic", {"pole", "columns", "params", "lattice", "tau"}},
      {"triply_periodic", {"factors", "exact_ratios", "tol"}},
      {"heteroclinic", {"m", "mode"}},
      {"homoclinic", {"n", "p", "m", "odd_modes"}},
      {"periodic_orbit_homoclinic", {"n", "p", "m", "odd_modes"}},
  };
  return keys;
}

const std::map<std::string, std::set<std::string>>& check_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"unitarity", {}},
      {"reality", {"samples"}},
      {"lax", {"h", "points"}},
      {"ward_residual", {"h", "ratio_range"}},
      {"periodicity", {"shifts"}},
      {"heteroclinic_limits", {"t_far"}},
      {"homoclinic_fit", {"rate_tol", "min_cosine"}},
      {"linearization", {"h"}},
  };
  return keys;
}

Axis axis_value(const json& j, const std::string& path, Axis a) {
  if (!j.is_array() || j.size() != 2) throw SchemaError(path, "expected [lo, hi]");
  a.lo = real_value(j[0], child(path, 0));
  a.hi = real_value(j[1], child(path, 1));
  if (!(a.hi > a.lo)) throw SchemaError(path, "need hi > lo");
  return a;
}

// Checks each construction's structure eagerly so that schema errors are
// reported before any computation.
void validate_construction(const json& c) {
  const std::string path = "/construction";
  if (!c.is_object()) throw SchemaError(path, "expected an object");
  if (!c.contains("kind") || !c["kind"].is_string()) throw SchemaError(child(path, "kind"), "missing or non-string kind");
  const std::string kind = c["kind"].get<std::string>();
  const auto it = construction_keys().find(kind);
  if (it == construction_keys().end()) throw SchemaError(child(path, "kind"), "unknown construction kind '" + kind + "'");
  std::set<std::string> allowed = it->second;
  allowed.insert("kind");
  for (auto k = c.begin(); k != c.end(); ++k)
    if (!allowed.count(k.key())) throw SchemaError(child(path, k.key()), "unknown key");

  auto need = [&](const std::string& key) {
    if (!c.contains(key)) throw SchemaError(child(path, key), "missing required key");
  };
  if (kind == "one_soliton" || kind == "doubly_periodic") {
    need("pole");
    need("columns");
    const SpectralPole z = pole_value(c["pole"], child(path, "pole"));
    std::optional<Lattice> induced;
    if (kind == "doubly_periodic") induced = induced_lattice_value(c, path, z);
    const auto spec = columns_value(c, path, induced);
    if (c.contains("base")) base_value(c["base"], child(path, "base"), spec.n);
  } else if (kind == "custom_stack") {
    need("steps");
    const std::string spath = child(path, "steps");
    const json& steps = expect_array(c["steps"], spath);
    std::size_t n = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const std::string p = child(spath, i);
      expect_object(steps[i], p, {"pole", "columns"}, {"params", "lattice"});
      pole_value(steps[i]["pole"], child(p, "pole"));
      const auto spec = columns_value(steps[i], p);
      if (n == 0) n = spec.n;
      if (spec.n != n) throw SchemaError(child(p, "columns"), "all steps need the same number of rows");
    }
    if (c.contains("base")) {
      const VacuumBase b = base_value(c["base"], child(path, "base"), n == 0 ? 2 : n);
      if (n != 0 && b.n() != n) throw SchemaError(child(path, "base"), "base size differs from column rows");
    } else if (n == 0) {
      throw SchemaError(child(path, "base"), "an empty stack needs a base");
    }
  } else if (kind == "triply_periodic") {
    need("factors");
    const std::string fpath = child(path, "factors");
    const json& fs = expect_array(c["factors"], fpath);
    if (fs.empty()) throw SchemaError(fpath, "need at least one factor");
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const std::string p = child(fpath, i);
      expect_object(fs[i], p, {"pole", "columns"}, {"params", "lattice", "tau"});
      const SpectralPole z = pole_value(fs[i]["pole"], child(p, "pole"));
      columns_value(fs[i], p, induced_lattice_value(fs[i], p, z));
    }
    if (c.contains("exact_ratios")) {
      const std::string rpath = child(path, "exact_ratios");
      const json& rs = expect_array(c["exact_ratios"], rpath);
      for (std::size_t i = 0; i < rs.size(); ++i) mode_value(rs[i], child(rpath, i));
    }
    if (c.contains("tol")) real_value(c["tol"], child(path, "tol"));
  } else if (kind == "heteroclinic") {
    need("m");
    need("mode");
    integer(c["m"], child(path, "m"));
    mode_value(c["mode"], child(path, "mode"));
  } else {
    need("m");
    need("odd_modes");
    integer(c["m"], child(path, "m"));
    if (c.contains("n")) integer(c["n"], child(path, "n"));
    if (c.contains("p")) integer(c["p"], child(path, "p"));
    const std::string mpath = child(path, "odd_modes");
    const json& ms = expect_array(c["odd_modes"], mpath);
    if (ms.empty()) throw SchemaError(mpath, "need at least one mode");
    for (std::size_t i = 0; i < ms.size(); ++i) mode_value(ms[i], child(mpath, i));
  }
}

Params shift_names(const Built& b) {
  return {{"period", b.time_period}, {"tau_dx", b.tau_shift.first}, {"tau_dy", b.tau_shift.second}};
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  expect_object(doc, "", {"construction"}, {"verifications", "output", "name"});
  Scenario s;
  validate_construction(doc["construction"]);
  s.construction = doc["construction"];

  if (doc.contains("verifications")) {
    const json& vs = expect_array(doc["verifications"], "/verifications");
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const std::string p = child("/verifications", i);
      if (!vs[i].is_object()) throw SchemaError(p, "expected an object");
      if (!vs[i].contains("check") || !vs[i]["check"].is_string()) throw SchemaError(child(p, "check"), "missing check name");
      const std::string name = vs[i]["check"].get<std::string>();
      const auto it = check_keys().find(name);
      if (it == check_keys().end()) throw SchemaError(child(p, "check"), "unknown check '" + name + "'");
      std::set<std::string> optional = it->second;
      expect_object(vs[i], p, {"check", "tol"}, optional);
      CheckSpec c;
      c.check = name;
      c.tol = real_value(vs[i]["tol"], child(p, "tol"));
      if (!(c.tol >= 0.0)) throw SchemaError(child(p, "tol"), "tolerance must be non-negative");
      c.options = json::object();
      for (const auto& key : optional)
        if (vs[i].contains(key)) c.options[key] = vs[i][key];
      for (const char* key : {"h", "t_far", "rate_tol", "min_cosine"})
        if (c.options.contains(key)) real_value(c.options[key], child(p, key));
      for (const char* key : {"samples", "points"})
        if (c.options.contains(key) && integer(c.options[key], child(p, key)) < 1) throw SchemaError(child(p, key), "must be positive");
      if (c.options.contains("ratio_range")) axis_value(c.options["ratio_range"], child(p, "ratio_range"), {});
      if (c.options.contains("shifts")) {
        const json& sh = expect_array(c.options["shifts"], child(p, "shifts"));
        for (std::size_t k = 0; k < sh.size(); ++k) {
          const std::string sp = child(child(p, "shifts"), k);
          if (!sh[k].is_array() || sh[k].size() != 3) throw SchemaError(sp, "expected [dx, dy, dt]");
          for (std::size_t q = 0; q < 3; ++q)
            if (!sh[k][q].is_number() && !sh[k][q].is_string()) throw SchemaError(child(sp, q), "expected a number or expression");
        }
      } else if (name == "periodicity") {
        throw SchemaError(child(p, "shifts"), "missing required key");
      }
      s.checks.push_back(std::move(c));
    }
  }

  if (doc.contains("output")) {
    const json& o = doc["output"];
    expect_object(o, "/output", {}, {"grid", "dump"});
    if (o.contains("dump")) {
      if (!o["dump"].is_boolean()) throw SchemaError("/output/dump", "expected a boolean");
      s.dump = o["dump"].get<bool>();
    }
    if (o.contains("grid")) {
      const json& g = o["grid"];
      expect_object(g, "/output/grid", {}, {"counts", "x", "y", "t"});
      if (g.contains("counts")) {
        const json& c = g["counts"];
        if (!c.is_array() || c.size() != 3) throw SchemaError("/output/grid/counts", "expected [nx, ny, nt]");
        Axis* axes[3] = {&s.grid.x, &s.grid.y, &s.grid.t};
        for (std::size_t i = 0; i < 3; ++i) {
          const long long v = integer(c[i], child("/output/grid/counts", i));
          if (v < 5) throw SchemaError(child("/output/grid/counts", i), "need at least 5 points");
          axes[i]->count = std::size_t(v);
        }
      }
      if (g.contains("x")) s.grid.x = axis_value(g["x"], "/output/grid/x", s.grid.x);
      if (g.contains("y")) s.grid.y = axis_value(g["y"], "/output/grid/y", s.grid.y);
      if (g.contains("t")) s.grid.t = axis_value(g["t"], "/output/grid/t", s.grid.t);
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("", "cannot read scenario file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

Built build(const Scenario& s) {
  const json& c = s.construction;
  const std::string kind = c["kind"].get<std::string>();
  const std::string path = "/construction";
  Built b;
  b.kind = kind;

  auto finish = [&](ExtendedSolution psi) {
    b.psi = psi;
    b.ward = ward_map_of(*b.psi);
  };

  if (kind == "one_soliton") {
    const auto spec = columns_value(c, path);
    const VacuumBase base = c.contains("base") ? base_value(c["base"], child(path, "base"), spec.n) : VacuumBase::identity(spec.n);
    finish(backlund_step(ExtendedSolution(base), {pole_value(c["pole"], child(path, "pole")), spec}));
  } else if (kind == "custom_stack") {
    std::vector<BacklundStep> steps;
    std::size_t n = 0;
    const json& js = c["steps"];
    for (std::size_t i = 0; i < js.size(); ++i) {
      const std::string p = child(child(path, "steps"), i);
      auto spec = columns_value(js[i], p);
      n = spec.n;
      steps.push_back({pole_value(js[i]["pole"], child(p, "pole")), std::move(spec)});
    }
    const VacuumBase base = c.contains("base") ? base_value(c["base"], child(path, "base"), n == 0 ? 2 : n) : VacuumBase::identity(n);
    finish(stack(base, steps));
  } else if (kind == "doubly_periodic") {
    const SpectralPole z = pole_value(c["pole"], child(path, "pole"));
    const Complex tau = tau_value(c, path);
    const auto spec = columns_value(c, path, induced_lattice(tau, z));
    const BacklundStep step = doubly_periodic_steps(tau, z, spec);
    b.tau_shift = {tau.real(), tau.imag()};
    finish(backlund_step(ExtendedSolution(VacuumBase::identity(spec.n)), step));
  } else if (kind == "triply_periodic") {
    std::vector<PeriodicFactorSpec> specs;
    const json& fs = c["factors"];
    std::size_t n = 0;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const std::string p = child(child(path, "factors"), i);
      const SpectralPole z = pole_value(fs[i]["pole"], child(p, "pole"));
      const Complex tau = tau_value(fs[i], p);
      auto spec = columns_value(fs[i], p, induced_lattice(tau, z));
      n = spec.n;
      specs.push_back({z, std::move(spec), tau});
    }
    std::vector<Fraction> exact;
    if (c.contains("exact_ratios"))
      for (const auto& r : c["exact_ratios"]) exact.push_back({r[0].get<long long>(), r[1].get<long long>()});
    const double tol = c.contains("tol") ? real_value(c["tol"], child(path, "tol")) : 1e-9;
    const TriplyPeriodic tp = triply_periodic_steps(specs, tol, exact);
    b.time_period = tp.common_period;
    finish(stack(VacuumBase::identity(n), tp.steps));
  } else if (kind == "heteroclinic") {
    const auto [j, l] = mode_value(c["mode"], child(path, "mode"));
    b.heteroclinic = heteroclinic_single_step(int(c["m"].get<long long>()), j, l);
    finish(backlund_step(ExtendedSolution(b.heteroclinic->base), b.heteroclinic->step));
  } else {
    std::vector<std::pair<int, int>> modes;
    for (std::size_t i = 0; i < c["odd_modes"].size(); ++i)
      modes.push_back(mode_value(c["odd_modes"][i], child(child(path, "odd_modes"), i)));
    const int n = c.contains("n") ? int(c["n"].get<long long>()) : 2;
    const int p = c.contains("p") ? int(c["p"].get<long long>()) : 1;
    b.homoclinic = homoclinic_recipe(n, p, int(c["m"].get<long long>()), modes,
                                     kind == "homoclinic" ? Flavor::TypeA : Flavor::TypeB);
    finish(stack(b.homoclinic->base, b.homoclinic->steps));
  }
  return b;
}

namespace {

double option(const json& o, const char* key, double fallback) {
  return o.contains(key) ? real_value(o[key], key) : fallback;
}

json grid_json(const Grid3& g) {
  auto axis = [](const Axis& a) { return json{{"lo", a.lo}, {"hi", a.hi}, {"count", a.count}, {"closed", a.closed}}; };
  return json{{"x", axis(g.x)}, {"y", axis(g.y)}, {"t", axis(g.t)}};
}

json run_check(const CheckSpec& c, const Scenario& s, const Built& b) {
  json r{{"check", c.check}, {"tol", c.tol}};
  double value = 0.0;
  bool extra_ok = true;
  const json& o = c.options;

  if (c.check == "unitarity") {
    const auto d = max_special_unitary_defect(b.ward, s.grid);
    r["unitarity_defect"] = d.unitarity;
    r["determinant_defect"] = std::abs(d.determinant);
    value = std::max(d.unitarity, std::abs(d.determinant));
  } else if (c.check == "reality") {
    const auto samples = std::size_t(o.contains("samples") ? o["samples"].get<long long>() : 50);
    std::mt19937_64 rng(20240917);
    std::uniform_real_distribution<double> ux(s.grid.x.lo, s.grid.x.hi), uy(s.grid.y.lo, s.grid.y.hi),
        ut(s.grid.t.lo, s.grid.t.hi), ul(-2.0, 2.0);
    for (std::size_t i = 0; i < samples; ++i) {
      const double x = ux(rng), y = uy(rng), t = ut(rng);
      Complex lam{ul(rng), ul(rng)};
      bool near = false;
      for (const auto& f : b.psi->factors())
        near = near || std::abs(lam - f.pole.z) < 1e-3 || std::abs(lam - std::conj(f.pole.z)) < 1e-3;
      if (near) lam += Complex{0.01, 0.013};
      value = std::max(value, reality_defect(*b.psi, x, y, t, lam));
    }
  } else if (c.check == "lax") {
    const double h = option(o, "h", 1e-4);
    const auto points = std::size_t(o.contains("points") ? o["points"].get<long long>() : 3);
    for (std::size_t i = 0; i < points; ++i) {
      const auto p = s.grid.point((i * 7919) % s.grid.size());
      value = std::max(value, lax_coefficients(*b.psi, p.x + 0.013, p.y + 0.029, p.t + 0.011, {Complex{0.37, 0.0}, Complex{-0.61, 0.29}}, h)
                                  .independence_defect);
    }
  } else if (c.check == "ward_residual") {
    const auto rep = ward_residual(b.ward, s.grid, option(o, "h", 1e-3));
    value = rep.max;
    r["mean"] = rep.mean;
    r["half_step_max"] = rep.fine_max;
    r["ratio"] = rep.ratio;
    if (o.contains("ratio_range")) {
      const Axis range = axis_value(o["ratio_range"], "ratio_range", {});
      extra_ok = rep.ratio >= range.lo && rep.ratio <= range.hi;
    }
  } else if (c.check == "periodicity") {
    const Params names = shift_names(b);
    std::vector<Shift> shifts;
    for (const auto& sh : o["shifts"])
      shifts.push_back({real_value(sh[0], "dx", names), real_value(sh[1], "dy", names), real_value(sh[2], "dt", names)});
    const auto d = periodicity_defect(b.ward, shifts, s.grid);
    r["defects"] = d;
    json resolved = json::array();
    for (const auto& sh : shifts) resolved.push_back({sh.dx, sh.dy, sh.dt});
    r["shifts"] = resolved;
    for (double v : d) value = std::max(value, v);
  } else if (c.check == "heteroclinic_limits") {
    if (!b.heteroclinic) throw Error(ErrorCode::InvalidArgument, "heteroclinic_limits needs a heteroclinic construction");
    const auto& h = *b.heteroclinic;
    const auto d = heteroclinic_limits(b.ward, h.base, h.theta, option(o, "t_far", 40.0 / h.mode.rate), s.grid.x, s.grid.y);
    r["plus"] = d.plus;
    r["minus"] = d.minus;
    value = std::max(d.plus, d.minus);
  } else if (c.check == "homoclinic_fit") {
    if (!b.homoclinic) throw Error(ErrorCode::InvalidArgument, "homoclinic_fit needs a homoclinic construction");
    const auto& rec = *b.homoclinic;
    if (rec.n != 2) throw Error(ErrorCode::InvalidArgument, "mode fits are defined for n = 2");
    std::vector<ModeIndex> modes;
    for (const auto& p : rec.pairs) {
      modes.push_back(p.odd);
      modes.push_back(p.even);
    }
    const double rate_tol = option(o, "rate_tol", 0.02), min_cos = option(o, "min_cosine", 0.99);
    json ends = json::array();
    for (const TimeEnd end : {TimeEnd::Minus, TimeEnd::Plus}) {
      const auto f = homoclinic_fit(b.ward, rec.base, rec.limit_phase(), modes, rec.flavor, end, rec.min_rate());
      const bool rate_ok = std::abs(f.fitted_rate - f.predicted_rate) <= rate_tol * f.predicted_rate;
      extra_ok = extra_ok && rate_ok && f.direction_cosine >= min_cos && f.monotone;
      value = std::max(value, f.limit_defect);
      ends.push_back(json{{"end", end == TimeEnd::Minus ? "minus" : "plus"},
                          {"fitted_rate", f.fitted_rate},
                          {"predicted_rate", f.predicted_rate},
                          {"direction_cosine", f.direction_cosine},
                          {"mode_cosines", f.mode_cosines},
                          {"limit_defect", f.limit_defect},
                          {"monotone", f.monotone}});
    }
    r["ends"] = ends;
  } else if (c.check == "linearization") {
    std::vector<ModeIndex> modes;
    Flavor flavor = Flavor::TypeA;
    VacuumBase base = VacuumBase::identity(2);
    if (b.homoclinic) {
      flavor = b.homoclinic->flavor;
      base = b.homoclinic->base;
      for (const auto& p : b.homoclinic->pairs) {
        modes.push_back(p.odd);
        modes.push_back(p.even);
      }
    } else if (b.heteroclinic) {
      base = b.heteroclinic->base;
      modes.push_back(b.heteroclinic->mode);
    } else {
      throw Error(ErrorCode::InvalidArgument, "linearization needs a homoclinic or heteroclinic construction");
    }
    if (base.n() != 2) throw Error(ErrorCode::InvalidArgument, "mode fields are defined for n = 2");
    const ComplexMatrix d = ComplexMatrix::diagonal(base.diag());
    double rel = 0.0;
    for (const auto& m : modes)
      for (const ModeSign sg : {ModeSign::Stable, ModeSign::Unstable}) {
        const auto rep = linearization_residual(linear_mode_field(m, 1.0, sg, flavor), d, flavor, s.grid, option(o, "h", 1e-3));
        value = std::max(value, rep.absolute.max);
        rel = std::max(rel, rep.max_relative);
      }
    r["relative"] = rel;
  }
  r["value"] = value;
  r["pass"] = value <= c.tol && extra_ok;
  return r;
}

}  // namespace

json verify(const Scenario& s, const Built& b) {
  json report{{"tool", kToolVersion}, {"construction", s.construction}, {"grid", grid_json(s.grid)}};
  if (b.time_period > 0.0) report["time_period"] = b.time_period;
  json checks = json::array();
  bool all = true;
  for (const auto& c : s.checks) {
    json r;
    try {
      r = run_check(c, s, b);
    } catch (const Error& e) {
      r = json{{"check", c.check}, {"tol", c.tol}, {"error", e.what()}, {"pass", false}};
    }
    all = all && r["pass"].get<bool>();
    checks.push_back(std::move(r));
  }
  report["checks"] = checks;
  report["pass"] = all;
  return report;
}

void write_dump(const Scenario& s, const Built& b, const std::string& dir) {
  const std::string csv_path = dir + "/J.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw Error(ErrorCode::InvalidArgument, "cannot write '" + csv_path + "'");
  const auto values = detail::parallel_map<ComplexMatrix>(s.grid.size(), [&](std::size_t i) {
    const auto p = s.grid.point(i);
    return b.ward(p.x, p.y, p.t);
  });
  const std::size_t n = values.empty() ? 0 : values.front().rows();
  csv << "x,y,t";
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) csv << ",re_" << r + 1 << c + 1 << ",im_" << r + 1 << c + 1;
  csv << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    csv << buf;
  };
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto p = s.grid.point(i);
    std::snprintf(buf, sizeof buf, "%.17g", p.x);
    csv << buf;
    put(p.y);
    put(p.t);
    for (const Complex& v : values[i].values()) {
      put(v.real());
      put(v.imag());
    }
    csv << "\n";
  }
  std::ofstream manifest(dir + "/J.manifest.json");
  manifest << json{{"tool", kToolVersion}, {"construction", s.construction}, {"grid", grid_json(s.grid)}, {"rows", values.size()}}.dump(2)
           << "\n";
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Construct and verify Ward maps from JSON scenarios", "wardforge"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = ".", grid_text, flavor_text = "A", z_text, tau_text;
  double tol_override = -1.0, period_tol = 1e-9;
  int modes_m = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--grid", grid_text, "Grid counts NX,NY,NT");
    sub->add_option("--tol", tol_override, "Override every check tolerance");
  };
  CLI::App* build_cmd = app.add_subcommand("build", "Construct and dump J on the grid");
  add_common(build_cmd);
  CLI::App* verify_cmd = app.add_subcommand("verify", "Construct and run the declared checks");
  add_common(verify_cmd);
  CLI::App* modes_cmd = app.add_subcommand("modes", "List the integer mode ball for m");
  modes_cmd->add_option("m", modes_m, "Nonzero integer m")->required();
  modes_cmd->add_option("--flavor", flavor_text, "A or B")->check(CLI::IsMember({"A", "B"}));
  CLI::App* period_cmd = app.add_subcommand("period", "Time period of the soliton with pole z");
  period_cmd->add_option("z", z_text, "Pole as a constant expression, e.g. exp(i*pi/3)")->required();
  period_cmd->add_option("--tau", tau_text, "Lattice constant tau = c1 + i c2 (default 2*pi*i)");
  period_cmd->add_option("--tol", period_tol, "Rational detection tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kSchemaError;
  }

  if (*modes_cmd) {
    try {
      const auto modes = ball_modes(modes_m, flavor_text == "A" ? Flavor::TypeA : Flavor::TypeB);
      out << "j\tl\trate\n";
      char buf[64];
      for (const auto& m : modes) {
        std::snprintf(buf, sizeof buf, "%d\t%d\t%.12g\n", m.j, m.l, m.rate);
        out << buf;
      }
      return kOk;
    } catch (const Error& e) {
      err << e.what() << "\n";
      return kSchemaError;
    }
  }

  if (*period_cmd) {
    auto constant = [&](const std::string& text) -> Complex {
      const auto v = eval(parse(text), 0.0);
      if (!v) throw Error(ErrorCode::InvalidArgument, "'" + text + "' is not a finite constant");
      return *v;
    };
    try {
      const SpectralPole z = SpectralPole::from_complex(constant(z_text));
      const Complex tau = tau_text.empty() ? Complex{0.0, 2.0 * kPi} : constant(tau_text);
      const auto p = period_of(z, period_tol, tau);
      char buf[128];
      if (!p) {
        out << "NotPeriodic\n";
      } else if (p->kind == PeriodKind::UnitModulus) {
        std::snprintf(buf, sizeof buf, "UnitModulus T=%.17g\n", p->period);
        out << buf;
      } else {
        std::snprintf(buf, sizeof buf, "RationalRatio m1=%lld m2=%lld T=%.17g\n", p->m1, p->m2, p->period);
        out << buf;
      }
      return kOk;
    } catch (const Error& e) {
      err << e.what() << "\n";
      return kSchemaError;
    }
  }

  Scenario s;
  try {
    s = load_scenario(scenario_path);
    if (!grid_text.empty()) {
      std::stringstream ss(grid_text);
      std::string part;
      std::vector<long long> counts;
      while (std::getline(ss, part, ',')) counts.push_back(std::stoll(part));
      if (counts.size() != 3 || counts[0] < 5 || counts[1] < 5 || counts[2] < 5)
        throw SchemaError("", "--grid expects NX,NY,NT with each >= 5");
      s.grid.x.count = std::size_t(counts[0]);
      s.grid.y.count = std::size_t(counts[1]);
      s.grid.t.count = std::size_t(counts[2]);
    }
    if (tol_override >= 0.0)
      for (auto& c : s.checks) c.tol = tol_override;
  } catch (const SchemaError& e) {
    err << e.what() << "\n";
    return kSchemaError;
  } catch (const std::exception& e) {
    err << "schema error: " << e.what() << "\n";
    return kSchemaError;
  }

  Built b;
  try {
    b = build(s);
  } catch (const SchemaError& e) {
    err << e.what() << "\n";
    return kSchemaError;
  } catch (const Error& e) {
    err << "construction error: " << e.what() << "\n";
    return kConstructionError;
  }

  try {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::InvalidArgument, "cannot create '" + out_dir + "': " + ec.message());
    if (*build_cmd || s.dump) write_dump(s, b, out_dir);
    if (*build_cmd) return kOk;
    const json report = verify(s, b);
    std::ofstream rep(out_dir + "/report.json");
    if (!rep) throw Error(ErrorCode::InvalidArgument, "cannot write report in '" + out_dir + "'");
    rep << report.dump(2) << "\n";
    for (const auto& c : report["checks"]) {
      out << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["check"].get<std::string>();
      if (c.contains("value")) {
        char buf[64];
        std::snprintf(buf, sizeof buf, " value=%.3e tol=%.3e", c["value"].get<double>(), c["tol"].get<double>());
        out << buf;
      } else if (c.contains("error")) {
        out << " " << c["error"].get<std::string>();
      }
      out << "\n";
    }
    return report["pass"].get<bool>() ? kOk : kVerificationFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConstructionError;
  }
}

}  // namespace wardforge::cli
