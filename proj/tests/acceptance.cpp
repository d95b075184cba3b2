// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scenario.hpp"

using namespace wardforge;

namespace {

// Tolerances and settings.
constexpr double kResidualMax = 1e-5;
constexpr double kRatioLo = 3.3, kRatioHi = 4.7;
constexpr double kCaseSeconds = 60.0;
constexpr double kUnitaryTol = 1e-9;
constexpr double kRealityTol = 1e-9;
constexpr double kLaxTol = 1e-8;
constexpr double kAlgebraTol = 1e-11;
constexpr double kWpPeriodTol = 1e-9, kWpOdeTol = 1e-7, kG3Tol = 1e-9, kWpSeconds = 5.0;
constexpr double kSpatialTol = 1e-8, kTimeTol = 1e-7;
constexpr double kLinearTol = 1e-6, kControlFactor = 1e4;
constexpr double kHeteroTol = 1e-8;
constexpr double kLimitTol = 1e-6, kRateRel = 0.02, kOverlap = 0.99, kHomoclinicSeconds = 120.0;

struct Criterion {
  int id;
  std::string title;
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4))) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    details.push_back(std::string(ok ? "ok   " : "MISS ") + buf);
    pass = pass && ok;
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

MeromorphicColumnSpec cols(std::size_t n, std::size_t k, std::vector<std::string> e, std::optional<Lattice> lat = {}) {
  return MeromorphicColumnSpec::from_strings(n, k, e, {}, std::move(lat));
}

VacuumBase type_a(double m) { return VacuumBase::type_a(VacuumBase::block_diagonal(2, 1, m)); }

ExtendedSolution rational_one_soliton() {
  return stack(VacuumBase::identity(2), {{SpectralPole::from_complex({0.5, 1.0}), cols(2, 1, {"1", "w"})}});
}

ExtendedSolution rational_two_step() {
  return stack(VacuumBase::identity(2), {{SpectralPole::from_complex({0.4, 1.3}), cols(2, 1, {"1", "w"})},
                                         {SpectralPole::from_complex({0.7, 0.8}), cols(2, 1, {"w - 1", "w*w + 2"})}});
}

ExtendedSolution four_step() {
  return stack(type_a(1.0), {{SpectralPole::from_complex({0.4, 1.3}), cols(2, 1, {"1", "w"})},
                             {SpectralPole::from_complex({-0.5, 0.9}), cols(2, 1, {"w", "1 + 1/w"})},
                             {SpectralPole::from_complex({0.2, -1.1}), cols(2, 1, {"w - 1", "exp(i*w)"})},
                             {SpectralPole::from_complex({1.5, 0.6}), cols(2, 1, {"1", "w*w"})}});
}

HomoclinicRecipe homoclinic(Flavor f) { return homoclinic_recipe(2, 1, 2, {f == Flavor::TypeA ? std::pair{1, 3} : std::pair{1, 5}}, f); }

Lattice torus_lattice(const SpectralPole& z) { return induced_lattice(Complex(0.0, 2.0 * kPi), z); }

ExtendedSolution wp_soliton() {
  const auto z = SpectralPole::from_complex({1.0, 1.0});
  return stack(VacuumBase::identity(2), {doubly_periodic_steps(Complex(0.0, 2.0 * kPi), z, cols(2, 1, {"1", "wp(w)"}, torus_lattice(z)))});
}

Criterion exactness() {
  Criterion c{1, "Ward residual is second order and below 1e-5 for exact constructions"};
  const Grid3 grid;  // 16 x 16 x 5 is set below
  Grid3 g = grid;
  g.x.count = g.y.count = 16;
  g.t.count = 5;
  const auto j2 = homoclinic(Flavor::TypeA);
  const std::vector<std::pair<std::string, Field>> cases{
      {"vacuum J0 (m=1)", ward_map_of(ExtendedSolution(type_a(1.0)))},
      {"rational 1-soliton", ward_map_of(rational_one_soliton())},
      {"rational 2-step stack", ward_map_of(rational_two_step())},
      {"homoclinic J2 (m=2)", ward_map_of(stack(j2.base, j2.steps))},
  };
  for (const auto& [name, J] : cases) {
    const auto start = std::chrono::steady_clock::now();
    const auto rep = ward_residual(J, g, 2e-3);  // ratio between h = 2e-3 and 1e-3
    const double secs = seconds_since(start);
    c.check(rep.fine_max < kResidualMax && rep.ratio >= kRatioLo && rep.ratio <= kRatioHi && secs < kCaseSeconds,
            "%-22s max(h=1e-3)=%.3e ratio=%.3f time=%.1fs", name.c_str(), rep.fine_max, rep.ratio, secs);
  }
  return c;
}

Criterion group_valued() {
  Criterion c{2, "Constructed maps are special unitary at every grid point"};
  Grid3 g;
  g.x.count = g.y.count = 16;
  g.t.count = 5;
  const auto a = homoclinic(Flavor::TypeA), b = homoclinic(Flavor::TypeB);
  const auto het = heteroclinic_single_step(2, 1, 2);
  const std::vector<std::pair<std::string, Field>> cases{
      {"vacuum", ward_map_of(ExtendedSolution(type_a(1.0)))},
      {"1-soliton", ward_map_of(rational_one_soliton())},
      {"2-step", ward_map_of(rational_two_step())},
      {"4-step", ward_map_of(four_step())},
      {"wp soliton", ward_map_of(wp_soliton())},
      {"heteroclinic", ward_map_of(stack(het.base, {het.step}))},
      {"homoclinic A", ward_map_of(stack(a.base, a.steps))},
      {"homoclinic B", ward_map_of(stack(b.base, b.steps))},
  };
  for (const auto& [name, J] : cases) {
    const auto d = max_special_unitary_defect(J, g);
    c.check(d.unitarity < kUnitaryTol && std::abs(d.determinant) < kUnitaryTol, "%-13s unitarity=%.2e det=%.2e",
            name.c_str(), d.unitarity, std::abs(d.determinant));
  }
  return c;
}

Criterion reality_and_lax() {
  Criterion c{3, "Reality condition and Lax pair"};
  std::mt19937_64 rng(20240917);
  std::uniform_real_distribution<double> pos(0.0, 2.0 * kPi), time(-1.0, 1.0), unit(-1.0, 1.0);
  const auto psi = four_step();
  double worst = 0.0;
  for (int i = 0; i < 50; ++i)
    worst = std::max(worst, reality_defect(psi, pos(rng), pos(rng), time(rng), Complex(unit(rng), unit(rng))));
  c.check(worst < kRealityTol, "reality defect, 4-step stack, 50 samples: %.2e", worst);

  const auto d = VacuumBase::block_diagonal(2, 1, 1.0);
  const auto a = ComplexMatrix::diagonal(d);
  double lax = 0.0;
  for (const auto& p : {std::array{0.3, 0.7, 0.2}, std::array{2.0, -1.0, 0.9}}) {
    const auto rep = lax_coefficients(ExtendedSolution(VacuumBase::type_a(d)), p[0], p[1], p[2], {0.37, Complex(-0.61, 0.29)}, 1e-4);
    for (const auto& m : rep.a) lax = std::max(lax, (m + a).frobenius_norm());
    for (const auto& m : rep.b) lax = std::max(lax, (m + a).frobenius_norm());
  }
  c.check(lax < kLaxTol, "vacuum A = B = -a at h=1e-4: max deviation %.2e", lax);

  const auto stack2 = rational_two_step();
  const double coarse = lax_coefficients(stack2, 0.2, 0.1, 0.3, {0.37, Complex(-0.61, 0.29)}, 2e-3).independence_defect;
  const double fine = lax_coefficients(stack2, 0.2, 0.1, 0.3, {0.37, Complex(-0.61, 0.29)}, 1e-3).independence_defect;
  const double ratio = coarse / fine;
  c.check(ratio >= kRatioLo && ratio <= kRatioHi, "stack independence defect %.2e -> %.2e, ratio %.3f", coarse, fine, ratio);
  return c;
}

Criterion simple_element_algebra() {
  Criterion c{4, "Simple-element identities at 100 random lambda"};
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  const Complex z(0.4, 1.3);
  double inv = 0.0, unit = 0.0, det = 0.0;
  for (std::size_t k : {1u, 2u}) {
    ComplexMatrix v(3, k);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < k; ++j) v(i, j) = {g(rng), g(rng)};
    const auto pi = hermitian_projector(v).matrix;
    const auto id = ComplexMatrix::identity(3);
    for (int i = 0; i < 100; ++i) {
      const Complex lam(2.0 * g(rng), 2.0 * g(rng));
      const auto h = simple_element(z, pi, lam);
      unit = std::max(unit, (simple_element(z, pi, std::conj(lam)).adjoint() * h - id).frobenius_norm());
      inv = std::max(inv, (simple_element(std::conj(z), pi, lam) * h - id).frobenius_norm());
      const Complex expect = std::pow((lam - z) / (lam - std::conj(z)), double(k));
      det = std::max(det, std::abs(determinant(h) - expect));
    }
  }
  c.check(unit < kAlgebraTol, "h(conj lambda)* h(lambda) = I: %.2e", unit);
  c.check(inv < kAlgebraTol, "h_{conj z} h_z = I: %.2e", inv);
  c.check(det < kAlgebraTol, "det h = ((lambda - z)/(lambda - conj z))^k: %.2e", det);
  return c;
}

Criterion elliptic_layer() {
  Criterion c{5, "Weierstrass layer"};
  const Lattice L = Lattice::square_torus(Complex(0.0, 2.0 * kPi));
  const Lattice oblique(Complex(2.0, 0.3), Complex(0.7, 1.9));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double period = 0.0, ode = 0.0;
  for (const auto& lat : {L, oblique}) {
    const auto inv = invariants(lat);
    for (int i = 0; i < 100; ++i) {
      const Complex w(u(rng), u(rng));
      const Complex p = weierstrass_p(w, lat), dp = weierstrass_p_prime(w, lat);
      const double scale = 1.0 + std::abs(p);
      period = std::max(period, std::abs(weierstrass_p(w + lat.omega1(), lat) - p) / scale);
      period = std::max(period, std::abs(weierstrass_p(w + lat.omega2(), lat) - p) / scale);
      ode = std::max(ode, std::abs(dp * dp - (4.0 * p * p * p - inv.g2 * p - inv.g3)) / (1.0 + std::abs(dp * dp)));
    }
  }
  c.check(period < kWpPeriodTol, "double periodicity (relative): %.2e", period);
  c.check(ode < kWpOdeTol, "p'^2 = 4p^3 - g2 p - g3 (relative): %.2e", ode);
  const auto sq = invariants(L);
  const double g3 = std::abs(sq.g3) / std::abs(sq.g2);
  c.check(g3 < kG3Tol, "square lattice |g3|/|g2|: %.2e", g3);
  const auto start = std::chrono::steady_clock::now();
  Complex acc = 0.0;
  for (int i = 0; i < 10000; ++i) acc += weierstrass_p(Complex(0.0005 * i + 0.1, 0.37 + 0.0003 * i), L);
  const double secs = seconds_since(start);
  c.check(secs < kWpSeconds && std::isfinite(acc.real()), "1e4 evaluations: %.3fs", secs);
  return c;
}

Criterion periodicity() {
  Criterion c{6, "Spatial and temporal periodicity"};
  Grid3 g;
  g.x.count = g.y.count = 8;
  g.t.count = 5;
  const auto J = ward_map_of(wp_soliton());
  const auto d = periodicity_defect(J, {{2.0 * kPi, 0.0, 0.0}, {0.0, 2.0 * kPi, 0.0}}, g);
  c.check(d[0] < kSpatialTol && d[1] < kSpatialTol, "wp soliton, shifts (2pi,0) and (0,2pi): %.2e, %.2e", d[0], d[1]);

  const auto p = period_of(SpectralPole::from_polar(1.0, kPi / 3.0));
  const double err = p ? std::abs(p->period - 4.0 * kPi) : 1.0;
  c.check(p && p->kind == PeriodKind::UnitModulus && err < 1e-12, "period_of(exp(i pi/3)) - 4 pi = %.2e", err);

  const auto z1 = SpectralPole::from_polar(1.0, kPi / 3.0), z2 = SpectralPole::from_polar(1.0, std::acos(0.25));
  const auto tp = triply_periodic_steps({{z1, cols(2, 1, {"1", "wp(w)"}, torus_lattice(z1))},
                                         {z2, cols(2, 1, {"1", "wpprime(w)"}, torus_lattice(z2))}});
  const auto Jt = ward_map_of(stack(VacuumBase::identity(2), tp.steps));
  const double dt = periodicity_defect(Jt, {{0.0, 0.0, tp.common_period}}, g)[0];
  c.check(dt < kTimeTol, "two-pole stack, T2/T1 detected, common period %.6f: defect %.2e", tp.common_period, dt);
  return c;
}

Criterion mode_spectrum() {
  Criterion c{7, "Linear mode spectrum of the vacuum"};
  bool match = true;
  for (const auto flavor : {Flavor::TypeA, Flavor::TypeB})
    for (int m = -16; m <= 16; ++m) {
      if (m == 0) continue;
      const double cl = flavor == Flavor::TypeA ? m : 2.0 * m;
      std::vector<std::pair<int, int>> brute;
      for (int j = -3 * 16; j <= 3 * 16; ++j)
        for (int l = -3 * 16; l <= 3 * 16; ++l)
          if ((j - m) * (j - m) + (l - cl) * (l - cl) < double(m) * m) brute.push_back({j, l});
      const auto got = ball_modes(m, flavor);
      match = match && got.size() == brute.size();
      for (std::size_t i = 0; match && i < got.size(); ++i) match = got[i].j == brute[i].first && got[i].l == brute[i].second;
    }
  c.check(match, "ball_modes equals brute-force enumeration for 1 <= |m| <= 16, both flavours");

  Grid3 g;
  g.x.count = g.y.count = 16;
  g.t.count = 5;
  for (const auto flavor : {Flavor::TypeA, Flavor::TypeB}) {
    const auto a = ComplexMatrix::diagonal(VacuumBase::block_diagonal(2, 1, 2.0));
    double worst = 0.0, worst_rel = 0.0, ratio_lo = 1e9, ratio_hi = 0.0;
    for (const auto& mode : ball_modes(2, flavor))
      for (const auto sign : {ModeSign::Stable, ModeSign::Unstable}) {
        const auto rep = linearization_residual(linear_mode_field(mode, 1.0, sign, flavor), a, flavor, g, 1e-3);
        worst = std::max(worst, rep.absolute.max);
        worst_rel = std::max(worst_rel, rep.max_relative);
        ratio_lo = std::min(ratio_lo, rep.absolute.ratio);
        ratio_hi = std::max(ratio_hi, rep.absolute.ratio);
      }
    c.check(worst < kLinearTol, "%s m=2 eta+- at h=1e-3: max %.2e (relative %.2e, h-halving ratio %.2f..%.2f)",
            to_string(flavor), worst, worst_rel, ratio_lo, ratio_hi);
  }
  const auto a = ComplexMatrix::diagonal(VacuumBase::block_diagonal(2, 1, 2.0));
  double weakest = 1e300;
  for (const auto& mode : ball_modes(2, Flavor::TypeA)) {
    ModeIndex wrong = mode;
    wrong.rate += 0.1;
    const auto rep = linearization_residual(linear_mode_field(wrong, 1.0, ModeSign::Unstable, Flavor::TypeA), a, Flavor::TypeA, g, 1e-3);
    weakest = std::min(weakest, rep.absolute.max);
  }
  c.check(weakest >= kControlFactor * kLinearTol, "perturbed rate (+0.1) residual >= %.0e: min %.2e", kControlFactor * kLinearTol, weakest);
  return c;
}

Criterion heteroclinic() {
  Criterion c{8, "Heteroclinic limits of the single step"};
  const auto h = heteroclinic_single_step(2, 1, 2);
  const auto J = ward_map_of(stack(h.base, {h.step}));
  const double t_far = 40.0 / h.mode.rate;
  const auto lim = heteroclinic_limits(J, h.base, h.theta, t_far);
  c.check(lim.plus < kHeteroTol && lim.minus < kHeteroTol, "m=2 (1,2) at |t|=%.3f: +%.2e  -%.2e", t_far, lim.plus, lim.minus);
  return c;
}

Criterion homoclinic_suite() {
  Criterion c{9, "Homoclinic orbits approach the vacuum along the predicted modes"};
  const auto start = std::chrono::steady_clock::now();
  for (const auto flavor : {Flavor::TypeA, Flavor::TypeB}) {
    const auto rec = homoclinic(flavor);
    const auto J = ward_map_of(stack(rec.base, rec.steps));
    const std::vector<ModeIndex> modes{rec.pairs[0].odd, rec.pairs[0].even};
    for (const auto end : {TimeEnd::Minus, TimeEnd::Plus}) {
      const auto fit = homoclinic_fit(J, rec.base, rec.limit_phase(), modes, flavor, end, rec.min_rate());
      const double rel = std::abs(fit.fitted_rate - fit.predicted_rate) / fit.predicted_rate;
      const bool ok = fit.monotone && fit.limit_defect < kLimitTol && rel < kRateRel && fit.direction_cosine >= kOverlap;
      c.check(ok, "%s (%d,%d)/(%d,%d) t%s: rate %.5f (pred %.5f) overlap %.6f limit %.2e %s", to_string(flavor),
              modes[0].j, modes[0].l, modes[1].j, modes[1].l, end == TimeEnd::Minus ? "->-inf" : "->+inf",
              fit.fitted_rate, fit.predicted_rate, fit.direction_cosine, fit.limit_defect,
              fit.monotone ? "decreasing" : "not decreasing");
    }
  }
  const double secs = seconds_since(start);
  c.check(secs < kHomoclinicSeconds, "runtime %.1fs", secs);
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli_quiet(std::vector<std::string> args) {
  args.insert(args.begin(), "wardforge");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  return cli::run_cli(int(argv.size()), argv.data(), out, err);
}

Criterion cli_controls() {
  Criterion c{10, "CLI determinism and negative controls"};
  const std::string dir = WARDFORGE_SCENARIO_DIR;
  const auto tmp = std::filesystem::temp_directory_path() / "wardforge_acceptance";
  std::filesystem::remove_all(tmp);
  for (const char* name : {"vacuum_m1", "one_soliton_rational", "homoclinic_m2", "doubly_periodic_wp", "triply_periodic"}) {
    const auto a = tmp / (std::string(name) + "_a"), b = tmp / (std::string(name) + "_b");
    const int ca = run_cli_quiet({"verify", "--scenario", dir + "/" + name + ".json", "--out", a.string()});
    const int cb = run_cli_quiet({"verify", "--scenario", dir + "/" + name + ".json", "--out", b.string()});
    const bool same = slurp(a / "report.json") == slurp(b / "report.json") && !slurp(a / "report.json").empty();
    c.check(ca == 0 && cb == 0 && same, "%-22s exit %d/%d, reports %s", name, ca, cb, same ? "identical" : "differ");
  }
  const std::vector<std::pair<const char*, int>> negatives{{"neg_half_plane", cli::kConstructionError},
                                                           {"neg_irrational_ratio", cli::kConstructionError},
                                                           {"neg_period_mismatch", cli::kConstructionError},
                                                           {"neg_pole_collision", cli::kConstructionError},
                                                           {"neg_schema_unknown_key", cli::kSchemaError}};
  for (const auto& [name, expect] : negatives) {
    const int code = run_cli_quiet({"verify", "--scenario", dir + "/" + name + ".json", "--out", (tmp / "neg").string()});
    c.check(code == expect, "%-22s exit %d (expected %d)", name, code, expect);
  }
  return c;
}

}  // namespace

int main() {
  const std::vector<std::function<Criterion()>> suite{exactness,      group_valued, reality_and_lax, simple_element_algebra,
                                                      elliptic_layer, periodicity,  mode_spectrum,   heteroclinic,
                                                      homoclinic_suite, cli_controls};
  int failures = 0;
  for (const auto& run : suite) {
    Criterion c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.pass = false;
      c.details.push_back(std::string("MISS exception: ") + e.what());
    }
    std::printf("%s  criterion %2d  %s\n", c.pass ? "PASS" : "FAIL", c.id, c.title.c_str());
    for (const auto& d : c.details) std::printf("        %s\n", d.c_str());
    std::fflush(stdout);
    if (!c.pass) ++failures;
  }
  std::printf("%d of %zu criteria pass\n", int(suite.size()) - failures, suite.size());
  return failures == 0 ? 0 : 1;
}
