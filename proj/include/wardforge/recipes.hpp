#pragma once

// Explicit constructions: period function and rational detection, doubly and
// triply periodic solitons, the integer mode ball of the vacuum, homoclinic
// and heteroclinic step lists, and linear mode fields of the vacuum.

#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wardforge/backlund.hpp"
#include "wardforge/elliptic.hpp"

namespace wardforge {

struct Fraction {
  long long num = 0;
  long long den = 1;
};

/// Smallest-denominator convergent p/q of x with |x - p/q| <= tol and
/// q <= max_den, if any.
inline std::optional<Fraction> detect_rational(double x, double tol = 1e-9, long long max_den = 1000) {
  if (!std::isfinite(x)) return std::nullopt;
  long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double rest = x;
  for (int iter = 0; iter < 64; ++iter) {
    const double a = std::floor(rest);
    if (std::abs(a) > 1e15) break;
    const auto ai = static_cast<long long>(a);
    const long long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > max_den) break;
    if (std::abs(x - double(p2) / double(q2)) <= tol * std::max(1.0, std::abs(x))) return Fraction{p2, q2};
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    const double frac = rest - a;
    if (frac == 0.0) break;
    rest = 1.0 / frac;
  }
  return std::nullopt;
}

enum class PeriodKind { UnitModulus, RationalRatio };

struct PeriodSpec {
  SpectralPole z;
  PeriodKind kind = PeriodKind::UnitModulus;
  long long m1 = 0;
  long long m2 = 1;
  double period = 0.0;  // time period, positive
};

/// Time period of the 1-soliton with pole z whose V is elliptic on the
/// lattice induced by tau = c1 + i c2; nullopt when not periodic.
inline std::optional<PeriodSpec> period_of(const SpectralPole& z, double tol = 1e-9,
                                           Complex tau = Complex{0.0, 2.0 * kPi}) {
  const double r = z.r, c = std::cos(z.theta);
  if (std::abs(r - 1.0) <= 1e-12) {
    if (std::abs(c) <= 1e-12) return std::nullopt;
    return PeriodSpec{z, PeriodKind::UnitModulus, 0, 1, std::abs(2.0 * kPi / c)};
  }
  const double c1 = tau.real(), c2 = tau.imag();
  const double d = r - 1.0 / r;
  const double ratio = (2.0 * c * c2 / d - c1) / (2.0 * kPi);
  const auto f = detect_rational(ratio, tol);
  if (!f) return std::nullopt;
  const double period = std::abs(double(f->den) * c2 * (r + 1.0 / r) / d);
  return PeriodSpec{z, PeriodKind::RationalRatio, f->num, f->den, period};
}

/// Lattice of V for a soliton with pole z that is doubly periodic with
/// periods 2 pi and tau in (x, y): generated by 2 pi and c1 + (z - 1/z) c2 / 2.
inline Lattice induced_lattice(Complex tau, const SpectralPole& z) {
  return Lattice(2.0 * kPi, tau.real() + (z.z - 1.0 / z.z) * tau.imag() / 2.0);
}

/// (dx, dy) translation corresponding to the lattice shift a + i b of w.
inline std::pair<double, double> spatial_shift(const SpectralPole& z, Complex shift) {
  const LightConeFrame f(z);
  return {shift.real() - f.k1 / f.k2 * shift.imag(), shift.imag() / f.k2};
}

namespace detail {

inline double projector_distance(const MeromorphicColumnSpec& v, Complex w1, Complex w2, std::size_t rank) {
  const auto p1 = hermitian_projector_of_rank(eval_columns(v, w1), rank);
  const auto p2 = hermitian_projector_of_rank(eval_columns(v, w2), rank);
  return (p1.matrix - p2.matrix).frobenius_norm();
}

}  // namespace detail

/// Checks that span V(w) is invariant under both periods of the induced
/// lattice at 10 sample points and returns the corresponding step.
inline BacklundStep doubly_periodic_steps(Complex tau, const SpectralPole& z, const MeromorphicColumnSpec& v,
                                          double tol = 1e-8) {
  v.validate();
  const Lattice lat = induced_lattice(tau, z);
  const std::size_t rank = generic_rank(v);
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const Complex w = unit(rng) * lat.omega1() + unit(rng) * lat.omega2();
    for (const Complex period : {lat.omega1(), lat.omega2()}) {
      const double d = detail::projector_distance(v, w, w + period, rank);
      if (!(d < tol))
        throw Error(ErrorCode::PeriodMismatch,
                    "column span is not invariant under the induced lattice (defect " + std::to_string(d) + ")");
    }
  }
  return {z, v};
}

struct PeriodicFactorSpec {
  SpectralPole z;
  MeromorphicColumnSpec v;
  Complex tau{0.0, 2.0 * kPi};
};

struct TriplyPeriodic {
  std::vector<BacklundStep> steps;
  std::vector<double> periods;
  double common_period = 0.0;
};

/// The common time period is T_1 * lcm(p_j) where T_j / T_1 = p_j / q_j in
/// lowest terms. `exact_ratios`, when given, replaces detection of
/// T_j / T_1 for j >= 2.
inline TriplyPeriodic triply_periodic_steps(const std::vector<PeriodicFactorSpec>& specs, double tol = 1e-9,
                                            const std::vector<Fraction>& exact_ratios = {}) {
  if (specs.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one factor");
  TriplyPeriodic out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const Complex a = specs[i].z.z, b = specs[j].z.z;
      if (std::abs(a - b) < 1e-10 || std::abs(a - std::conj(b)) < 1e-10)
        throw Error(ErrorCode::PoleCollision, "poles must be distinct from each other and their conjugates");
    }
    const auto ps = period_of(specs[i].z, tol, specs[i].tau);
    if (!ps) throw Error(ErrorCode::NotPeriodic, "pole " + std::to_string(i) + " has no time period");
    out.periods.push_back(ps->period);
    out.steps.push_back(doubly_periodic_steps(specs[i].tau, specs[i].z, specs[i].v));
  }
  long long multiple = 1;
  for (std::size_t i = 1; i < specs.size(); ++i) {
    std::optional<Fraction> f;
    if (i - 1 < exact_ratios.size()) {
      f = exact_ratios[i - 1];
      if (f->den <= 0 || f->num <= 0) throw Error(ErrorCode::InvalidArgument, "exact ratios must be positive");
      const long long g = std::gcd(f->num, f->den);
      f->num /= g;
      f->den /= g;
    } else {
      f = detect_rational(out.periods[i] / out.periods[0], tol);
    }
    if (!f) throw Error(ErrorCode::IrrationalRatio, "period ratio T_" + std::to_string(i + 1) + "/T_1 is not rational");
    multiple = std::lcm(multiple, f->num);
  }
  out.common_period = out.periods[0] * double(multiple);
  return out;
}

enum class Flavor { TypeA, TypeB };

inline const char* to_string(Flavor f) { return f == Flavor::TypeA ? "TypeA" : "TypeB"; }

/// Integer mode (j, l) of the vacuum with parameter m and its growth rate.
struct ModeIndex {
  int j = 0;
  int l = 0;
  int m = 0;
  double rate = 0.0;
};

inline bool operator==(const ModeIndex& a, const ModeIndex& b) { return a.j == b.j && a.l == b.l && a.m == b.m; }

namespace detail {

// Membership and rate in units where the ball has centre (s/2, s/2)
// (TypeA) or (s/2, s) (TypeB) and radius |s|/2, s = n m.
inline long long ball_slack(long long s, long long j, long long l, Flavor f) {
  const long long dj = 2 * j - s;
  const long long dl = f == Flavor::TypeA ? 2 * l - s : 2 * l - 2 * s;
  return s * s - dj * dj - dl * dl;
}

}  // namespace detail

/// All (j, l) with (j - m)^2 + (l - m)^2 < m^2 (TypeA) or
/// (j - m)^2 + (l - 2m)^2 < m^2 (TypeB), row-major in (j, l).
inline std::vector<ModeIndex> ball_modes(int m, Flavor flavor) {
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "m must be nonzero");
  const int cl = flavor == Flavor::TypeA ? m : 2 * m;
  const int am = std::abs(m);
  std::vector<ModeIndex> out;
  for (int j = m - am; j <= m + am; ++j)
    for (int l = cl - am; l <= cl + am; ++l) {
      const long long slack = detail::ball_slack(2LL * m, j, l, flavor);
      if (slack > 0) out.push_back({j, l, m, std::sqrt(double(slack)) / 2.0});
    }
  return out;
}

struct ModePair {
  ModeIndex odd;
  ModeIndex even;  // mirror mode
};

struct HomoclinicRecipe {
  int n = 2;
  int p = 1;
  int m = 0;
  Flavor flavor = Flavor::TypeA;
  VacuumBase base = VacuumBase::identity(2);
  std::vector<ModePair> pairs;
  std::vector<BacklundStep> steps;

  /// J_{2N} tends to phase * J_0 as t -> +-infinity.
  Complex limit_phase() const { return stack(base, steps).normalization(); }
  double min_rate() const {
    double r = std::numeric_limits<double>::infinity();
    for (const auto& pr : pairs) r = std::min(r, pr.odd.rate);
    return r;
  }
};

namespace detail {

inline SpectralPole recipe_pole(int n, int m, int j, int l, Flavor flavor) {
  const double s = double(n) * m;
  const double sg = m > 0 ? 1.0 : -1.0;
  const double centre = flavor == Flavor::TypeA ? s / 2.0 : s;
  const double r = std::sqrt((s - j) / j);
  const double c = sg * (l - centre) / std::sqrt(double(j) * (s - j));
  const double sn = sg * std::sqrt(std::max(0.0, 1.0 - c * c));
  return SpectralPole::from_complex(r * Complex{c, sn});
}

inline MeromorphicColumnSpec recipe_generator(int n, int p, int m, int j, const SpectralPole& z, Flavor flavor) {
  MeromorphicColumnSpec v;
  v.n = n;
  v.k = 1;
  const double s = double(n) * m;
  v.params = {{"q", Complex{s - j}}, {"s", Complex{s}}, {"z", z.z}};
  const Expr one = parse("1");
  const Expr f = parse(flavor == Flavor::TypeA ? "exp(i*(q - s*z)*w)" : "exp(i*q*w)");
  for (int i = 0; i < n; ++i) v.entries.push_back(i < p ? one : f);
  return v;
}

}  // namespace detail

/// Steps for the homoclinic construction: each odd mode (j, l) is followed by
/// its mirror (j, nm - l) (TypeA) or (j, 2nm - l) (TypeB), whose pole is
/// -conj of the odd pole.
inline HomoclinicRecipe homoclinic_recipe(int n, int p, int m, const std::vector<std::pair<int, int>>& odd_modes,
                                          Flavor flavor) {
  if (n < 2 || p < 1 || p >= n) throw Error(ErrorCode::InvalidArgument, "need n >= 2 and 1 <= p <= n-1");
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "m must be nonzero");
  if (odd_modes.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one mode");
  const long long s = static_cast<long long>(n) * m;
  const long long sg = m > 0 ? 1 : -1;
  HomoclinicRecipe rec;
  rec.n = n;
  rec.p = p;
  rec.m = m;
  rec.flavor = flavor;
  const auto diag = VacuumBase::block_diagonal(n, p, m);
  rec.base = flavor == Flavor::TypeA ? VacuumBase::type_a(diag) : VacuumBase::type_b(diag);

  std::set<std::pair<int, int>> seen;
  for (const auto& [j, l] : odd_modes) {
    const std::string tag = "(" + std::to_string(j) + "," + std::to_string(l) + ")";
    const long long slack = detail::ball_slack(s, j, l, flavor);
    if (slack <= 0) throw Error(ErrorCode::ModeOutsideBall, "mode " + tag + " is outside the mode ball");
    const long long side = flavor == Flavor::TypeA ? 2LL * l - s : l - s;
    if (sg * side <= 0) throw Error(ErrorCode::HalfPlaneViolation, "mode " + tag + " violates the half-plane condition");
    if (!seen.insert({j, l}).second) throw Error(ErrorCode::DuplicateMode, "mode " + tag + " repeated");
    // integer consistency: |l - centre| < sqrt(j (nm - j)) in doubled units
    const long long dl = flavor == Flavor::TypeA ? 2LL * l - s : 2LL * l - 2 * s;
    if (!(dl * dl < 4LL * j * (s - j))) throw Error(ErrorCode::ModeOutsideBall, "mode " + tag + " fails |l - c| < sqrt(j(nm-j))");

    const int mirror = flavor == Flavor::TypeA ? int(s - l) : int(2 * s - l);
    const double rate = std::sqrt(double(slack)) / 2.0;
    const ModeIndex odd{j, l, m, rate}, even{j, mirror, m, rate};
    rec.pairs.push_back({odd, even});

    const SpectralPole z1 = detail::recipe_pole(n, m, j, l, flavor);
    const SpectralPole z2 = detail::recipe_pole(n, m, j, mirror, flavor);
    rec.steps.push_back({z1, detail::recipe_generator(n, p, m, j, z1, flavor)});
    rec.steps.push_back({z2, detail::recipe_generator(n, p, m, j, z2, flavor)});
  }

  // The first dressed projector must live on the torus.
  const ExtendedSolution one = backlund_step(ExtendedSolution(rec.base), rec.steps.front());
  double worst = 0.0;
  for (int ix = 0; ix < 6; ++ix)
    for (int iy = 0; iy < 6; ++iy)
      for (const double t : {-0.5, 0.0, 0.5}) {
        const double x = 2.0 * kPi * ix / 6.0 + 0.1, y = 2.0 * kPi * iy / 6.0 + 0.2;
        const auto p0 = one.at(x, y, t).projectors().front().matrix;
        worst = std::max(worst, (one.at(x + 2.0 * kPi, y, t).projectors().front().matrix - p0).frobenius_norm());
        worst = std::max(worst, (one.at(x, y + 2.0 * kPi, t).projectors().front().matrix - p0).frobenius_norm());
      }
  if (!(worst < 1e-8))
    throw Error(ErrorCode::PeriodMismatch, "first dressed projector is not 2pi-periodic (defect " + std::to_string(worst) + ")");
  return rec;
}

struct HeteroclinicStep {
  BacklundStep step;
  VacuumBase base;
  ModeIndex mode;
  double theta = 0.0;
};

/// Single SU(2) step over the TypeA vacuum with
/// alpha = (2m - j)/(2m), r = sqrt((2m - j)/j), cos(theta) = (l - m)/sqrt(j(2m - j)),
/// sin(theta) > 0 and f(w) = exp(2 i m (alpha - z) w).
inline HeteroclinicStep heteroclinic_single_step(int m, int j, int l) {
  if (m <= 0) throw Error(ErrorCode::InvalidArgument, "heteroclinic step needs m > 0");
  const long long slack = detail::ball_slack(2LL * m, j, l, Flavor::TypeA);
  if (slack <= 0) throw Error(ErrorCode::ModeOutsideBall, "mode is outside the mode ball");
  const double alpha = double(2 * m - j) / (2.0 * m);
  const double r = std::sqrt(double(2 * m - j) / j);
  const double c = double(l - m) / std::sqrt(double(j) * (2 * m - j));
  const SpectralPole z = SpectralPole::from_complex(r * Complex{c, std::sqrt(std::max(0.0, 1.0 - c * c))});
  MeromorphicColumnSpec v = MeromorphicColumnSpec::from_strings(
      2, 1, {"1", "exp(2*i*m*(alpha - z)*w)"}, {{"m", Complex(m)}, {"alpha", Complex(alpha)}, {"z", z.z}});
  return {{z, std::move(v)},
          VacuumBase::type_a(VacuumBase::block_diagonal(2, 1, m)),
          {j, l, m, std::sqrt(double(slack)) / 2.0},
          z.theta};
}

enum class ModeSign { Stable, Unstable };

/// eta = exp(-+rate t) offdiag(c e^{i phi}, -conj(c) e^{-i phi}) with
/// phi = j x + l y + m t (TypeA) or j x + l y + 2 m t (TypeB); minus sign
/// for the stable mode.
inline Field linear_mode_field(const ModeIndex& mode, Complex c, ModeSign sign, Flavor flavor) {
  const double s = sign == ModeSign::Stable ? -1.0 : 1.0;
  const double mt = flavor == Flavor::TypeA ? mode.m : 2.0 * mode.m;
  return [=](double x, double y, double t) {
    const double phi = mode.j * x + mode.l * y + mt * t;
    const double amp = std::exp(s * mode.rate * t);
    const Complex e = std::polar(amp, phi);
    ComplexMatrix eta(2, 2);
    eta(0, 1) = c * e;
    eta(1, 0) = -std::conj(c * e);
    return eta;
  };
}

}  // namespace wardforge
