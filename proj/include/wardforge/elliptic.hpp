#pragma once

// Weierstrass elliptic functions on an arbitrary rank-2 lattice.
//
// The lattice series is summed row by row: along each row of the reduced
// basis the inner sum has the closed form
//     sum_m 1/(w - m a)^2 = (pi/a)^2 csc^2(pi w / a),
// and the remaining sum over rows converges geometrically, at a rate of at
// least exp(-pi sqrt(3)) per row once the basis is Gauss-reduced.

#include <array>
#include <cmath>
#include <complex>
#include <utility>

#include "wardforge/errors.hpp"
#include "wardforge/matrix.hpp"

namespace wardforge {

class Lattice {
 public:
  Lattice(Complex omega1, Complex omega2) : omega1_(omega1), omega2_(omega2) {
    if (!(std::isfinite(omega1.real()) && std::isfinite(omega1.imag()) &&
          std::isfinite(omega2.real()) && std::isfinite(omega2.imag())))
      throw Error(ErrorCode::InvalidLattice, "non-finite generator");
    if (omega1 == Complex{} || std::abs(std::imag(omega2 / omega1)) <= 1e-12)
      throw Error(ErrorCode::InvalidLattice, "generators are not independent over R");
    reduce_basis();
  }

  /// Square torus lattice Z*2pi + Z*tau.
  static Lattice square_torus(Complex tau) { return Lattice(2.0 * kPi, tau); }

  Complex omega1() const noexcept { return omega1_; }
  Complex omega2() const noexcept { return omega2_; }

  /// Gauss-reduced basis (a, b) with Im(b/a) >= sqrt(3)/2; same lattice.
  Complex reduced_a() const noexcept { return a_; }
  Complex reduced_b() const noexcept { return b_; }

  /// Real coordinates (s, t) with w = s*first + t*second.
  static std::pair<double, double> coordinates(Complex w, Complex first, Complex second) {
    const double det = std::imag(std::conj(first) * second);
    return {std::imag(w * std::conj(second)) / -det, std::imag(std::conj(first) * w) / det};
  }

  friend bool operator==(const Lattice& x, const Lattice& y) {
    return x.omega1_ == y.omega1_ && x.omega2_ == y.omega2_;
  }

  /// True when `g` is within rel_tol*|omega1| of a lattice vector.
  bool contains(Complex g, double rel_tol = 1e-9) const {
    auto [s, t] = coordinates(g, a_, b_);
    const Complex r = g - std::round(s) * a_ - std::round(t) * b_;
    double best = std::abs(r);
    for (int i = -1; i <= 1; ++i)
      for (int j = -1; j <= 1; ++j) best = std::min(best, std::abs(r - double(i) * a_ - double(j) * b_));
    return best <= rel_tol * std::abs(omega1_);
  }

 private:
  void reduce_basis() {
    Complex a = omega1_, b = omega2_;
    for (int iter = 0; iter < 1000; ++iter) {
      if (std::abs(b) < std::abs(a)) std::swap(a, b);
      const double mu = std::round(std::real(b * std::conj(a)) / std::norm(a));
      if (mu == 0.0) break;
      b -= mu * a;
    }
    if (std::imag(b / a) < 0) b = -b;
    a_ = a;
    b_ = b;
  }

  Complex omega1_;
  Complex omega2_;
  Complex a_;
  Complex b_;
};

struct EllipticInvariants {
  Complex g2;
  Complex g3;
};

struct FundamentalPoint {
  Complex w0;
  long long m = 0;
  long long n = 0;
};

/// w0 = w - m*omega1 - n*omega2 in the half-open parallelogram [0,1)^2.
inline FundamentalPoint reduce_to_fundamental(Complex w, const Lattice& lattice) {
  const Complex o1 = lattice.omega1(), o2 = lattice.omega2();
  const double det = std::imag(std::conj(o1) * o2);
  double s = std::imag(w * std::conj(o2)) / -det;
  double t = std::imag(std::conj(o1) * w) / det;
  auto snap = [](double v) { return std::abs(v - std::round(v)) < 1e-12 ? std::round(v) : v; };
  s = snap(s);
  t = snap(t);
  const double m = std::floor(s), n = std::floor(t);
  return {w - m * o1 - n * o2, static_cast<long long>(m), static_cast<long long>(n)};
}

namespace detail {

/// csc^2(u) and cot(u), computed through q = exp(+-2iu) with |q| <= 1 so
/// that large imaginary parts neither overflow nor cancel.
struct CscCot {
  Complex csc2;
  Complex cot;
};

inline CscCot csc_cot(Complex u) {
  const double sigma = u.imag() >= 0 ? 1.0 : -1.0;
  const Complex q = std::exp(2.0 * kI * u * sigma);
  const Complex one_minus_q = 1.0 - q;
  return {-4.0 * q / (one_minus_q * one_minus_q), sigma * kI * (q + 1.0) / (q - 1.0)};
}

/// Point congruent to w in the centred cell of the reduced basis.
inline Complex centre(Complex w, const Lattice& lattice) {
  const Complex a = lattice.reduced_a(), b = lattice.reduced_b();
  const double det = std::imag(std::conj(a) * b);
  const double s = std::imag(w * std::conj(b)) / -det;
  const double t = std::imag(std::conj(a) * w) / det;
  return w - std::round(s) * a - std::round(t) * b;
}

inline void guard_pole(Complex wc, const Lattice& lattice) {
  if (lattice.contains(wc, 1e-9))
    throw Error(ErrorCode::AtPole, "argument is within 1e-9*|omega1| of a lattice point");
}

inline constexpr int kMaxRows = 400;

}  // namespace detail

/// Weierstrass p-function; `tol` is the relative size at which row
/// contributions stop being added.
inline Complex weierstrass_p(Complex w, const Lattice& lattice, double tol = 1e-17) {
  const Complex wc = detail::centre(w, lattice);
  detail::guard_pole(wc, lattice);
  const Complex a = lattice.reduced_a(), b = lattice.reduced_b();
  const Complex k = kPi / a;
  Complex sum = detail::csc_cot(k * wc).csc2 - 1.0 / 3.0;
  for (int n = 1; n <= detail::kMaxRows; ++n) {
    const Complex nb = double(n) * b;
    const Complex term = detail::csc_cot(k * (wc - nb)).csc2 + detail::csc_cot(k * (wc + nb)).csc2 -
                         2.0 * detail::csc_cot(k * nb).csc2;
    sum += term;
    if (std::abs(term) <= tol * std::abs(sum)) break;
  }
  return k * k * sum;
}

inline Complex weierstrass_p_prime(Complex w, const Lattice& lattice, double tol = 1e-17) {
  const Complex wc = detail::centre(w, lattice);
  detail::guard_pole(wc, lattice);
  const Complex a = lattice.reduced_a(), b = lattice.reduced_b();
  const Complex k = kPi / a;
  auto row = [&](Complex u) {
    const auto cc = detail::csc_cot(u);
    return cc.cot * cc.csc2;
  };
  Complex sum = row(k * wc);
  for (int n = 1; n <= detail::kMaxRows; ++n) {
    const Complex nb = double(n) * b;
    const Complex term = row(k * (wc - nb)) + row(k * (wc + nb));
    sum += term;
    if (std::abs(term) <= tol * std::abs(sum)) break;
  }
  return -2.0 * k * k * k * sum;
}

/// g2 = 60 sum' gamma^-4, g3 = 140 sum' gamma^-6. `rows` caps the number of
/// lattice rows summed (0 = until converged).
inline EllipticInvariants invariants(const Lattice& lattice, int rows = 0) {
  const Complex a = lattice.reduced_a(), b = lattice.reduced_b();
  const Complex k = kPi / a;
  const Complex k2 = k * k;
  const double pi2 = kPi * kPi;
  Complex g4 = pi2 * pi2 / (45.0 * std::pow(a, 4));
  Complex g6 = 2.0 * pi2 * pi2 * pi2 / (945.0 * std::pow(a, 6));
  const int limit = rows > 0 ? rows : detail::kMaxRows;
  for (int n = 1; n <= limit; ++n) {
    const Complex c = detail::csc_cot(k * double(n) * b).csc2;
    const Complex t4 = 2.0 * k2 * k2 * c * (3.0 * c - 2.0) / 3.0;
    const Complex t6 = 2.0 * k2 * k2 * k2 * c * (15.0 * c * c - 15.0 * c + 2.0) / 15.0;
    g4 += t4;
    g6 += t6;
    if (rows == 0 && std::abs(t4) <= 1e-18 * std::abs(g4) && std::abs(t6) <= 1e-18 * std::abs(g6) + 1e-300)
      break;
  }
  return {60.0 * g4, 140.0 * g6};
}

}  // namespace wardforge
