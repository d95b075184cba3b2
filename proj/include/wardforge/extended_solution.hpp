#pragma once

// Extended solutions psi(x, y, t, lambda) = h_N(lambda) ... h_1(lambda) psi_0(lambda)
// built from simple elements over a diagonal vacuum, and the Ward maps
// J = psi(., 0)^{-1} they induce.

#include <atomic>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "wardforge/errors.hpp"
#include "wardforge/matrix.hpp"
#include "wardforge/mero_expr.hpp"

namespace wardforge {

struct SpectralPole {
  Complex z;
  double r = 0.0;
  double theta = 0.0;

  static SpectralPole from_complex(Complex z) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) || std::abs(z.imag()) <= 1e-12)
      throw Error(ErrorCode::InvalidPole, "spectral pole must be finite and non-real");
    return {z, std::abs(z), std::arg(z)};
  }
  static SpectralPole from_polar(double r, double theta) {
    if (!(r > 0.0) || !std::isfinite(r) || !std::isfinite(theta))
      throw Error(ErrorCode::InvalidPole, "polar pole needs r > 0 and finite theta");
    return from_complex(std::polar(r, theta));
  }
};

/// u = (t + y)/2, v = (t - y)/2.
struct LightCone {
  double u;
  double v;
};
inline LightCone light_cone(double y, double t) { return {(t + y) / 2.0, (t - y) / 2.0}; }

/// w = x + z u + v / z.
inline Complex spectral_coordinate(Complex z, double x, double y, double t) {
  const auto [u, v] = light_cone(y, t);
  return x + z * u + v / z;
}

/// Quantities attached to a pole: k1 + i k2 = (z - 1/z)/2 and the velocity
/// of the associated travelling wave.
struct LightConeFrame {
  Complex z;
  double k1;
  double k2;
  double v1;
  double v2;

  explicit LightConeFrame(const SpectralPole& p) : z(p.z) {
    const Complex k = (p.z - 1.0 / p.z) / 2.0;
    k1 = k.real();
    k2 = k.imag();
    const double r2 = p.r * p.r;
    v1 = -2.0 * p.r * std::cos(p.theta) / (1.0 + r2);
    v2 = (1.0 - r2) / (1.0 + r2);
  }

  Complex w(double x, double y, double t) const { return spectral_coordinate(z, x, y, t); }
};

struct Velocity {
  double v1;
  double v2;
};
inline Velocity soliton_velocity(const SpectralPole& p) {
  const LightConeFrame f(p);
  return {f.v1, f.v2};
}

/// h_{z,pi}(lambda) = I + (zbar - z)/(lambda - zbar) pi.
inline ComplexMatrix simple_element(Complex z, const ComplexMatrix& pi, Complex lambda) {
  const Complex zb = std::conj(z);
  return ComplexMatrix::identity(pi.rows()) + ((zb - z) / (lambda - zb)) * pi;
}

/// h_{z,pi}(0)^{-1} = pi_perp + (zbar/z) pi.
inline ComplexMatrix simple_element_inverse_at_zero(Complex z, const ComplexMatrix& pi) {
  return ComplexMatrix::identity(pi.rows()) + (std::conj(z) / z - 1.0) * pi;
}

enum class VacuumKind { Identity, TypeA, TypeB };

/// Diagonal vacuum exp(s(x, y, t, lambda) D), D anti-Hermitian diagonal.
/// TypeA: s = (1 - lambda) x + (1 + lambda - lambda^2) u - v.
/// TypeB: s = x + (lambda + 2) u.
class VacuumBase {
 public:
  static VacuumBase identity(std::size_t n) { return VacuumBase(VacuumKind::Identity, std::vector<Complex>(n)); }
  static VacuumBase type_a(std::vector<Complex> diag) { return VacuumBase(VacuumKind::TypeA, std::move(diag)); }
  static VacuumBase type_b(std::vector<Complex> diag) { return VacuumBase(VacuumKind::TypeB, std::move(diag)); }

  /// diag(i (n-p) m I_p, -i p m I_{n-p}): traceless, anti-Hermitian.
  static std::vector<Complex> block_diagonal(std::size_t n, std::size_t p, double m) {
    if (n < 2 || p == 0 || p >= n) throw Error(ErrorCode::InvalidArgument, "block diagonal needs 0 < p < n");
    std::vector<Complex> d(n);
    for (std::size_t i = 0; i < n; ++i)
      d[i] = i < p ? Complex{0.0, double(n - p) * m} : Complex{0.0, -double(p) * m};
    return d;
  }

  VacuumKind kind() const noexcept { return kind_; }
  std::size_t n() const noexcept { return diag_.size(); }
  const std::vector<Complex>& diag() const noexcept { return diag_; }

  Complex scalar_exponent(double x, double y, double t, Complex lambda) const {
    const auto [u, v] = light_cone(y, t);
    switch (kind_) {
      case VacuumKind::Identity: return 0.0;
      case VacuumKind::TypeA: return (1.0 - lambda) * x + (1.0 + lambda - lambda * lambda) * u - v;
      case VacuumKind::TypeB: return x + (lambda + 2.0) * u;
    }
    return 0.0;
  }

  /// Diagonal of log psi_0.
  std::vector<Complex> log_diag(double x, double y, double t, Complex lambda) const {
    const Complex s = scalar_exponent(x, y, t, lambda);
    std::vector<Complex> out(diag_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * diag_[i];
    return out;
  }

  ComplexMatrix value(double x, double y, double t, Complex lambda) const {
    auto d = log_diag(x, y, t, lambda);
    for (auto& e : d) e = std::exp(e);
    return ComplexMatrix::diagonal(d);
  }

 private:
  VacuumBase(VacuumKind kind, std::vector<Complex> diag) : kind_(kind), diag_(std::move(diag)) {
    for (const auto& d : diag_)
      if (std::abs(d.real()) > 0.0) throw Error(ErrorCode::InvalidArgument, "vacuum diagonal must be anti-Hermitian");
  }

  VacuumKind kind_;
  std::vector<Complex> diag_;
};

enum class ProjectorRule {
  Direct,   // pi = projector onto V(w)
  Dressed,  // pi = projector onto psi_prev(z) V(w)
};

struct Factor {
  SpectralPole pole;
  MeromorphicColumnSpec generator;
  std::size_t rank = 0;
  ProjectorRule rule = ProjectorRule::Dressed;
};

namespace detail {
inline std::atomic<unsigned long long>& rank_drop_counter() {
  static std::atomic<unsigned long long> c{0};
  return c;
}
}  // namespace detail

/// Number of points at which a dressed projector lost rank (a warning, the
/// projector is still formed from the dominant directions).
inline unsigned long long rank_drop_warnings() { return detail::rank_drop_counter().load(); }
inline void reset_rank_drop_warnings() { detail::rank_drop_counter().store(0); }

class ExtendedSolution;

/// All factor projectors at one space-time point.
class PointState {
 public:
  PointState(const ExtendedSolution& psi, double x, double y, double t);

  const std::vector<Projector>& projectors() const noexcept { return projectors_; }

  ComplexMatrix psi(Complex lambda) const;

  /// c * psi_0(0)^{-1} prod_k (pi_k_perp + (zbar_k/z_k) pi_k).
  ComplexMatrix ward() const;

 private:
  const ExtendedSolution& sol_;
  double x_, y_, t_;
  std::vector<Projector> projectors_;
};

class ExtendedSolution {
 public:
  explicit ExtendedSolution(VacuumBase base) : base_(std::move(base)) {}

  const VacuumBase& base() const noexcept { return base_; }
  const std::vector<Factor>& factors() const noexcept { return factors_; }
  std::size_t n() const noexcept { return base_.n(); }

  /// Appends a factor (newest on the left). Poles must be distinct from all
  /// previous poles and their conjugates.
  ExtendedSolution with_factor(Factor f) const {
    if (f.generator.n != n()) throw Error(ErrorCode::InvalidArgument, "generator row count must match n");
    for (const auto& g : factors_) {
      if (std::abs(f.pole.z - g.pole.z) < 1e-10 || std::abs(f.pole.z - std::conj(g.pole.z)) < 1e-10)
        throw Error(ErrorCode::PoleCollision, "pole coincides with an earlier pole or its conjugate");
    }
    ExtendedSolution out = *this;
    out.factors_.push_back(std::move(f));
    return out;
  }

  /// Product over factors of exp(2 i k arg(z) / n).
  Complex normalization() const {
    Complex c = 1.0;
    for (const auto& f : factors_)
      c *= std::exp(Complex{0.0, 2.0 * double(f.rank) * std::arg(f.pole.z) / double(n())});
    return c;
  }

  PointState at(double x, double y, double t) const { return PointState(*this, x, y, t); }

 private:
  VacuumBase base_;
  std::vector<Factor> factors_;
};

inline PointState::PointState(const ExtendedSolution& psi, double x, double y, double t)
    : sol_(psi), x_(x), y_(y), t_(t) {
  const auto& factors = psi.factors();
  projectors_.reserve(factors.size());
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const Factor& f = factors[k];
    const std::size_t n = psi.n();
    if (f.rank == 0) {
      projectors_.push_back({ComplexMatrix(n, n), 0});
      continue;
    }
    const Complex z = f.pole.z;
    const Complex w = spectral_coordinate(z, x, y, t);
    std::vector<Complex> base_log;
    if (f.rule == ProjectorRule::Dressed) base_log = psi.base().log_diag(x, y, t, z);
    bool deficient = false;
    auto projector_from = [&](ComplexMatrix cols) {
      if (f.rule == ProjectorRule::Dressed) {
        for (std::size_t j = 0; j < k; ++j) cols = simple_element(factors[j].pole.z, projectors_[j].matrix, z) * cols;
        for (std::size_t c = 0; c < cols.cols(); ++c) {
          double m = 0.0;
          for (std::size_t r = 0; r < n; ++r) m = std::max(m, std::abs(cols(r, c)));
          if (m > 0.0)
            for (std::size_t r = 0; r < n; ++r) cols(r, c) /= m;
        }
      }
      bool d = false;
      auto p = hermitian_projector_of_rank(cols, f.rank, &d, 1e-10);
      deficient = deficient || d;
      return p;
    };
    const ColumnEvaluation ev = eval_columns_detailed(f.generator, w, base_log);
    Projector p = projector_from(ev.columns);
    if (ev.nudges > 0) {
      // The span extends smoothly across the pole; averaging the two
      // opposite nudges removes the first-order displacement error.
      const ColumnEvaluation mirror = eval_columns_detailed(f.generator, w - (ev.w_used - w), base_log);
      if (mirror.nudges == 0) {
        const Projector q = projector_from(mirror.columns);
        p = hermitian_projector_of_rank((p.matrix + q.matrix) * 0.5, f.rank);
      }
    }
    projectors_.push_back(std::move(p));
    if (deficient) detail::rank_drop_counter().fetch_add(1, std::memory_order_relaxed);
  }
}

inline ComplexMatrix PointState::psi(Complex lambda) const {
  const auto& factors = sol_.factors();
  for (const auto& f : factors)
    if (std::abs(lambda - std::conj(f.pole.z)) < 1e-10)
      throw Error(ErrorCode::EvalAtPole, "lambda is at the conjugate of a factor pole");
  ComplexMatrix out = sol_.base().value(x_, y_, t_, lambda);
  for (std::size_t k = 0; k < factors.size(); ++k)
    out = simple_element(factors[k].pole.z, projectors_[k].matrix, lambda) * out;
  return out;
}

inline ComplexMatrix PointState::ward() const {
  auto d = sol_.base().log_diag(x_, y_, t_, 0.0);
  for (auto& e : d) e = std::exp(-e);
  ComplexMatrix j = ComplexMatrix::diagonal(d);
  const auto& factors = sol_.factors();
  for (std::size_t k = 0; k < factors.size(); ++k)
    j = j * simple_element_inverse_at_zero(factors[k].pole.z, projectors_[k].matrix);
  return sol_.normalization() * j;
}

inline ComplexMatrix eval_extended(const ExtendedSolution& psi, double x, double y, double t, Complex lambda) {
  for (const auto& f : psi.factors())
    if (std::abs(lambda - std::conj(f.pole.z)) < 1e-10)
      throw Error(ErrorCode::EvalAtPole, "lambda is at the conjugate of a factor pole");
  return psi.at(x, y, t).psi(lambda);
}

/// A map R^{2+1} -> matrices.
using Field = std::function<ComplexMatrix(double x, double y, double t)>;

inline Field ward_map_of(const ExtendedSolution& psi) {
  return [psi](double x, double y, double t) { return psi.at(x, y, t).ward(); };
}

inline double reality_defect(const ExtendedSolution& psi, double x, double y, double t, Complex lambda) {
  const auto s = psi.at(x, y, t);
  const ComplexMatrix a = s.psi(std::conj(lambda));
  const ComplexMatrix b = s.psi(lambda);
  return (a.adjoint() * b - ComplexMatrix::identity(psi.n())).frobenius_norm();
}

struct LaxReport {
  std::vector<ComplexMatrix> a;
  std::vector<ComplexMatrix> b;
  double independence_defect = 0.0;
};

/// A = (lambda psi_x - psi_u) psi^{-1}, B = (lambda psi_v - psi_x) psi^{-1}
/// by centred differences in (x, u, v) at each sample lambda.
inline LaxReport lax_coefficients(const ExtendedSolution& psi, double x, double y, double t,
                                  const std::vector<Complex>& lambdas = {Complex{0.37, 0.0}, Complex{-0.61, 0.29}},
                                  double h = 1e-4) {
  if (lambdas.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two lambda samples");
  const auto [u, v] = light_cone(y, t);
  auto state = [&](double xx, double uu, double vv) { return psi.at(xx, uu - vv, uu + vv); };
  const PointState s0 = state(x, u, v);
  const PointState sxp = state(x + h, u, v), sxm = state(x - h, u, v);
  const PointState sup = state(x, u + h, v), sum = state(x, u - h, v);
  const PointState svp = state(x, u, v + h), svm = state(x, u, v - h);
  LaxReport rep;
  for (const Complex lam : lambdas) {
    const ComplexMatrix inv = inverse(s0.psi(lam));
    const ComplexMatrix px = (sxp.psi(lam) - sxm.psi(lam)) * (1.0 / (2.0 * h));
    const ComplexMatrix pu = (sup.psi(lam) - sum.psi(lam)) * (1.0 / (2.0 * h));
    const ComplexMatrix pv = (svp.psi(lam) - svm.psi(lam)) * (1.0 / (2.0 * h));
    rep.a.push_back((lam * px - pu) * inv);
    rep.b.push_back((lam * pv - px) * inv);
  }
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    for (std::size_t j = i + 1; j < lambdas.size(); ++j)
      rep.independence_defect =
          std::max(rep.independence_defect,
                   (rep.a[i] - rep.a[j]).frobenius_norm() + (rep.b[i] - rep.b[j]).frobenius_norm());
  return rep;
}

}  // namespace wardforge
