#pragma once

// Numerical checks on fields J(x, y, t): Ward-equation and linearized
// residuals by centred differences, periodicity, limits and asymptotic fits.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "wardforge/errors.hpp"
#include "wardforge/extended_solution.hpp"
#include "wardforge/matrix.hpp"
#include "wardforge/recipes.hpp"

namespace wardforge {

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t count = 5;
  bool closed = true;  // include hi

  double at(std::size_t i) const {
    const double span = hi - lo;
    if (count == 1) return lo;
    return lo + span * double(i) / double(closed ? count - 1 : count);
  }
  double spacing() const { return count <= 1 ? 0.0 : (hi - lo) / double(closed ? count - 1 : count); }
};

struct Grid3 {
  Axis x{0.0, 2.0 * kPi, 32, false};
  Axis y{0.0, 2.0 * kPi, 32, false};
  Axis t{-1.0, 1.0, 9, true};

  std::size_t size() const { return x.count * y.count * t.count; }

  void validate(std::size_t min_count = 5) const {
    for (const Axis* a : {&x, &y, &t}) {
      if (a->count < min_count) throw Error(ErrorCode::InvalidArgument, "grid needs at least " + std::to_string(min_count) + " points per axis");
      if (!(a->hi > a->lo)) throw Error(ErrorCode::InvalidArgument, "grid axis needs hi > lo");
    }
  }

  struct Point {
    double x, y, t;
  };
  /// Points ordered t-major, then y, then x.
  Point point(std::size_t idx) const {
    const std::size_t ix = idx % x.count;
    const std::size_t iy = (idx / x.count) % y.count;
    const std::size_t it = idx / (x.count * y.count);
    return {x.at(ix), y.at(iy), t.at(it)};
  }
};

namespace detail {

inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("WARDFORGE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return hw;
}

/// out[i] = fn(i); workers take contiguous blocks so the result does not
/// depend on the thread count. The first exception is rethrown.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, Fn fn) {
  std::vector<T> out(count);
  const unsigned workers = std::min<std::size_t>(worker_count(), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  const std::size_t block = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * block; i < std::min(count, (w + 1) * block); ++i) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline ComplexMatrix guarded(const Field& f, double x, double y, double t) {
  try {
    return f(x, y, t);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::EvalFailure, e.what());
  }
}

}  // namespace detail

struct ResidualReport {
  double max = 0.0;
  double mean = 0.0;
  double fine_max = 0.0;   // at h/2
  double fine_mean = 0.0;  // at h/2
  double ratio = std::numeric_limits<double>::quiet_NaN();  // max(h) / max(h/2)
  double h = 0.0;
  Grid3 grid;
};

namespace detail {

// Below this the h/2 residual is treated as roundoff and no ratio is formed.
inline constexpr double kRatioFloor = 1e-11;

// Fit residuals at or below this are roundoff and carry no rate information.
inline constexpr double kFitFloor = 1e-14;

template <class PointResidual>
ResidualReport residual_report(const Grid3& grid, double h, PointResidual res) {
  grid.validate();
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "step must be positive");
  ResidualReport rep;
  rep.h = h;
  rep.grid = grid;
  auto sweep = [&](double step, double& mx, double& mean) {
    const auto vals = parallel_map<double>(grid.size(), [&](std::size_t i) {
      const auto p = grid.point(i);
      return res(p.x, p.y, p.t, step);
    });
    mx = 0.0;
    double sum = 0.0;
    for (double v : vals) {
      mx = std::max(mx, v);
      sum += v;
    }
    mean = sum / double(vals.size());
  };
  sweep(h, rep.max, rep.mean);
  sweep(h / 2.0, rep.fine_max, rep.fine_mean);
  if (rep.fine_max > kRatioFloor) rep.ratio = rep.max / rep.fine_max;
  return rep;
}

}  // namespace detail

/// Pointwise Frobenius norm of
///   J^{-1}(J_tt - J_xx - J_yy) - L_t^2 + L_x^2 + L_y^2 - [L_t, L_y],  L_s = J^{-1} J_s,
/// which equals (J^{-1}J_t)_t - (J^{-1}J_x)_x - (J^{-1}J_y)_y - [J^{-1}J_t, J^{-1}J_y].
inline double ward_residual_at(const Field& J, double x, double y, double t, double h) {
  const ComplexMatrix j0 = detail::guarded(J, x, y, t);
  const ComplexMatrix inv = inverse(j0);
  const ComplexMatrix xp = detail::guarded(J, x + h, y, t), xm = detail::guarded(J, x - h, y, t);
  const ComplexMatrix yp = detail::guarded(J, x, y + h, t), ym = detail::guarded(J, x, y - h, t);
  const ComplexMatrix tp = detail::guarded(J, x, y, t + h), tm = detail::guarded(J, x, y, t - h);
  const double h2 = h * h;
  const ComplexMatrix lx = inv * ((xp - xm) * (1.0 / (2.0 * h)));
  const ComplexMatrix ly = inv * ((yp - ym) * (1.0 / (2.0 * h)));
  const ComplexMatrix lt = inv * ((tp - tm) * (1.0 / (2.0 * h)));
  const ComplexMatrix two_j = j0 * 2.0;
  const ComplexMatrix jtt = (tp + tm - two_j) * (1.0 / h2);
  const ComplexMatrix jxx = (xp + xm - two_j) * (1.0 / h2);
  const ComplexMatrix jyy = (yp + ym - two_j) * (1.0 / h2);
  const ComplexMatrix r = inv * (jtt - jxx - jyy) - lt * lt + lx * lx + ly * ly - commutator(lt, ly);
  return r.frobenius_norm();
}

inline ResidualReport ward_residual(const Field& J, const Grid3& grid = {}, double h = 1e-3) {
  return detail::residual_report(grid, h, [&](double x, double y, double t, double s) { return ward_residual_at(J, x, y, t, s); });
}

/// Linearized vacuum operator applied to eta:
///   TypeA: eta_tt - eta_xx - eta_yy + [a, eta_x + eta_y - eta_t]
///   TypeB: eta_tt - eta_xx - eta_yy + [b, eta_x + 2 eta_y - 2 eta_t]
/// Returns |residual| and the sum of the norms of its terms.
struct LinearizedValue {
  double residual;
  double scale;
};

inline LinearizedValue linearization_residual_at(const Field& eta, const ComplexMatrix& d, Flavor flavor, double x,
                                                 double y, double t, double h) {
  const ComplexMatrix e0 = eta(x, y, t);
  const ComplexMatrix xp = eta(x + h, y, t), xm = eta(x - h, y, t);
  const ComplexMatrix yp = eta(x, y + h, t), ym = eta(x, y - h, t);
  const ComplexMatrix tp = eta(x, y, t + h), tm = eta(x, y, t - h);
  const double h2 = h * h;
  const ComplexMatrix two = e0 * 2.0;
  const ComplexMatrix ett = (tp + tm - two) * (1.0 / h2);
  const ComplexMatrix exx = (xp + xm - two) * (1.0 / h2);
  const ComplexMatrix eyy = (yp + ym - two) * (1.0 / h2);
  const ComplexMatrix ex = (xp - xm) * (1.0 / (2.0 * h));
  const ComplexMatrix ey = (yp - ym) * (1.0 / (2.0 * h));
  const ComplexMatrix et = (tp - tm) * (1.0 / (2.0 * h));
  const ComplexMatrix drift = flavor == Flavor::TypeA ? ex + ey - et : ex + ey * 2.0 - et * 2.0;
  const ComplexMatrix bracket = commutator(d, drift);
  const ComplexMatrix r = ett - exx - eyy + bracket;
  return {r.frobenius_norm(),
          ett.frobenius_norm() + exx.frobenius_norm() + eyy.frobenius_norm() + bracket.frobenius_norm()};
}

struct LinearizationReport {
  ResidualReport absolute;
  double max_relative = 0.0;  // max residual / sum of term norms, at h
};

inline LinearizationReport linearization_residual(const Field& eta, const ComplexMatrix& d, Flavor flavor,
                                                  const Grid3& grid = {}, double h = 1e-3) {
  LinearizationReport out;
  out.absolute = detail::residual_report(grid, h, [&](double x, double y, double t, double s) {
    return linearization_residual_at(eta, d, flavor, x, y, t, s).residual;
  });
  const auto rel = detail::parallel_map<double>(grid.size(), [&](std::size_t i) {
    const auto p = grid.point(i);
    const auto v = linearization_residual_at(eta, d, flavor, p.x, p.y, p.t, h);
    return v.scale > 0.0 ? v.residual / v.scale : 0.0;
  });
  for (double v : rel) out.max_relative = std::max(out.max_relative, v);
  return out;
}

struct Shift {
  double dx = 0.0;
  double dy = 0.0;
  double dt = 0.0;
};

/// max over the grid of |J(p + shift) - J(p)|_F, one value per shift.
inline std::vector<double> periodicity_defect(const Field& J, const std::vector<Shift>& shifts, const Grid3& grid = {}) {
  std::vector<double> out;
  for (const auto& s : shifts) {
    const auto vals = detail::parallel_map<double>(grid.size(), [&](std::size_t i) {
      const auto p = grid.point(i);
      return (detail::guarded(J, p.x + s.dx, p.y + s.dy, p.t + s.dt) - detail::guarded(J, p.x, p.y, p.t)).frobenius_norm();
    });
    double mx = 0.0;
    for (double v : vals) mx = std::max(mx, v);
    out.push_back(mx);
  }
  return out;
}

/// max over the grid of the special-unitary defects of J.
inline UnitaryDefect max_special_unitary_defect(const Field& J, const Grid3& grid = {}) {
  const auto vals = detail::parallel_map<UnitaryDefect>(grid.size(), [&](std::size_t i) {
    const auto p = grid.point(i);
    return special_unitary_defect(detail::guarded(J, p.x, p.y, p.t));
  });
  UnitaryDefect worst{0.0, 0.0};
  for (const auto& v : vals) {
    worst.unitarity = std::max(worst.unitarity, v.unitarity);
    if (std::abs(v.determinant) > std::abs(worst.determinant)) worst.determinant = v.determinant;
  }
  return worst;
}

struct LimitDefects {
  double plus = 0.0;
  double minus = 0.0;
};

/// Distance of J_1(., +-t_far) from e^{-(x+y)a} diag(e^{+-i theta}, e^{-+i theta})
/// over an (x, y) grid.
inline LimitDefects heteroclinic_limits(const Field& J1, const VacuumBase& base, double theta, double t_far,
                                        const Axis& xs = {0.0, 2.0 * kPi, 32, false},
                                        const Axis& ys = {0.0, 2.0 * kPi, 32, false}) {
  const Complex e = std::polar(1.0, theta);
  const std::array<Complex, 2> plus_d{e, std::conj(e)}, minus_d{std::conj(e), e};
  const ComplexMatrix dp = ComplexMatrix::diagonal(plus_d), dm = ComplexMatrix::diagonal(minus_d);
  LimitDefects out;
  const std::size_t count = xs.count * ys.count;
  const auto vals = detail::parallel_map<std::pair<double, double>>(count, [&](std::size_t i) {
    const double x = xs.at(i % xs.count), y = ys.at(i / xs.count);
    auto d = base.log_diag(x, y, t_far, 0.0);
    for (auto& v : d) v = std::exp(-v);
    const ComplexMatrix j0p = ComplexMatrix::diagonal(d);
    auto dmn = base.log_diag(x, y, -t_far, 0.0);
    for (auto& v : dmn) v = std::exp(-v);
    const ComplexMatrix j0m = ComplexMatrix::diagonal(dmn);
    return std::pair{(J1(x, y, t_far) - j0p * dp).frobenius_norm(), (J1(x, y, -t_far) - j0m * dm).frobenius_norm()};
  });
  for (const auto& [p, m] : vals) {
    out.plus = std::max(out.plus, p);
    out.minus = std::max(out.minus, m);
  }
  return out;
}

enum class TimeEnd { Minus, Plus };

struct AsymptoticFit {
  TimeEnd end = TimeEnd::Minus;
  double fitted_rate = 0.0;
  double predicted_rate = 0.0;
  double direction_cosine = 0.0;       // overlap with the span of all predicted modes
  std::vector<double> mode_cosines;    // overlap with each mode alone
  std::vector<double> sample_times;    // |t|
  std::vector<double> residuals;       // sup |phase^{-1} J_0^{-1} J - I|
  std::vector<double> limit_defects;   // sup |J - phase J_0|
  double limit_defect = 0.0;           // at the farthest sample
  bool monotone = true;
};

struct FitWindow {
  double lo = 0.0;  // |t| range
  double hi = 0.0;
  std::size_t samples = 12;
};

namespace detail {

/// Real least-squares projection of r onto span{b_k}; returns |proj| / |r|.
inline double span_cosine(const std::vector<Complex>& r, const std::vector<std::vector<Complex>>& basis) {
  const std::size_t k = basis.size();
  std::vector<double> gram(k * k, 0.0), rhs(k, 0.0);
  auto dot = [](const std::vector<Complex>& a, const std::vector<Complex>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return s;
  };
  double rr = dot(r, r);
  if (rr == 0.0) return 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    rhs[i] = dot(basis[i], r);
    for (std::size_t j = 0; j < k; ++j) gram[i * k + j] = dot(basis[i], basis[j]);
  }
  // Cholesky-free solve by Gaussian elimination with partial pivoting
  std::vector<double> a = gram, b = rhs;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t i = c + 1; i < k; ++i)
      if (std::abs(a[i * k + c]) > std::abs(a[piv * k + c])) piv = i;
    if (std::abs(a[piv * k + c]) < 1e-300) continue;
    for (std::size_t j = 0; j < k; ++j) std::swap(a[c * k + j], a[piv * k + j]);
    std::swap(b[c], b[piv]);
    for (std::size_t i = c + 1; i < k; ++i) {
      const double f = a[i * k + c] / a[c * k + c];
      for (std::size_t j = c; j < k; ++j) a[i * k + j] -= f * a[c * k + j];
      b[i] -= f * b[c];
    }
  }
  std::vector<double> beta(k, 0.0);
  for (std::size_t c = k; c-- > 0;) {
    if (std::abs(a[c * k + c]) < 1e-300) continue;
    double s = b[c];
    for (std::size_t j = c + 1; j < k; ++j) s -= a[c * k + j] * beta[j];
    beta[c] = s / a[c * k + c];
  }
  // |P r|^2 = beta . rhs
  double pr = 0.0;
  for (std::size_t i = 0; i < k; ++i) pr += beta[i] * rhs[i];
  return std::sqrt(std::clamp(pr / rr, 0.0, 1.0));
}

inline std::vector<Complex> flatten(const std::vector<ComplexMatrix>& ms) {
  std::vector<Complex> out;
  for (const auto& m : ms) out.insert(out.end(), m.values().begin(), m.values().end());
  return out;
}

}  // namespace detail

/// Fits the approach of J_{2N} to phase * J_0 at one end of time.
/// `modes` are the SU(2)-type modes expected in the leading correction;
/// the left-translated residual phase^{-1} J_0^{-1} J - I is projected onto
/// the real span of eta(mode, 1) and eta(mode, i) at each sampled time.
inline AsymptoticFit homoclinic_fit(const Field& J, const VacuumBase& base, Complex phase,
                                    const std::vector<ModeIndex>& modes, Flavor flavor, TimeEnd end,
                                    double predicted_rate, FitWindow window = {},
                                    const Axis& xs = {0.0, 2.0 * kPi, 16, false},
                                    const Axis& ys = {0.0, 2.0 * kPi, 16, false}) {
  if (window.hi <= 0.0) {
    double min_rate = std::numeric_limits<double>::infinity(), max_rate = 0.0;
    for (const auto& m : modes) {
      min_rate = std::min(min_rate, m.rate);
      max_rate = std::max(max_rate, m.rate);
    }
    window.lo = 5.0 / min_rate;
    window.hi = std::min(30.0 / min_rate, 300.0 / max_rate);
  }
  if (window.samples < 4 || !(window.hi > window.lo)) throw Error(ErrorCode::WindowTooNarrow, "fit window needs at least 4 samples");

  const double sgn = end == TimeEnd::Minus ? -1.0 : 1.0;
  const ModeSign sign = end == TimeEnd::Minus ? ModeSign::Unstable : ModeSign::Stable;
  AsymptoticFit fit;
  fit.end = end;
  fit.predicted_rate = predicted_rate;
  fit.direction_cosine = 1.0;
  fit.mode_cosines.assign(modes.size(), 1.0);
  const std::size_t count = xs.count * ys.count;
  const Complex inv_phase = 1.0 / phase;

  for (std::size_t s = 0; s < window.samples; ++s) {
    const double at = window.lo + (window.hi - window.lo) * double(s) / double(window.samples - 1);
    const double t = sgn * at;
    struct PointOut {
      ComplexMatrix residual;
      double limit;
    };
    const auto pts = detail::parallel_map<PointOut>(count, [&](std::size_t i) {
      const double x = xs.at(i % xs.count), y = ys.at(i / xs.count);
      auto d = base.log_diag(x, y, t, 0.0);
      std::vector<Complex> j0d(d.size()), j0inv(d.size());
      for (std::size_t k = 0; k < d.size(); ++k) {
        j0d[k] = std::exp(-d[k]);
        j0inv[k] = std::exp(d[k]);
      }
      const ComplexMatrix j = detail::guarded(J, x, y, t);
      const ComplexMatrix r = ComplexMatrix::diagonal(j0inv) * j * inv_phase - ComplexMatrix::identity(j.rows());
      return PointOut{r, (j - phase * ComplexMatrix::diagonal(j0d)).frobenius_norm()};
    });
    double sup = 0.0, lim = 0.0;
    std::vector<ComplexMatrix> residual_field;
    residual_field.reserve(count);
    for (const auto& p : pts) {
      sup = std::max(sup, p.residual.frobenius_norm());
      lim = std::max(lim, p.limit);
      residual_field.push_back(p.residual);
    }
    fit.sample_times.push_back(at);
    fit.residuals.push_back(sup);
    fit.limit_defects.push_back(lim);

    // Mode directions (rate factor omitted; cosines are scale free).
    if (!modes.empty() && sup > detail::kFitFloor && residual_field.front().rows() == 2) {
      const auto r = detail::flatten(residual_field);
      std::vector<std::vector<Complex>> all;
      for (std::size_t k = 0; k < modes.size(); ++k) {
        ModeIndex unit = modes[k];
        unit.rate = 0.0;
        std::vector<std::vector<Complex>> own;
        for (const Complex c : {Complex{1.0, 0.0}, Complex{0.0, 1.0}}) {
          const Field eta = linear_mode_field(unit, c, sign, flavor);
          std::vector<ComplexMatrix> field;
          field.reserve(count);
          for (std::size_t i = 0; i < count; ++i) field.push_back(eta(xs.at(i % xs.count), ys.at(i / xs.count), t));
          own.push_back(detail::flatten(field));
        }
        fit.mode_cosines[k] = std::min(fit.mode_cosines[k], detail::span_cosine(r, own));
        all.insert(all.end(), own.begin(), own.end());
      }
      fit.direction_cosine = std::min(fit.direction_cosine, detail::span_cosine(r, all));
    } else if (sup <= detail::kFitFloor) {
      fit.direction_cosine = 0.0;
    }
  }

  for (std::size_t s = 1; s < fit.limit_defects.size(); ++s)
    if (!(fit.limit_defects[s] < fit.limit_defects[s - 1])) fit.monotone = false;
  fit.limit_defect = fit.limit_defects.back();

  // least-squares slope of log residual against |t|
  bool degenerate = false;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(fit.sample_times.size());
  for (std::size_t s = 0; s < fit.sample_times.size(); ++s) {
    if (!(fit.residuals[s] > detail::kFitFloor)) {
      degenerate = true;
      break;
    }
    const double X = fit.sample_times[s], Y = std::log(fit.residuals[s]);
    sx += X;
    sy += Y;
    sxx += X * X;
    sxy += X * Y;
  }
  fit.fitted_rate = degenerate ? std::numeric_limits<double>::infinity() : -(n * sxy - sx * sy) / (n * sxx - sx * sx);
  return fit;
}

}  // namespace wardforge
