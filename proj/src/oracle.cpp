#include "harvestgame/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace harvestgame::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Euclidean projection of a real vector onto {y >= 0, sum y <= cap} by
/// bisection on the uniform shift (no sorting, no closed form).
RealVector shift_project(const RealVector& x, double cap) {
  RealVector clipped = x.cwiseMax(0.0);
  if (clipped.sum() <= cap) return clipped;
  double lo = 0.0, hi = x.maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if ((x.array() - mid).max(0.0).sum() > cap)
      lo = mid;
    else
      hi = mid;
  }
  return (x.array() - hi).max(0.0);
}

double hermitian_inner(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b.conjugate()).sum().real();
}

}  // namespace

Matrix project_psd_trace(const Matrix& x, double cap) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitize(x));
  const RealVector d = shift_project(es.eigenvalues(), cap);
  return detail::hermitize(es.eigenvectors() * d.asDiagonal() *
                           es.eigenvectors().adjoint());
}

PgResult pg_maximize(int dim, const std::function<double(const Matrix&)>& f,
                     const std::function<Matrix(const Matrix&)>& grad,
                     double trace_cap, const PgOptions& opts,
                     const Matrix* warm_start) {
  PgResult res;
  Matrix q = warm_start ? *warm_start
                        : Matrix::Zero(dim, dim);
  q = project_psd_trace(q, trace_cap);
  double fq = f(q);
  Matrix g = grad(q);
  double step = opts.initial_step;
  for (int it = 0; it < opts.max_iters; ++it) {
    res.iterations = it + 1;
    // gradient-map probe with unit step decides termination
    const Matrix probe = project_psd_trace(q + g, trace_cap);
    if ((probe - q).norm() <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    double s = step;
    for (int back = 0; back < 60; ++back) {
      const Matrix cand = project_psd_trace(q + s * g, trace_cap);
      const Matrix delta = cand - q;
      const double fc = f(cand);
      if (fc >= fq + 1e-4 * hermitian_inner(g, delta)) {
        const Matrix gn = grad(cand);
        // spectral step: secant curvature along the accepted move keeps the
        // iteration fast where the objective is nearly flat
        const double denom = -hermitian_inner(delta, gn - g);
        step = denom > 0.0
                   ? std::clamp(delta.squaredNorm() / denom, 1e-12, 1e12)
                   : s * 2.0;
        q = cand;
        fq = fc;
        g = gn;
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;  // step underflow: already at best resolution
  }
  res.q = q;
  res.objective = fq;
  return res;
}

namespace {

/// Inner solver of the diagonal reference: maximize
/// sum ln(1 + sigma^2 q) + price * sum g^2 q over {q >= 0, sum q <= cap}
/// by projected gradient with the shift projection.
RealVector diag_pg(const RealVector& sigma_sq, const RealVector& g_sq,
                   double cap, double price, RealVector q) {
  q = shift_project(q, cap);
  auto value = [&](const RealVector& v) {
    double s = 0.0;
    for (int m = 0; m < v.size(); ++m)
      s += std::log1p(sigma_sq(m) * v(m)) + price * g_sq(m) * v(m);
    return s;
  };
  auto gradient = [&](const RealVector& v) {
    RealVector g(v.size());
    for (int m = 0; m < v.size(); ++m)
      g(m) = sigma_sq(m) / (1.0 + sigma_sq(m) * v(m)) + price * g_sq(m);
    return g;
  };
  double fq = value(q);
  RealVector grad = gradient(q);
  double step = 1.0;
  for (int it = 0; it < 5000; ++it) {
    const RealVector probe = shift_project(q + grad, cap);
    if ((probe - q).cwiseAbs().maxCoeff() <= 1e-11) break;
    bool accepted = false;
    double s = step;
    for (int back = 0; back < 40; ++back) {
      const RealVector cand = shift_project(q + s * grad, cap);
      const double fc = value(cand);
      if (fc >= fq + 1e-4 * grad.dot(cand - q)) {
        const RealVector gn = gradient(cand);
        const RealVector dq = cand - q;
        // spectral step from the secant pair; the plain unit step crawls on
        // the nearly-flat directions this problem develops at small sigma
        const double denom = -dq.dot(gn - grad);
        step = denom > 0.0 ? std::clamp(dq.squaredNorm() / denom, 1e-9, 1e9)
                           : s * 2.0;
        q = cand;
        fq = fc;
        grad = gn;
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;
  }
  return q;
}

}  // namespace

DiagonalReference solve_single_link_reference(const RealVector& sigma_sq,
                                              const RealVector& g_sq,
                                              double power_limit,
                                              double energy_floor,
                                              double tol) {
  DiagonalReference out;
  const int n = static_cast<int>(sigma_sq.size());
  auto rate = [&](const RealVector& q) {
    double s = 0.0;
    for (int m = 0; m < n; ++m) s += std::log1p(sigma_sq(m) * q(m));
    return s;
  };
  if (g_sq.maxCoeff() * power_limit < energy_floor) {
    out.feasible = false;
    out.q = RealVector::Zero(n);
    out.objective = -kInf;
    return out;
  }
  RealVector q = diag_pg(sigma_sq, g_sq, power_limit, 0.0,
                         RealVector::Constant(n, power_limit / n));
  if (g_sq.dot(q) >= energy_floor) {
    out.q = q;
    out.objective = rate(q);
    out.nu2 = 0.0;
    return out;
  }
  double hi = 1.0;
  RealVector q_hi = q;
  bool bracketed = false;
  while (hi <= 1e9) {
    q_hi = diag_pg(sigma_sq, g_sq, power_limit, hi, q_hi);
    if (g_sq.dot(q_hi) >= energy_floor) {
      bracketed = true;
      break;
    }
    hi *= 2.0;
  }
  if (!bracketed) {
    // floor sits on the feasibility boundary; only the pure beam attains it
    int star = 0;
    g_sq.maxCoeff(&star);
    q_hi = RealVector::Zero(n);
    q_hi(star) = power_limit;
    out.q = q_hi;
    out.objective = rate(q_hi);
    out.nu2 = hi;
    return out;
  }
  double lo = 0.0;
  RealVector q_mid = q_hi;
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    q_mid = diag_pg(sigma_sq, g_sq, power_limit, mid, q_mid);
    if (g_sq.dot(q_mid) >= energy_floor) {
      hi = mid;
      q_hi = q_mid;
    } else {
      lo = mid;
    }
  }
  out.q = q_hi;
  out.objective = rate(q_hi);
  out.nu2 = hi;
  return out;
}

RealVector brute_force_single_link(const RealVector& sigma_sq,
                                   const RealVector& g_sq,
                                   double power_limit, double energy_floor,
                                   double step) {
  const int n = static_cast<int>(sigma_sq.size());
  if (n < 1 || n > 3)
    throw std::invalid_argument("brute force supports 1..3 modes");
  const int cells = static_cast<int>(std::floor(power_limit / step));
  RealVector best;
  double best_value = -kInf;
  auto consider = [&](const RealVector& q) {
    if (q.sum() > power_limit + 1e-12) return;
    if (g_sq.dot(q) < energy_floor) return;
    double v = 0.0;
    for (int m = 0; m < n; ++m) v += std::log1p(sigma_sq(m) * q(m));
    if (v > best_value) {
      best_value = v;
      best = q;
    }
  };
  RealVector q = RealVector::Zero(n);
  if (n == 1) {
    for (int a = 0; a <= cells; ++a) {
      q(0) = a * step;
      consider(q);
    }
  } else if (n == 2) {
    for (int a = 0; a <= cells; ++a)
      for (int b = 0; a + b <= cells; ++b) {
        q(0) = a * step;
        q(1) = b * step;
        consider(q);
      }
  } else {
    for (int a = 0; a <= cells; ++a)
      for (int b = 0; a + b <= cells; ++b)
        for (int c = 0; a + b + c <= cells; ++c) {
          q(0) = a * step;
          q(1) = b * step;
          q(2) = c * step;
          consider(q);
        }
  }
  return best;  // empty when no grid point met the floor
}

Matrix fd_gradient(const std::function<double(const Matrix&)>& f,
                   const Matrix& q, double eps) {
  const int n = static_cast<int>(q.rows());
  if (eps <= 0.0) eps = 1e-5 * (1.0 + q.norm());
  Matrix g = Matrix::Zero(n, n);
  auto probe = [&](const Matrix& d) {
    return (f(q + eps * d) - f(q - eps * d)) / (2.0 * eps);
  };
  for (int i = 0; i < n; ++i) {
    Matrix d = Matrix::Zero(n, n);
    d(i, i) = 1.0;
    g(i, i) = probe(d);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Matrix d = Matrix::Zero(n, n);
      d(i, j) = 1.0;
      d(j, i) = 1.0;
      const double re = 0.5 * probe(d);
      d(i, j) = Complex(0.0, 1.0);
      d(j, i) = Complex(0.0, -1.0);
      const double im = 0.5 * probe(d);
      g(i, j) = Complex(re, im);
      g(j, i) = Complex(re, -im);
    }
  return g;
}

RealVector simplex_project_enumerate(const RealVector& y, double cap) {
  const int n = static_cast<int>(y.size());
  if (n > 20) throw std::invalid_argument("enumeration capped at 20 dims");
  // mu = 0 branch: clip, keep if the cap holds.
  RealVector clipped = y.cwiseMax(0.0);
  if (clipped.sum() <= cap + 1e-12) return clipped;
  // cap tight: enumerate every support set and test its KKT pattern.
  const unsigned subsets = 1u << n;
  for (unsigned mask = 1; mask < subsets; ++mask) {
    double sum = 0.0;
    int size = 0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        sum += y(i);
        ++size;
      }
    const double mu = (sum - cap) / size;
    if (mu < -1e-12) continue;
    bool ok = true;
    RealVector x = RealVector::Zero(n);
    for (int i = 0; i < n && ok; ++i) {
      if (mask & (1u << i)) {
        x(i) = y(i) - mu;
        ok = x(i) >= -1e-12;
      } else {
        ok = y(i) <= mu + 1e-12;
      }
    }
    if (ok) return x.cwiseMax(0.0);
  }
  return RealVector::Zero(n);  // unreachable for cap >= 0
}

RealVector estimate_energy_profile(const Vector& g, const Matrix& precoder,
                                   double probe_power, double noise_sd,
                                   std::uint64_t noise_seed) {
  const int mt = static_cast<int>(precoder.cols());
  if (g.size() != precoder.rows())
    throw std::invalid_argument("harvester vector does not match precoder");
  GaussianSource rng(noise_seed);
  RealVector est(mt);
  for (int m = 0; m < mt; ++m) {
    const Complex coupling = (g.adjoint() * precoder.col(m))(0, 0);
    double received = probe_power * std::norm(coupling);
    if (noise_sd > 0.0) received += noise_sd * rng.standard_normal();
    est(m) = received / probe_power;
  }
  return est;
}

}  // namespace harvestgame::oracle
