#include "harvestgame/waterfill.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace harvestgame::waterfill {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kResidualAccept = 1e-7;  // closed form must beat this
constexpr double kActiveEps = 1e-12;      // q above this counts as active

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("waterfill: ") + what);
}

double value_of(const RealVector& sigma_sq, const RealVector& q) {
  double v = 0.0;
  for (int m = 0; m < q.size(); ++m)
    v += std::log1p(sigma_sq(m) * std::max(0.0, q(m)));
  return v;
}

/// Classical single-constraint water-filling over modes with positive gain,
/// spending the full budget. Exact breakpoint scan, no iteration. The water
/// level 1/nu1 is returned through *level.
RealVector classic_waterfill(const RealVector& sigma_sq, double budget,
                             double* level) {
  const int n = static_cast<int>(sigma_sq.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return sigma_sq(a) > sigma_sq(b); });
  double inv_sum = 0.0;
  double w = 0.0;
  int used = 0;
  for (int k = 0; k < n; ++k) {
    inv_sum += 1.0 / sigma_sq(order[k]);
    const double cand = (budget + inv_sum) / (k + 1);
    const double next_threshold =
        k + 1 < n ? 1.0 / sigma_sq(order[k + 1]) : kInf;
    if (cand > 1.0 / sigma_sq(order[k]) && cand <= next_threshold) {
      w = cand;
      used = k + 1;
      break;
    }
  }
  RealVector q = RealVector::Zero(n);
  for (int k = 0; k < used; ++k)
    q(order[k]) = w - 1.0 / sigma_sq(order[k]);
  if (level) *level = w;
  return q;
}

/// Roots of a real polynomial (ascending coefficients) via the companion
/// matrix; near-zero leading coefficients are trimmed first.
std::vector<std::complex<double>> poly_roots(std::vector<double> c) {
  double scale = 0.0;
  for (double v : c) scale = std::max(scale, std::abs(v));
  while (c.size() > 1 && std::abs(c.back()) <= 1e-14 * scale) c.pop_back();
  const int deg = static_cast<int>(c.size()) - 1;
  if (deg < 1) return {};
  RealMatrix comp = RealMatrix::Zero(deg, deg);
  for (int k = 0; k < deg; ++k) comp(k, deg - 1) = -c[k] / c[deg];
  for (int k = 1; k < deg; ++k) comp(k, k - 1) = 1.0;
  Eigen::EigenSolver<RealMatrix> es(comp, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> roots(deg);
  for (int k = 0; k < deg; ++k) roots[k] = es.eigenvalues()(k);
  return roots;
}

/// Water levels, powers and objective for one price on a tight system.
/// Returns false when some level is nonpositive.
bool price_to_powers(const ActiveSystem& sys, double nu2, double* nu1,
                     RealVector* q_active, double* value) {
  const int m = static_cast<int>(sys.modes.size());
  RealVector q(m);
  double val = 0.0;
  for (int k = 0; k < m; ++k) {
    const double level = m + nu2 * sys.alpha(k);  // = (nu1 - nu2 g^2) P'
    if (!(level > 1e-13 * m)) return false;
    q(k) = sys.p_prime / level - 1.0 / sys.sigma_sq(k);
    val += std::log1p(sys.sigma_sq(k) * std::max(0.0, q(k)));
  }
  *nu1 = (m + nu2 * sys.gamma_prime) / sys.p_prime;
  *q_active = std::move(q);
  *value = val;
  return true;
}

/// A few Newton corrections on sum_k 1/(|M| + nu2 alpha_k) = 1 tighten a
/// companion-matrix root to full precision.
double polish_price(const ActiveSystem& sys, double nu2) {
  const int m = static_cast<int>(sys.modes.size());
  for (int pass = 0; pass < 4; ++pass) {
    double f = -1.0, df = 0.0;
    for (int k = 0; k < m; ++k) {
      const double level = m + nu2 * sys.alpha(k);
      if (!(level > 0.0)) return nu2;
      f += 1.0 / level;
      df -= sys.alpha(k) / (level * level);
    }
    if (df == 0.0) break;
    const double step = f / df;
    const double next = nu2 - step;
    if (!(next > 0.0)) break;
    nu2 = next;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(nu2))) break;
  }
  return nu2;
}

PriceRoot select_price(const ActiveSystem& sys,
                       const std::vector<double>& raw_candidates) {
  PriceRoot best;
  std::vector<double> accepted;
  double best_value = -kInf;
  for (double cand : raw_candidates) {
    if (!(cand > 0.0) || !std::isfinite(cand)) continue;
    const double nu2 = polish_price(sys, cand);
    double nu1 = 0.0, value = 0.0;
    RealVector q;
    if (!price_to_powers(sys, nu2, &nu1, &q, &value)) continue;
    bool fresh = true;
    for (double seen : accepted)
      if (std::abs(nu2 - seen) <= 1e-9 * std::max(1.0, std::abs(nu2)))
        fresh = false;
    if (fresh) accepted.push_back(nu2);
    if (value > best_value) {
      best_value = value;
      best.nu2 = nu2;
      best.found = true;
    }
  }
  best.multiple = accepted.size() > 1;
  return best;
}

/// Worst scaled KKT violation for explicit budget/floor (the public
/// kkt_residual forwards the problem's own limits here).
double residual_impl(const RealVector& sigma_sq, const RealVector& g_sq,
                     const RealVector& q, double nu1, double nu2,
                     double budget, double floor) {
  const int n = static_cast<int>(q.size());
  const double q_scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  const double nu_scale = std::max({1.0, std::abs(nu1), std::abs(nu2)});
  const double p_scale = std::max(1.0, std::abs(budget));
  const double e_scale = std::max(1.0, std::abs(floor));

  const double spent = q.sum();
  const double harvested = g_sq.dot(q);
  double worst = 0.0;
  auto track = [&worst](double v) { worst = std::max(worst, v); };

  track(std::max(0.0, spent - budget) / p_scale);
  track(std::max(0.0, floor - harvested) / e_scale);
  track(std::max(0.0, -q.minCoeff()) / q_scale);
  track(std::max(0.0, -nu1) / nu_scale);
  track(std::max(0.0, -nu2) / nu_scale);
  track(std::abs(nu1 * (spent - budget)) / (p_scale * nu_scale));
  track(std::abs(nu2 * (floor - harvested)) / (e_scale * nu_scale));

  for (int m = 0; m < n; ++m) {
    const double qm = std::max(0.0, q(m));
    const double grad =
        sigma_sq(m) > 0.0 ? sigma_sq(m) / (1.0 + sigma_sq(m) * qm) : 0.0;
    const double lambda = nu1 - nu2 * g_sq(m) - grad;
    track(std::max(0.0, -lambda) / nu_scale);
    track(std::abs(qm * lambda) / (q_scale * nu_scale));
    if (qm > kActiveEps) track(std::abs(lambda) / nu_scale);
  }
  return worst;
}

std::pair<double, double> fit_duals_impl(const RealVector& sigma_sq,
                                         const RealVector& g_sq,
                                         const RealVector& q, double budget,
                                         double floor) {
  // Stationarity rows over active modes: nu1 - nu2 g^2 = grad (grad = 0 on
  // zero-gain modes). Several dual completions are consistent with a primal
  // point that sits on or near a constraint boundary, so score every
  // candidate with the residual and keep the winner.
  std::vector<double> rhs, gcol;
  int last_active = -1;
  for (int m = 0; m < q.size(); ++m) {
    if (q(m) <= 1e-10) continue;
    const double grad =
        sigma_sq(m) > 0.0 ? sigma_sq(m) / (1.0 + sigma_sq(m) * q(m)) : 0.0;
    rhs.push_back(grad);
    gcol.push_back(g_sq(m));
    last_active = m;
  }
  if (rhs.empty()) return {0.0, 0.0};
  const int n = static_cast<int>(rhs.size());
  double mean = 0.0;
  for (double v : rhs) mean += v;
  mean /= n;

  std::vector<std::pair<double, double>> candidates;
  candidates.emplace_back(mean, 0.0);  // slack floor
  if (n >= 2) {
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd b(n);
    for (int k = 0; k < n; ++k) {
      a(k, 0) = 1.0;
      a(k, 1) = -gcol[k];
      b(k) = rhs[k];
    }
    const Eigen::Vector2d sol = a.colPivHouseholderQr().solve(b);
    if (sol.allFinite() && sol(1) >= 0.0)
      candidates.emplace_back(std::max(0.0, sol(0)), sol(1));
  } else {
    // One active mode: the stationarity row only fixes nu1 - nu2 g^2; the
    // smallest price that silences every other mode completes the pair.
    double nu2 = 0.0;
    for (int m = 0; m < q.size(); ++m) {
      if (m == last_active) continue;
      const double sep = g_sq(last_active) - g_sq(m);
      const double need = sigma_sq(m) - rhs[0];
      if (sep > 0.0 && need > 0.0) nu2 = std::max(nu2, need / sep);
    }
    candidates.emplace_back(rhs[0] + nu2 * g_sq(last_active), nu2);
  }
  if (q.sum() < budget - 1e-9 * std::max(1.0, budget)) {
    // power slack: complementarity prefers nu1 = 0 when that is consistent
    const std::size_t have = candidates.size();
    for (std::size_t k = 0; k < have; ++k)
      candidates.emplace_back(0.0, candidates[k].second);
  }

  std::pair<double, double> best = candidates.front();
  double best_resid = kInf;
  for (const auto& cand : candidates) {
    const double r = residual_impl(sigma_sq, g_sq, q, cand.first, cand.second,
                                   budget, floor);
    if (r < best_resid) {
      best_resid = r;
      best = cand;
    }
  }
  return best;
}

struct Candidate {
  bool ok = false;
  RealVector q;  // full problem length
  double nu1 = 0.0;
  double nu2 = 0.0;
  double value = -kInf;
  bool used_fallback = false;
  bool multiple_roots = false;
};

/// Inner stage of the safeguarded bisection: for a fixed price, find the
/// budget multiplier spending exactly the budget. The spend is strictly
/// decreasing in nu1 above nu2 * max g^2.
RealVector allocate_at_price(const RealVector& sigma_sq,
                             const RealVector& g_sq, double budget,
                             double nu2, double* nu1_out) {
  const int n = static_cast<int>(sigma_sq.size());
  const double base = nu2 * g_sq.maxCoeff();
  auto spend = [&](double nu1) {
    double total = 0.0;
    for (int m = 0; m < n; ++m) {
      const double level = nu1 - nu2 * g_sq(m);
      if (level <= 0.0) return kInf;
      total += std::max(0.0, 1.0 / level - 1.0 / sigma_sq(m));
    }
    return total;
  };
  double hi_off = 1.0;
  while (spend(base + hi_off) > budget && hi_off < 1e300) hi_off *= 2.0;
  double lo_off = hi_off;
  while (spend(base + lo_off) < budget && lo_off > 1e-300) lo_off *= 0.5;
  // invariant: spend(base + lo_off) >= budget >= spend(base + hi_off)
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo_off + hi_off);
    if (mid == lo_off || mid == hi_off) break;
    if (spend(base + mid) >= budget)
      lo_off = mid;
    else
      hi_off = mid;
  }
  const double nu1 = base + 0.5 * (lo_off + hi_off);
  RealVector q(n);
  for (int m = 0; m < n; ++m)
    q(m) = std::max(0.0, 1.0 / (nu1 - nu2 * g_sq(m)) - 1.0 / sigma_sq(m));
  if (nu1_out) *nu1_out = nu1;
  return q;
}

/// Safeguarded fallback for the tight case, positive mode gains only.
/// Outer bisection on the energy price: the harvested power of the inner
/// optimum is non-decreasing in the price, so the bracket is sound.
Candidate bisect_tight(const RealVector& sigma_sq, const RealVector& g_sq,
                       double budget, double floor) {
  Candidate out;
  out.used_fallback = true;
  double nu1 = 0.0;
  RealVector q;
  auto energy_at = [&](double nu2) {
    q = allocate_at_price(sigma_sq, g_sq, budget, nu2, &nu1);
    return g_sq.dot(q);
  };
  double hi = 1.0;
  bool bracketed = false;
  for (int it = 0; it < 120 && !bracketed; ++it) {
    if (energy_at(hi) >= floor)
      bracketed = true;
    else
      hi *= 2.0;
  }
  const int n = static_cast<int>(sigma_sq.size());
  if (!bracketed) {
    // Floor reachable only in the beamforming limit; everything goes onto
    // the strongest harvesting mode.
    int star = 0;
    g_sq.maxCoeff(&star);
    out.q = RealVector::Zero(n);
    out.q(star) = budget;
    std::tie(out.nu1, out.nu2) =
        fit_duals_impl(sigma_sq, g_sq, out.q, budget, floor);
    out.value = value_of(sigma_sq, out.q);
    out.ok = true;
    return out;
  }
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (energy_at(mid) >= floor)
      hi = mid;
    else
      lo = mid;
  }
  energy_at(hi);  // leaves q, nu1 at the feasible endpoint
  out.nu2 = hi;
  out.nu1 = nu1;
  out.q = q;
  out.value = value_of(sigma_sq, q);
  out.ok = true;
  return out;
}

/// Closed-form tight solve over the given positive-gain modes. Mirrors the
/// published active-set iteration: start from all modes, drop every mode
/// whose implied power is nonpositive, re-solve.
Candidate closed_tight(const WhitenedProblem& p,
                       const std::vector<int>& rate_modes, double budget,
                       double floor) {
  Candidate out;
  WhitenedProblem sub = p;
  sub.power_limit = budget;
  sub.energy_floor = floor;
  std::vector<int> active = rate_modes;
  bool multiple = false;
  const int n = static_cast<int>(p.sigma_sq.size());
  // A mode is active at the optimum iff σ²_m + ν₂|ĝ_m|² exceeds ν₁, so the
  // active set is a top segment of that ordering. When the tight system has
  // no positive root on the current set (its only crossing is the spurious
  // ν₂ = 0), silence the mode ranked last under the best price estimate so
  // far; the estimate 0 gives the classic water-filling order.
  double nu2_hat = 0.0;
  auto drop_lowest_rank = [&] {
    std::size_t low = 0;
    auto rank = [&](std::size_t k) {
      return p.sigma_sq(active[k]) + nu2_hat * p.g_hat_sq(active[k]);
    };
    for (std::size_t k = 1; k < active.size(); ++k)
      if (rank(k) < rank(low)) low = k;
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(low));
  };
  while (active.size() >= 2) {
    const ActiveSystem sys = tight_system(sub, active);
    const PriceRoot root = energy_price_root(sys);
    if (!root.found) {
      drop_lowest_rank();
      continue;
    }
    multiple = multiple || root.multiple;
    nu2_hat = root.nu2;
    double nu1 = 0.0, value = 0.0;
    RealVector qa;
    if (!price_to_powers(sys, root.nu2, &nu1, &qa, &value)) {
      drop_lowest_rank();
      continue;
    }
    std::vector<int> next;
    for (std::size_t k = 0; k < active.size(); ++k)
      if (qa(k) > 0.0) next.push_back(active[k]);
    if (next.size() == active.size()) {
      out.ok = true;
      out.q = RealVector::Zero(n);
      for (std::size_t k = 0; k < active.size(); ++k)
        out.q(active[k]) = qa(k);
      out.nu1 = nu1;
      out.nu2 = root.nu2;
      out.value = value_of(p.sigma_sq, out.q);
      out.multiple_roots = multiple;
      return out;
    }
    if (next.empty()) return out;
    active = std::move(next);
  }
  if (active.size() == 1) {
    const int m = active[0];
    if (p.g_hat_sq(m) * budget < floor * (1.0 - 1e-12)) return out;
    out.ok = true;
    out.q = RealVector::Zero(n);
    out.q(m) = budget;
    std::tie(out.nu1, out.nu2) =
        fit_duals_impl(p.sigma_sq, p.g_hat_sq, out.q, budget, floor);
    out.value = value_of(p.sigma_sq, out.q);
    out.multiple_roots = multiple;
    return out;
  }
  return out;
}

/// Tight solve over the positive-gain modes: plain water-filling when the
/// floor is slack, closed form with bisection backup otherwise. Empty
/// candidate when the floor is unreachable with this budget.
Candidate solve_rate_tight(const WhitenedProblem& p,
                           const std::vector<int>& rate_modes, double budget,
                           double floor) {
  Candidate out;
  const int n = static_cast<int>(p.sigma_sq.size());
  if (rate_modes.empty() || budget <= 0.0) {
    if (floor <= 1e-12 * std::max(1.0, std::abs(floor))) {
      out.ok = true;
      out.q = RealVector::Zero(n);
      out.value = 0.0;
    }
    return out;
  }
  RealVector sigma(rate_modes.size()), g(rate_modes.size());
  for (std::size_t k = 0; k < rate_modes.size(); ++k) {
    sigma(k) = p.sigma_sq(rate_modes[k]);
    g(k) = p.g_hat_sq(rate_modes[k]);
  }
  const double reach = g.maxCoeff() * budget;
  if (floor > 0.0 && reach < floor * (1.0 - 1e-12)) return out;

  double level = 0.0;
  const RealVector q0 = classic_waterfill(sigma, budget, &level);
  if (g.dot(q0) >= floor) {
    out.ok = true;
    out.q = RealVector::Zero(n);
    for (std::size_t k = 0; k < rate_modes.size(); ++k)
      out.q(rate_modes[k]) = q0(k);
    out.nu1 = 1.0 / level;
    out.nu2 = 0.0;
    out.value = value_of(p.sigma_sq, out.q);
    return out;
  }

  // Hugging the feasibility boundary: the tight system degenerates, the
  // answer is the full-budget load on the strongest harvesting mode.
  if (floor >= reach * (1.0 - 1e-9)) {
    int star = 0;
    g.maxCoeff(&star);
    out.ok = true;
    out.q = RealVector::Zero(n);
    out.q(rate_modes[star]) = budget;
    std::tie(out.nu1, out.nu2) =
        fit_duals_impl(p.sigma_sq, p.g_hat_sq, out.q, budget, floor);
    out.value = value_of(p.sigma_sq, out.q);
    return out;
  }

  Candidate closed = closed_tight(p, rate_modes, budget, floor);
  if (closed.ok &&
      residual_impl(p.sigma_sq, p.g_hat_sq, closed.q, closed.nu1, closed.nu2,
                    budget, floor) <= kResidualAccept)
    return closed;

  const Candidate fb = bisect_tight(sigma, g, budget, floor);
  out.ok = fb.ok;
  out.used_fallback = true;
  out.multiple_roots = closed.multiple_roots;
  out.q = RealVector::Zero(n);
  for (std::size_t k = 0; k < rate_modes.size(); ++k)
    out.q(rate_modes[k]) = fb.q(k);
  out.nu1 = fb.nu1;
  out.nu2 = fb.nu2;
  out.value = value_of(p.sigma_sq, out.q);
  return out;
}

}  // namespace

WhitenedProblem whiten(const Matrix& h, const Matrix& r, const Vector& g,
                       double power_limit, double energy_floor) {
  require(h.rows() == r.rows() && r.rows() == r.cols(), "dimension mismatch");
  require(g.size() == h.cols(), "harvester vector length mismatch");
  const Matrix h_hat = detail::inverse_sqrt(r) * h;
  Eigen::JacobiSVD<Matrix> svd(h_hat,
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  const int mt = static_cast<int>(h.cols());
  WhitenedProblem p;
  p.sigma_sq = RealVector::Zero(mt);
  const auto& sv = svd.singularValues();
  for (int k = 0; k < sv.size(); ++k) p.sigma_sq(k) = sv(k) * sv(k);
  p.precoder = svd.matrixV();
  p.g_hat = p.precoder.adjoint() * g;
  p.g_hat_sq = p.g_hat.cwiseAbs2();
  p.power_limit = power_limit;
  p.energy_floor = energy_floor;
  return p;
}

bool is_feasible(const WhitenedProblem& p) {
  if (p.energy_floor <= 0.0) return true;
  return p.g_hat_sq.maxCoeff() * p.power_limit >= p.energy_floor;
}

ActiveSystem tight_system(const WhitenedProblem& p,
                          const std::vector<int>& modes) {
  ActiveSystem sys;
  sys.modes = modes;
  const int m = static_cast<int>(modes.size());
  sys.sigma_sq.resize(m);
  sys.g_sq.resize(m);
  double inv_sum = 0.0, weighted = 0.0;
  for (int k = 0; k < m; ++k) {
    const int idx = modes[k];
    require(p.sigma_sq(idx) > 0.0, "tight system needs positive mode gains");
    sys.sigma_sq(k) = p.sigma_sq(idx);
    sys.g_sq(k) = p.g_hat_sq(idx);
    inv_sum += 1.0 / p.sigma_sq(idx);
    weighted += p.g_hat_sq(idx) / p.sigma_sq(idx);
  }
  sys.p_prime = p.power_limit + inv_sum;
  sys.gamma_prime = p.energy_floor + weighted;
  sys.alpha.resize(m);
  for (int k = 0; k < m; ++k)
    sys.alpha(k) = sys.gamma_prime - sys.g_sq(k) * sys.p_prime;
  return sys;
}

double energy_price_root_pair(double alpha0, double alpha1) {
  return -(1.0 / alpha0 + 1.0 / alpha1);
}

double energy_price_root_triple(double alpha0, double alpha1, double alpha2) {
  const double inv_sum = 1.0 / alpha0 + 1.0 / alpha1 + 1.0 / alpha2;
  const double inv_sq = 1.0 / (alpha0 * alpha0) + 1.0 / (alpha1 * alpha1) +
                        1.0 / (alpha2 * alpha2);
  const double ratio = (alpha0 + alpha1 + alpha2) / (alpha0 * alpha1 * alpha2);
  return -inv_sum + std::sqrt(std::max(0.0, inv_sq - ratio));
}

PriceRoot energy_price_root_poly(const ActiveSystem& sys) {
  const int m = static_cast<int>(sys.modes.size());
  require(m >= 2, "price root needs at least two modes");
  // Normalize alpha for conditioning; roots scale back by 1/s.
  const double s = std::max(sys.alpha.cwiseAbs().maxCoeff(), 1e-300);
  const RealVector a = sys.alpha / s;

  auto multiply_in = [m](std::vector<double> acc, double ak) {
    std::vector<double> next(acc.size() + 1, 0.0);
    for (std::size_t t = 0; t < acc.size(); ++t) {
      next[t] += acc[t] * m;
      next[t + 1] += acc[t] * ak;
    }
    return next;
  };
  // full(x) = prod_k (m + x a_k); lhs(x) = sum_j prod_{k != j} (m + x a_k).
  std::vector<double> full{1.0};
  for (int k = 0; k < m; ++k) full = multiply_in(std::move(full), a(k));
  std::vector<double> lhs(full.size() - 1, 0.0);
  for (int j = 0; j < m; ++j) {
    std::vector<double> part{1.0};
    for (int k = 0; k < m; ++k)
      if (k != j) part = multiply_in(std::move(part), a(k));
    for (std::size_t t = 0; t < part.size(); ++t) lhs[t] += part[t];
  }
  std::vector<double> poly(full.size(), 0.0);
  for (std::size_t t = 0; t < full.size(); ++t)
    poly[t] = (t < lhs.size() ? lhs[t] : 0.0) - full[t];
  // x = 0 solves the equation identically (m copies of m^{m-1} equal m^m);
  // deflate that factor before forming the companion matrix.
  const std::vector<double> deflated(poly.begin() + 1, poly.end());

  std::vector<double> cands;
  for (const auto& root : poly_roots(deflated)) {
    if (std::abs(root.imag()) > 1e-7 * std::max(1.0, std::abs(root.real())))
      continue;
    cands.push_back(root.real() / s);
  }
  return select_price(sys, cands);
}

PriceRoot energy_price_root(const ActiveSystem& sys) {
  const int m = static_cast<int>(sys.modes.size());
  if (m == 2)
    return select_price(
        sys, {energy_price_root_pair(sys.alpha(0), sys.alpha(1))});
  if (m == 3) {
    // Both branches of the quadratic; validity filtering keeps whichever
    // gives positive water levels.
    const double plus = energy_price_root_triple(sys.alpha(0), sys.alpha(1),
                                                 sys.alpha(2));
    const double inv_sum =
        1.0 / sys.alpha(0) + 1.0 / sys.alpha(1) + 1.0 / sys.alpha(2);
    const double minus = -2.0 * inv_sum - plus;  // the two roots sum to -2e2/e3
    return select_price(sys, {plus, minus});
  }
  return energy_price_root_poly(sys);
}

double objective(const WhitenedProblem& p, const RealVector& q_hat) {
  return value_of(p.sigma_sq, q_hat);
}

double energy(const WhitenedProblem& p, const RealVector& q_hat) {
  return p.g_hat_sq.dot(q_hat);
}

double kkt_residual(const WhitenedProblem& p, const RealVector& q_hat,
                    double nu1, double nu2) {
  return residual_impl(p.sigma_sq, p.g_hat_sq, q_hat, nu1, nu2,
                       p.power_limit, p.energy_floor);
}

std::pair<double, double> fit_dual_variables(const WhitenedProblem& p,
                                             const RealVector& q_hat) {
  return fit_duals_impl(p.sigma_sq, p.g_hat_sq, q_hat, p.power_limit,
                        p.energy_floor);
}

WaterfillSolution solve(const WhitenedProblem& p, const Tolerances& tol) {
  (void)tol;  // thresholds here are structural, not user-tunable
  const int n = static_cast<int>(p.sigma_sq.size());
  require(n >= 1, "empty problem");
  require(p.g_hat_sq.size() == n, "g_hat_sq length mismatch");
  require(p.power_limit > 0.0, "power limit must be positive");
  for (int m = 0; m + 1 < n; ++m)
    require(p.sigma_sq(m) >= p.sigma_sq(m + 1) - 1e-12,
            "mode gains must be sorted descending");

  WaterfillSolution sol;
  sol.q_hat = RealVector::Zero(n);
  if (!is_feasible(p)) {
    sol.feasible = false;
    return sol;
  }

  std::vector<int> rate_modes;
  std::vector<int> dead_modes;  // zero gain: no rate, possibly energy
  for (int m = 0; m < n; ++m)
    (p.sigma_sq(m) > 0.0 ? rate_modes : dead_modes).push_back(m);

  // Zero-gain modes are interchangeable rate-wise; only the strongest
  // harvester coupling among them can ever carry power.
  int carrier = -1;
  for (int m : dead_modes)
    if (p.g_hat_sq(m) > 0.0 &&
        (carrier < 0 || p.g_hat_sq(m) > p.g_hat_sq(carrier)))
      carrier = m;

  auto finish = [&](const Candidate& c) {
    sol.q_hat = c.q;
    sol.nu1 = c.nu1;
    sol.nu2 = c.nu2;
    sol.used_fallback = c.used_fallback;
    sol.multiple_roots = c.multiple_roots;
    for (int m = 0; m < n; ++m)
      if (sol.q_hat(m) > kActiveEps) sol.active_set.push_back(m);
    sol.kkt_residual = kkt_residual(p, sol.q_hat, sol.nu1, sol.nu2);
    return sol;
  };

  // Floor slack under plain water-filling: done, price zero.
  if (!rate_modes.empty()) {
    RealVector sigma(rate_modes.size()), g(rate_modes.size());
    for (std::size_t k = 0; k < rate_modes.size(); ++k) {
      sigma(k) = p.sigma_sq(rate_modes[k]);
      g(k) = p.g_hat_sq(rate_modes[k]);
    }
    double level = 0.0;
    const RealVector q0 = classic_waterfill(sigma, p.power_limit, &level);
    if (g.dot(q0) >= p.energy_floor) {
      Candidate c;
      c.ok = true;
      c.q = RealVector::Zero(n);
      for (std::size_t k = 0; k < rate_modes.size(); ++k)
        c.q(rate_modes[k]) = q0(k);
      c.nu1 = 1.0 / level;
      c.nu2 = 0.0;
      return finish(c);
    }
  } else {
    // No information-bearing mode at all: any floor-meeting allocation is
    // optimal (rate is identically zero).
    Candidate c;
    c.ok = true;
    c.q = RealVector::Zero(n);
    if (p.energy_floor > 0.0) {
      require(carrier >= 0, "infeasibility gate should have caught this");
      c.q(carrier) = p.power_limit;
    }
    return finish(c);
  }

  Candidate best;
  if (carrier < 0) {
    best = solve_rate_tight(p, rate_modes, p.power_limit, p.energy_floor);
  } else {
    // Concave one-dimensional search over the power diverted to the
    // zero-gain carrier; the remainder runs the tight solve.
    const double gc = p.g_hat_sq(carrier);
    double g_rate_max = 0.0;
    for (int m : rate_modes) g_rate_max = std::max(g_rate_max, p.g_hat_sq(m));
    double t_lo = 0.0, t_hi = p.power_limit;
    // Feasibility of the remainder: g_rate_max (P - t) + gc t >= floor.
    const double df = gc - g_rate_max;
    const double c0 = p.energy_floor - g_rate_max * p.power_limit;
    if (df > 0.0)
      t_lo = std::max(0.0, std::min(p.power_limit, c0 / df));
    else if (df < 0.0 && c0 > 0.0)
      t_hi = 0.0;  // cannot happen past the gate, defensive
    else if (df < 0.0)
      t_hi = std::min(p.power_limit, c0 / df);

    auto eval = [&](double t) {
      Candidate c = solve_rate_tight(p, rate_modes, p.power_limit - t,
                                     p.energy_floor - gc * t);
      if (c.ok) {
        c.q(carrier) = t;
        c.value = value_of(p.sigma_sq, c.q);
      }
      return c;
    };
    // Coarse scan then golden-section refinement (the value is concave).
    const int kCoarse = 32;
    double best_t = t_lo;
    best = eval(t_lo);
    for (int k = 1; k <= kCoarse; ++k) {
      const double t = t_lo + (t_hi - t_lo) * k / kCoarse;
      Candidate c = eval(t);
      if (c.ok && c.value > best.value + 0.0) {
        best = c;
        best_t = t;
      } else if (!best.ok && c.ok) {
        best = c;
        best_t = t;
      }
    }
    const double span = (t_hi - t_lo) / kCoarse;
    double a = std::max(t_lo, best_t - span), b = std::min(t_hi, best_t + span);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    Candidate c1 = eval(x1), c2 = eval(x2);
    for (int it = 0; it < 120 && b - a > 1e-13 * std::max(1.0, t_hi); ++it) {
      const double v1 = c1.ok ? c1.value : -kInf;
      const double v2 = c2.ok ? c2.value : -kInf;
      if (v1 >= v2) {
        b = x2;
        x2 = x1;
        c2 = c1;
        x1 = b - gr * (b - a);
        c1 = eval(x1);
      } else {
        a = x1;
        x1 = x2;
        c1 = c2;
        x2 = a + gr * (b - a);
        c2 = eval(x2);
      }
    }
    for (const Candidate* c : {&c1, &c2})
      if (c->ok && c->value > best.value) best = *c;

    if (best.ok) {
      // Duals from the sub-solve can miss the carrier stationarity; refit
      // when they do not explain the combined point.
      if (residual_impl(p.sigma_sq, p.g_hat_sq, best.q, best.nu1, best.nu2,
                        p.power_limit, p.energy_floor) > kResidualAccept) {
        std::tie(best.nu1, best.nu2) = fit_dual_variables(p, best.q);
      }
      // Identically coupled zero-gain modes share the carrier load evenly.
      std::vector<int> ties;
      for (int m : dead_modes)
        if (p.g_hat_sq(m) == p.g_hat_sq(carrier)) ties.push_back(m);
      if (ties.size() > 1) {
        const double share = best.q(carrier) / ties.size();
        for (int m : ties) best.q(m) = share;
      }
    }
  }

  if (!best.ok) {
    // Defensive: the gate said feasible, so the bisection must succeed.
    RealVector sigma(rate_modes.size()), g(rate_modes.size());
    for (std::size_t k = 0; k < rate_modes.size(); ++k) {
      sigma(k) = p.sigma_sq(rate_modes[k]);
      g(k) = p.g_hat_sq(rate_modes[k]);
    }
    const Candidate fb =
        bisect_tight(sigma, g, p.power_limit, p.energy_floor);
    best = Candidate{};
    best.ok = fb.ok;
    best.used_fallback = true;
    best.q = RealVector::Zero(n);
    for (std::size_t k = 0; k < rate_modes.size(); ++k)
      best.q(rate_modes[k]) = fb.q(k);
    best.nu1 = fb.nu1;
    best.nu2 = fb.nu2;
  }
  return finish(best);
}

TransmitCovariance assemble_covariance(const WhitenedProblem& p,
                                       const WaterfillSolution& s) {
  require(s.feasible, "cannot assemble an infeasible solution");
  const Matrix q = p.precoder *
                   s.q_hat.cwiseMax(0.0).cast<Complex>().asDiagonal() *
                   p.precoder.adjoint();
  return {detail::hermitize(q), p.power_limit};
}

}  // namespace harvestgame::waterfill
