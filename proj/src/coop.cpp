#include "harvestgame/coop.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "harvestgame/io.hpp"
#include "harvestgame/waterfill.hpp"

namespace harvestgame::coop {

TransmitCovariance expansion_seed(int i, const ChannelSet& channels,
                                  double power_limit, double floor_share,
                                  bool* used_fallback) {
  const Matrix eye =
      Matrix::Identity(channels.rx_antennas(), channels.rx_antennas());
  const waterfill::WhitenedProblem problem =
      waterfill::whiten(channels.user(i), eye, channels.harvester(0, i),
                        power_limit, floor_share);
  if (!waterfill::is_feasible(problem)) {
    if (used_fallback) *used_fallback = true;
    return energy_beam_covariance(channels.harvester(0, i), power_limit);
  }
  const waterfill::WaterfillSolution sol =
      waterfill::solve(problem, Tolerances{});
  if (used_fallback && sol.used_fallback) *used_fallback = true;
  return waterfill::assemble_covariance(problem, sol);
}

ExpansionPoint build_expansion(const ChannelSet& channels,
                               std::vector<TransmitCovariance> q_tilde,
                               MessageLog* log) {
  const int k = channels.num_users();
  ExpansionPoint at;
  at.q_tilde = std::move(q_tilde);
  at.r_tilde.resize(k);
  at.sensitivity.resize(k);
  at.taxes.resize(k);
  at.h_hat.resize(k);
  const Matrix eye =
      Matrix::Identity(channels.rx_antennas(), channels.rx_antennas());
  for (int i = 0; i < k; ++i) {
    const Matrix& h = channels.user(i);
    at.r_tilde[i] = interference_plus_noise(i, at.q_tilde, channels);
    const Matrix whole = detail::hermitize(
        at.r_tilde[i] + h * at.q_tilde[i].matrix * h.adjoint());
    // A_i = R~^{-1} - (R~ + H Q~ H^H)^{-1}; difference of inverses of
    // ordered PD matrices, so PSD up to roundoff.
    at.sensitivity[i] = detail::hermitize(at.r_tilde[i].llt().solve(eye) -
                                          whole.llt().solve(eye));
    at.h_hat[i] = detail::inverse_sqrt(at.r_tilde[i]) * h;
  }
  for (int i = 0; i < k; ++i) {
    Matrix b = Matrix::Zero(channels.tx_antennas(), channels.tx_antennas());
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      const Matrix& h_ji = channels.cross(j, i);
      b += h_ji.adjoint() * at.sensitivity[j] * h_ji;
    }
    at.taxes[i] = detail::hermitize(b);
  }
  if (log) {
    log->cross_channel += static_cast<long>(k) * (k - 1);
    log->sensitivity += k;
  }
  return at;
}

double approx_rate(int i, const Matrix& q_i,
                   const std::vector<TransmitCovariance>& q,
                   const ExpansionPoint& at, const ChannelSet& channels) {
  const double own = detail::whitened_log_det_rate(at.h_hat[i], q_i);
  const Matrix r_now = interference_plus_noise(i, q, channels);
  const double drift =
      (at.sensitivity[i] * (r_now - at.r_tilde[i])).trace().real();
  return own - drift;
}

double utility(int i, const Matrix& q_i, const ExpansionPoint& at) {
  return detail::whitened_log_det_rate(at.h_hat[i], q_i) -
         (at.taxes[i] * q_i).trace().real();
}

namespace {

/// Exact Euclidean projection onto {x >= 0, sum x <= cap} via the sorted
/// cumulative-sum threshold; O(n log n), no iteration.
RealVector project_capped_simplex(const RealVector& x, double cap) {
  const int n = static_cast<int>(x.size());
  RealVector y = x.cwiseMax(0.0);
  if (y.sum() <= cap) return y;
  std::vector<double> u(x.data(), x.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (int r = 0; r < n; ++r) {
    cum += u[r];
    const double t = (cum - cap) / (r + 1);
    if (u[r] - t > 0.0) tau = t;
  }
  return (x.array() - tau).cwiseMax(0.0).matrix();
}

Matrix project_strategy(const Matrix& q, double cap) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitize(q));
  const RealVector z = project_capped_simplex(es.eigenvalues(), cap);
  return detail::hermitize(es.eigenvectors() * z.asDiagonal() *
                           es.eigenvectors().adjoint());
}

}  // namespace

TransmitCovariance solve_local_reward(int i, const Matrix& reward,
                                      const ExpansionPoint& at,
                                      double power_limit,
                                      const Tolerances& tol,
                                      const Matrix* warm_start,
                                      LocalSolveStats* stats) {
  const Matrix& h = at.h_hat[i];
  const int mt = static_cast<int>(h.cols());
  const Matrix eye_r = Matrix::Identity(h.rows(), h.rows());
  const Matrix gain = detail::hermitize(reward - at.taxes[i]);

  auto value = [&](const Matrix& q) {
    return detail::whitened_log_det_rate(h, q) + (gain * q).trace().real();
  };
  auto gradient = [&](const Matrix& q) {
    const Matrix m = detail::hermitize(eye_r + h * q * h.adjoint());
    return detail::hermitize(h.adjoint() * m.llt().solve(eye_r) * h + gain);
  };

  Matrix q = warm_start ? project_strategy(*warm_start, power_limit)
                        : Matrix::Zero(mt, mt).eval();
  double f = value(q);
  LocalSolveStats st;
  const int max_iters = 5000;
  for (st.iterations = 0; st.iterations < max_iters; ++st.iterations) {
    const Matrix g = gradient(q);
    const Matrix probe = project_strategy(q + g, power_limit);
    st.grad_map_norm = (probe - q).norm();
    if (st.grad_map_norm <= tol.grad_tol) {
      st.converged = true;
      break;
    }
    double step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 100; ++bt) {
      const Matrix cand = project_strategy(q + step * g, power_limit);
      const Matrix d = cand - q;
      const double fc = value(cand);
      // Armijo on the projection arc
      if (fc >= f + 1e-4 * (g.cwiseProduct(d.conjugate())).sum().real()) {
        q = cand;
        f = fc;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // step underflow: stationary to machine accuracy
  }
  if (stats) *stats = st;
  return {q, power_limit};
}

TransmitCovariance solve_local(int i, double price, const ExpansionPoint& at,
                               const ChannelSet& channels, double power_limit,
                               const Tolerances& tol, const Matrix* warm_start,
                               LocalSolveStats* stats) {
  const Vector& g = channels.harvester(0, i);
  const Matrix reward = price * (g * g.adjoint());
  return solve_local_reward(i, reward, at, power_limit, tol, warm_start,
                            stats);
}

namespace {

/// Bracket state each player tracks locally. Updated only from the
/// broadcast contribution sum, so all copies stay bit-identical.
struct DualState {
  double lo = 0.0;
  double hi = 1.0;
  bool have_hi = false;
  double next = 0.0;  // price to evaluate
};

void advance_bracket(DualState& s, double sum_beta, double gamma) {
  if (!s.have_hi) {
    if (sum_beta >= gamma) {
      s.have_hi = true;
      s.hi = s.next;
      s.next = 0.5 * (s.lo + s.hi);
    } else {
      s.lo = s.next == 0.0 ? 0.0 : s.next;
      s.next = s.next == 0.0 ? 1.0 : 2.0 * s.next;
    }
  } else {
    if (sum_beta >= gamma)
      s.hi = s.next;
    else
      s.lo = s.next;
    s.next = 0.5 * (s.lo + s.hi);
  }
}

}  // namespace

BargainResult bargain(const ChannelSet& channels, const ExpansionPoint& at,
                      const ScenarioConfig& config, MessageLog* log,
                      int round_index) {
  const int k = channels.num_users();
  const double gamma = config.gamma(0);
  const double lambda_tol = config.tolerances.lambda_tol;
  constexpr double kPriceCap = 1099511627776.0;  // 2^40

  BargainResult res;
  std::vector<Matrix> q(k);
  for (int i = 0; i < k; ++i) q[i] = at.q_tilde[i].matrix;

  MessageLog scratch;
  MessageLog* lg = log ? log : &scratch;
  int step = 0;
  std::vector<std::pair<double, double>> samples;  // (price, sum_beta)

  auto evaluate = [&](double price) {
    RealVector beta(k);
    RealVector rates(k);
    std::vector<TransmitCovariance> strat(k);
    for (int i = 0; i < k; ++i) {
      const Matrix warm = q[i];
      TransmitCovariance s = solve_local(i, price, at, channels,
                                         config.power(i),
                                         config.tolerances, &warm);
      q[i] = s.matrix;
      beta(i) =
          harvested_power_single(s, channels.harvester(0, i));
      strat[i] = std::move(s);
    }
    lg->contribution += k;
    for (int i = 0; i < k; ++i) rates(i) = info_rate(i, strat, channels);
    BargainRow row;
    row.round = round_index;
    row.iteration = step++;
    row.price = price;
    row.contributions = beta;
    row.sum_contributions = beta.sum();
    row.rates = rates;
    row.sum_rate = rates.sum();
    row.messages = lg->total();
    res.rows.push_back(row);
    samples.emplace_back(price, row.sum_contributions);
    return row.sum_contributions;
  };

  auto snapshot = [&](double price, const RealVector& beta) {
    res.price = price;
    res.contributions = beta;
    res.covariances.resize(k);
    for (int i = 0; i < k; ++i)
      res.covariances[i] = {q[i], config.power(i)};
  };

  // Every player holds its own bracket replica; they must stay bitwise in
  // lock step since they see the same broadcasts.
  std::vector<DualState> duals(k);
  auto advance_all = [&](double sum_beta) {
    for (auto& d : duals) advance_bracket(d, sum_beta, gamma);
    for (int i = 1; i < k; ++i) {
      if (std::memcmp(&duals[i].next, &duals[0].next, sizeof(double)) != 0)
        throw std::logic_error("bargain: price replicas diverged");
    }
    return duals[0].next;
  };

  // Free-of-charge probe first: if the floor is already met the price is 0.
  double sum0 = evaluate(0.0);
  if (sum0 >= gamma) {
    res.converged = true;
    snapshot(0.0, res.rows.back().contributions);
    return res;
  }

  // Geometric search for a floor-respecting price.
  double price = advance_all(sum0);
  bool bracketed = false;
  while (price <= kPriceCap) {
    const double s = evaluate(price);
    if (s >= gamma) {
      bracketed = true;
      snapshot(price, res.rows.back().contributions);
      price = advance_all(s);
      break;
    }
    price = advance_all(s);
  }
  if (!bracketed) {
    res.bracket_failed = true;
    snapshot(duals[0].lo, res.rows.back().contributions);
    return res;
  }

  // Bisection; keep the strategies from the floor-respecting end.
  while (duals[0].hi - duals[0].lo > lambda_tol &&
         res.bisection_iters < config.bargain_max_bisections) {
    const double s = evaluate(price);
    ++res.bisection_iters;
    if (s >= gamma) snapshot(price, res.rows.back().contributions);
    price = advance_all(s);
  }
  res.converged = duals[0].hi - duals[0].lo <= lambda_tol;

  // The surrogate's contribution sum should grow with the price; flag any
  // decrease beyond local-solver noise.
  std::sort(samples.begin(), samples.end());
  for (std::size_t a = 1; a < samples.size(); ++a) {
    if (samples[a].second < samples[a - 1].second - 1e-6 * std::max(1.0, gamma))
      res.monotone_violation = true;
  }

  // Returned strategies are a snapshot from the feasible end, but the local
  // solves have drifted since; re-solve at the final price so strategies,
  // price, and contributions agree.
  for (int i = 0; i < k; ++i) q[i] = res.covariances[i].matrix;
  {
    RealVector beta(k);
    for (int i = 0; i < k; ++i) {
      const Matrix warm = q[i];
      TransmitCovariance s =
          solve_local(i, res.price, at, channels, config.power(i),
                      config.tolerances, &warm);
      q[i] = s.matrix;
      beta(i) = harvested_power_single(s, channels.harvester(0, i));
    }
    snapshot(res.price, beta);
  }
  return res;
}

CoopTrace run_bargaining(const ChannelSet& channels,
                         const ScenarioConfig& config) {
  config.validate();
  const int k = channels.num_users();
  const double gamma = config.gamma(0);

  CoopTrace trace;
  trace.converged = true;
  std::vector<TransmitCovariance> q_tilde(k);
  bool seed_fallback = false;
  for (int i = 0; i < k; ++i)
    q_tilde[i] =
        expansion_seed(i, channels, config.power(i), gamma / k, &seed_fallback);

  for (int round = 1; round <= config.bargain_outer_rounds; ++round) {
    ExpansionPoint at = build_expansion(channels, q_tilde, &trace.messages);
    at.any_fallback = seed_fallback;
    BargainResult res = bargain(channels, at, config, &trace.messages, round);
    trace.rows.insert(trace.rows.end(), res.rows.begin(), res.rows.end());
    trace.rounds = round;
    trace.converged = trace.converged && res.converged;
    trace.bracket_failed = trace.bracket_failed || res.bracket_failed;
    trace.price = res.price;
    q_tilde = res.covariances;
    if (res.bracket_failed) break;
  }

  trace.covariances = q_tilde;
  trace.rates.resize(k);
  for (int i = 0; i < k; ++i)
    trace.rates(i) = info_rate(i, trace.covariances, channels);
  trace.sum_rate = trace.rates.sum();
  trace.energy_total = harvested_power(trace.covariances, channels, 0);
  return trace;
}

void CoopTrace::write_csv(std::ostream& out) const {
  const int k = static_cast<int>(rates.size());
  out << "round,z,lambda";
  for (int i = 1; i <= k; ++i) out << ",beta_" << i;
  out << ",sum_beta";
  for (int i = 1; i <= k; ++i) out << ",rate_" << i;
  out << ",sum_rate,msg_count\n";
  for (const BargainRow& r : rows) {
    out << r.round << ',' << r.iteration << ',' << io::format_double(r.price);
    for (int i = 0; i < k; ++i)
      out << ',' << io::format_double(r.contributions(i));
    out << ',' << io::format_double(r.sum_contributions);
    for (int i = 0; i < k; ++i) out << ',' << io::format_double(r.rates(i));
    out << ',' << io::format_double(r.sum_rate) << ',' << r.messages << '\n';
  }
}

nlohmann::json CoopTrace::summary() const {
  nlohmann::json j;
  j["price"] = price;
  j["converged"] = converged;
  j["bracket_failed"] = bracket_failed;
  j["rounds"] = rounds;
  std::vector<double> r(rates.data(), rates.data() + rates.size());
  j["final_rates"] = r;
  j["final_sum_rate"] = sum_rate;
  j["energy_total"] = energy_total;
  j["messages"] = {{"cross_channel", messages.cross_channel},
                   {"sensitivity", messages.sensitivity},
                   {"contribution", messages.contribution},
                   {"total", messages.total()}};
  return j;
}

}  // namespace harvestgame::coop
