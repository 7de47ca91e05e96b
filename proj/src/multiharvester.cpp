#include "harvestgame/multiharvester.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "harvestgame/io.hpp"
#include "harvestgame/waterfill.hpp"

namespace harvestgame::multih {

HarvesterRegistry::HarvesterRegistry(const RealVector& requirements) {
  active_.resize(requirements.size());
  gamma_.resize(requirements.size());
  for (int l = 0; l < requirements.size(); ++l) {
    gamma_[l] = requirements(l);
    active_[l] = requirements(l) > 0.0;
  }
}

std::vector<int> HarvesterRegistry::active_ids() const {
  std::vector<int> ids;
  for (int l = 0; l < capacity(); ++l)
    if (active_[l]) ids.push_back(l);
  return ids;
}

int HarvesterRegistry::active_count() const {
  return static_cast<int>(active_ids().size());
}

void HarvesterRegistry::join(int l, double gamma) {
  active_.at(l) = true;
  gamma_.at(l) = gamma;
}

void HarvesterRegistry::leave(int l) { active_.at(l) = false; }

TransmitCovariance solve_local_multi(int i, const RealVector& prices,
                                     const std::vector<int>& harvester_ids,
                                     const coop::ExpansionPoint& at,
                                     const ChannelSet& channels,
                                     double power_limit, const Tolerances& tol,
                                     const Matrix* warm_start) {
  const int mt = channels.tx_antennas();
  Matrix reward = Matrix::Zero(mt, mt);
  for (std::size_t a = 0; a < harvester_ids.size(); ++a) {
    const Vector& g = channels.harvester(harvester_ids[a], i);
    reward += prices(static_cast<int>(a)) * (g * g.adjoint());
  }
  return coop::solve_local_reward(i, reward, at, power_limit, tol, warm_start);
}

RealVector subgradient_step(const RealVector& prices,
                            const RealVector& contribution_sums,
                            const RealVector& requirements, int z,
                            double step_b) {
  const double gmax = requirements.size() ? requirements.maxCoeff() : 0.0;
  const double a = gmax > 0.0 ? 1.0 / gmax : 1.0;
  const double alpha = a / (step_b + z);
  return (prices - alpha * (contribution_sums - requirements)).cwiseMax(0.0);
}

namespace {

struct PhaseSolver {
  const ChannelSet& channels;
  const coop::ExpansionPoint& at;
  const ScenarioConfig& config;
  std::vector<Matrix> q;  // current strategies, warm-started throughout

  void solve_all(const RealVector& prices, const std::vector<int>& ids) {
    for (int i = 0; i < channels.num_users(); ++i) {
      const Matrix warm = q[i];
      q[i] = solve_local_multi(i, prices, ids, at, channels, config.power(i),
                               config.tolerances, &warm)
                 .matrix;
    }
  }

  RealMatrix contributions(const std::vector<int>& ids) const {
    RealMatrix beta(ids.size(), channels.num_users());
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (int i = 0; i < channels.num_users(); ++i) {
        const Vector& g = channels.harvester(ids[a], i);
        beta(static_cast<int>(a), i) = (g.adjoint() * q[i] * g)(0, 0).real();
      }
    return beta;
  }

  RealVector true_rates() const {
    std::vector<TransmitCovariance> strat(q.size());
    for (std::size_t i = 0; i < q.size(); ++i)
      strat[i] = {q[i], config.power(static_cast<int>(i))};
    RealVector r(q.size());
    for (int i = 0; i < static_cast<int>(q.size()); ++i)
      r(i) = info_rate(i, strat, channels);
    return r;
  }

  double surrogate_sum() const {
    double s = 0.0;
    for (int i = 0; i < channels.num_users(); ++i)
      s += coop::utility(i, q[i], at);
    return s;
  }
};

bool floors_met(const RealVector& sums, const RealVector& req, double rel) {
  for (int l = 0; l < req.size(); ++l)
    if (sums(l) < req(l) - rel * std::max(1.0, req(l))) return false;
  return true;
}

}  // namespace

MultiTrace run_multi(const ChannelSet& channels, HarvesterRegistry registry,
                     const ScenarioConfig& config) {
  config.validate();
  if (registry.capacity() > channels.num_harvesters())
    throw std::invalid_argument(
        "run_multi: registry capacity exceeds harvester channels");
  const int k = channels.num_users();
  constexpr double kRowFeasSlack = 1e-9;
  constexpr double kPolishTarget = 1e-6;
  constexpr double kPriceCap = 1099511627776.0;  // 2^40

  // Expansion point seeded from the most demanding initial harvester; with
  // a single active harvester this is the same seed the bargaining uses.
  std::vector<TransmitCovariance> q_tilde(k);
  {
    int lead = 0;
    double best = -1.0;
    for (int l : registry.active_ids())
      if (registry.requirement(l) > best) {
        best = registry.requirement(l);
        lead = l;
      }
    const double share =
        registry.active_count() ? registry.requirement(lead) / k : 0.0;
    const Matrix eye =
        Matrix::Identity(channels.rx_antennas(), channels.rx_antennas());
    for (int i = 0; i < k; ++i) {
      const waterfill::WhitenedProblem problem =
          waterfill::whiten(channels.user(i), eye, channels.harvester(lead, i),
                            config.power(i), share);
      if (!waterfill::is_feasible(problem)) {
        q_tilde[i] =
            energy_beam_covariance(channels.harvester(lead, i),
                                   config.power(i));
      } else {
        q_tilde[i] = waterfill::assemble_covariance(
            problem, waterfill::solve(problem, Tolerances{}));
      }
    }
  }
  const coop::ExpansionPoint at = coop::build_expansion(channels, q_tilde);

  PhaseSolver solver{channels, at, config, {}};
  solver.q.resize(k);
  for (int i = 0; i < k; ++i) solver.q[i] = q_tilde[i].matrix;

  std::vector<HarvestEvent> pending = config.events;
  std::stable_sort(pending.begin(), pending.end(),
                   [](const HarvestEvent& a, const HarvestEvent& b) {
                     return a.iter < b.iter;
                   });
  std::size_t next_event = 0;

  MultiTrace trace;
  trace.min_duality_margin = std::numeric_limits<double>::infinity();
  double best_feasible = -std::numeric_limits<double>::infinity();
  double last_dual = 0.0;

  // prices carried across phases by harvester id; joiners start at 0
  std::vector<double> price_by_id(registry.capacity(), 0.0);
  int z_total = 0;
  bool settled = false;

  auto gather_prices = [&](const std::vector<int>& ids) {
    RealVector p(ids.size());
    for (std::size_t a = 0; a < ids.size(); ++a)
      p(static_cast<int>(a)) = price_by_id[ids[a]];
    return p;
  };
  auto gather_requirements = [&](const std::vector<int>& ids) {
    RealVector g(ids.size());
    for (std::size_t a = 0; a < ids.size(); ++a)
      g(static_cast<int>(a)) = registry.requirement(ids[a]);
    return g;
  };
  auto account_duality = [&](const RealVector& prices, const RealMatrix& beta,
                             const RealVector& req, bool feasible) {
    const RealVector sums = beta.rows() ? RealVector(beta.rowwise().sum())
                                        : RealVector(0);
    const double primal = solver.surrogate_sum();
    double dual = primal;
    for (int l = 0; l < req.size(); ++l)
      dual += prices(l) * (sums(l) - req(l));
    last_dual = dual;
    if (feasible) best_feasible = std::max(best_feasible, primal);
    if (std::isfinite(best_feasible))
      trace.min_duality_margin =
          std::min(trace.min_duality_margin, dual - best_feasible);
  };

  auto record = [&](int phase, int z, const RealVector& prices,
                    const std::vector<int>& ids, const RealMatrix& beta,
                    bool feasible) {
    MultiRow row;
    row.phase = phase;
    row.iteration = z;
    row.prices = prices;
    row.contributions = beta;
    row.rates = solver.true_rates();
    row.sum_rate = row.rates.sum();
    row.feasible = feasible;
    row.harvester_ids = ids;
    trace.rows.push_back(std::move(row));
  };

  while (true) {
    // apply every event scheduled at or before the current step
    bool changed = false;
    while (next_event < pending.size() &&
           pending[next_event].iter <= z_total) {
      const HarvestEvent& e = pending[next_event];
      if (e.join) {
        registry.join(e.harvester_id, e.gamma);
        price_by_id[e.harvester_id] = 0.0;
      } else {
        registry.leave(e.harvester_id);
      }
      ++next_event;
      changed = true;
    }
    if (changed || trace.phases == 0) {
      ++trace.phases;
      settled = false;
    }

    const std::vector<int> ids = registry.active_ids();
    const RealVector req = gather_requirements(ids);
    RealVector prices = gather_prices(ids);

    // subgradient phase
    int settle_run = 0;
    int z_phase = 0;
    while (z_phase < config.subgradient_max_iters) {
      if (next_event < pending.size() && pending[next_event].iter <= z_total)
        break;  // exogenous change: restart with the new active set
      solver.solve_all(prices, ids);
      const RealMatrix beta = solver.contributions(ids);
      const RealVector sums =
          beta.rows() ? RealVector(beta.rowwise().sum()) : RealVector(0);
      const bool feasible = floors_met(sums, req, kRowFeasSlack);
      record(trace.phases - 1, z_phase, prices, ids, beta, feasible);
      account_duality(prices, beta, req, feasible);
      if (ids.empty()) {
        settled = true;
        break;
      }
      const RealVector next =
          subgradient_step(prices, sums, req, z_phase,
                           config.subgradient_step_b);
      const double move = (next - prices).lpNorm<Eigen::Infinity>();
      prices = next;
      ++z_phase;
      ++z_total;
      if (move < 1e-6) {
        if (++settle_run >= config.subgradient_settle) {
          settled = true;
          break;
        }
      } else {
        settle_run = 0;
      }
    }
    for (std::size_t a = 0; a < ids.size(); ++a)
      price_by_id[ids[a]] = prices(static_cast<int>(a));

    if (next_event < pending.size()) {
      // idle until the next arrival or departure
      z_total = std::max(z_total, pending[next_event].iter);
      continue;
    }
    break;
  }

  // Polish: the diminishing-step phase lands near the dual optimum but the
  // floors can still be off by more than the target; tighten each price by
  // bisection, keeping the floor-respecting end.
  const std::vector<int> ids = registry.active_ids();
  const RealVector req = gather_requirements(ids);
  RealVector prices = gather_prices(ids);
  bool polished = ids.empty();
  int polish_z = 0;
  if (!ids.empty()) {
    auto sums_at = [&](const RealVector& p) {
      solver.solve_all(p, ids);
      return RealVector(solver.contributions(ids).rowwise().sum());
    };
    for (int sweep = 0; sweep < 12 && !polished; ++sweep) {
      for (int a = 0; a < static_cast<int>(ids.size()); ++a) {
        RealVector p = prices;
        p(a) = 0.0;
        RealVector sums = sums_at(p);
        if (sums(a) >= req(a)) {
          prices = p;
          continue;
        }
        double lo = 0.0;
        double hi = std::max(1.0, 2.0 * prices(a));
        p(a) = hi;
        sums = sums_at(p);
        while (sums(a) < req(a) && hi < kPriceCap) {
          lo = hi;
          hi *= 2.0;
          p(a) = hi;
          sums = sums_at(p);
        }
        if (sums(a) < req(a)) {
          prices(a) = hi;  // floor out of reach even at huge prices
          continue;
        }
        while (hi - lo > 1e-9 * std::max(1.0, hi)) {
          p(a) = 0.5 * (lo + hi);
          sums = sums_at(p);
          if (sums(a) >= req(a))
            hi = p(a);
          else
            lo = p(a);
        }
        p(a) = hi;
        sums = sums_at(p);
        prices = p;
      }
      const RealMatrix beta = solver.contributions(ids);
      const RealVector sums = RealVector(beta.rowwise().sum());
      const bool feasible = floors_met(sums, req, kRowFeasSlack);
      record(trace.phases - 1,
             config.subgradient_max_iters + polish_z++, prices, ids, beta,
             feasible);
      account_duality(prices, beta, req, feasible);
      polished = true;
      for (int l = 0; l < req.size(); ++l)
        if (sums(l) < req(l) - kPolishTarget * std::max(1.0, req(l)))
          polished = false;
    }
    for (std::size_t a = 0; a < ids.size(); ++a)
      price_by_id[ids[a]] = prices(static_cast<int>(a));
  }

  trace.covariances.resize(k);
  for (int i = 0; i < k; ++i)
    trace.covariances[i] = {solver.q[i], config.power(i)};
  trace.rates = solver.true_rates();
  trace.sum_rate = trace.rates.sum();
  trace.prices = prices;
  trace.harvester_ids = ids;
  trace.converged = settled && polished;
  trace.max_floor_violation = 0.0;
  if (!ids.empty()) {
    const RealVector sums =
        RealVector(solver.contributions(ids).rowwise().sum());
    for (int l = 0; l < req.size(); ++l)
      trace.max_floor_violation =
          std::max(trace.max_floor_violation,
                   (req(l) - sums(l)) / std::max(1.0, req(l)));
    trace.max_floor_violation = std::max(0.0, trace.max_floor_violation);
  }
  trace.duality_gap = std::isfinite(best_feasible)
                          ? last_dual - best_feasible
                          : std::numeric_limits<double>::infinity();
  if (!std::isfinite(trace.min_duality_margin))
    trace.min_duality_margin = 0.0;
  return trace;
}

void MultiTrace::write_csv(std::ostream& out) const {
  const int k = static_cast<int>(rates.size());
  std::vector<int> header_ids{-1};  // force a header before the first row
  for (const MultiRow& r : rows) {
    if (r.harvester_ids != header_ids) {
      header_ids = r.harvester_ids;
      out << "phase,z";
      for (int id : header_ids) out << ",lambda_" << id + 1;
      for (int id : header_ids)
        for (int i = 1; i <= k; ++i) out << ",beta_" << id + 1 << '_' << i;
      for (int i = 1; i <= k; ++i) out << ",rate_" << i;
      out << ",sum_rate,feasible\n";
    }
    out << r.phase << ',' << r.iteration;
    for (int l = 0; l < r.prices.size(); ++l)
      out << ',' << io::format_double(r.prices(l));
    for (int l = 0; l < r.contributions.rows(); ++l)
      for (int i = 0; i < k; ++i)
        out << ',' << io::format_double(r.contributions(l, i));
    for (int i = 0; i < k; ++i) out << ',' << io::format_double(r.rates(i));
    out << ',' << io::format_double(r.sum_rate) << ','
        << (r.feasible ? 1 : 0) << '\n';
  }
}

nlohmann::json MultiTrace::summary() const {
  nlohmann::json j;
  std::vector<double> p(prices.data(), prices.data() + prices.size());
  j["prices"] = p;
  j["harvester_ids"] = harvester_ids;
  std::vector<double> r(rates.data(), rates.data() + rates.size());
  j["final_rates"] = r;
  j["final_sum_rate"] = sum_rate;
  j["converged"] = converged;
  j["max_floor_violation"] = max_floor_violation;
  j["duality_gap"] = duality_gap;
  j["min_duality_margin"] = min_duality_margin;
  j["phases"] = phases;
  return j;
}

}  // namespace harvestgame::multih
