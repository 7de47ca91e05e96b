#include "harvestgame/noncoop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "harvestgame/io.hpp"
#include "harvestgame/waterfill.hpp"

namespace harvestgame::noncoop {

std::string to_string(Classification c) {
  switch (c) {
    case Classification::Running: return "running";
    case Classification::ConvergedNE: return "converged-NE";
    case Classification::Cycling: return "cycling";
    case Classification::Stalled: return "stalled";
  }
  return "?";
}

double estimate_gamma_i(int i, const std::vector<TransmitCovariance>& q,
                        const ChannelSet& channels, double gamma,
                        GammaMode mode) {
  if (mode == GammaMode::Oracle) {
    double others = 0.0;
    for (int k = 0; k < channels.num_users(); ++k)
      if (k != i)
        others += harvested_power_single(q[k], channels.harvester(0, k));
    return gamma - others;
  }
  // Protocol path: player i goes silent for one measurement interval and
  // the harvester feeds back the remaining total. Same number, measured.
  std::vector<TransmitCovariance> muted = q;
  muted[i] = zero_covariance(channels.tx_antennas(), q[i].power_budget);
  return gamma - harvested_power(muted, channels, 0);
}

TransmitCovariance best_response(int i,
                                 const std::vector<TransmitCovariance>& q,
                                 const ChannelSet& channels,
                                 const ScenarioConfig& config,
                                 BestResponseInfo* info) {
  const double gamma_i = estimate_gamma_i(i, q, channels, config.gamma(0),
                                          config.gamma_mode);
  const Matrix r = interference_plus_noise(i, q, channels);
  const Vector& g = channels.harvester(0, i);
  const waterfill::WhitenedProblem problem =
      waterfill::whiten(channels.user(i), r, g, config.power(i), gamma_i);
  BestResponseInfo local;
  local.gamma_i = gamma_i;
  if (!waterfill::is_feasible(problem)) {
    local.infeasible = true;
    if (info) *info = local;
    switch (config.infeasible_policy) {
      case InfeasiblePolicy::KeepPrevious: return q[i];
      case InfeasiblePolicy::Zero:
        return zero_covariance(channels.tx_antennas(), config.power(i));
      case InfeasiblePolicy::EnergyBeam:
        return energy_beam_covariance(g, config.power(i));
    }
  }
  const waterfill::WaterfillSolution sol =
      waterfill::solve(problem, config.tolerances);
  local.used_fallback = sol.used_fallback;
  local.kkt_residual = sol.kkt_residual;
  if (info) *info = local;
  return waterfill::assemble_covariance(problem, sol);
}

std::vector<TransmitCovariance> initial_strategies(
    const ChannelSet& channels, const ScenarioConfig& config) {
  const int k = channels.num_users();
  const int mt = channels.tx_antennas();
  std::vector<TransmitCovariance> q;
  q.reserve(k);
  for (int i = 0; i < k; ++i) {
    switch (config.initial_strategy) {
      case InitialStrategy::Uniform:
        q.push_back(uniform_covariance(mt, config.power(i)));
        break;
      case InitialStrategy::Zero:
        q.push_back(zero_covariance(mt, config.power(i)));
        break;
      case InitialStrategy::RandomPsd: {
        // per-user substream so the draw does not depend on K
        GaussianSource rng(config.seed ^
                           (0x9e3779b97f4a7c15ULL * (i + 1)));
        Matrix a(mt, mt);
        for (int r = 0; r < mt; ++r)
          for (int c = 0; c < mt; ++c) a(r, c) = rng.standard_complex();
        Matrix m = a * a.adjoint();
        m *= config.power(i) / m.trace().real();
        q.push_back({detail::hermitize(m), config.power(i)});
        break;
      }
    }
  }
  return q;
}

namespace {

GameState snapshot_of(const std::vector<TransmitCovariance>& q,
                      const ChannelSet& channels, int iteration) {
  GameState s;
  s.covariances = q;
  s.iteration = iteration;
  s.rates.resize(channels.num_users());
  for (int i = 0; i < channels.num_users(); ++i)
    s.rates(i) = info_rate(i, q, channels);
  s.energy_total = harvested_power(q, channels, 0);
  return s;
}

double profile_distance(const std::vector<TransmitCovariance>& a,
                        const std::vector<TransmitCovariance>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d = std::max(d, (a[i].matrix - b[i].matrix).norm());
  return d;
}

}  // namespace

GameTrace run_dynamics(const ChannelSet& channels,
                       const ScenarioConfig& config) {
  config.validate();
  const int k = channels.num_users();
  std::vector<int> order = config.update_order;
  if (order.empty()) {
    order.resize(k);
    for (int i = 0; i < k; ++i) order[i] = i;
  }
  std::vector<TransmitCovariance> q = initial_strategies(channels, config);
  GameTrace trace;
  trace.snapshots.push_back(snapshot_of(q, channels, 0));

  for (int round = 1; round <= config.tolerances.max_iters; ++round) {
    const std::vector<TransmitCovariance> before = q;
    for (int idx : order) {
      BestResponseInfo info;
      q[idx] = best_response(idx, q, channels, config, &info);
      GameState s = snapshot_of(q, channels, round);
      UpdateRecord rec;
      rec.iteration = round;
      rec.user = idx;
      rec.rates = s.rates;
      rec.sum_rate = s.rates.sum();
      rec.energy_total = s.energy_total;
      rec.gamma_i = info.gamma_i;
      rec.infeasible = info.infeasible;
      rec.used_fallback = info.used_fallback;
      trace.updates.push_back(std::move(rec));
      trace.snapshots.push_back(std::move(s));
    }
    trace.rounds = round;

    if (profile_distance(q, before) < config.tolerances.eq_tol) {
      trace.classification = Classification::ConvergedNE;
      break;
    }
    // The update map is deterministic, so a true cycle revisits the same
    // profile essentially exactly while still moving round to round.
    // Period 1 is excluded: that is convergence, caught above.
    const int window = std::min(config.cycle_window, round);
    for (int back = 2; back <= window; ++back) {
      const auto& old = trace.snapshots[static_cast<std::size_t>(round - back) * k]
                            .covariances;
      if (profile_distance(q, old) < config.tolerances.eq_tol) {
        trace.classification = Classification::Cycling;
        trace.cycle_period = back;
        break;
      }
    }
    if (trace.classification == Classification::Cycling) break;
    if (round == config.tolerances.max_iters)
      trace.classification = Classification::Stalled;
  }
  if (trace.classification == Classification::Running)
    trace.classification = Classification::Stalled;  // zero-round budget
  trace.snapshots.back().classification = trace.classification;
  return trace;
}

double verify_equilibrium(const std::vector<TransmitCovariance>& q,
                          const ChannelSet& channels,
                          const ScenarioConfig& config) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < channels.num_users(); ++i) {
    const double current = info_rate(i, q, channels);
    std::vector<TransmitCovariance> probe = q;
    probe[i] = best_response(i, q, channels, config);
    worst = std::max(worst, info_rate(i, probe, channels) - current);
  }
  return worst;
}

void GameTrace::write_csv(std::ostream& out) const {
  const int k = updates.empty()
                    ? static_cast<int>(snapshots.front().rates.size())
                    : static_cast<int>(updates.front().rates.size());
  out << "iter,user";
  for (int i = 1; i <= k; ++i) out << ",rate_" << i;
  out << ",sum_rate,energy_total,gamma_i,classification\n";
  for (std::size_t u = 0; u < updates.size(); ++u) {
    const UpdateRecord& r = updates[u];
    out << r.iteration << ',' << r.user + 1;
    for (int i = 0; i < k; ++i) out << ',' << io::format_double(r.rates(i));
    out << ',' << io::format_double(r.sum_rate) << ','
        << io::format_double(r.energy_total) << ','
        << io::format_double(r.gamma_i) << ','
        << (u + 1 == updates.size() ? to_string(classification)
                                    : to_string(Classification::Running))
        << '\n';
  }
}

nlohmann::json GameTrace::summary() const {
  const GameState& last = snapshots.back();
  int infeasible_updates = 0, fallback_updates = 0;
  for (const auto& u : updates) {
    infeasible_updates += u.infeasible ? 1 : 0;
    fallback_updates += u.used_fallback ? 1 : 0;
  }
  nlohmann::json j;
  j["classification"] = to_string(classification);
  j["rounds"] = rounds;
  j["cycle_period"] = cycle_period;
  std::vector<double> rates(last.rates.data(),
                            last.rates.data() + last.rates.size());
  j["final_rates"] = rates;
  j["final_sum_rate"] = last.rates.sum();
  j["energy_total"] = last.energy_total;
  j["infeasible_updates"] = infeasible_updates;
  j["fallback_updates"] = fallback_updates;
  return j;
}

}  // namespace harvestgame::noncoop
