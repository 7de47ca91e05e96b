#pragma once

#include <iosfwd>
#include <json.hpp>
#include <vector>

#include "harvestgame/coop.hpp"

namespace harvestgame::multih {

/// Which harvesters are currently active and what they require. Harvester
/// ids index the channel set; joins and leaves flip the active flag without
/// touching the channels.
class HarvesterRegistry {
 public:
  HarvesterRegistry() = default;
  HarvesterRegistry(const RealVector& requirements);  // active iff > 0

  int capacity() const { return static_cast<int>(active_.size()); }
  bool is_active(int l) const { return active_.at(l); }
  double requirement(int l) const { return gamma_.at(l); }
  std::vector<int> active_ids() const;
  int active_count() const;

  void join(int l, double gamma);
  void leave(int l);

 private:
  std::vector<bool> active_;
  std::vector<double> gamma_;
};

struct MultiRow {
  int phase = 0;       // restarts caused by registry events
  int iteration = 0;   // subgradient step within the phase
  RealVector prices;   // one per active harvester, registry order
  RealMatrix contributions;  // active harvesters x users
  RealVector rates;
  double sum_rate = 0.0;
  bool feasible = false;  // all active floors met at this iterate
  std::vector<int> harvester_ids;
};

struct MultiTrace {
  std::vector<MultiRow> rows;
  std::vector<TransmitCovariance> covariances;
  RealVector rates;
  double sum_rate = 0.0;
  RealVector prices;
  std::vector<int> harvester_ids;
  bool converged = false;
  double max_floor_violation = 0.0;  // relative, at the returned strategies
  double duality_gap = 0.0;          // dual value minus best feasible primal
  // min over all iterates of (dual value - best feasible primal so far);
  // nonnegative up to local-solver accuracy by weak duality
  double min_duality_margin = 0.0;
  int phases = 0;

  void write_csv(std::ostream& out) const;
  nlohmann::json summary() const;
};

/// Player strategy under a vector of energy prices, one per active
/// harvester: reward matrix sum_l price_l g_{l,i} g_{l,i}^H.
TransmitCovariance solve_local_multi(int i, const RealVector& prices,
                                     const std::vector<int>& harvester_ids,
                                     const coop::ExpansionPoint& at,
                                     const ChannelSet& channels,
                                     double power_limit,
                                     const Tolerances& tol,
                                     const Matrix* warm_start = nullptr);

/// One projected subgradient move on the prices. Step size a / (b + z)
/// with a = 1 / max requirement; violated floors push their price up.
RealVector subgradient_step(const RealVector& prices,
                            const RealVector& contribution_sums,
                            const RealVector& requirements, int z,
                            double step_b);

/// Dual decomposition across several harvesters: subgradient phase until
/// the prices settle, then per-price bisection polish until every active
/// floor is met tightly. Registry events restart the subgradient phase
/// from the current strategies.
MultiTrace run_multi(const ChannelSet& channels, HarvesterRegistry registry,
                     const ScenarioConfig& config);

}  // namespace harvestgame::multih
