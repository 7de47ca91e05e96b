#pragma once

#include <iosfwd>
#include <json.hpp>
#include <vector>

#include "harvestgame/config.hpp"
#include "harvestgame/model.hpp"

namespace harvestgame::noncoop {

enum class Classification { Running, ConvergedNE, Cycling, Stalled };
std::string to_string(Classification c);

/// Network snapshot after a single player update.
struct GameState {
  std::vector<TransmitCovariance> covariances;
  int iteration = 0;  // completed full rounds
  RealVector rates;
  double energy_total = 0.0;
  Classification classification = Classification::Running;
};

/// Per-update bookkeeping for the CSV trace.
struct UpdateRecord {
  int iteration = 0;
  int user = 0;
  RealVector rates;
  double sum_rate = 0.0;
  double energy_total = 0.0;
  double gamma_i = 0.0;      // floor the updating player had to honor
  bool infeasible = false;   // player could not meet its floor alone
  bool used_fallback = false;
};

struct GameTrace {
  std::vector<GameState> snapshots;  // initial state plus one per update
  std::vector<UpdateRecord> updates;
  Classification classification = Classification::Running;
  int cycle_period = 0;  // rounds, 0 unless classification == Cycling
  int rounds = 0;

  const GameState& final_state() const { return snapshots.back(); }
  void write_csv(std::ostream& out) const;
  nlohmann::json summary() const;
};

/// Share of the harvesting floor player i is responsible for, given
/// everyone else's strategy. Oracle mode reads the other players'
/// contributions directly; protocol mode measures total harvested power
/// with player i silenced and subtracts. Identical value, different
/// information flow.
double estimate_gamma_i(int i, const std::vector<TransmitCovariance>& q,
                        const ChannelSet& channels, double gamma,
                        GammaMode mode);

struct BestResponseInfo {
  double gamma_i = 0.0;
  bool infeasible = false;
  bool used_fallback = false;
  double kkt_residual = 0.0;
};

/// Single-user optimal strategy against fixed opponents, honoring the
/// residual floor. On an unattainable floor the configured fallback policy
/// decides the returned strategy.
TransmitCovariance best_response(int i,
                                 const std::vector<TransmitCovariance>& q,
                                 const ChannelSet& channels,
                                 const ScenarioConfig& config,
                                 BestResponseInfo* info = nullptr);

/// Initial strategy profile per the configured scheme.
std::vector<TransmitCovariance> initial_strategies(
    const ChannelSet& channels, const ScenarioConfig& config);

/// Sequential best-response dynamics until strategies settle, a cycle is
/// detected, or the round budget runs out.
GameTrace run_dynamics(const ChannelSet& channels,
                       const ScenarioConfig& config);

/// Largest unilateral rate improvement any player could still realize.
/// Nonpositive (up to solver accuracy) certifies an equilibrium.
double verify_equilibrium(const std::vector<TransmitCovariance>& q,
                          const ChannelSet& channels,
                          const ScenarioConfig& config);

}  // namespace harvestgame::noncoop
