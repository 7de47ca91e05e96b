#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "harvestgame/types.hpp"

namespace harvestgame {

/// One change to the harvester population during a multi-harvester run.
struct HarvestEvent {
  int iter = 0;
  int harvester_id = 0;
  bool join = true;     // false means leave
  double gamma = 0.0;   // requirement brought by a joining harvester
};

/// Full description of a simulation scenario. Everything a run needs apart
/// from the channel realization itself lives here.
struct ScenarioConfig {
  int num_users = 3;
  int num_harvesters = 1;
  int rx_antennas = 8;
  int tx_antennas = 8;

  RealVector power_limits;         // per user, size num_users
  RealVector energy_requirements;  // per harvester, size num_harvesters
  double noise_power = 1.0;        // receiver noise is the unit of power
  std::uint64_t seed = 1;

  Tolerances tolerances;
  InfeasiblePolicy infeasible_policy = InfeasiblePolicy::EnergyBeam;
  GammaMode gamma_mode = GammaMode::Oracle;
  InitialStrategy initial_strategy = InitialStrategy::Uniform;
  std::vector<int> update_order;   // empty: round-robin 0..K-1
  int cycle_window = 20;           // states compared when sniffing cycles

  int bargain_outer_rounds = 5;    // expansion-point refreshes
  int bargain_max_bisections = 60;

  int subgradient_max_iters = 2000;
  int subgradient_settle = 5;      // consecutive small dual moves to stop
  double subgradient_step_b = 10.0;

  std::vector<HarvestEvent> events;

  double power(int i) const { return power_limits(i); }
  double gamma(int l = 0) const { return energy_requirements(l); }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  nlohmann::json to_json() const;
  static ScenarioConfig from_json(const nlohmann::json& j);
  static ScenarioConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

}  // namespace harvestgame
