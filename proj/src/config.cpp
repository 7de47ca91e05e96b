#include "harvestgame/config.hpp"

#include <cmath>
#include <stdexcept>

namespace harvestgame {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("ScenarioConfig: " + what);
}

RealVector vector_field(const nlohmann::json& j, const std::string& name,
                        int expected) {
  const auto& f = j.at(name);
  if (f.is_number()) return RealVector::Constant(expected, f.get<double>());
  require(f.is_array() && static_cast<int>(f.size()) == expected,
          "field '" + name + "' must be a scalar or an array of length " +
              std::to_string(expected));
  RealVector v(expected);
  for (int k = 0; k < expected; ++k) {
    require(f.at(k).is_number(), "field '" + name + "' has a non-numeric entry");
    v(k) = f.at(k).get<double>();
  }
  return v;
}

}  // namespace

void ScenarioConfig::validate() const {
  require(num_users >= 1, "num_users must be >= 1");
  require(num_harvesters >= 1, "num_harvesters must be >= 1");
  require(rx_antennas >= 1, "rx_antennas must be >= 1");
  require(tx_antennas >= 1, "tx_antennas must be >= 1");
  require(power_limits.size() == num_users,
          "power_limits must have one entry per user");
  require(energy_requirements.size() == num_harvesters,
          "energy_requirements must have one entry per harvester");
  for (int i = 0; i < num_users; ++i)
    require(power_limits(i) > 0.0, "power limits must be positive");
  for (int l = 0; l < num_harvesters; ++l)
    require(energy_requirements(l) >= 0.0,
            "energy requirements must be nonnegative");
  require(noise_power == 1.0, "noise_power is fixed at 1");
  require(tolerances.eq_tol > 0.0 && tolerances.lambda_tol > 0.0 &&
              tolerances.grad_tol > 0.0,
          "tolerances must be positive");
  require(tolerances.max_iters >= 1, "max_iters must be >= 1");
  require(cycle_window >= 1, "cycle_window must be >= 1");
  require(bargain_outer_rounds >= 1, "bargain_outer_rounds must be >= 1");
  require(bargain_max_bisections >= 1, "bargain_max_bisections must be >= 1");
  require(subgradient_max_iters >= 1, "subgradient_max_iters must be >= 1");
  require(subgradient_settle >= 1, "subgradient_settle must be >= 1");
  require(subgradient_step_b >= 0.0, "subgradient_step_b must be >= 0");
  if (!update_order.empty()) {
    require(static_cast<int>(update_order.size()) == num_users,
            "update_order must list every user exactly once");
    std::vector<bool> seen(num_users, false);
    for (int u : update_order) {
      require(u >= 0 && u < num_users, "update_order entry out of range");
      require(!seen[u], "update_order repeats a user");
      seen[u] = true;
    }
  }
  for (const auto& e : events) {
    require(e.iter >= 0, "event iter must be >= 0");
    require(e.harvester_id >= 0 && e.harvester_id < num_harvesters,
            "event harvester_id out of range");
    if (e.join) require(e.gamma > 0.0, "join event needs gamma > 0");
  }
}

nlohmann::json ScenarioConfig::to_json() const {
  nlohmann::json j;
  j["num_users"] = num_users;
  j["num_harvesters"] = num_harvesters;
  j["rx_antennas"] = rx_antennas;
  j["tx_antennas"] = tx_antennas;
  j["power_limits"] = std::vector<double>(
      power_limits.data(), power_limits.data() + power_limits.size());
  j["energy_requirements"] = std::vector<double>(
      energy_requirements.data(),
      energy_requirements.data() + energy_requirements.size());
  j["noise_power"] = noise_power;
  j["seed"] = seed;
  j["tolerances"] = {{"eq_tol", tolerances.eq_tol},
                     {"lambda_tol", tolerances.lambda_tol},
                     {"grad_tol", tolerances.grad_tol},
                     {"max_iters", tolerances.max_iters}};
  j["infeasible_policy"] = to_string(infeasible_policy);
  j["gamma_mode"] = to_string(gamma_mode);
  j["initial_strategy"] = to_string(initial_strategy);
  if (!update_order.empty()) j["update_order"] = update_order;
  j["cycle_window"] = cycle_window;
  j["bargaining"] = {{"lambda_tol", tolerances.lambda_tol},
                     {"max_bisection", bargain_max_bisections},
                     {"outer_rounds", bargain_outer_rounds}};
  j["subgradient"] = {{"max_iters", subgradient_max_iters},
                      {"settle", subgradient_settle},
                      {"step_b", subgradient_step_b}};
  if (!events.empty()) {
    nlohmann::json ev = nlohmann::json::array();
    for (const auto& e : events)
      ev.push_back({{"iter", e.iter},
                    {"harvester_id", e.harvester_id},
                    {"action", e.join ? "join" : "leave"},
                    {"gamma", e.gamma}});
    j["events"] = std::move(ev);
  }
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
  require(j.is_object(), "config must be a JSON object");
  ScenarioConfig c;
  if (j.contains("preset"))
    c = preset(j.at("preset").get<std::string>());

  auto geti = [&](const char* name, int& slot) {
    if (j.contains(name)) slot = j.at(name).get<int>();
  };
  geti("num_users", c.num_users);
  geti("num_harvesters", c.num_harvesters);
  geti("rx_antennas", c.rx_antennas);
  geti("tx_antennas", c.tx_antennas);

  if (j.contains("power_limits"))
    c.power_limits = vector_field(j, "power_limits", c.num_users);
  else if (c.power_limits.size() != c.num_users)
    c.power_limits = RealVector::Constant(c.num_users, 8.0);

  if (j.contains("energy_requirements"))
    c.energy_requirements =
        vector_field(j, "energy_requirements", c.num_harvesters);
  else if (j.contains("gamma"))
    c.energy_requirements =
        RealVector::Constant(c.num_harvesters, j.at("gamma").get<double>());
  else if (c.energy_requirements.size() != c.num_harvesters)
    c.energy_requirements = RealVector::Constant(c.num_harvesters, 0.0);

  if (j.contains("noise_power"))
    c.noise_power = j.at("noise_power").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    if (t.contains("eq_tol")) c.tolerances.eq_tol = t.at("eq_tol").get<double>();
    if (t.contains("lambda_tol"))
      c.tolerances.lambda_tol = t.at("lambda_tol").get<double>();
    if (t.contains("grad_tol"))
      c.tolerances.grad_tol = t.at("grad_tol").get<double>();
    if (t.contains("max_iters"))
      c.tolerances.max_iters = t.at("max_iters").get<int>();
  }
  if (j.contains("infeasible_policy"))
    c.infeasible_policy = infeasible_policy_from_string(
        j.at("infeasible_policy").get<std::string>());
  if (j.contains("gamma_mode"))
    c.gamma_mode = gamma_mode_from_string(j.at("gamma_mode").get<std::string>());
  if (j.contains("initial_strategy"))
    c.initial_strategy =
        initial_strategy_from_string(j.at("initial_strategy").get<std::string>());
  if (j.contains("update_order"))
    c.update_order = j.at("update_order").get<std::vector<int>>();
  if (j.contains("cycle_window"))
    c.cycle_window = j.at("cycle_window").get<int>();

  if (j.contains("bargaining")) {
    const auto& b = j.at("bargaining");
    if (b.contains("lambda_tol"))
      c.tolerances.lambda_tol = b.at("lambda_tol").get<double>();
    if (b.contains("max_bisection"))
      c.bargain_max_bisections = b.at("max_bisection").get<int>();
    if (b.contains("outer_rounds"))
      c.bargain_outer_rounds = b.at("outer_rounds").get<int>();
  }
  if (j.contains("subgradient")) {
    const auto& s = j.at("subgradient");
    if (s.contains("max_iters"))
      c.subgradient_max_iters = s.at("max_iters").get<int>();
    if (s.contains("settle")) c.subgradient_settle = s.at("settle").get<int>();
    if (s.contains("step_b"))
      c.subgradient_step_b = s.at("step_b").get<double>();
  }
  if (j.contains("events")) {
    for (const auto& e : j.at("events")) {
      HarvestEvent ev;
      ev.iter = e.at("iter").get<int>();
      ev.harvester_id = e.at("harvester_id").get<int>();
      const std::string action = e.at("action").get<std::string>();
      require(action == "join" || action == "leave",
              "event action must be 'join' or 'leave'");
      ev.join = action == "join";
      if (e.contains("gamma")) ev.gamma = e.at("gamma").get<double>();
      c.events.push_back(ev);
    }
  }
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::preset(const std::string& name) {
  ScenarioConfig c;
  if (name == "paper-K3") {
    c.num_users = 3;
    c.num_harvesters = 1;
    c.rx_antennas = 8;
    c.tx_antennas = 8;
    c.power_limits = RealVector::Constant(3, 8.0);
    c.energy_requirements = RealVector::Constant(1, 70.0);
    c.seed = 1;
    return c;
  }
  std::string known;
  for (const auto& n : preset_names()) known += " '" + n + "'";
  throw std::invalid_argument("unknown preset '" + name + "'; known:" + known);
}

std::vector<std::string> ScenarioConfig::preset_names() { return {"paper-K3"}; }

}  // namespace harvestgame
