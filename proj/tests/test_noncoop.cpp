#include <doctest.h>

#include <sstream>

#include "harvestgame/noncoop.hpp"
#include "harvestgame/waterfill.hpp"

using namespace harvestgame;

namespace {

ScenarioConfig make_config(int users, int antennas, double gamma,
                           std::uint64_t seed) {
  ScenarioConfig c;
  c.num_users = users;
  c.num_harvesters = 1;
  c.rx_antennas = antennas;
  c.tx_antennas = antennas;
  c.power_limits = RealVector::Constant(users, 8.0);
  c.energy_requirements = RealVector::Constant(1, gamma);
  c.seed = seed;
  c.validate();
  return c;
}

TransmitCovariance random_psd(int dim, double trace_target,
                              std::uint64_t seed) {
  GaussianSource rng(seed);
  Matrix a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) a(r, c) = rng.standard_complex();
  Matrix q = a * a.adjoint();
  q *= trace_target / q.trace().real();
  return {q, trace_target};
}

}  // namespace

TEST_SUITE("noncoop") {

TEST_CASE("oracle and protocol floor shares agree") {
  const auto cfg = make_config(3, 4, 20.0, 9);
  const auto cs = generate_channels(3, 1, 4, 4, 9);
  std::vector<TransmitCovariance> q{random_psd(4, 8.0, 1),
                                    random_psd(4, 8.0, 2),
                                    random_psd(4, 8.0, 3)};
  for (int i = 0; i < 3; ++i) {
    const double a =
        noncoop::estimate_gamma_i(i, q, cs, 20.0, GammaMode::Oracle);
    const double b =
        noncoop::estimate_gamma_i(i, q, cs, 20.0, GammaMode::Protocol);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("single player converges to its single-link optimum") {
  const auto cs = generate_channels(1, 1, 4, 4, 33);
  auto p = waterfill::whiten(cs.user(0), Matrix::Identity(4, 4),
                             cs.harvester(0, 0), 8.0, 0.0);
  const double gamma = 0.7 * p.g_hat_sq.maxCoeff() * 8.0;  // binding floor
  p.energy_floor = gamma;
  const auto s = waterfill::solve(p);
  REQUIRE(s.feasible);

  const auto cfg = make_config(1, 4, gamma, 33);
  const auto trace = noncoop::run_dynamics(cs, cfg);
  CHECK(trace.classification == noncoop::Classification::ConvergedNE);
  CHECK(trace.final_state().rates(0) ==
        doctest::Approx(waterfill::objective(p, s.q_hat)).epsilon(1e-9));
  CHECK(trace.final_state().energy_total >= gamma * (1.0 - 1e-9));
}

TEST_CASE("converged states pass the equilibrium check") {
  const auto cfg = make_config(3, 8, 50.0, 102);
  const auto cs = generate_channels(3, 1, 8, 8, 102);
  const auto trace = noncoop::run_dynamics(cs, cfg);
  REQUIRE(trace.classification == noncoop::Classification::ConvergedNE);
  CHECK(noncoop::verify_equilibrium(trace.final_state().covariances, cs, cfg) <=
        1e-6);
  CHECK(trace.final_state().energy_total >= 50.0 * (1.0 - 1e-9));
}

TEST_CASE("zero floor and vanishing floor land on the same point") {
  const auto cs = generate_channels(2, 1, 4, 4, 44);
  const auto a = noncoop::run_dynamics(cs, make_config(2, 4, 0.0, 44));
  const auto b = noncoop::run_dynamics(cs, make_config(2, 4, 1e-9, 44));
  REQUIRE(a.classification == noncoop::Classification::ConvergedNE);
  REQUIRE(b.classification == noncoop::Classification::ConvergedNE);
  CHECK((a.final_state().rates - b.final_state().rates).cwiseAbs().maxCoeff() <
        1e-6);
}

TEST_CASE("trace shape and csv schema") {
  const auto cfg = make_config(3, 4, 10.0, 7);
  const auto cs = generate_channels(3, 1, 4, 4, 7);
  const auto trace = noncoop::run_dynamics(cs, cfg);
  CHECK(trace.snapshots.size() ==
        static_cast<std::size_t>(trace.rounds) * 3 + 1);
  CHECK(trace.updates.size() == trace.snapshots.size() - 1);

  std::ostringstream out;
  trace.write_csv(out);
  const std::string csv = out.str();
  CHECK(csv.rfind("iter,user,rate_1,rate_2,rate_3,sum_rate,energy_total,"
                  "gamma_i,classification\n",
                  0) == 0);
  CHECK(csv.find("running") != std::string::npos);
  CHECK(csv.find(to_string(trace.classification)) != std::string::npos);

  // reruns are byte-identical
  std::ostringstream out2;
  noncoop::run_dynamics(cs, cfg).write_csv(out2);
  CHECK(csv == out2.str());
}

TEST_CASE("update order override is honored") {
  auto cfg = make_config(3, 4, 5.0, 11);
  cfg.update_order = {2, 0, 1};
  const auto cs = generate_channels(3, 1, 4, 4, 11);
  const auto trace = noncoop::run_dynamics(cs, cfg);
  REQUIRE(trace.updates.size() >= 3);
  CHECK(trace.updates[0].user == 2);
  CHECK(trace.updates[1].user == 0);
  CHECK(trace.updates[2].user == 1);
}

TEST_CASE("policies differ when the floor is out of reach") {
  // Gamma far beyond anything attainable: beaming keeps pushing energy,
  // giving up shuts the network down.
  const auto cs = generate_channels(2, 1, 4, 4, 21);
  auto beam = make_config(2, 4, 1e6, 21);
  beam.infeasible_policy = InfeasiblePolicy::EnergyBeam;
  const auto bt = noncoop::run_dynamics(cs, beam);
  CHECK(bt.final_state().energy_total > 0.0);

  auto quit = make_config(2, 4, 1e6, 21);
  quit.infeasible_policy = InfeasiblePolicy::Zero;
  const auto qt = noncoop::run_dynamics(cs, quit);
  CHECK(qt.classification == noncoop::Classification::ConvergedNE);
  CHECK(qt.final_state().energy_total == doctest::Approx(0.0));
  CHECK(qt.final_state().rates.maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("burden trap: infeasible updates can persist at a met floor") {
  // seed 1 at floor 50: one user stays infeasible and beams, the others
  // carry the floor — converged, floor met, many infeasible updates
  const auto cfg = make_config(3, 8, 50.0, 1);
  const auto cs = generate_channels(3, 1, 8, 8, 1);
  const auto trace = noncoop::run_dynamics(cs, cfg);
  REQUIRE(trace.classification == noncoop::Classification::ConvergedNE);
  int infeasible = 0;
  for (const auto& u : trace.updates) infeasible += u.infeasible ? 1 : 0;
  CHECK(infeasible > 0);
  CHECK(trace.final_state().energy_total >= 50.0 * (1.0 - 1e-9));
}

TEST_CASE("summary carries the classification and rate tally") {
  const auto cfg = make_config(2, 4, 8.0, 70);
  const auto cs = generate_channels(2, 1, 4, 4, 70);
  const auto trace = noncoop::run_dynamics(cs, cfg);
  const auto j = trace.summary();
  CHECK(j.at("classification").get<std::string>() ==
        to_string(trace.classification));
  CHECK(j.at("rounds").get<int>() == trace.rounds);
  CHECK(j.at("final_sum_rate").get<double>() ==
        doctest::Approx(trace.final_state().rates.sum()));
}

}  // TEST_SUITE
