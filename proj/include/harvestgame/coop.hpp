#pragma once

#include <iosfwd>
#include <json.hpp>
#include <vector>

#include "harvestgame/config.hpp"
#include "harvestgame/model.hpp"

namespace harvestgame::coop {

/// Fixed operating point the concave surrogate is built around, with the
/// matrices every player needs precomputed: r_tilde is the interference
/// seen at that point, taxes[i] collects the marginal damage player i does
/// to everyone else, h_hat[i] whitens the own channel against r_tilde[i].
struct ExpansionPoint {
  std::vector<TransmitCovariance> q_tilde;
  std::vector<Matrix> r_tilde;
  std::vector<Matrix> sensitivity;  // A_i, PSD
  std::vector<Matrix> taxes;        // B_i = sum_{j != i} H_ji^H A_j H_ji
  std::vector<Matrix> h_hat;        // r_tilde^{-1/2} H_ii
  bool any_fallback = false;
};

/// Message traffic of the in-process protocol, so runs can report how much
/// coordination the scheme needs.
struct MessageLog {
  long cross_channel = 0;  // H_ji handed to player i
  long sensitivity = 0;    // A_j broadcasts
  long contribution = 0;   // beta_i broadcasts
  long total() const { return cross_channel + sensitivity + contribution; }
};

/// Starting strategy for one player: single-link solve against bare noise
/// with an equal share of the floor; energy beam when that share is out of
/// reach.
TransmitCovariance expansion_seed(int i, const ChannelSet& channels,
                                  double power_limit, double floor_share,
                                  bool* used_fallback = nullptr);

ExpansionPoint build_expansion(const ChannelSet& channels,
                               std::vector<TransmitCovariance> q_tilde,
                               MessageLog* log = nullptr);

/// Concave surrogate of player i's rate when the interferers sit at q.
/// Exact at q == q_tilde, first-order tight nearby.
double approx_rate(int i, const Matrix& q_i,
                   const std::vector<TransmitCovariance>& q,
                   const ExpansionPoint& at, const ChannelSet& channels);

/// approx own rate minus the interference tax: the quantity whose network
/// sum the bargaining maximizes.
double utility(int i, const Matrix& q_i, const ExpansionPoint& at);

struct LocalSolveStats {
  int iterations = 0;
  bool converged = false;
  double grad_map_norm = 0.0;
};

/// Player i's utility maximizer for a given energy price: projected
/// gradient ascent on utility + price * own harvested contribution over the
/// trace-capped PSD cone.
TransmitCovariance solve_local(int i, double price, const ExpansionPoint& at,
                               const ChannelSet& channels, double power_limit,
                               const Tolerances& tol,
                               const Matrix* warm_start = nullptr,
                               LocalSolveStats* stats = nullptr);

/// Like solve_local but with an arbitrary Hermitian PSD reward matrix in
/// place of price * g g^H; shared by the multi-harvester extension.
TransmitCovariance solve_local_reward(int i, const Matrix& reward,
                                      const ExpansionPoint& at,
                                      double power_limit,
                                      const Tolerances& tol,
                                      const Matrix* warm_start = nullptr,
                                      LocalSolveStats* stats = nullptr);

struct BargainRow {
  int round = 0;
  int iteration = 0;  // bisection step within the round, probes included
  double price = 0.0;
  RealVector contributions;  // beta_i
  double sum_contributions = 0.0;
  RealVector rates;          // true rates at the current strategies
  double sum_rate = 0.0;
  long messages = 0;         // cumulative
};

struct BargainResult {
  double price = 0.0;
  std::vector<TransmitCovariance> covariances;
  RealVector contributions;
  bool converged = false;       // bracket collapsed under lambda_tol
  bool bracket_failed = false;  // floor unreachable even at huge prices
  bool monotone_violation = false;
  int bisection_iters = 0;
  std::vector<BargainRow> rows;
};

/// Price bisection: every player runs the identical bracket update on the
/// broadcast contribution sum, so the price sequence needs no coordinator.
/// The returned strategies are the ones from the floor-respecting end of
/// the final bracket.
BargainResult bargain(const ChannelSet& channels, const ExpansionPoint& at,
                      const ScenarioConfig& config, MessageLog* log = nullptr,
                      int round_index = 0);

struct CoopTrace {
  std::vector<BargainRow> rows;  // all rounds concatenated
  std::vector<TransmitCovariance> covariances;
  RealVector rates;
  double sum_rate = 0.0;
  double price = 0.0;
  double energy_total = 0.0;
  bool converged = false;
  bool bracket_failed = false;
  MessageLog messages;
  int rounds = 0;

  void write_csv(std::ostream& out) const;
  nlohmann::json summary() const;
};

/// Full scheme: seed an expansion point, bargain, move the expansion point
/// to the bargained strategies, repeat for the configured number of rounds.
CoopTrace run_bargaining(const ChannelSet& channels,
                         const ScenarioConfig& config);

}  // namespace harvestgame::coop
