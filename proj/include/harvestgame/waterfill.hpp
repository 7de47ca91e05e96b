#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "harvestgame/types.hpp"

namespace harvestgame::waterfill {

/// Single-link problem after noise whitening and SVD: maximize
/// sum_m ln(1 + sigma_sq_m q_m) over q >= 0 subject to sum_m q_m <=
/// power_limit and sum_m g_hat_sq_m q_m >= energy_floor. Mode gains are in
/// descending order; g_hat is the harvester channel rotated into the same
/// basis, so assemble_covariance can map a solution back to antenna space.
struct WhitenedProblem {
  RealVector sigma_sq;
  RealVector g_hat_sq;
  double power_limit = 0.0;
  double energy_floor = 0.0;
  Matrix precoder;  // V, tx_antennas x tx_antennas unitary
  Vector g_hat;
};

struct WaterfillSolution {
  RealVector q_hat;
  double nu1 = 0.0;             // price of transmit power
  double nu2 = 0.0;             // reward per unit harvested power
  std::vector<int> active_set;  // modes carrying power, ascending
  double kkt_residual = 0.0;
  bool feasible = true;         // floor attainable under the power budget
  bool used_fallback = false;   // closed form rejected, dual bisection used
  bool multiple_roots = false;  // more than one admissible price root seen
};

/// Whitens against an interference covariance r (Hermitian, PD) and rotates
/// by the right singular basis of r^{-1/2} h.
WhitenedProblem whiten(const Matrix& h, const Matrix& r, const Vector& g,
                       double power_limit, double energy_floor);

/// The floor is attainable iff max_m g_hat_sq_m * power_limit covers it.
bool is_feasible(const WhitenedProblem& p);

/// Closed-form solver. Classical water-filling when the floor is already
/// met, otherwise an active-set pass over the two-constraint tight system;
/// a monotone two-level dual bisection backs the closed form up whenever a
/// root is rejected (used_fallback reports that).
WaterfillSolution solve(const WhitenedProblem& p,
                        const Tolerances& tol = Tolerances{});

/// Data of the tight (both constraints at equality) system restricted to a
/// candidate active set.
struct ActiveSystem {
  std::vector<int> modes;
  RealVector sigma_sq;
  RealVector g_sq;
  double p_prime = 0.0;      // power_limit + sum_m 1/sigma_sq_m
  double gamma_prime = 0.0;  // energy_floor + sum_m g_sq_m/sigma_sq_m
  RealVector alpha;          // gamma_prime - g_sq_m * p_prime
};

ActiveSystem tight_system(const WhitenedProblem& p,
                          const std::vector<int>& modes);

struct PriceRoot {
  bool found = false;
  double nu2 = 0.0;
  bool multiple = false;  // several admissible roots, best one returned
};

/// Positive root of sum_m 1/(|M| + nu2 * alpha_m) = 1 subject to every
/// water level staying positive. Closed forms for |M| <= 3, companion
/// matrix roots above that; among admissible roots the one with the larger
/// objective wins.
PriceRoot energy_price_root(const ActiveSystem& sys);

/// |M| = 2 closed form.
double energy_price_root_pair(double alpha0, double alpha1);
/// |M| = 3 closed form (larger branch of the quadratic).
double energy_price_root_triple(double alpha0, double alpha1, double alpha2);

/// Rotates mode powers back to antenna space: V diag(q_hat) V^H.
TransmitCovariance assemble_covariance(const WhitenedProblem& p,
                                       const WaterfillSolution& s);

double objective(const WhitenedProblem& p, const RealVector& q_hat);
double energy(const WhitenedProblem& p, const RealVector& q_hat);

/// Scaled worst violation over primal feasibility, dual feasibility,
/// complementary slackness and per-mode stationarity.
double kkt_residual(const WhitenedProblem& p, const RealVector& q_hat,
                    double nu1, double nu2);

/// Least-squares (nu1, nu2) for a primal point obtained elsewhere, clamped
/// to be dual feasible. Lets kkt_residual score solutions that come without
/// multipliers.
std::pair<double, double> fit_dual_variables(const WhitenedProblem& p,
                                             const RealVector& q_hat);

}  // namespace harvestgame::waterfill
