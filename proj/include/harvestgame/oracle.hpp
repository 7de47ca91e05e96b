#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "harvestgame/channel.hpp"
#include "harvestgame/types.hpp"

// Reference solvers used to validate the closed-form and decomposition
// modules. Everything here is deliberately slow and structure-free: no
// water levels, no active sets, no shared code with the production solvers
// beyond the basic channel model.
namespace harvestgame::oracle {

struct PgOptions {
  double grad_tol = 1e-8;  // projected-gradient-map norm
  int max_iters = 20000;
  double initial_step = 2.0;
};

struct PgResult {
  Matrix q;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projection of a Hermitian matrix onto {X PSD, tr X <= cap} by shifting
/// eigenvalues: bisection on the shift, not the sort-based scheme the
/// production code uses.
Matrix project_psd_trace(const Matrix& x, double cap);

/// Maximizes a concave objective over {Q PSD, tr Q <= trace_cap} by
/// projected gradient ascent with Armijo backtracking.
PgResult pg_maximize(int dim, const std::function<double(const Matrix&)>& f,
                     const std::function<Matrix(const Matrix&)>& grad,
                     double trace_cap, const PgOptions& opts = PgOptions{},
                     const Matrix* warm_start = nullptr);

/// Diagonal-power reference for the whitened single-link problem: dual
/// bisection on the energy price around pg_maximize runs. Returns the
/// per-mode powers of the best floor-respecting point found.
struct DiagonalReference {
  RealVector q;
  double objective = 0.0;
  double nu2 = 0.0;
  bool feasible = true;
};
DiagonalReference solve_single_link_reference(const RealVector& sigma_sq,
                                              const RealVector& g_sq,
                                              double power_limit,
                                              double energy_floor,
                                              double tol = 1e-9);

/// Grid search over simplex-constrained mode powers, 3 modes or fewer.
/// Returns the best grid point meeting the floor; objective is exact at
/// that point, so it lower-bounds the optimum by O(step).
RealVector brute_force_single_link(const RealVector& sigma_sq,
                                   const RealVector& g_sq,
                                   double power_limit, double energy_floor,
                                   double step);

/// Central finite differences of f along the canonical Hermitian basis.
Matrix fd_gradient(const std::function<double(const Matrix&)>& f,
                   const Matrix& q, double eps = 0.0);

/// Nearest point in {x >= 0, sum x <= cap} by KKT pattern enumeration
/// (every subset of active bounds, n <= 20). Independent of the sort-based
/// and bisection-based projections used elsewhere.
RealVector simplex_project_enumerate(const RealVector& y, double cap);

/// Training-phase emulation for learning |g_hat|^2 at the transmitter:
/// unit-rank probes along each column of the precoder at full power, energy
/// feedback with additive Gaussian noise of the given standard deviation.
/// Returns the estimated |g_hat_m|^2 values.
RealVector estimate_energy_profile(const Vector& g, const Matrix& precoder,
                                   double probe_power, double noise_sd,
                                   std::uint64_t noise_seed);

}  // namespace harvestgame::oracle
