#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace harvestgame {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Numeric knobs shared by all solvers. Defaults are the values used by the
/// shipped presets; everything is overridable from the scenario config.
struct Tolerances {
  double eq_tol = 1e-8;     // strategy-change / constraint-equality tolerance
  double lambda_tol = 1e-6; // dual bracket width (scaled by initial bracket)
  double grad_tol = 1e-7;   // projected-gradient-map norm
  int max_iters = 500;      // game rounds / dual iterations
};

enum class InfeasiblePolicy { KeepPrevious, Zero, EnergyBeam };
enum class GammaMode { Oracle, Protocol };
enum class InitialStrategy { Uniform, Zero, RandomPsd };

std::string to_string(InfeasiblePolicy p);
std::string to_string(GammaMode m);
std::string to_string(InitialStrategy s);
InfeasiblePolicy infeasible_policy_from_string(const std::string& s);
GammaMode gamma_mode_from_string(const std::string& s);
InitialStrategy initial_strategy_from_string(const std::string& s);

/// A transmit strategy: Hermitian PSD matrix with a trace budget.
struct TransmitCovariance {
  Matrix matrix;
  double power_budget = 0.0;

  static constexpr double kHermitianTol = 1e-10;
  static constexpr double kPsdTol = 1e-9;
  static constexpr double kTraceTol = 1e-8;

  TransmitCovariance() = default;
  TransmitCovariance(Matrix m, double budget)
      : matrix(std::move(m)), power_budget(budget) {}

  double trace() const { return matrix.trace().real(); }

  /// Empty string when all invariants hold, otherwise a description of the
  /// first violated one.
  std::string check() const;
  void validate() const {
    if (auto msg = check(); !msg.empty())
      throw std::invalid_argument("TransmitCovariance: " + msg);
  }
};

/// Zero strategy of the given size.
TransmitCovariance zero_covariance(int dim, double budget);

/// Uniform power over all antennas: (P / M_t) * I.
TransmitCovariance uniform_covariance(int dim, double budget);

/// Rank-one beam spending the whole budget along direction g.
TransmitCovariance energy_beam_covariance(const Vector& g, double budget);

namespace detail {

inline Matrix hermitize(const Matrix& a) { return 0.5 * (a + a.adjoint()); }

/// Inverse square root of a Hermitian positive definite matrix.
/// Throws std::domain_error when the smallest eigenvalue is not positive.
Matrix inverse_sqrt(const Matrix& r);

/// sum_k log1p(lambda_k) over the eigenvalues of the Hermitian PSD matrix
/// h_hat * q * h_hat^H; negative eigenvalue noise is clamped at zero.
double whitened_log_det_rate(const Matrix& h_hat, const Matrix& q);

}  // namespace detail

}  // namespace harvestgame
