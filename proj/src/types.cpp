#include "harvestgame/types.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace harvestgame {

std::string to_string(InfeasiblePolicy p) {
  switch (p) {
    case InfeasiblePolicy::KeepPrevious: return "keep-previous";
    case InfeasiblePolicy::Zero: return "zero";
    case InfeasiblePolicy::EnergyBeam: return "energy-beam";
  }
  return "?";
}

std::string to_string(GammaMode m) {
  return m == GammaMode::Oracle ? "oracle" : "protocol";
}

std::string to_string(InitialStrategy s) {
  switch (s) {
    case InitialStrategy::Uniform: return "uniform";
    case InitialStrategy::Zero: return "zero";
    case InitialStrategy::RandomPsd: return "random-psd";
  }
  return "?";
}

InfeasiblePolicy infeasible_policy_from_string(const std::string& s) {
  if (s == "keep-previous") return InfeasiblePolicy::KeepPrevious;
  if (s == "zero") return InfeasiblePolicy::Zero;
  if (s == "energy-beam") return InfeasiblePolicy::EnergyBeam;
  throw std::invalid_argument("unknown infeasible_policy '" + s + "'");
}

GammaMode gamma_mode_from_string(const std::string& s) {
  if (s == "oracle") return GammaMode::Oracle;
  if (s == "protocol") return GammaMode::Protocol;
  throw std::invalid_argument("unknown gamma_mode '" + s + "'");
}

InitialStrategy initial_strategy_from_string(const std::string& s) {
  if (s == "uniform") return InitialStrategy::Uniform;
  if (s == "zero") return InitialStrategy::Zero;
  if (s == "random-psd") return InitialStrategy::RandomPsd;
  throw std::invalid_argument("unknown initial_strategy '" + s + "'");
}

std::string TransmitCovariance::check() const {
  if (matrix.rows() != matrix.cols()) return "matrix is not square";
  if (matrix.rows() == 0) return "matrix is empty";
  const double herm = (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kHermitianTol) {
    std::ostringstream os;
    os << "not Hermitian (max asymmetry " << herm << ")";
    return os.str();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitize(matrix),
                                           Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -kPsdTol) {
    std::ostringstream os;
    os << "not PSD (min eigenvalue " << min_eig << ")";
    return os.str();
  }
  if (trace() > power_budget + kTraceTol) {
    std::ostringstream os;
    os << "trace " << trace() << " exceeds budget " << power_budget;
    return os.str();
  }
  return {};
}

TransmitCovariance zero_covariance(int dim, double budget) {
  return {Matrix::Zero(dim, dim), budget};
}

TransmitCovariance uniform_covariance(int dim, double budget) {
  return {Matrix::Identity(dim, dim) * (budget / dim), budget};
}

TransmitCovariance energy_beam_covariance(const Vector& g, double budget) {
  const double n2 = g.squaredNorm();
  if (n2 <= 0.0)
    return zero_covariance(static_cast<int>(g.size()), budget);
  Matrix q = (budget / n2) * (g * g.adjoint());
  return {detail::hermitize(q), budget};
}

namespace detail {

Matrix inverse_sqrt(const Matrix& r) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(r));
  const RealVector& d = es.eigenvalues();
  if (d.minCoeff() <= 0.0)
    throw std::domain_error("inverse_sqrt: matrix is not positive definite");
  RealVector w = d.cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * w.asDiagonal() *
         es.eigenvectors().adjoint();
}

double whitened_log_det_rate(const Matrix& h_hat, const Matrix& q) {
  const Matrix w = hermitize(h_hat * q * h_hat.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(w, Eigen::EigenvaluesOnly);
  double rate = 0.0;
  for (int k = 0; k < es.eigenvalues().size(); ++k)
    rate += std::log1p(std::max(0.0, es.eigenvalues()(k)));
  return rate;
}

}  // namespace detail

}  // namespace harvestgame
