#include "harvestgame/model.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace harvestgame {

namespace {

void check_user(int i, const std::vector<TransmitCovariance>& q,
                const ChannelSet& channels) {
  if (i < 0 || i >= channels.num_users())
    throw std::invalid_argument("user index out of range");
  if (static_cast<int>(q.size()) != channels.num_users())
    throw std::invalid_argument("need one covariance per user");
}

}  // namespace

Matrix interference_plus_noise(int i,
                               const std::vector<TransmitCovariance>& q,
                               const ChannelSet& channels) {
  check_user(i, q, channels);
  Matrix r = Matrix::Identity(channels.rx_antennas(), channels.rx_antennas());
  for (int j = 0; j < channels.num_users(); ++j) {
    if (j == i) continue;
    const Matrix& h = channels.cross(i, j);
    if (h.cols() != q[j].matrix.rows())
      throw std::invalid_argument("covariance size does not match channel");
    r += h * q[j].matrix * h.adjoint();
  }
  return detail::hermitize(r);
}

double info_rate(int i, const std::vector<TransmitCovariance>& q,
                 const ChannelSet& channels) {
  check_user(i, q, channels);
  return info_rate_given(channels.user(i), q[i].matrix,
                         interference_plus_noise(i, q, channels));
}

double info_rate_given(const Matrix& h, const Matrix& q_i, const Matrix& r) {
  if (h.cols() != q_i.rows() || h.rows() != r.rows())
    throw std::invalid_argument("info_rate_given: dimension mismatch");
  const Matrix h_hat = detail::inverse_sqrt(r) * h;
  return detail::whitened_log_det_rate(h_hat, q_i);
}

double harvested_power(const std::vector<TransmitCovariance>& q,
                       const ChannelSet& channels, int l) {
  if (static_cast<int>(q.size()) != channels.num_users())
    throw std::invalid_argument("need one covariance per user");
  double total = 0.0;
  for (int i = 0; i < channels.num_users(); ++i)
    total += harvested_power_single(q[i], channels.harvester(l, i));
  return total;
}

double harvested_power_single(const TransmitCovariance& q, const Vector& g) {
  if (g.size() != q.matrix.rows())
    throw std::invalid_argument("harvester vector size does not match");
  return (g.adjoint() * q.matrix * g)(0, 0).real();
}

}  // namespace harvestgame
