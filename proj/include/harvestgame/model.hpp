#pragma once

#include <vector>

#include "harvestgame/channel.hpp"
#include "harvestgame/types.hpp"

namespace harvestgame {

/// Interference-plus-noise covariance seen by receiver i:
/// I + sum_{j != i} H_ij Q_j H_ij^H. Noise power is 1 by convention.
Matrix interference_plus_noise(int i,
                               const std::vector<TransmitCovariance>& q,
                               const ChannelSet& channels);

/// Achievable rate of link i in nats, treating all interference as noise:
/// ln det(I + R_i^{-1} H_ii Q_i H_ii^H).
double info_rate(int i, const std::vector<TransmitCovariance>& q,
                 const ChannelSet& channels);

/// ln det(I + R^{-1} H Q H^H) for an explicit interference covariance.
double info_rate_given(const Matrix& h, const Matrix& q_i, const Matrix& r);

/// Power collected by harvester l: sum_i g_{l,i}^H Q_i g_{l,i}.
/// Real and nonnegative up to roundoff; returned unclamped.
double harvested_power(const std::vector<TransmitCovariance>& q,
                       const ChannelSet& channels, int l = 0);

/// Contribution of a single transmitter to harvester l.
double harvested_power_single(const TransmitCovariance& q, const Vector& g);

}  // namespace harvestgame
