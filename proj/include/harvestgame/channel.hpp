#pragma once

#include <cstdint>
#include <json.hpp>
#include <random>
#include <vector>

#include "harvestgame/types.hpp"

namespace harvestgame {

/// Deterministic standard-normal source: mt19937_64 plus an explicit
/// Box-Muller transform, so the stream is identical across platforms and
/// standard-library versions.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  /// One real N(0, 1) draw.
  double standard_normal();

  /// One complex CN(0, 1) draw: (z0 + i z1) / sqrt(2), unit second moment.
  Complex standard_complex();

 private:
  /// Uniform in (0, 1]; never returns 0 so log() below is safe.
  double uniform_open();
  /// Uniform in [0, 1).
  double uniform_half_open();

  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// All propagation coefficients of one network realization, immutable after
/// construction. Direct channels are M_r x M_t, cross channels likewise
/// (receiver index first), harvester channels are length-M_t vectors from
/// each transmitter to each harvester.
class ChannelSet {
 public:
  ChannelSet(int num_users, int num_harvesters, int rx_antennas,
             int tx_antennas, std::uint64_t seed);

  int num_users() const { return num_users_; }
  int num_harvesters() const { return num_harvesters_; }
  int rx_antennas() const { return rx_antennas_; }
  int tx_antennas() const { return tx_antennas_; }
  std::uint64_t seed() const { return seed_; }

  const Matrix& user(int i) const;
  /// Channel from transmitter j into receiver i, i != j.
  const Matrix& cross(int i, int j) const;
  const Vector& harvester(int l, int i) const;

  Matrix& mutable_user(int i);
  Matrix& mutable_cross(int i, int j);
  Vector& mutable_harvester(int l, int i);

  nlohmann::json to_json() const;
  static ChannelSet from_json(const nlohmann::json& j);

  bool operator==(const ChannelSet& other) const;

 private:
  int cross_index(int i, int j) const;

  int num_users_;
  int num_harvesters_;
  int rx_antennas_;
  int tx_antennas_;
  std::uint64_t seed_;
  std::vector<Matrix> user_;       // K entries
  std::vector<Matrix> cross_;      // K*K entries, diagonal unused (zero)
  std::vector<Vector> harvester_;  // L*K entries, (l, i) lexicographic
};

/// Draws every coefficient i.i.d. CN(0, 1) from a single seeded stream.
/// Fill order (direct channels by user index, then cross channels by
/// (receiver, transmitter) lexicographic, then harvester vectors by
/// (harvester, transmitter) lexicographic; matrices row-major) is part of
/// the contract: same arguments, same bits.
ChannelSet generate_channels(int num_users, int num_harvesters,
                             int rx_antennas, int tx_antennas,
                             std::uint64_t seed);

}  // namespace harvestgame
