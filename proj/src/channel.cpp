#include "harvestgame/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace harvestgame {

namespace {

constexpr double kTwoPow53 = 9007199254740992.0;  // 2^53

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("ChannelSet: " + what);
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      rows.push_back({m(r, c).real(), m(r, c).imag()});
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, int rows, int cols,
                        const std::string& field) {
  require(j.is_array() && static_cast<int>(j.size()) == rows * cols,
          "field '" + field + "' must hold " + std::to_string(rows * cols) +
              " [re, im] pairs");
  Matrix m(rows, cols);
  int k = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c, ++k) {
      const auto& e = j.at(k);
      require(e.is_array() && e.size() == 2 && e.at(0).is_number() &&
                  e.at(1).is_number(),
              "entry " + std::to_string(k) + " of '" + field +
                  "' is not a [re, im] pair");
      m(r, c) = Complex(e.at(0).get<double>(), e.at(1).get<double>());
    }
  return m;
}

}  // namespace

double GaussianSource::uniform_open() {
  return static_cast<double>((engine_() >> 11) + 1) / kTwoPow53;
}

double GaussianSource::uniform_half_open() {
  return static_cast<double>(engine_() >> 11) / kTwoPow53;
}

double GaussianSource::standard_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform_half_open();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

Complex GaussianSource::standard_complex() {
  // Uses a fresh Box-Muller pair regardless of a cached spare, so complex
  // streams do not depend on interleaved real draws.
  const double u1 = uniform_open();
  const double u2 = uniform_half_open();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(phi) / std::numbers::sqrt2,
          r * std::sin(phi) / std::numbers::sqrt2};
}

ChannelSet::ChannelSet(int num_users, int num_harvesters, int rx_antennas,
                       int tx_antennas, std::uint64_t seed)
    : num_users_(num_users),
      num_harvesters_(num_harvesters),
      rx_antennas_(rx_antennas),
      tx_antennas_(tx_antennas),
      seed_(seed) {
  require(num_users >= 1, "need at least one user");
  require(num_harvesters >= 1, "need at least one harvester");
  require(rx_antennas >= 1 && tx_antennas >= 1, "antenna counts must be >= 1");
  user_.assign(num_users, Matrix::Zero(rx_antennas, tx_antennas));
  cross_.assign(static_cast<std::size_t>(num_users) * num_users,
                Matrix::Zero(rx_antennas, tx_antennas));
  harvester_.assign(static_cast<std::size_t>(num_harvesters) * num_users,
                    Vector::Zero(tx_antennas));
}

int ChannelSet::cross_index(int i, int j) const {
  require(i >= 0 && i < num_users_ && j >= 0 && j < num_users_,
          "user index out of range");
  require(i != j, "cross channel needs two distinct users");
  return i * num_users_ + j;
}

const Matrix& ChannelSet::user(int i) const {
  require(i >= 0 && i < num_users_, "user index out of range");
  return user_[i];
}

const Matrix& ChannelSet::cross(int i, int j) const {
  return cross_[cross_index(i, j)];
}

const Vector& ChannelSet::harvester(int l, int i) const {
  require(l >= 0 && l < num_harvesters_, "harvester index out of range");
  require(i >= 0 && i < num_users_, "user index out of range");
  return harvester_[static_cast<std::size_t>(l) * num_users_ + i];
}

Matrix& ChannelSet::mutable_user(int i) {
  require(i >= 0 && i < num_users_, "user index out of range");
  return user_[i];
}

Matrix& ChannelSet::mutable_cross(int i, int j) {
  return cross_[cross_index(i, j)];
}

Vector& ChannelSet::mutable_harvester(int l, int i) {
  require(l >= 0 && l < num_harvesters_, "harvester index out of range");
  require(i >= 0 && i < num_users_, "user index out of range");
  return harvester_[static_cast<std::size_t>(l) * num_users_ + i];
}

nlohmann::json ChannelSet::to_json() const {
  nlohmann::json j;
  j["version"] = "v1";
  j["seed"] = seed_;
  j["num_users"] = num_users_;
  j["num_harvesters"] = num_harvesters_;
  j["rx_antennas"] = rx_antennas_;
  j["tx_antennas"] = tx_antennas_;
  nlohmann::json users = nlohmann::json::array();
  for (const auto& h : user_) users.push_back(matrix_to_json(h));
  j["user_channels"] = std::move(users);
  nlohmann::json cross = nlohmann::json::array();
  for (int i = 0; i < num_users_; ++i)
    for (int jj = 0; jj < num_users_; ++jj) {
      if (i == jj) continue;
      cross.push_back({{"rx", i},
                       {"tx", jj},
                       {"entries", matrix_to_json(cross_[i * num_users_ + jj])}});
    }
  j["cross_channels"] = std::move(cross);
  nlohmann::json harv = nlohmann::json::array();
  for (int l = 0; l < num_harvesters_; ++l) {
    nlohmann::json per_user = nlohmann::json::array();
    for (int i = 0; i < num_users_; ++i)
      per_user.push_back(matrix_to_json(
          harvester_[static_cast<std::size_t>(l) * num_users_ + i]));
    harv.push_back(std::move(per_user));
  }
  j["harvester_channels"] = std::move(harv);
  return j;
}

ChannelSet ChannelSet::from_json(const nlohmann::json& j) {
  for (const char* field :
       {"version", "seed", "num_users", "num_harvesters", "rx_antennas",
        "tx_antennas", "user_channels", "cross_channels",
        "harvester_channels"})
    require(j.contains(field), std::string("missing field '") + field + "'");
  require(j.at("version").is_string() &&
              j.at("version").get<std::string>() == "v1",
          "unsupported version (want \"v1\")");
  const int k = j.at("num_users").get<int>();
  const int l = j.at("num_harvesters").get<int>();
  const int mr = j.at("rx_antennas").get<int>();
  const int mt = j.at("tx_antennas").get<int>();
  ChannelSet cs(k, l, mr, mt, j.at("seed").get<std::uint64_t>());

  const auto& users = j.at("user_channels");
  require(users.is_array() && static_cast<int>(users.size()) == k,
          "'user_channels' must hold one matrix per user");
  for (int i = 0; i < k; ++i)
    cs.user_[i] = matrix_from_json(users.at(i), mr, mt, "user_channels");

  const auto& cross = j.at("cross_channels");
  require(cross.is_array() && static_cast<int>(cross.size()) == k * (k - 1),
          "'cross_channels' must hold one matrix per ordered user pair");
  std::vector<bool> seen(static_cast<std::size_t>(k) * k, false);
  for (const auto& e : cross) {
    require(e.contains("rx") && e.contains("tx") && e.contains("entries"),
            "cross channel entries need 'rx', 'tx' and 'entries'");
    const int rx = e.at("rx").get<int>();
    const int tx = e.at("tx").get<int>();
    const int idx = cs.cross_index(rx, tx);
    require(!seen[idx], "duplicate cross channel");
    seen[idx] = true;
    cs.cross_[idx] = matrix_from_json(e.at("entries"), mr, mt,
                                      "cross_channels");
  }

  const auto& harv = j.at("harvester_channels");
  require(harv.is_array() && static_cast<int>(harv.size()) == l,
          "'harvester_channels' must hold one list per harvester");
  for (int h = 0; h < l; ++h) {
    const auto& per_user = harv.at(h);
    require(per_user.is_array() && static_cast<int>(per_user.size()) == k,
            "'harvester_channels' lists must hold one vector per user");
    for (int i = 0; i < k; ++i) {
      Matrix col = matrix_from_json(per_user.at(i), mt, 1,
                                    "harvester_channels");
      cs.harvester_[static_cast<std::size_t>(h) * k + i] = col.col(0);
    }
  }
  return cs;
}

bool ChannelSet::operator==(const ChannelSet& other) const {
  if (num_users_ != other.num_users_ ||
      num_harvesters_ != other.num_harvesters_ ||
      rx_antennas_ != other.rx_antennas_ ||
      tx_antennas_ != other.tx_antennas_)
    return false;
  for (std::size_t i = 0; i < user_.size(); ++i)
    if (user_[i] != other.user_[i]) return false;
  for (std::size_t i = 0; i < cross_.size(); ++i)
    if (cross_[i] != other.cross_[i]) return false;
  for (std::size_t i = 0; i < harvester_.size(); ++i)
    if (harvester_[i] != other.harvester_[i]) return false;
  return true;
}

ChannelSet generate_channels(int num_users, int num_harvesters,
                             int rx_antennas, int tx_antennas,
                             std::uint64_t seed) {
  ChannelSet cs(num_users, num_harvesters, rx_antennas, tx_antennas, seed);
  GaussianSource rng(seed);
  auto fill = [&rng](Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        m(r, c) = rng.standard_complex();
  };
  for (int i = 0; i < num_users; ++i) fill(cs.mutable_user(i));
  for (int i = 0; i < num_users; ++i)
    for (int j = 0; j < num_users; ++j)
      if (i != j) fill(cs.mutable_cross(i, j));
  for (int l = 0; l < num_harvesters; ++l)
    for (int i = 0; i < num_users; ++i) {
      Vector& g = cs.mutable_harvester(l, i);
      for (Eigen::Index m = 0; m < g.size(); ++m)
        g(m) = rng.standard_complex();
    }
  return cs;
}

}  // namespace harvestgame
