#include <doctest.h>

#include <string>

#include "harvestgame/channel.hpp"

using namespace harvestgame;

TEST_SUITE("channel") {

TEST_CASE("same seed reproduces the set, different seed does not") {
  const ChannelSet a = generate_channels(3, 2, 4, 4, 7);
  const ChannelSet b = generate_channels(3, 2, 4, 4, 7);
  const ChannelSet c = generate_channels(3, 2, 4, 4, 8);
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("json round trip is exact") {
  const ChannelSet a = generate_channels(2, 2, 3, 5, 99);
  CHECK(ChannelSet::from_json(a.to_json()) == a);
  // through text as well: dump() emits shortest round-trip decimals
  const auto parsed = nlohmann::json::parse(a.to_json().dump());
  CHECK(ChannelSet::from_json(parsed) == a);
}

TEST_CASE("schema errors name the offending field") {
  auto j = generate_channels(2, 1, 2, 2, 1).to_json();
  j.erase("cross_channels");
  try {
    ChannelSet::from_json(j);
    FAIL("missing field accepted");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("cross_channels") != std::string::npos);
  }

  auto bad = generate_channels(2, 1, 2, 2, 1).to_json();
  bad["version"] = "v2";
  CHECK_THROWS_AS(ChannelSet::from_json(bad), std::invalid_argument);
}

TEST_CASE("fill order: users, cross pairs, harvesters, row-major") {
  const int k = 2, l = 1, mr = 2, mt = 2;
  const ChannelSet cs = generate_channels(k, l, mr, mt, 42);
  GaussianSource rng(42);
  for (int i = 0; i < k; ++i)
    for (int r = 0; r < mr; ++r)
      for (int c = 0; c < mt; ++c) CHECK(cs.user(i)(r, c) == rng.standard_complex());
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      for (int r = 0; r < mr; ++r)
        for (int c = 0; c < mt; ++c)
          CHECK(cs.cross(i, j)(r, c) == rng.standard_complex());
    }
  for (int h = 0; h < l; ++h)
    for (int i = 0; i < k; ++i)
      for (int m = 0; m < mt; ++m)
        CHECK(cs.harvester(h, i)(m) == rng.standard_complex());
}

TEST_CASE("complex draws skip the cached real spare") {
  // b's first normal caches a spare; the complex draw must consume a fresh
  // pair, and the spare must survive it.
  GaussianSource a(9), b(9), c(9);
  (void)a.standard_normal();
  (void)a.standard_normal();  // a: two words consumed, no spare left
  (void)b.standard_normal();  // b: two words consumed, spare cached
  const Complex za = a.standard_complex();
  const Complex zb = b.standard_complex();
  CHECK(za == zb);
  (void)c.standard_normal();
  const double spare = c.standard_normal();
  CHECK(b.standard_normal() == spare);
}

TEST_CASE("draw moments look standard complex normal") {
  GaussianSource rng(123);
  const int n = 20000;
  double power = 0.0;
  Complex mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const Complex z = rng.standard_complex();
    power += std::norm(z);
    mean += z;
  }
  power /= n;
  mean /= static_cast<double>(n);
  CHECK(power == doctest::Approx(1.0).epsilon(0.03));
  CHECK(std::abs(mean) < 0.02);
}

TEST_CASE("index guards throw") {
  const ChannelSet cs = generate_channels(2, 1, 2, 2, 3);
  CHECK_THROWS_AS(cs.user(2), std::invalid_argument);
  CHECK_THROWS_AS(cs.cross(0, 0), std::invalid_argument);
  CHECK_THROWS_AS(cs.harvester(1, 0), std::invalid_argument);
}

}  // TEST_SUITE
