#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "harvestgame/model.hpp"

using namespace harvestgame;

namespace {

TransmitCovariance random_psd(int dim, double trace_target,
                              std::uint64_t seed) {
  GaussianSource rng(seed);
  Matrix a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) a(r, c) = rng.standard_complex();
  Matrix q = a * a.adjoint();
  q *= trace_target / q.trace().real();
  return {q, trace_target};
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("single-user rate equals the bare log det") {
  const ChannelSet cs = generate_channels(1, 1, 4, 4, 11);
  std::vector<TransmitCovariance> q{random_psd(4, 8.0, 21)};
  const Matrix& h = cs.user(0);
  const Matrix inner =
      Matrix::Identity(4, 4) + h * q[0].matrix * h.adjoint();
  Eigen::SelfAdjointEigenSolver<Matrix> es(inner);
  double direct = 0.0;
  for (int m = 0; m < 4; ++m) direct += std::log(es.eigenvalues()(m));
  CHECK(info_rate(0, q, cs) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(info_rate_given(h, q[0].matrix, Matrix::Identity(4, 4)) ==
        doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("zero power means zero rate, power means positive rate") {
  const ChannelSet cs = generate_channels(2, 1, 3, 3, 5);
  std::vector<TransmitCovariance> q{zero_covariance(3, 4.0),
                                    zero_covariance(3, 4.0)};
  CHECK(info_rate(0, q, cs) == 0.0);
  q[0] = uniform_covariance(3, 4.0);
  CHECK(info_rate(0, q, cs) > 0.0);
}

TEST_CASE("interference only hurts") {
  const ChannelSet cs = generate_channels(2, 1, 3, 3, 17);
  std::vector<TransmitCovariance> quiet{uniform_covariance(3, 4.0),
                                        zero_covariance(3, 4.0)};
  std::vector<TransmitCovariance> loud{uniform_covariance(3, 4.0),
                                       uniform_covariance(3, 4.0)};
  CHECK(info_rate(0, quiet, cs) > info_rate(0, loud, cs));
}

TEST_CASE("interference covariance is identity plus PSD") {
  const ChannelSet cs = generate_channels(3, 1, 4, 4, 23);
  std::vector<TransmitCovariance> q{random_psd(4, 8.0, 1),
                                    random_psd(4, 8.0, 2),
                                    random_psd(4, 8.0, 3)};
  const Matrix r = interference_plus_noise(1, q, cs);
  CHECK((r - r.adjoint()).norm() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(r);
  CHECK(es.eigenvalues().minCoeff() >= 1.0 - 1e-12);
}

TEST_CASE("harvested power decomposes over transmitters") {
  const ChannelSet cs = generate_channels(3, 2, 4, 4, 31);
  std::vector<TransmitCovariance> q{random_psd(4, 8.0, 4),
                                    random_psd(4, 8.0, 5),
                                    random_psd(4, 8.0, 6)};
  for (int l = 0; l < 2; ++l) {
    double per = 0.0;
    for (int i = 0; i < 3; ++i)
      per += harvested_power_single(q[i], cs.harvester(l, i));
    CHECK(harvested_power(q, cs, l) == doctest::Approx(per).epsilon(1e-12));
    CHECK(per >= 0.0);
  }
}

}  // TEST_SUITE
