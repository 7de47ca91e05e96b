// Acceptance gate: the headline numerical guarantees of the library, each
// one selectable with --criterion N and reported as exactly one PASS/FAIL
// line. Tolerances and runtime budgets are pinned here, next to the checks
// they gate; the unit suites cover the fine-grained behavior.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "harvestgame/channel.hpp"
#include "harvestgame/cliapp.hpp"
#include "harvestgame/config.hpp"
#include "harvestgame/coop.hpp"
#include "harvestgame/model.hpp"
#include "harvestgame/multiharvester.hpp"
#include "harvestgame/noncoop.hpp"
#include "harvestgame/oracle.hpp"
#include "harvestgame/waterfill.hpp"

namespace fs = std::filesystem;
using namespace harvestgame;

namespace {

struct Failure {
  std::string text;
};

[[noreturn]] void fail(const char* file, int line, const std::string& msg) {
  throw Failure{std::string(file) + ":" + std::to_string(line) + ": " + msg};
}

#define REQUIRE(cond, msg)                        \
  do {                                            \
    if (!(cond)) fail(__FILE__, __LINE__, (msg)); \
  } while (0)

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

Matrix random_matrix(GaussianSource& src, int rows, int cols) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = src.standard_complex();
  return m;
}

Vector random_vector(GaussianSource& src, int n) {
  Vector v(n);
  for (int k = 0; k < n; ++k) v(k) = src.standard_complex();
  return v;
}

Matrix random_psd(GaussianSource& src, int dim, double trace) {
  const Matrix a = random_matrix(src, dim, dim);
  Matrix p = a * a.adjoint();
  p *= trace / p.trace().real();
  return p;
}

// ---------------------------------------------------------------------------
// 1. Closed-form water-filling vs the projected-gradient reference on 200
//    random feasible instances. The closed form must never lose more than
//    1e-6 nats and must satisfy its own KKT system to 1e-6.

waterfill::WhitenedProblem random_single_link(std::uint64_t seed, int dim,
                                              double power,
                                              double floor_frac) {
  GaussianSource src(seed);
  const Matrix h = random_matrix(src, dim, dim);
  const Vector g = random_vector(src, dim);
  waterfill::WhitenedProblem p =
      waterfill::whiten(h, Matrix::Identity(dim, dim), g, power, 0.0);
  p.energy_floor = floor_frac * p.g_hat_sq.maxCoeff() * power;
  return p;
}

void criterion_1() {
  Stopwatch watch;
  constexpr int kInstances = 200;
  constexpr double kGapTol = 1e-6;
  constexpr double kKktTol = 1e-6;
  const std::array<int, 3> dims{2, 4, 8};
  const std::array<double, 3> fracs{0.3, 0.6, 0.9};
  for (int t = 0; t < kInstances; ++t) {
    const auto p = random_single_link(5000 + static_cast<std::uint64_t>(t),
                                      dims[t % 3], 8.0, fracs[(t / 3) % 3]);
    const waterfill::WaterfillSolution sol = waterfill::solve(p);
    REQUIRE(sol.feasible,
            "instance " + std::to_string(t) + " wrongly reported infeasible");
    const double closed = waterfill::objective(p, sol.q_hat);
    const auto ref = oracle::solve_single_link_reference(
        p.sigma_sq, p.g_hat_sq, p.power_limit, p.energy_floor);
    REQUIRE(ref.feasible,
            "oracle found instance " + std::to_string(t) + " infeasible");
    const double gap = ref.objective - closed;
    REQUIRE(gap <= kGapTol, "instance " + std::to_string(t) +
                                ": oracle beats the closed form by " +
                                fmt(gap) + " nats");
    const double resid = waterfill::kkt_residual(p, sol.q_hat, sol.nu1,
                                                 sol.nu2);
    REQUIRE(resid < kKktTol, "instance " + std::to_string(t) +
                                 ": KKT residual " + fmt(resid));
  }
  const double secs = watch.seconds();
  REQUIRE(secs < 30.0,
          "200 instances took " + fmt(secs) + " s against a 30 s budget");
}

// ---------------------------------------------------------------------------
// 2. The two- and three-mode price formulas against an independent
//    polynomial path: expand sum_j prod_{k!=j}(m + x a_k) - prod_k(m + x a_k)
//    by convolution, deflate the identically-zero root at the origin, and
//    solve what remains with the stable quadratic formula.

std::vector<double> poly_mul(const std::vector<double>& p, double c0,
                             double c1) {
  std::vector<double> out(p.size() + 1, 0.0);
  for (std::size_t t = 0; t < p.size(); ++t) {
    out[t] += p[t] * c0;
    out[t + 1] += p[t] * c1;
  }
  return out;
}

std::vector<double> deflated_tight_poly(const RealVector& alpha) {
  const int m = static_cast<int>(alpha.size());
  std::vector<double> full{1.0};
  for (int k = 0; k < m; ++k) full = poly_mul(full, m, alpha(k));
  std::vector<double> lhs(full.size() - 1, 0.0);
  for (int j = 0; j < m; ++j) {
    std::vector<double> part{1.0};
    for (int k = 0; k < m; ++k)
      if (k != j) part = poly_mul(part, m, alpha(k));
    for (std::size_t t = 0; t < part.size(); ++t) lhs[t] += part[t];
  }
  std::vector<double> diff(full.size(), 0.0);
  for (std::size_t t = 0; t < full.size(); ++t)
    diff[t] = full[t] - (t < lhs.size() ? lhs[t] : 0.0);
  // The constant term is m^m - m * m^(m-1) = 0 exactly; drop the x factor.
  return {diff.begin() + 1, diff.end()};
}

waterfill::ActiveSystem random_tight_system(std::uint64_t seed, int m) {
  GaussianSource src(seed);
  RealVector sigma(m), gsq(m);
  for (int k = 0; k < m; ++k) {
    const double z = src.standard_normal();
    sigma(k) = z * z + 0.05;
  }
  std::sort(sigma.data(), sigma.data() + m, std::greater<double>());
  for (int k = 0; k < m; ++k) gsq(k) = std::norm(src.standard_complex());
  const double z = src.standard_normal();
  const double power = 2.0 + std::min(14.0, z * z);
  const double w = src.standard_normal();
  const double frac = 0.1 + 0.8 * (w * w / (1.0 + w * w));

  waterfill::WhitenedProblem p;
  p.sigma_sq = sigma;
  p.g_hat_sq = gsq;
  p.power_limit = power;
  p.energy_floor = frac * gsq.maxCoeff() * power;
  std::vector<int> modes(m);
  for (int k = 0; k < m; ++k) modes[k] = k;
  return waterfill::tight_system(p, modes);
}

void criterion_2() {
  constexpr double kTol = 1e-10;

  int pairs = 0;
  for (std::uint64_t seed = 7000; pairs < 100 && seed < 27000; ++seed) {
    const auto sys = random_tight_system(seed, 2);
    if (sys.alpha.cwiseAbs().minCoeff() < 1e-9) continue;
    const auto poly = deflated_tight_poly(sys.alpha);  // c0 + c1 x
    if (std::abs(poly[1]) < 1e-12) continue;
    const double root = -poly[0] / poly[1];
    if (!std::isfinite(root) || root <= 0.0) continue;
    const double lib =
        waterfill::energy_price_root_pair(sys.alpha(0), sys.alpha(1));
    REQUIRE(std::abs(lib - root) <= kTol * (1.0 + std::abs(root)),
            "pair seed " + std::to_string(seed) + ": formula " + fmt(lib) +
                " vs polynomial " + fmt(root));
    ++pairs;
  }
  REQUIRE(pairs == 100,
          "only " + std::to_string(pairs) + " valid two-mode instances");

  int triples = 0;
  for (std::uint64_t seed = 40000; triples < 100 && seed < 60000; ++seed) {
    const auto sys = random_tight_system(seed, 3);
    if (sys.alpha.cwiseAbs().minCoeff() < 1e-9) continue;
    const auto poly = deflated_tight_poly(sys.alpha);  // c0 + c1 x + c2 x^2
    const double c0 = poly[0], c1 = poly[1], c2 = poly[2];
    if (std::abs(c2) < 1e-12) continue;
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    // Skip near-degenerate discriminants; both paths lose accuracy there.
    if (disc <= 1e-12 * std::max(c1 * c1, std::abs(4.0 * c2 * c0))) continue;
    const double sq = std::sqrt(disc);
    const double qq = -0.5 * (c1 + std::copysign(sq, c1));
    const double r0 = qq / c2;
    const double r1 = c0 / qq;
    if (!(r0 > 0.0) && !(r1 > 0.0)) continue;

    const double plus = waterfill::energy_price_root_triple(
        sys.alpha(0), sys.alpha(1), sys.alpha(2));
    const double inv_sum = 1.0 / sys.alpha(0) + 1.0 / sys.alpha(1) +
                           1.0 / sys.alpha(2);
    const double minus = -2.0 * inv_sum - plus;
    for (const double branch : {plus, minus}) {
      const double dist =
          std::min(std::abs(branch - r0), std::abs(branch - r1));
      REQUIRE(dist <= kTol * (1.0 + std::abs(branch)),
              "triple seed " + std::to_string(seed) + ": branch " +
                  fmt(branch) + " misses both polynomial roots (" + fmt(r0) +
                  ", " + fmt(r1) + ")");
    }
    ++triples;
  }
  REQUIRE(triples == 100,
          "only " + std::to_string(triples) + " valid three-mode instances");
}

// ---------------------------------------------------------------------------
// 3. The concave surrogate is exact at its expansion point and its error
//    decays quadratically: halving the perturbation divides the error by
//    four (ratio within [3.5, 4.5] over eps in {0.1, 0.05, 0.025}).

void criterion_3() {
  constexpr int kWanted = 20;
  int accepted = 0;
  for (std::uint64_t seed = 400; accepted < kWanted && seed < 600; ++seed) {
    const ChannelSet channels = generate_channels(3, 1, 4, 4, seed);
    std::vector<TransmitCovariance> tilde;
    for (int i = 0; i < 3; ++i) {
      TransmitCovariance q = uniform_covariance(4, 8.0);
      q.matrix *= 0.5;  // headroom so the perturbed profiles stay PSD
      tilde.push_back(q);
    }
    const coop::ExpansionPoint at = coop::build_expansion(channels, tilde);

    for (int i = 0; i < 3; ++i) {
      const double exact = info_rate(i, tilde, channels);
      const double approx =
          coop::approx_rate(i, tilde[i].matrix, tilde, at, channels);
      REQUIRE(std::abs(exact - approx) < 1e-10,
              "seed " + std::to_string(seed) + " user " + std::to_string(i) +
                  ": surrogate off by " + fmt(exact - approx) +
                  " at the expansion point");
    }

    GaussianSource dir_src(seed * 97 + 13);
    std::vector<Matrix> dir;
    for (int i = 0; i < 3; ++i) dir.push_back(random_psd(dir_src, 4, 1.0));

    const auto error_at = [&](double eps) {
      std::vector<TransmitCovariance> prof = tilde;
      for (int i = 0; i < 3; ++i) prof[i].matrix += eps * dir[i];
      double err = 0.0;
      for (int i = 0; i < 3; ++i)
        err += std::abs(info_rate(i, prof, channels) -
                        coop::approx_rate(i, prof[i].matrix, prof, at,
                                          channels));
      return err;
    };
    const double e1 = error_at(0.1);
    const double e2 = error_at(0.05);
    const double e3 = error_at(0.025);
    if (e3 < 1e-12) continue;  // nothing to measure on this draw
    const double r12 = e1 / e2;
    const double r23 = e2 / e3;
    REQUIRE(r12 >= 3.5 && r12 <= 4.5,
            "seed " + std::to_string(seed) + ": error ratio e(0.1)/e(0.05) = " +
                fmt(r12));
    REQUIRE(r23 >= 3.5 && r23 <= 4.5,
            "seed " + std::to_string(seed) +
                ": error ratio e(0.05)/e(0.025) = " + fmt(r23));
    ++accepted;
  }
  REQUIRE(accepted == kWanted,
          "only " + std::to_string(accepted) + " usable instances");
}

// ---------------------------------------------------------------------------
// 4. Analytic gradient of the priced local utility against central finite
//    differences on 50 random instances.

void criterion_4() {
  constexpr double kTol = 1e-5;
  for (int t = 0; t < 50; ++t) {
    const int users = 2 + (t & 1);
    const int dim = (t % 4 < 2) ? 2 : 4;
    const std::uint64_t seed = 500 + static_cast<std::uint64_t>(t);
    const ChannelSet channels = generate_channels(users, 1, dim, dim, seed);

    std::vector<TransmitCovariance> tilde;
    for (int i = 0; i < users; ++i)
      tilde.push_back(uniform_covariance(dim, 8.0));
    const coop::ExpansionPoint at = coop::build_expansion(channels, tilde);

    const int i = t % users;
    const double price = 0.5 * (t % 5);
    const Vector g = channels.harvester(0, i);
    GaussianSource src(seed * 131 + 7);
    const Matrix q = random_psd(src, dim, 0.7 * 8.0);

    const auto f = [&](const Matrix& x) {
      return coop::utility(i, x, at) +
             price * (g.adjoint() * x * g).real()(0, 0);
    };
    const Matrix& h_hat = at.h_hat[i];
    const Matrix inner =
        (Matrix::Identity(dim, dim) + h_hat * q * h_hat.adjoint()).inverse();
    const Matrix analytic = detail::hermitize(
        h_hat.adjoint() * inner * h_hat - at.taxes[i] +
        price * (g * g.adjoint()));
    const Matrix fd = oracle::fd_gradient(f, q);
    const double rel = (fd - analytic).norm() / analytic.norm();
    REQUIRE(rel < kTol, "instance " + std::to_string(t) +
                            ": gradient mismatch, relative error " + fmt(rel));
  }
}

// ---------------------------------------------------------------------------
// 5. Best-response dynamics across the floor sweep {50,...,90} on twenty
//    seeded K=3, M=8 networks: mostly-converged at 50, monotonically harder
//    as the floor rises, every claimed equilibrium certified, mean sum rate
//    non-increasing.

ScenarioConfig ensemble_config(std::uint64_t seed, double gamma) {
  ScenarioConfig cfg = ScenarioConfig::preset("paper-K3");
  cfg.seed = seed;
  cfg.energy_requirements(0) = gamma;
  return cfg;
}

constexpr std::uint64_t kEnsembleFirstSeed = 102;
constexpr int kEnsembleSize = 20;

void criterion_5() {
  Stopwatch watch;
  const std::array<double, 5> gammas{50, 60, 70, 80, 90};
  int prev_nonconverged = -1;
  double prev_mean = 0.0;
  int first_nonconverged = -1;
  int last_nonconverged = -1;
  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    const double gamma = gammas[gi];
    int converged = 0;
    double mean = 0.0;
    for (int s = 0; s < kEnsembleSize; ++s) {
      const std::uint64_t seed = kEnsembleFirstSeed + s;
      const ScenarioConfig cfg = ensemble_config(seed, gamma);
      const ChannelSet channels = generate_channels(3, 1, 8, 8, seed);
      const noncoop::GameTrace trace = noncoop::run_dynamics(channels, cfg);
      mean += trace.final_state().rates.sum();
      if (trace.classification == noncoop::Classification::ConvergedNE) {
        ++converged;
        const double gap = noncoop::verify_equilibrium(
            trace.final_state().covariances, channels, cfg);
        REQUIRE(gap <= 1e-6, "seed " + std::to_string(seed) + " gamma " +
                                 fmt(gamma) +
                                 ": claimed equilibrium leaves a unilateral "
                                 "gain of " +
                                 fmt(gap));
      }
    }
    mean /= kEnsembleSize;
    const int nonconverged = kEnsembleSize - converged;
    if (gi == 0) {
      REQUIRE(converged > kEnsembleSize / 2,
              "only " + std::to_string(converged) +
                  "/20 converged at the lowest floor");
      first_nonconverged = nonconverged;
    } else {
      REQUIRE(nonconverged >= prev_nonconverged,
              "non-converged count dropped from " +
                  std::to_string(prev_nonconverged) + " to " +
                  std::to_string(nonconverged) + " at gamma " + fmt(gamma));
      REQUIRE(mean <= prev_mean + 1e-9,
              "mean sum rate rose from " + fmt(prev_mean) + " to " +
                  fmt(mean) + " at gamma " + fmt(gamma));
    }
    prev_nonconverged = nonconverged;
    prev_mean = mean;
    last_nonconverged = nonconverged;
  }
  REQUIRE(last_nonconverged > first_nonconverged,
          "raising the floor from 50 to 90 did not strictly increase the "
          "non-converged count (" +
              std::to_string(first_nonconverged) + " vs " +
              std::to_string(last_nonconverged) + ")");
  const double secs = watch.seconds();
  REQUIRE(secs < 300.0,
          "ensemble sweep took " + fmt(secs) + " s against a 300 s budget");
}

// ---------------------------------------------------------------------------
// 6. Bargaining beats the non-cooperative outcome at gamma = 70 on at least
//    16 of the 20 ensemble networks, with a positive mean margin and every
//    cooperative solution meeting the floor to 1e-6 relative.

double noncoop_value(const noncoop::GameTrace& trace, int users) {
  // Cycling runs are scored by the average over the last full cycle of
  // round-end sum rates; everything else by the final state.
  if (trace.classification == noncoop::Classification::Cycling &&
      trace.cycle_period > 0 && trace.rounds >= trace.cycle_period) {
    double acc = 0.0;
    for (int back = 0; back < trace.cycle_period; ++back) {
      const std::size_t idx =
          static_cast<std::size_t>(trace.rounds - back) *
          static_cast<std::size_t>(users);
      acc += trace.snapshots.at(idx).rates.sum();
    }
    return acc / trace.cycle_period;
  }
  return trace.final_state().rates.sum();
}

void criterion_6() {
  Stopwatch watch;
  constexpr double kGamma = 70.0;
  int wins = 0;
  double margin_sum = 0.0;
  for (int s = 0; s < kEnsembleSize; ++s) {
    const std::uint64_t seed = kEnsembleFirstSeed + s;
    const ScenarioConfig cfg = ensemble_config(seed, kGamma);
    const ChannelSet channels = generate_channels(3, 1, 8, 8, seed);

    const noncoop::GameTrace nc = noncoop::run_dynamics(channels, cfg);
    const double base = noncoop_value(nc, 3);

    const coop::CoopTrace cp = coop::run_bargaining(channels, cfg);
    REQUIRE(cp.energy_total >= kGamma * (1.0 - 1e-6),
            "seed " + std::to_string(seed) + ": bargained energy " +
                fmt(cp.energy_total) + " misses the floor");
    if (cp.sum_rate > base) ++wins;
    margin_sum += cp.sum_rate - base;
  }
  REQUIRE(wins >= 16, "bargaining won only " + std::to_string(wins) +
                          "/20 networks");
  REQUIRE(margin_sum > 0.0,
          "mean margin " + fmt(margin_sum / kEnsembleSize) + " nats");
  const double secs = watch.seconds();
  REQUIRE(secs < 900.0,
          "comparison took " + fmt(secs) + " s against a 900 s budget");
}

// ---------------------------------------------------------------------------
// 7. Price bisection terminates within 60 steps with a bracket below 1e-6,
//    ending either at a slack constraint (price ~ 0) or with the floor tight
//    to 1e-3 relative.

void criterion_7() {
  constexpr double kGamma = 70.0;
  for (int s = 0; s < kEnsembleSize; ++s) {
    const std::uint64_t seed = kEnsembleFirstSeed + s;
    const ScenarioConfig cfg = ensemble_config(seed, kGamma);
    const ChannelSet channels = generate_channels(3, 1, 8, 8, seed);

    std::vector<TransmitCovariance> tilde;
    for (int i = 0; i < 3; ++i)
      tilde.push_back(coop::expansion_seed(i, channels, cfg.power(i),
                                           kGamma / 3.0));
    const coop::ExpansionPoint at = coop::build_expansion(channels, tilde);
    const coop::BargainResult res = coop::bargain(channels, at, cfg);

    REQUIRE(!res.bracket_failed,
            "seed " + std::to_string(seed) + ": price bracket failed");
    REQUIRE(res.converged, "seed " + std::to_string(seed) +
                               ": bracket still open after " +
                               std::to_string(res.bisection_iters) + " steps");
    REQUIRE(res.bisection_iters <= 60,
            "seed " + std::to_string(seed) + ": " +
                std::to_string(res.bisection_iters) + " bisection steps");
    const double beta = res.contributions.sum();
    REQUIRE(res.price <= 1e-6 || std::abs(beta - kGamma) / kGamma <= 1e-3,
            "seed " + std::to_string(seed) + ": price " + fmt(res.price) +
                " with contributions " + fmt(beta));
  }
}

// ---------------------------------------------------------------------------
// 8. Multi-harvester runs: with a single harvester the subgradient scheme
//    agrees with the bisection bargaining to 1e-3 relative; a two-harvester
//    instance meets both floors with nonnegative prices throughout and never
//    violates weak duality.

void criterion_8() {
  for (int t = 0; t < 20; ++t) {
    const std::uint64_t seed = 300 + static_cast<std::uint64_t>(t);
    ScenarioConfig cfg;
    cfg.num_users = 2;
    cfg.num_harvesters = 1;
    cfg.rx_antennas = 4;
    cfg.tx_antennas = 4;
    cfg.power_limits = RealVector::Constant(2, 8.0);
    cfg.energy_requirements = RealVector::Constant(1, 20.0);
    cfg.seed = seed;
    // Bisection and subgradient are two dual methods for the same concave
    // surrogate; the agreement contract holds on a shared expansion point.
    cfg.bargain_outer_rounds = 1;
    const ChannelSet channels = generate_channels(2, 1, 4, 4, seed);

    const coop::CoopTrace cp = coop::run_bargaining(channels, cfg);
    const multih::HarvesterRegistry registry(cfg.energy_requirements);
    const multih::MultiTrace mc = multih::run_multi(channels, registry, cfg);

    REQUIRE(mc.max_floor_violation <= 1e-6,
            "seed " + std::to_string(seed) + ": floor violated by " +
                fmt(mc.max_floor_violation) + " relative");
    const double rel = std::abs(mc.sum_rate - cp.sum_rate) /
                       std::max(1.0, std::abs(cp.sum_rate));
    REQUIRE(rel <= 1e-3, "seed " + std::to_string(seed) +
                             ": single-harvester disagreement " + fmt(rel) +
                             " (subgradient " + fmt(mc.sum_rate) +
                             " vs bisection " + fmt(cp.sum_rate) + ")");
  }

  ScenarioConfig cfg;
  cfg.num_users = 2;
  cfg.num_harvesters = 2;
  cfg.rx_antennas = 4;
  cfg.tx_antennas = 4;
  cfg.power_limits = RealVector::Constant(2, 8.0);
  cfg.energy_requirements = RealVector(2);
  cfg.energy_requirements << 20.0, 12.0;
  cfg.seed = 83;
  const ChannelSet channels = generate_channels(2, 2, 4, 4, 83);
  const multih::HarvesterRegistry registry(cfg.energy_requirements);
  const multih::MultiTrace mc = multih::run_multi(channels, registry, cfg);

  REQUIRE(mc.converged, "two-harvester run did not settle");
  REQUIRE(mc.max_floor_violation <= 1e-6,
          "two-harvester floors violated by " + fmt(mc.max_floor_violation) +
              " relative");
  for (const auto& row : mc.rows)
    REQUIRE(row.prices.size() == 0 || row.prices.minCoeff() >= 0.0,
            "negative price at phase " + std::to_string(row.phase) +
                " iteration " + std::to_string(row.iteration));
  REQUIRE(mc.min_duality_margin >= -1e-6,
          "weak duality violated: margin " + fmt(mc.min_duality_margin));
}

// ---------------------------------------------------------------------------
// 9. The energy-profile training protocol is exact without feedback noise.

void criterion_9() {
  const std::array<int, 3> dims{2, 4, 8};
  for (int t = 0; t < 20; ++t) {
    const std::uint64_t seed = 600 + static_cast<std::uint64_t>(t);
    const int dim = dims[t % 3];
    GaussianSource src(seed);
    const Matrix h = random_matrix(src, dim, dim);
    const Vector g = random_vector(src, dim);
    const auto p =
        waterfill::whiten(h, Matrix::Identity(dim, dim), g, 8.0, 0.0);
    const RealVector est =
        oracle::estimate_energy_profile(g, p.precoder, 8.0, 0.0, seed);
    const double worst = (est - p.g_hat_sq).cwiseAbs().maxCoeff();
    REQUIRE(worst < 1e-12, "seed " + std::to_string(seed) +
                               ": noise-free estimate off by " + fmt(worst));
  }
}

// ---------------------------------------------------------------------------
// 10. Byte-identical reruns: the run engines repeated with the same inputs,
//     and the sweep under different thread budgets, must reproduce every
//     output file exactly.

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("hg_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good(), "missing output file " + p);
  return {std::istreambuf_iterator<char>(in),
          std::istreambuf_iterator<char>()};
}

// The command-line tool echoes run summaries to stdout; keep the criterion
// report as the only thing this binary prints.
struct StdoutSilencer {
  int saved = -1;
  StdoutSilencer() {
    std::fflush(stdout);
    saved = ::dup(1);
    const int null_fd = ::open("/dev/null", O_WRONLY);
    ::dup2(null_fd, 1);
    ::close(null_fd);
  }
  ~StdoutSilencer() {
    std::fflush(stdout);
    ::dup2(saved, 1);
    ::close(saved);
  }
};

void criterion_10() {
  TempDir dir("det");
  StdoutSilencer quiet;
  const std::string ch = dir / "channels.json";
  REQUIRE(cli::run({"gen", "--preset", "paper-K3", "--seed", "11", "--out",
                    ch}) == 0,
          "channel generation failed");

  const auto repeat_run = [&](const std::string& engine) {
    std::array<std::string, 2> base{dir / (engine + "_a"),
                                    dir / (engine + "_b")};
    std::array<int, 2> rc{};
    for (int k = 0; k < 2; ++k)
      rc[k] = cli::run({"run", "--preset", "paper-K3", "--channels", ch,
                        "--engine", engine, "--seed", "11", "--gamma", "30",
                        "--out", base[k] + ".csv"});
    REQUIRE(rc[0] != 2 && rc[0] == rc[1],
            engine + " reruns exited with " + std::to_string(rc[0]) + "/" +
                std::to_string(rc[1]));
    REQUIRE(slurp(base[0] + ".csv") == slurp(base[1] + ".csv"),
            engine + " trace differs between identical runs");
    REQUIRE(slurp(base[0] + "_summary.json") == slurp(base[1] +
                                                      "_summary.json"),
            engine + " summary differs between identical runs");
  };
  repeat_run("noncoop");
  repeat_run("coop");

  const auto sweep_into = [&](const std::string& sub, const char* threads) {
    ::setenv("HARVESTGAME_THREADS", threads, 1);
    const std::string out = dir / sub;
    fs::create_directories(out);
    const int rc = cli::run({"sweep", "--preset", "paper-K3", "--channels",
                             ch, "--engine", "noncoop", "--seed", "11",
                             "--gamma", "0,5,10", "--out", out});
    ::unsetenv("HARVESTGAME_THREADS");
    REQUIRE(rc != 2, "sweep with " + std::string(threads) +
                         " threads exited with " + std::to_string(rc));
    return out;
  };
  const std::string a = sweep_into("sweep1", "1");
  const std::string b = sweep_into("sweep4", "4");
  for (const char* name :
       {"aggregate.csv", "index.json", "gamma_0.csv", "gamma_0_summary.json",
        "gamma_5.csv", "gamma_5_summary.json", "gamma_10.csv",
        "gamma_10_summary.json"}) {
    REQUIRE(slurp(a + "/" + name) == slurp(b + "/" + name),
            std::string(name) + " depends on the thread budget");
  }
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* label;
  void (*body)();
};

constexpr Criterion kCriteria[] = {
    {1, "closed-form water-filling matches the projected-gradient reference",
     criterion_1},
    {2, "two- and three-mode price formulas match the polynomial root path",
     criterion_2},
    {3, "rate surrogate is exact at the expansion point with O(eps^2) error",
     criterion_3},
    {4, "analytic utility gradients match finite differences", criterion_4},
    {5, "best-response ensemble trends across the floor sweep", criterion_5},
    {6, "bargaining beats the non-cooperative outcome at gamma 70",
     criterion_6},
    {7, "price bisection terminates tightly within 60 steps", criterion_7},
    {8, "multi-harvester agrees with bargaining and respects duality",
     criterion_8},
    {9, "noise-free energy-profile training is exact", criterion_9},
    {10, "reruns and thread budgets leave every output byte unchanged",
     criterion_10},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if (arg == "--criterion" && a + 1 < argc) {
      only = std::atoi(argv[++a]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }

  int failures = 0;
  int selected = 0;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    ++selected;
    Stopwatch watch;
    std::string detail;
    try {
      c.body();
    } catch (const Failure& f) {
      detail = f.text;
    } catch (const std::exception& e) {
      detail = std::string("unexpected exception: ") + e.what();
    }
    if (detail.empty()) {
      std::printf("criterion %2d: PASS  %s (%.1f s)\n", c.id, c.label,
                  watch.seconds());
    } else {
      ++failures;
      std::printf("criterion %2d: FAIL  %s\n    %s\n", c.id, c.label,
                  detail.c_str());
    }
    std::fflush(stdout);
  }
  if (selected == 0) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
