#include "lohe/integrate.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "support/oracles.hpp"

using lohe::Bitmask;
using lohe::Complex;
using lohe::ComplexTensor;
using lohe::CouplingMap;
using lohe::Ensemble;
using lohe::FreeFlowSpec;
using lohe::ObserverSet;
using lohe::SimConfig;
using lohe::TensorShape;

namespace {

std::map<Bitmask, double> kmap(std::initializer_list<std::pair<const char*, double>> init) {
  std::map<Bitmask, double> m;
  for (const auto& [mask, kappa] : init) m.emplace(Bitmask::from_string(mask), kappa);
  return m;
}

ComplexTensor scalar(Complex v) { return ComplexTensor(TensorShape({1}), {v}); }

std::vector<Complex> random_skew_hermitian(std::size_t n, std::mt19937_64& rng) {
  std::vector<Complex> m(n * n);
  for (auto& v : m) v = Complex(oracle::normal(rng), oracle::normal(rng));
  std::vector<Complex> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a[i * n + j] = 0.5 * (m[i * n + j] - std::conj(m[j * n + i]));
  return a;
}

}  // namespace

TEST_CASE("rk4_step: zero derivative leaves the state untouched") {
  std::mt19937_64 rng(3);
  const std::vector<ComplexTensor> y{oracle::random_tensor(TensorShape({3}), rng)};
  const auto out = lohe::rk4_step(
      y, [](const std::vector<ComplexTensor>& s) {
        return std::vector<ComplexTensor>{ComplexTensor(s[0].shape())};
      },
      0.1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out[0][i] == y[0][i]);
}

TEST_CASE("rk4_step on a linear system equals the degree-4 Taylor polynomial") {
  const Complex lambda(-0.3, 1.7);
  const double h = 0.05;
  const Complex y0(0.8, -0.2);
  const auto out = lohe::rk4_step(
      std::vector<ComplexTensor>{scalar(y0)},
      [&](const std::vector<ComplexTensor>& s) {
        return std::vector<ComplexTensor>{scalar(lambda * s[0][0])};
      },
      h);
  const Complex hl = h * lambda;
  const Complex poly =
      Complex(1, 0) + hl + hl * hl / 2.0 + hl * hl * hl / 6.0 + hl * hl * hl * hl / 24.0;
  CHECK(std::abs(out[0][0] - poly * y0) < 1e-16);
}

TEST_CASE("rk4_step converges at fourth order on y' = y^2") {
  // closed form y(t) = y0 / (1 - y0 t)
  const double y0 = 0.5, t_final = 1.0;
  const auto rhs = [](const std::vector<ComplexTensor>& s) {
    return std::vector<ComplexTensor>{scalar(s[0][0] * s[0][0])};
  };
  const auto run = [&](int steps) {
    std::vector<ComplexTensor> y{scalar(Complex(y0, 0))};
    const double h = t_final / steps;
    for (int i = 0; i < steps; ++i) y = lohe::rk4_step(y, rhs, h);
    return std::abs(y[0][0] - Complex(y0 / (1.0 - y0 * t_final), 0));
  };
  const double e1 = run(40);
  const double e2 = run(80);
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);
}

TEST_CASE("rk4_step reports the stage that went non-finite") {
  const std::vector<ComplexTensor> y{scalar(Complex(1, 0))};
  int calls = 0;
  const auto rhs = [&](const std::vector<ComplexTensor>& s) {
    ++calls;
    if (calls >= 3)  // poison stage k3
      return std::vector<ComplexTensor>{scalar(Complex(std::nan(""), 0))};
    return std::vector<ComplexTensor>{s[0]};
  };
  CHECK_THROWS_WITH(lohe::rk4_step(y, rhs, 0.1), Catch::Matchers::ContainsSubstring("k3"));

  CHECK_THROWS_AS(lohe::rk4_step(std::vector<ComplexTensor>{}, rhs, 0.1), lohe::usage_error);
  CHECK_THROWS_AS(lohe::rk4_step(y, rhs, 0.0), lohe::usage_error);
}

TEST_CASE("SimConfig validation") {
  SimConfig c;
  CHECK_NOTHROW(c.validate());
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), lohe::usage_error);
  c = SimConfig{};
  c.t_end = 1e-9;
  CHECK_THROWS_AS(c.validate(), lohe::usage_error);
  c = SimConfig{};
  c.record_stride = 0;
  CHECK_THROWS_AS(c.validate(), lohe::usage_error);
  c = SimConfig{};
  c.conservation_tol = 0.0;
  CHECK_THROWS_AS(c.validate(), lohe::usage_error);
}

TEST_CASE("integrate with zero coupling reproduces the free flow") {
  const TensorShape s({4});
  const auto agents = lohe::random_unit_ensemble(s, 3, 11);
  const auto spec = FreeFlowSpec::spectral({{0.0, 0.5, 0.5, 2.0}});
  const Ensemble e(agents, CouplingMap(kmap({{"0", 0.0}})), spec, true);

  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 2.0;
  cfg.record_stride = 200;
  ObserverSet obs;
  obs.states = true;
  const auto rec = lohe::integrate(e, cfg, obs);

  REQUIRE(rec.times.size() == rec.states.size());
  for (std::size_t k = 0; k < rec.times.size(); ++k)
    for (std::size_t j = 0; j < agents.size(); ++j) {
      const auto exact = lohe::apply_exp(spec, rec.times[k], agents[j]);
      CHECK(oracle::tensor_dist(rec.states[k][j], exact) < 1e-10);
    }
}

TEST_CASE("integrate keeps identical agents identical") {
  const TensorShape s({2, 2});
  const auto t = lohe::random_unit_tensor(s, std::uint64_t(5));
  const std::vector<ComplexTensor> agents(4, t);
  const Ensemble e(agents, CouplingMap(kmap({{"01", 1.0}, {"10", 0.5}})),
                   FreeFlowSpec::spectral({{0.0, 1.0}, {0.0, 0.5}}), true);
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 1.0;
  const auto rec = lohe::integrate(e, cfg);
  for (double d : rec.diameter) CHECK(d == 0.0);
  for (double r : rec.order_parameter) CHECK(std::abs(r - 1.0) < 1e-10);
}

TEST_CASE("integrate records the configured grid and observers") {
  const TensorShape s({3});
  const auto agents = lohe::random_unit_ensemble(s, 2, 7);
  const Ensemble e(agents, CouplingMap(kmap({{"0", 1.0}, {"1", 0.0}})), FreeFlowSpec::absent(),
                   true);
  SimConfig cfg;
  cfg.dt = 0.1;
  cfg.t_end = 0.75;  // not a multiple of dt: shorter final step, still recorded
  cfg.record_stride = 3;
  ObserverSet obs;
  obs.gram = true;
  const auto rec = lohe::integrate(e, cfg, obs);

  REQUIRE(rec.times.size() == 4);
  CHECK(rec.times[0] == 0.0);
  CHECK(rec.times[1] == Catch::Approx(0.3));
  CHECK(rec.times[2] == Catch::Approx(0.6));
  CHECK(rec.times[3] == 0.75);
  CHECK(rec.agent_count == 2);
  CHECK(rec.order_parameter.size() == 4);
  CHECK(rec.diameter.size() == 4);
  CHECK(rec.norm_drift_max.size() == 4);
  CHECK(rec.gram.size() == 4);
  CHECK(rec.states.empty());

  // flux series exist exactly for active masks
  REQUIRE(rec.flux.size() == 1);
  CHECK(rec.flux.begin()->first.to_string() == "0");
  CHECK(rec.flux.begin()->second.size() == 4);

  ObserverSet none;
  none.order_parameter = none.diameter = none.norm_drift = none.flux = false;
  const auto quiet = lohe::integrate(e, cfg, none);
  CHECK(quiet.order_parameter.empty());
  CHECK(quiet.flux.empty());
  CHECK(quiet.times.size() == 4);
}

TEST_CASE("integrate aborts on conservation drift") {
  const TensorShape s({3});
  const auto agents = lohe::random_unit_ensemble(s, 4, 13);
  const Ensemble e(agents, CouplingMap(kmap({{"0", 50.0}})), FreeFlowSpec::absent(), true);
  SimConfig cfg;
  cfg.dt = 0.5;  // way past the stability limit at kappa = 50
  cfg.t_end = 50.0;
  CHECK_THROWS_AS(lohe::integrate(e, cfg), lohe::numeric_error);
}

TEST_CASE("integrate replays bit-identically") {
  const TensorShape s({2, 2});
  const auto agents = lohe::random_unit_ensemble(s, 3, 2026);
  const Ensemble e(agents, CouplingMap(kmap({{"01", 1.2}, {"10", 0.3}})),
                   FreeFlowSpec::spectral({{0.0, 1.0}, {0.0, 0.5}}), true);
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 2.0;
  cfg.record_stride = 10;
  ObserverSet obs;
  obs.states = true;
  const auto a = lohe::integrate(e, cfg, obs);
  const auto b = lohe::integrate(e, cfg, obs);
  REQUIRE(a.times == b.times);
  REQUIRE(a.order_parameter == b.order_parameter);
  REQUIRE(a.diameter == b.diameter);
  for (std::size_t k = 0; k < a.states.size(); ++k)
    for (std::size_t j = 0; j < a.states[k].size(); ++j)
      for (std::size_t i = 0; i < a.states[k][j].size(); ++i)
        CHECK(a.states[k][j][i] == b.states[k][j][i]);
}

TEST_CASE("split_integrate requires a splittable free flow") {
  const TensorShape s({3});
  const auto agents = lohe::random_unit_ensemble(s, 2, 5);
  const Ensemble none(agents, CouplingMap(kmap({{"0", 1.0}})), FreeFlowSpec::absent(), true);
  SimConfig cfg;
  cfg.dt = 0.1;
  cfg.t_end = 1.0;
  CHECK_THROWS_AS(lohe::split_integrate(none, cfg), lohe::usage_error);

  // generic dense rank-2 generator at a mixed mask fails the compatibility check
  std::mt19937_64 rng(17);
  const TensorShape s22({2, 2});
  const auto bad = FreeFlowSpec::dense(4, random_skew_hermitian(4, rng));
  const auto agents22 = lohe::random_unit_ensemble(s22, 2, 6);
  const Ensemble mixed(agents22, CouplingMap(kmap({{"01", 1.0}})), bad, true);
  CHECK_THROWS_AS(lohe::split_integrate(mixed, cfg), lohe::usage_error);
}

TEST_CASE("split_integrate with zero coupling is the exact free flow") {
  const TensorShape s({4});
  const auto agents = lohe::random_unit_ensemble(s, 3, 23);
  const auto spec = FreeFlowSpec::spectral({{0.0, 0.5, 0.5, 2.0}});
  const Ensemble e(agents, CouplingMap(kmap({{"0", 0.0}})), spec, true);
  SimConfig cfg;
  cfg.dt = 0.05;
  cfg.t_end = 3.0;
  cfg.record_stride = 10;
  ObserverSet obs;
  obs.states = true;
  const auto rec = lohe::split_integrate(e, cfg, obs);
  for (std::size_t k = 0; k < rec.times.size(); ++k)
    for (std::size_t j = 0; j < agents.size(); ++j) {
      const auto exact = lohe::apply_exp(spec, rec.times[k], agents[j]);
      CHECK(oracle::tensor_dist(rec.states[k][j], exact) < 1e-13);
    }
}

TEST_CASE("split and full integration agree on lifted models") {
  SimConfig cfg;
  cfg.dt = 2e-3;
  cfg.t_end = 2.0;
  cfg.record_stride = 100;
  ObserverSet obs;
  obs.states = true;

  SECTION("rank 1 spectral") {
    const TensorShape s({4});
    const auto agents = lohe::random_unit_ensemble(s, 4, 31);
    const auto spec = FreeFlowSpec::spectral({{0.0, 0.5, 0.5, 2.0}});
    const Ensemble e(agents, CouplingMap(kmap({{"0", 1.0}})), spec, true);
    const auto full = lohe::integrate(e, cfg, obs);
    const auto split = lohe::split_integrate(e, cfg, obs);
    REQUIRE(full.times == split.times);
    double gap = 0.0;
    for (std::size_t k = 0; k < full.states.size(); ++k)
      for (std::size_t j = 0; j < full.states[k].size(); ++j)
        gap = std::max(gap, oracle::tensor_dist(full.states[k][j], split.states[k][j]));
    CHECK(gap < 1e-6);
  }

  SECTION("rank 1 dense (always compatible)") {
    std::mt19937_64 rng(37);
    const TensorShape s({4});
    const auto agents = lohe::random_unit_ensemble(s, 3, 41);
    const auto spec = FreeFlowSpec::dense(4, random_skew_hermitian(4, rng));
    const Ensemble e(agents, CouplingMap(kmap({{"0", 0.8}, {"1", 0.4}})), spec, true);
    const auto full = lohe::integrate(e, cfg, obs);
    const auto split = lohe::split_integrate(e, cfg, obs);
    double gap = 0.0;
    for (std::size_t k = 0; k < full.states.size(); ++k)
      for (std::size_t j = 0; j < full.states[k].size(); ++j)
        gap = std::max(gap, oracle::tensor_dist(full.states[k][j], split.states[k][j]));
    CHECK(gap < 1e-6);
  }
}

TEST_CASE("pairwise Gram entries follow their analytic derivative") {
  // d<psi_i,psi_j>/dt = kappa (h_cj + h_ic) (1 - h_ij) for the rank-1 mask-0
  // lifting with unit norms; checked against central differences
  const TensorShape s({5});
  const double kappa = 1.0;
  const auto agents = lohe::random_unit_ensemble(s, 3, 43);
  const auto spec = FreeFlowSpec::spectral({{0.0, 0.5, 0.5, 2.0, 2.0}});
  const Ensemble e(agents, CouplingMap(kmap({{"0", kappa}})), spec, true);

  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 0.2;
  cfg.record_stride = 1;
  ObserverSet obs;
  obs.gram = true;
  obs.states = true;
  const auto rec = lohe::integrate(e, cfg, obs);

  const std::size_t n = 3;
  for (std::size_t k = 1; k + 1 < rec.times.size(); k += 20) {
    const auto& snap = rec.states[k];
    const auto g = rec.gram[k];
    const auto tc = lohe::centroid(snap);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const Complex fd = (rec.gram[k + 1][i * n + j] - rec.gram[k - 1][i * n + j]) /
                           Complex(rec.times[k + 1] - rec.times[k - 1], 0);
        const Complex hcj = lohe::frobenius_inner(tc, snap[j]);
        const Complex hic = lohe::frobenius_inner(snap[i], tc);
        const Complex want = kappa * (hcj + hic) * (Complex(1, 0) - g[i * n + j]);
        CHECK(std::abs(fd - want) < 1e-5);
      }
  }
}
