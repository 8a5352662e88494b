#include "lohe/tensor.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <complex>
#include <random>
#include <vector>

#include "support/oracles.hpp"

using lohe::Bitmask;
using lohe::Complex;
using lohe::ComplexTensor;
using lohe::TensorShape;

namespace {

ComplexTensor vec(std::vector<Complex> e) {
  const int n = static_cast<int>(e.size());
  return ComplexTensor(TensorShape({n}), std::move(e));
}

}  // namespace

TEST_CASE("TensorShape validates rank, dims and element budget") {
  CHECK_THROWS_AS(TensorShape(std::vector<int>{}), lohe::usage_error);
  CHECK_THROWS_AS(TensorShape({3, 0}), lohe::usage_error);
  CHECK_THROWS_AS(TensorShape({-2}), lohe::usage_error);
  CHECK_THROWS_AS(TensorShape({1 << 11, 1 << 11}), lohe::usage_error);  // 2^22 > cap

  const TensorShape s({2, 3, 4});
  CHECK(s.rank() == 3);
  CHECK(s.size() == 24);
  CHECK(s == TensorShape({2, 3, 4}));
  CHECK(s != TensorShape({2, 3}));
}

TEST_CASE("Bitmask parsing, ordering and validation") {
  const Bitmask m = Bitmask::from_string("01");
  CHECK(m.length() == 2);
  CHECK(m.bit(0) == 0);
  CHECK(m.bit(1) == 1);
  CHECK(m.to_string() == "01");
  CHECK_FALSE(m.all_zero());
  CHECK(Bitmask::zeros(3).all_zero());

  CHECK_THROWS_AS(Bitmask::from_string(""), lohe::usage_error);
  CHECK_THROWS_AS(Bitmask::from_string("012"), lohe::usage_error);
  CHECK_THROWS_AS(Bitmask(std::vector<std::uint8_t>{0, 2}), lohe::usage_error);

  // map order must equal binary value order: 00 < 01 < 10 < 11
  CHECK(Bitmask::from_string("00") < Bitmask::from_string("01"));
  CHECK(Bitmask::from_string("01") < Bitmask::from_string("10"));
  CHECK(Bitmask::from_string("10") < Bitmask::from_string("11"));
}

TEST_CASE("ComplexTensor construction checks entry count") {
  CHECK_THROWS_AS(ComplexTensor(TensorShape({3}), {Complex(1, 0)}), lohe::usage_error);
  ComplexTensor z(TensorShape({2, 2}));
  CHECK(z.size() == 4);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == Complex(0, 0));
}

TEST_CASE("frobenius_inner is conjugate-linear in the first slot") {
  const auto a = vec({Complex(1, 0), Complex(0, 1)});
  const auto b = vec({Complex(2, 0), Complex(3, 0)});
  const Complex ab = lohe::frobenius_inner(a, b);
  CHECK(ab.real() == Catch::Approx(2.0).margin(1e-15));
  CHECK(ab.imag() == Catch::Approx(-3.0).margin(1e-15));

  // conjugate symmetry and norm compatibility on random data
  std::mt19937_64 rng(7);
  const TensorShape s({3, 2});
  const auto x = oracle::random_tensor(s, rng);
  const auto y = oracle::random_tensor(s, rng);
  const Complex xy = lohe::frobenius_inner(x, y);
  const Complex yx = lohe::frobenius_inner(y, x);
  CHECK(std::abs(xy - std::conj(yx)) < 1e-13);
  const Complex xx = lohe::frobenius_inner(x, x);
  CHECK(xx.imag() == Catch::Approx(0.0).margin(1e-13));
  CHECK(std::sqrt(xx.real()) == Catch::Approx(lohe::frobenius_norm(x)).margin(1e-12));

  CHECK_THROWS_AS(lohe::frobenius_inner(x, vec({Complex(1, 0)})), lohe::usage_error);
}

TEST_CASE("centroid averages entrywise and rejects empty input") {
  const auto a = vec({Complex(1, 0), Complex(0, 0)});
  const auto b = vec({Complex(0, 0), Complex(0, 2)});
  const std::vector<ComplexTensor> agents{a, b};
  const auto c = lohe::centroid(agents);
  CHECK(std::abs(c[0] - Complex(0.5, 0)) < 1e-15);
  CHECK(std::abs(c[1] - Complex(0, 1)) < 1e-15);

  CHECK_THROWS_AS(lohe::centroid(std::span<const ComplexTensor>{}), lohe::usage_error);
  const std::vector<ComplexTensor> bad{a, ComplexTensor(TensorShape({3}))};
  CHECK_THROWS_AS(lohe::centroid(bad), lohe::usage_error);
}

TEST_CASE("ensemble_diameter matches brute force and handles edge cases") {
  const auto e1 = vec({Complex(1, 0), Complex(0, 0)});
  const auto e2 = vec({Complex(0, 0), Complex(1, 0)});
  const std::vector<ComplexTensor> pair{e1, e2};
  CHECK(lohe::ensemble_diameter(pair) == Catch::Approx(std::sqrt(2.0)).margin(1e-15));

  const std::vector<ComplexTensor> single{e1};
  CHECK(lohe::ensemble_diameter(single) == 0.0);
  CHECK_THROWS_AS(lohe::ensemble_diameter(std::span<const ComplexTensor>{}), lohe::usage_error);

  std::mt19937_64 rng(11);
  const TensorShape s({2, 2});
  std::vector<ComplexTensor> ens;
  for (int i = 0; i < 5; ++i) ens.push_back(oracle::random_tensor(s, rng));
  double brute = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i)
    for (std::size_t j = 0; j < ens.size(); ++j)
      brute = std::max(brute, oracle::tensor_dist(ens[i], ens[j]));
  CHECK(lohe::ensemble_diameter(ens) == Catch::Approx(brute).margin(1e-13));
}

TEST_CASE("rank-1 coupling_term reproduces the sphere-model brackets") {
  std::mt19937_64 rng(23);
  const TensorShape s({5});
  const auto vc = oracle::random_tensor(s, rng);
  const auto vj = oracle::random_tensor(s, rng);

  SECTION("mask 0: <vj,vj> vc - <vc,vj> vj") {
    const auto got = lohe::coupling_term(vc, vj, Bitmask::from_string("0"));
    const Complex njj = lohe::frobenius_inner(vj, vj);
    const Complex cj = lohe::frobenius_inner(vc, vj);
    for (std::size_t i = 0; i < s.size(); ++i)
      CHECK(std::abs(got[i] - (njj * vc[i] - cj * vj[i])) < 1e-12);
  }

  SECTION("mask 1: (<vj,vc> - <vc,vj>) vj") {
    const auto got = lohe::coupling_term(vc, vj, Bitmask::from_string("1"));
    const Complex w = lohe::frobenius_inner(vj, vc) - lohe::frobenius_inner(vc, vj);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(got[i] - w * vj[i]) < 1e-12);
  }
}

TEST_CASE("rank-2 coupling_term reproduces the matrix-model brackets") {
  std::mt19937_64 rng(31);
  const int d1 = 3, d2 = 4;
  const TensorShape s({d1, d2});
  const auto ac = oracle::random_tensor(s, rng);
  const auto aj = oracle::random_tensor(s, rng);
  const oracle::CMat mc = ac.entries();  // row-major d1 x d2
  const oracle::CMat mj = aj.entries();

  SECTION("mask 01: Ac Aj^* Aj - Aj Ac^* Aj") {
    const auto got = lohe::coupling_term(ac, aj, Bitmask::from_string("01"));
    const auto t1 = oracle::mat_mul(oracle::mat_mul(mc, oracle::mat_adjoint(mj, d1, d2), d1, d2, d1), mj, d1, d1, d2);
    const auto t2 = oracle::mat_mul(oracle::mat_mul(mj, oracle::mat_adjoint(mc, d1, d2), d1, d2, d1), mj, d1, d1, d2);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(got[i] - (t1[i] - t2[i])) < 1e-12);
  }

  SECTION("mask 10: Aj Aj^* Ac - Aj Ac^* Aj") {
    const auto got = lohe::coupling_term(ac, aj, Bitmask::from_string("10"));
    const auto t1 = oracle::mat_mul(oracle::mat_mul(mj, oracle::mat_adjoint(mj, d1, d2), d1, d2, d1), mc, d1, d1, d2);
    const auto t2 = oracle::mat_mul(oracle::mat_mul(mj, oracle::mat_adjoint(mc, d1, d2), d1, d2, d1), mj, d1, d1, d2);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(got[i] - (t1[i] - t2[i])) < 1e-12);
  }
}

TEST_CASE("coupling_term vanishes identically on the diagonal") {
  std::mt19937_64 rng(37);
  const TensorShape s({2, 3, 2});
  const auto t = oracle::random_tensor(s, rng);
  for (const char* ms : {"000", "010", "101", "111"}) {
    const auto z = lohe::coupling_term(t, t, Bitmask::from_string(ms));
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == Complex(0, 0));
  }
}

TEST_CASE("coupling_term preserves Re<tj, term> = 0 (norm conservation)") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    const TensorShape s({3, 2});
    const auto tc = oracle::random_unit_tensor(s, rng);
    const auto tj = oracle::random_unit_tensor(s, rng);
    for (const char* ms : {"00", "01", "10", "11"}) {
      const auto term = lohe::coupling_term(tc, tj, Bitmask::from_string(ms));
      CHECK(std::abs(lohe::frobenius_inner(tj, term).real()) < 1e-13);
    }
  }
}

TEST_CASE("coupling contraction agrees with the naive nested-loop oracle") {
  std::mt19937_64 rng(20260814);
  std::uniform_int_distribution<int> rank_pick(1, 3);
  std::uniform_int_distribution<int> dim_pick(1, 4);
  std::uniform_int_distribution<int> bit_pick(0, 1);

  for (int rep = 0; rep < 200; ++rep) {
    const int m = rank_pick(rng);
    std::vector<int> dims;
    for (int k = 0; k < m; ++k) dims.push_back(dim_pick(rng));
    const TensorShape s(dims);
    std::vector<std::uint8_t> bits;
    for (int k = 0; k < m; ++k) bits.push_back(static_cast<std::uint8_t>(bit_pick(rng)));
    const Bitmask mask(bits);

    const auto tc = oracle::random_tensor(s, rng);
    const auto tj = oracle::random_tensor(s, rng);
    const auto got = lohe::coupling_term(tc, tj, mask);
    const auto want = oracle::naive_coupling_term(tc, tj, mask);

    const double scale = std::max(oracle::tensor_dist(want, ComplexTensor(s)), 1e-30);
    CHECK(oracle::tensor_dist(got, want) / scale < 1e-12);
  }
}

TEST_CASE("coupling_term rejects mismatched operands") {
  const auto a = vec({Complex(1, 0), Complex(0, 0)});
  const auto b = ComplexTensor(TensorShape({3}));
  CHECK_THROWS_AS(lohe::coupling_term(a, b, Bitmask::from_string("0")), lohe::usage_error);
  CHECK_THROWS_AS(lohe::coupling_term(a, a, Bitmask::from_string("00")), lohe::usage_error);
}
