#pragma once

// Free-flow specifications and their action on coefficient tensors.  Three
// kinds are supported: no free flow at all, a per-axis real spectrum acting
// as exact phases (generator entrywise -i * sum of axis eigenvalues), and a
// dense skew-Hermitian generator on the flattened index with the exponential
// evaluated by scaling-and-squaring Pade.
//
// validate_generator checks the four-factor compatibility contraction that a
// generator must satisfy for the solution-splitting formula to hold at a
// given coupling mask: conjugating the cubic coupling by exp(tF) must act as
// the identity.  Spectral specs always pass (the four phase factors cancel
// exactly); dense generators are checked numerically and generically fail at
// mixed masks unless they factor per axis.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lohe/tensor.hpp"

namespace lohe {

namespace detail {

// --- dense complex linear algebra on row-major square matrices -------------

inline std::vector<Complex> identity_matrix(std::size_t n) {
  std::vector<Complex> m(n * n, Complex(0, 0));
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] = Complex(1, 0);
  return m;
}

inline std::vector<Complex> square_matmul(const std::vector<Complex>& a,
                                          const std::vector<Complex>& b, std::size_t n) {
  return matmul(a, b, n, n, n);
}

// Solve D X = N in place by LU with partial pivoting; returns X.
inline std::vector<Complex> solve_square(std::vector<Complex> d, std::vector<Complex> n,
                                         std::size_t side) {
  for (std::size_t col = 0; col < side; ++col) {
    std::size_t pivot = col;
    double best = std::abs(d[col * side + col]);
    for (std::size_t r = col + 1; r < side; ++r) {
      const double cand = std::abs(d[r * side + col]);
      if (cand > best) {
        best = cand;
        pivot = r;
      }
    }
    if (best == 0.0) throw numeric_error("matrix exponential: singular Pade denominator");
    if (pivot != col) {
      for (std::size_t j = 0; j < side; ++j) {
        std::swap(d[col * side + j], d[pivot * side + j]);
        std::swap(n[col * side + j], n[pivot * side + j]);
      }
    }
    const Complex inv = Complex(1, 0) / d[col * side + col];
    for (std::size_t r = 0; r < side; ++r) {
      if (r == col) continue;
      const Complex f = d[r * side + col] * inv;
      if (f == Complex(0, 0)) continue;
      for (std::size_t j = col; j < side; ++j) d[r * side + j] -= f * d[col * side + j];
      for (std::size_t j = 0; j < side; ++j) n[r * side + j] -= f * n[col * side + j];
    }
  }
  for (std::size_t r = 0; r < side; ++r) {
    const Complex inv = Complex(1, 0) / d[r * side + r];
    for (std::size_t j = 0; j < side; ++j) n[r * side + j] *= inv;
  }
  return n;
}

// exp(A) by diagonal Pade of order 6 with |A|-based scaling and repeated
// squaring.
inline std::vector<Complex> expm(const std::vector<Complex>& a, std::size_t side) {
  double norm_inf = 0.0;
  for (std::size_t i = 0; i < side; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < side; ++j) row += std::abs(a[i * side + j]);
    norm_inf = std::max(norm_inf, row);
  }
  int scale_pow = 0;
  if (norm_inf > 0.5) scale_pow = static_cast<int>(std::ceil(std::log2(norm_inf))) + 1;

  std::vector<Complex> as(a);
  const double scale = std::ldexp(1.0, -scale_pow);
  for (auto& v : as) v *= scale;

  constexpr int q = 6;
  std::vector<Complex> num = identity_matrix(side);
  std::vector<Complex> den = identity_matrix(side);
  std::vector<Complex> power = identity_matrix(side);
  double c = 1.0;
  for (int k = 1; k <= q; ++k) {
    c *= static_cast<double>(q - k + 1) / static_cast<double>(k * (2 * q - k + 1));
    power = square_matmul(as, power, side);
    for (std::size_t i = 0; i < side * side; ++i) {
      const Complex term = c * power[i];
      num[i] += term;
      den[i] += (k % 2 == 0) ? term : -term;
    }
  }
  std::vector<Complex> f = solve_square(std::move(den), std::move(num), side);
  for (int s = 0; s < scale_pow; ++s) f = square_matmul(f, f, side);
  return f;
}

// digit decomposition of a flat row-major index
inline void flat_digits(const TensorShape& shape, std::size_t flat, std::vector<int>& out) {
  for (int k = shape.rank() - 1; k >= 0; --k) {
    const auto d = static_cast<std::size_t>(shape.dims()[static_cast<std::size_t>(k)]);
    out[static_cast<std::size_t>(k)] = static_cast<int>(flat % d);
    flat /= d;
  }
}

inline std::size_t digits_to_flat(const TensorShape& shape, const std::vector<int>& digit) {
  std::size_t flat = 0;
  for (int k = 0; k < shape.rank(); ++k)
    flat = flat * static_cast<std::size_t>(shape.dims()[static_cast<std::size_t>(k)]) +
           static_cast<std::size_t>(digit[static_cast<std::size_t>(k)]);
  return flat;
}

}  // namespace detail

class FreeFlowSpec {
 public:
  enum class Kind { Absent, SpectralDiagonal, DenseGenerator };

  FreeFlowSpec() = default;

  static FreeFlowSpec absent() { return FreeFlowSpec(); }

  // Per-axis real eigenvalue lists; the generator acts entrywise as
  // -i * (E^1_{a_1} + ... + E^m_{a_m}).
  static FreeFlowSpec spectral(std::vector<std::vector<double>> axis_eigenvalues) {
    if (axis_eigenvalues.empty())
      throw usage_error("FreeFlowSpec: spectral spec needs at least one axis");
    for (const auto& axis : axis_eigenvalues) {
      if (axis.empty()) throw usage_error("FreeFlowSpec: empty eigenvalue list");
      for (double e : axis)
        if (!std::isfinite(e)) throw usage_error("FreeFlowSpec: non-finite eigenvalue");
    }
    FreeFlowSpec s;
    s.kind_ = Kind::SpectralDiagonal;
    s.axis_eigenvalues_ = std::move(axis_eigenvalues);
    return s;
  }

  // Dense skew-Hermitian generator on the flattened index, row-major.
  static FreeFlowSpec dense(std::size_t side, std::vector<Complex> generator,
                            double skew_tol = 1e-12) {
    if (side == 0 || generator.size() != side * side)
      throw usage_error("FreeFlowSpec: dense generator must be square");
    for (const auto& v : generator)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw usage_error("FreeFlowSpec: non-finite generator entry");
    for (std::size_t i = 0; i < side; ++i)
      for (std::size_t j = 0; j < side; ++j)
        if (std::abs(generator[i * side + j] + std::conj(generator[j * side + i])) > skew_tol)
          throw usage_error("FreeFlowSpec: generator is not skew-Hermitian within tolerance");
    FreeFlowSpec s;
    s.kind_ = Kind::DenseGenerator;
    s.side_ = side;
    s.generator_ = std::move(generator);
    return s;
  }

  Kind kind() const { return kind_; }
  const std::vector<std::vector<double>>& axis_eigenvalues() const { return axis_eigenvalues_; }
  const std::vector<Complex>& generator() const { return generator_; }
  std::size_t side() const { return side_; }

  // Shape compatibility: spectral axes must match the dims, a dense side the
  // flattened size.
  void check_shape(const TensorShape& shape) const {
    switch (kind_) {
      case Kind::Absent:
        return;
      case Kind::SpectralDiagonal: {
        if (static_cast<int>(axis_eigenvalues_.size()) != shape.rank())
          throw usage_error("FreeFlowSpec: spectral axis count does not match tensor rank");
        for (int k = 0; k < shape.rank(); ++k)
          if (static_cast<int>(axis_eigenvalues_[static_cast<std::size_t>(k)].size()) !=
              shape.dims()[static_cast<std::size_t>(k)])
            throw usage_error("FreeFlowSpec: eigenvalue list length does not match axis dim");
        return;
      }
      case Kind::DenseGenerator:
        if (side_ != shape.size())
          throw usage_error("FreeFlowSpec: generator side does not match tensor size");
        return;
    }
  }

 private:
  Kind kind_ = Kind::Absent;
  std::vector<std::vector<double>> axis_eigenvalues_;
  std::vector<Complex> generator_;
  std::size_t side_ = 0;
};

namespace detail {

inline double eigenvalue_sum(const FreeFlowSpec& spec, const TensorShape& shape,
                             std::size_t flat) {
  double sum = 0.0;
  for (int k = shape.rank() - 1; k >= 0; --k) {
    const auto d = static_cast<std::size_t>(shape.dims()[static_cast<std::size_t>(k)]);
    sum += spec.axis_eigenvalues()[static_cast<std::size_t>(k)][flat % d];
    flat /= d;
  }
  return sum;
}

}  // namespace detail

// F T: zero for Absent, entrywise -i E for spectral, flattened matvec for a
// dense generator.
inline ComplexTensor apply_generator(const FreeFlowSpec& spec, const ComplexTensor& t) {
  spec.check_shape(t.shape());
  switch (spec.kind()) {
    case FreeFlowSpec::Kind::Absent:
      return ComplexTensor(t.shape());
    case FreeFlowSpec::Kind::SpectralDiagonal: {
      ComplexTensor out(t.shape());
      for (std::size_t i = 0; i < t.size(); ++i)
        out[i] = t[i] * Complex(0.0, -detail::eigenvalue_sum(spec, t.shape(), i));
      return out;
    }
    case FreeFlowSpec::Kind::DenseGenerator: {
      const std::size_t n = spec.side();
      ComplexTensor out(t.shape());
      const auto& g = spec.generator();
      for (std::size_t i = 0; i < n; ++i) {
        Complex acc(0, 0);
        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * t[j];
        out[i] = acc;
      }
      return out;
    }
  }
  throw usage_error("apply_generator: unknown spec kind");
}

// exp(time F) T; an isometry for every kind.
inline ComplexTensor apply_exp(const FreeFlowSpec& spec, double time, const ComplexTensor& t) {
  spec.check_shape(t.shape());
  switch (spec.kind()) {
    case FreeFlowSpec::Kind::Absent:
      return t;
    case FreeFlowSpec::Kind::SpectralDiagonal: {
      ComplexTensor out(t.shape());
      for (std::size_t i = 0; i < t.size(); ++i)
        out[i] = t[i] * std::polar(1.0, -time * detail::eigenvalue_sum(spec, t.shape(), i));
      return out;
    }
    case FreeFlowSpec::Kind::DenseGenerator: {
      const std::size_t n = spec.side();
      std::vector<Complex> scaled(spec.generator());
      for (auto& v : scaled) v *= time;
      const auto f = detail::expm(scaled, n);
      ComplexTensor out(t.shape());
      for (std::size_t i = 0; i < n; ++i) {
        Complex acc(0, 0);
        for (std::size_t j = 0; j < n; ++j) acc += f[i * n + j] * t[j];
        out[i] = acc;
      }
      return out;
    }
  }
  throw usage_error("apply_exp: unknown spec kind");
}

struct ValidationSample {
  Bitmask mask;
  double time = 0.0;
  double deviation = 0.0;
};

struct ValidationReport {
  bool passed = false;
  double tolerance = 0.0;
  double max_deviation = 0.0;
  std::vector<ValidationSample> samples;
};

namespace detail {

// Flat index whose axis-k digit comes from a when the mask bit is 0 and from
// b otherwise.
inline std::size_t mixed_flat(const TensorShape& shape, const std::vector<int>& da,
                              const std::vector<int>& db, const Bitmask& mask,
                              std::vector<int>& scratch) {
  for (int k = 0; k < shape.rank(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    scratch[ks] = (mask.bit(k) == 0) ? da[ks] : db[ks];
  }
  return digits_to_flat(shape, scratch);
}

inline double spectral_compat_deviation(const FreeFlowSpec& spec, const TensorShape& shape,
                                        const Bitmask& mask, double time) {
  const std::size_t n = shape.size();
  std::vector<double> esum(n);
  for (std::size_t i = 0; i < n; ++i) esum[i] = eigenvalue_sum(spec, shape, i);
  const int m = shape.rank();
  std::vector<int> d0(static_cast<std::size_t>(m)), d1(static_cast<std::size_t>(m)),
      scratch(static_cast<std::size_t>(m));
  double worst = 0.0;
  // off-diagonal entries vanish structurally; the residual phase is
  // t (E(a0) + E(a1) - E(mix) - E(mixc)), zero up to rounding
  for (std::size_t a0 = 0; a0 < n; ++a0) {
    flat_digits(shape, a0, d0);
    for (std::size_t a1 = 0; a1 < n; ++a1) {
      flat_digits(shape, a1, d1);
      const std::size_t mix = mixed_flat(shape, d0, d1, mask, scratch);
      double phase = time * (esum[a0] + esum[a1]);
      phase -= time * (esum[mix] + esum[a0 + a1 - mix]);
      worst = std::max(worst, std::abs(std::polar(1.0, phase) - Complex(1, 0)));
    }
  }
  return worst;
}

inline double dense_compat_deviation(const FreeFlowSpec& spec, const TensorShape& shape,
                                     const Bitmask& mask, double time) {
  const std::size_t n = shape.size();
  std::vector<Complex> gm(spec.generator()), gp(spec.generator());
  for (auto& v : gm) v *= -time;
  for (auto& v : gp) v *= time;
  const auto em = expm(gm, n);
  const auto ep = expm(gp, n);

  const int m = shape.rank();
  std::vector<int> da(static_cast<std::size_t>(m)), db(static_cast<std::size_t>(m)),
      scratch(static_cast<std::size_t>(m));
  // mix(a, b) pairs each flat index with its complement-mask partner
  std::vector<std::size_t> mix(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    flat_digits(shape, a, da);
    for (std::size_t b = 0; b < n; ++b) {
      flat_digits(shape, b, db);
      mix[a * n + b] = mixed_flat(shape, da, db, mask, scratch);
    }
  }

  const std::size_t nn = n * n;
  // W[(b0 b1),(g0 g1)] = ep[mix(b0,b1), mix(g0,g1)] * ep[mixc(b0,b1), mixc(g0,g1)]
  std::vector<Complex> w(nn * nn);
  for (std::size_t b0 = 0; b0 < n; ++b0)
    for (std::size_t b1 = 0; b1 < n; ++b1) {
      const std::size_t bm = mix[b0 * n + b1];
      const std::size_t bc = b0 + b1 - bm;
      for (std::size_t g0 = 0; g0 < n; ++g0)
        for (std::size_t g1 = 0; g1 < n; ++g1) {
          const std::size_t gm_ = mix[g0 * n + g1];
          const std::size_t gc = g0 + g1 - gm_;
          w[(b0 * n + b1) * nn + (g0 * n + g1)] = ep[bm * n + gm_] * ep[bc * n + gc];
        }
    }
  // kron(em, em) * W, compared against the identity
  std::vector<Complex> kron(nn * nn);
  for (std::size_t a0 = 0; a0 < n; ++a0)
    for (std::size_t a1 = 0; a1 < n; ++a1)
      for (std::size_t b0 = 0; b0 < n; ++b0)
        for (std::size_t b1 = 0; b1 < n; ++b1)
          kron[(a0 * n + a1) * nn + (b0 * n + b1)] = em[a0 * n + b0] * em[a1 * n + b1];
  const auto rhs = square_matmul(kron, w, nn);
  double worst = 0.0;
  for (std::size_t r = 0; r < nn; ++r)
    for (std::size_t c = 0; c < nn; ++c) {
      const Complex target = (r == c) ? Complex(1, 0) : Complex(0, 0);
      worst = std::max(worst, std::abs(rhs[r * nn + c] - target));
    }
  return worst;
}

}  // namespace detail

// Checks the splitting compatibility of a free flow at the given masks and
// sample times.  Dense validation builds the full four-index contraction and
// is capped at flattened side 32.
inline ValidationReport validate_generator(const FreeFlowSpec& spec, const TensorShape& shape,
                                           std::span<const Bitmask> masks,
                                           std::span<const double> times, double tolerance = 1e-9) {
  if (spec.kind() == FreeFlowSpec::Kind::Absent)
    throw usage_error("validate_generator: spec has no free flow");
  spec.check_shape(shape);
  if (masks.empty()) throw usage_error("validate_generator: no masks given");
  for (const auto& mask : masks)
    if (mask.length() != shape.rank())
      throw usage_error("validate_generator: mask length does not match rank");
  if (times.empty()) throw usage_error("validate_generator: no sample times given");
  if (spec.kind() == FreeFlowSpec::Kind::DenseGenerator && shape.size() > 32)
    throw usage_error("validate_generator: dense validation capped at flattened side 32");

  ValidationReport report;
  report.tolerance = tolerance;
  for (const auto& mask : masks)
    for (double t : times) {
      const double dev = (spec.kind() == FreeFlowSpec::Kind::SpectralDiagonal)
                             ? detail::spectral_compat_deviation(spec, shape, mask, t)
                             : detail::dense_compat_deviation(spec, shape, mask, t);
      report.samples.push_back({mask, t, dev});
      report.max_deviation = std::max(report.max_deviation, dev);
    }
  report.passed = report.max_deviation <= tolerance;
  return report;
}

inline ValidationReport validate_generator(const FreeFlowSpec& spec, const TensorShape& shape,
                                           std::span<const Bitmask> masks,
                                           double tolerance = 1e-9) {
  const double default_times[] = {0.1, 0.5, 1.0};
  return validate_generator(spec, shape, masks, std::span<const double>(default_times), tolerance);
}

// --- plain-text dense generator files ---------------------------------------
// One matrix row per line; entries are "re,im" pairs separated by whitespace.
// Blank lines and lines starting with '#' are skipped.

inline FreeFlowSpec parse_dense_generator(std::istream& in, double skew_tol = 1e-12) {
  std::vector<std::vector<Complex>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<Complex> row;
    std::string token;
    while (ls >> token) {
      const auto comma = token.find(',');
      if (comma == std::string::npos)
        throw usage_error("dense generator: entry '" + token + "' is not re,im");
      std::size_t used_re = 0, used_im = 0;
      double re, im;
      try {
        re = std::stod(token.substr(0, comma), &used_re);
        im = std::stod(token.substr(comma + 1), &used_im);
      } catch (const std::exception&) {
        throw usage_error("dense generator: cannot parse entry '" + token + "'");
      }
      if (used_re != comma || used_im != token.size() - comma - 1)
        throw usage_error("dense generator: trailing characters in entry '" + token + "'");
      row.emplace_back(re, im);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw usage_error("dense generator: file has no entries");
  const std::size_t side = rows.size();
  std::vector<Complex> flat;
  flat.reserve(side * side);
  for (const auto& row : rows) {
    if (row.size() != side) throw usage_error("dense generator: matrix is not square");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return FreeFlowSpec::dense(side, std::move(flat), skew_tol);
}

inline FreeFlowSpec load_dense_generator(const std::string& path, double skew_tol = 1e-12) {
  std::ifstream in(path);
  if (!in) throw usage_error("dense generator: cannot open '" + path + "'");
  return parse_dense_generator(in, skew_tol);
}

inline void write_dense_generator(std::ostream& out, std::size_t side,
                                  std::span<const Complex> generator) {
  char buf[96];
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) {
      const Complex& v = generator[i * side + j];
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g", v.real(), v.imag());
      out << buf << (j + 1 == side ? "" : " ");
    }
    out << '\n';
  }
}

}  // namespace lohe
