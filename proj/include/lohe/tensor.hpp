#pragma once

// Dense complex tensors of rank m >= 1 plus the cubic coupling contraction
// used by the Lohe aggregation hierarchy.  A coupling bitmask i* in {0,1}^m
// selects, axis by axis, which slot of the cubic term carries the free index;
// the contraction is evaluated by reshaping each operand into a matrix whose
// rows run over the mask-0 axes and whose columns run over the mask-1 axes,
// so the whole term collapses to M(A) * M(B)^dagger * M(C).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lohe {

using Complex = std::complex<double>;

// Caller mistakes (bad shapes, bad masks, invalid configs).
struct usage_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Runtime numerical failures (non-finite values, conservation drift).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shapes above this element count are rejected outright.
inline constexpr std::size_t max_tensor_elements = std::size_t(1) << 20;

// Model builders accept ranks 1..3; the contraction kernels themselves are
// rank-generic.
inline constexpr int max_model_rank = 3;

class TensorShape {
 public:
  TensorShape() = default;

  explicit TensorShape(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw usage_error("TensorShape: rank must be >= 1");
    std::size_t n = 1;
    for (int d : dims_) {
      if (d < 1) throw usage_error("TensorShape: every axis dimension must be >= 1");
      n *= static_cast<std::size_t>(d);
      if (n > max_tensor_elements) throw usage_error("TensorShape: element count exceeds cap");
    }
    size_ = n;
  }

  int rank() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  std::size_t size() const { return size_; }

  friend bool operator==(const TensorShape& a, const TensorShape& b) { return a.dims_ == b.dims_; }
  friend bool operator!=(const TensorShape& a, const TensorShape& b) { return !(a == b); }

 private:
  std::vector<int> dims_;
  std::size_t size_ = 0;
};

// Per-axis coupling selector; bit k chooses the contraction pattern of axis
// k+1.  Stored most significant axis first, so "01" means axis 1 -> 0,
// axis 2 -> 1, and lexicographic order on the digits equals binary order.
class Bitmask {
 public:
  Bitmask() = default;

  explicit Bitmask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    if (bits_.empty()) throw usage_error("Bitmask: length must be >= 1");
    for (auto b : bits_)
      if (b > 1) throw usage_error("Bitmask: entries must be 0 or 1");
  }

  static Bitmask from_string(const std::string& s) {
    std::vector<std::uint8_t> bits;
    bits.reserve(s.size());
    for (char c : s) {
      if (c != '0' && c != '1') throw usage_error("Bitmask: string must be over {0,1}");
      bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return Bitmask(std::move(bits));
  }

  static Bitmask zeros(int length) {
    if (length < 1) throw usage_error("Bitmask: length must be >= 1");
    return Bitmask(std::vector<std::uint8_t>(static_cast<std::size_t>(length), 0));
  }

  std::string to_string() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(static_cast<char>('0' + b));
    return s;
  }

  int length() const { return static_cast<int>(bits_.size()); }
  std::uint8_t bit(int k) const { return bits_[static_cast<std::size_t>(k)]; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  bool all_zero() const {
    return std::all_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b == 0; });
  }

  friend bool operator==(const Bitmask& a, const Bitmask& b) { return a.bits_ == b.bits_; }
  friend bool operator!=(const Bitmask& a, const Bitmask& b) { return !(a == b); }
  // lexicographic on digits == numeric order of the binary word
  friend bool operator<(const Bitmask& a, const Bitmask& b) { return a.bits_ < b.bits_; }

 private:
  std::vector<std::uint8_t> bits_;
};

// Row-major dense complex tensor.  Entries are expected to stay finite; the
// integrator and ensemble constructors enforce that at their boundaries.
class ComplexTensor {
 public:
  ComplexTensor() = default;

  explicit ComplexTensor(TensorShape shape)
      : shape_(std::move(shape)), entries_(shape_.size(), Complex(0.0, 0.0)) {}

  ComplexTensor(TensorShape shape, std::vector<Complex> entries)
      : shape_(std::move(shape)), entries_(std::move(entries)) {
    if (entries_.size() != shape_.size())
      throw usage_error("ComplexTensor: entry count does not match shape");
  }

  const TensorShape& shape() const { return shape_; }
  std::size_t size() const { return entries_.size(); }
  Complex& operator[](std::size_t i) { return entries_[i]; }
  const Complex& operator[](std::size_t i) const { return entries_[i]; }
  std::vector<Complex>& entries() { return entries_; }
  const std::vector<Complex>& entries() const { return entries_; }

  ComplexTensor& operator+=(const ComplexTensor& rhs) {
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] += rhs.entries_[i];
    return *this;
  }
  ComplexTensor& operator-=(const ComplexTensor& rhs) {
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] -= rhs.entries_[i];
    return *this;
  }
  ComplexTensor& operator*=(Complex c) {
    for (auto& e : entries_) e *= c;
    return *this;
  }

 private:
  TensorShape shape_;
  std::vector<Complex> entries_;
};

inline bool is_finite(const ComplexTensor& t) {
  for (const auto& e : t.entries())
    if (!std::isfinite(e.real()) || !std::isfinite(e.imag())) return false;
  return true;
}

// <a, b> = sum conj(a) b, conjugate-linear in the first slot.
inline Complex frobenius_inner(const ComplexTensor& a, const ComplexTensor& b) {
  if (a.shape() != b.shape()) throw usage_error("frobenius_inner: shape mismatch");
  Complex acc(0.0, 0.0);
  const auto& ae = a.entries();
  const auto& be = b.entries();
  for (std::size_t i = 0; i < ae.size(); ++i) acc += std::conj(ae[i]) * be[i];
  return acc;
}

inline double frobenius_norm(const ComplexTensor& a) {
  double acc = 0.0;
  for (const auto& e : a.entries()) acc += std::norm(e);
  return std::sqrt(acc);
}

// Fixed left-to-right summation so replays are bit-identical.
inline ComplexTensor centroid(std::span<const ComplexTensor> agents) {
  if (agents.empty()) throw usage_error("centroid: empty ensemble");
  ComplexTensor acc(agents[0].shape());
  for (const auto& t : agents) {
    if (t.shape() != acc.shape()) throw usage_error("centroid: shape mismatch across agents");
    acc += t;
  }
  acc *= Complex(1.0 / static_cast<double>(agents.size()), 0.0);
  return acc;
}

inline double ensemble_diameter(std::span<const ComplexTensor> agents) {
  if (agents.empty()) throw usage_error("ensemble_diameter: empty ensemble");
  double best = 0.0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (agents[i].shape() != agents[0].shape())
      throw usage_error("ensemble_diameter: shape mismatch across agents");
    for (std::size_t j = i + 1; j < agents.size(); ++j) {
      double acc = 0.0;
      const auto& ae = agents[i].entries();
      const auto& be = agents[j].entries();
      for (std::size_t k = 0; k < ae.size(); ++k) acc += std::norm(ae[k] - be[k]);
      best = std::max(best, acc);
    }
  }
  return std::sqrt(best);
}

namespace detail {

// Row/column placement of each axis under a mask: rows sweep the mask-0 axes,
// columns the mask-1 axes, both row-major in axis order.
struct MaskLayout {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::vector<std::size_t> row_stride;  // zero for axes on the column side
  std::vector<std::size_t> col_stride;  // zero for axes on the row side
};

inline MaskLayout mask_layout(const TensorShape& shape, const Bitmask& mask) {
  if (mask.length() != shape.rank())
    throw usage_error("coupling mask length does not match tensor rank");
  const int m = shape.rank();
  MaskLayout out;
  out.row_stride.assign(static_cast<std::size_t>(m), 0);
  out.col_stride.assign(static_cast<std::size_t>(m), 0);
  for (int k = m - 1; k >= 0; --k) {
    const auto d = static_cast<std::size_t>(shape.dims()[static_cast<std::size_t>(k)]);
    if (mask.bit(k) == 0) {
      out.row_stride[static_cast<std::size_t>(k)] = out.rows;
      out.rows *= d;
    } else {
      out.col_stride[static_cast<std::size_t>(k)] = out.cols;
      out.cols *= d;
    }
  }
  return out;
}

// Flattened (row, col) coordinates of every tensor entry under the layout.
inline void mask_coordinates(const TensorShape& shape, const MaskLayout& layout,
                             std::vector<std::size_t>& row_of, std::vector<std::size_t>& col_of) {
  const int m = shape.rank();
  const std::size_t n = shape.size();
  row_of.assign(n, 0);
  col_of.assign(n, 0);
  std::vector<int> digit(static_cast<std::size_t>(m), 0);
  std::size_t r = 0, c = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    row_of[flat] = r;
    col_of[flat] = c;
    for (int k = m - 1; k >= 0; --k) {
      const auto ks = static_cast<std::size_t>(k);
      if (++digit[ks] < shape.dims()[ks]) {
        r += layout.row_stride[ks];
        c += layout.col_stride[ks];
        break;
      }
      digit[ks] = 0;
      r -= layout.row_stride[ks] * static_cast<std::size_t>(shape.dims()[ks] - 1);
      c -= layout.col_stride[ks] * static_cast<std::size_t>(shape.dims()[ks] - 1);
    }
  }
}

inline std::vector<Complex> reshape_by_mask(const ComplexTensor& t, const MaskLayout& layout,
                                            const std::vector<std::size_t>& row_of,
                                            const std::vector<std::size_t>& col_of) {
  std::vector<Complex> mat(layout.rows * layout.cols);
  for (std::size_t flat = 0; flat < t.size(); ++flat)
    mat[row_of[flat] * layout.cols + col_of[flat]] = t[flat];
  return mat;
}

// C (n x p) = A (n x k) * B (k x p), row-major.
inline std::vector<Complex> matmul(const std::vector<Complex>& a, const std::vector<Complex>& b,
                                   std::size_t n, std::size_t k, std::size_t p) {
  std::vector<Complex> c(n * p, Complex(0.0, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      const Complex ail = a[i * k + l];
      if (ail == Complex(0.0, 0.0)) continue;
      const Complex* brow = &b[l * p];
      Complex* crow = &c[i * p];
      for (std::size_t j = 0; j < p; ++j) crow[j] += ail * brow[j];
    }
  return c;
}

// C (n x p) = A (n x k) * B^dagger with B (p x k), row-major.
inline std::vector<Complex> matmul_bdagger(const std::vector<Complex>& a,
                                           const std::vector<Complex>& b, std::size_t n,
                                           std::size_t k, std::size_t p) {
  std::vector<Complex> c(n * p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      Complex acc(0.0, 0.0);
      const Complex* arow = &a[i * k];
      const Complex* brow = &b[j * k];
      for (std::size_t l = 0; l < k; ++l) acc += arow[l] * std::conj(brow[l]);
      c[i * p + j] = acc;
    }
  return c;
}

// C (n x p) = A^dagger * B with A (k x n), B (k x p), row-major.
inline std::vector<Complex> matmul_adagger(const std::vector<Complex>& a,
                                           const std::vector<Complex>& b, std::size_t n,
                                           std::size_t k, std::size_t p) {
  std::vector<Complex> c(n * p, Complex(0.0, 0.0));
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t i = 0; i < n; ++i) {
      const Complex ali = std::conj(a[l * n + i]);
      if (ali == Complex(0.0, 0.0)) continue;
      const Complex* brow = &b[l * p];
      Complex* crow = &c[i * p];
      for (std::size_t j = 0; j < p; ++j) crow[j] += ali * brow[j];
    }
  return c;
}

}  // namespace detail

// General three-slot contraction
//   R_{a*0} = sum_{a*1} [A]_{a*i*} conj([B]_{a*1}) [C]_{a*(1-i*)}
// realized as M(A) * M(B)^dagger * M(C) in the mask reshape.  The naive
// nested-loop evaluation of the same sum lives in the test suite as an
// independent oracle.
inline ComplexTensor coupling_contraction(const ComplexTensor& first, const ComplexTensor& middle,
                                          const ComplexTensor& third, const Bitmask& mask) {
  if (first.shape() != middle.shape() || first.shape() != third.shape())
    throw usage_error("coupling_contraction: operands must share one shape");
  const auto layout = detail::mask_layout(first.shape(), mask);
  std::vector<std::size_t> row_of, col_of;
  detail::mask_coordinates(first.shape(), layout, row_of, col_of);

  const auto a = detail::reshape_by_mask(first, layout, row_of, col_of);
  const auto b = detail::reshape_by_mask(middle, layout, row_of, col_of);
  const auto c = detail::reshape_by_mask(third, layout, row_of, col_of);
  const std::size_t r = layout.rows, s = layout.cols;

  // pick the cheaper association of A * B^dagger * C
  std::vector<Complex> prod;
  if (r <= s) {
    const auto ab = detail::matmul_bdagger(a, b, r, s, r);  // r x r
    prod = detail::matmul(ab, c, r, r, s);
  } else {
    const auto bc = detail::matmul_adagger(b, c, s, r, s);  // s x s
    prod = detail::matmul(a, bc, r, s, s);
  }

  ComplexTensor out(first.shape());
  for (std::size_t flat = 0; flat < out.size(); ++flat)
    out[flat] = prod[row_of[flat] * s + col_of[flat]];
  return out;
}

// Bracketed coupling difference for one mask (coupling strength applied by
// the caller):  A_c conj(A_j) A_j - A_j conj(A_c) A_j in the mask reshape.
inline ComplexTensor coupling_term(const ComplexTensor& tc, const ComplexTensor& tj,
                                   const Bitmask& mask) {
  ComplexTensor out = coupling_contraction(tc, tj, tj, mask);
  out -= coupling_contraction(tj, tc, tj, mask);
  return out;
}

}  // namespace lohe
