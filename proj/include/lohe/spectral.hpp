#pragma once

// Spectral Galerkin bridge between coefficient tensors and wave functions on
// the periodic box (0, 2*pi)^m.  A SpectralBasis carries one mode list per
// tensor axis; coefficient tensors evolve under the diagonal free flow while
// reconstruct() materialises the corresponding grid samples.  The quadrature
// helpers give a second, grid-side route to inner products and fluxes so the
// coefficient-side kernels can be checked against them.

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <vector>

#include "lohe/freeflow.hpp"
#include "lohe/tensor.hpp"

namespace lohe {

struct AxisBasis {
  std::vector<int> frequencies;    // integer wave numbers, profile e^{ikx}/sqrt(2 pi)
  std::vector<double> eigenvalues; // free-flow eigenvalue per mode
};

class SpectralBasis {
 public:
  SpectralBasis(std::vector<AxisBasis> axes, int grid_points_per_axis)
      : axes_(std::move(axes)), grid_points_(grid_points_per_axis) {
    if (axes_.empty()) throw usage_error("SpectralBasis: need at least one axis");
    if (static_cast<int>(axes_.size()) > max_model_rank)
      throw usage_error("SpectralBasis: rank capped at 3");
    int max_freq = 0;
    std::vector<int> dims;
    for (const auto& axis : axes_) {
      if (axis.frequencies.empty()) throw usage_error("SpectralBasis: empty axis");
      if (axis.frequencies.size() != axis.eigenvalues.size())
        throw usage_error("SpectralBasis: one eigenvalue per frequency");
      for (double e : axis.eigenvalues)
        if (!std::isfinite(e)) throw usage_error("SpectralBasis: eigenvalues must be finite");
      for (int k : axis.frequencies) max_freq = std::max(max_freq, std::abs(k));
      dims.push_back(static_cast<int>(axis.frequencies.size()));
    }
    // the tensor-product quadrature on P points integrates e^{i(l-k)x}
    // exactly only while |l - k| < P
    if (grid_points_ < 2 * max_freq + 1)
      throw usage_error("SpectralBasis: grid must have at least 2 max|frequency| + 1 points");
    shape_ = TensorShape(dims);
  }

  // Wave numbers 0, 1, -1, 2, -2, ... with eigenvalues k^2 / 2 unless a
  // per-axis list is supplied.  grid_points_per_axis = 0 picks the smallest
  // odd count that makes the quadrature exact.
  static SpectralBasis fourier(const std::vector<int>& dims, int grid_points_per_axis = 0) {
    return fourier(dims, {}, grid_points_per_axis);
  }

  static SpectralBasis fourier(const std::vector<int>& dims,
                               std::vector<std::vector<double>> eigenvalues,
                               int grid_points_per_axis = 0) {
    if (!eigenvalues.empty() && eigenvalues.size() != dims.size())
      throw usage_error("SpectralBasis: one eigenvalue list per axis");
    std::vector<AxisBasis> axes;
    int max_freq = 0;
    for (std::size_t ax = 0; ax < dims.size(); ++ax) {
      AxisBasis axis;
      for (int j = 0; j < dims[ax]; ++j) {
        const int k = (j % 2 == 1) ? (j + 1) / 2 : -(j / 2);
        axis.frequencies.push_back(k);
        axis.eigenvalues.push_back(0.5 * static_cast<double>(k) * static_cast<double>(k));
        max_freq = std::max(max_freq, std::abs(k));
      }
      if (!eigenvalues.empty()) {
        if (eigenvalues[ax].size() != axis.frequencies.size())
          throw usage_error("SpectralBasis: eigenvalue list length must match the axis dimension");
        axis.eigenvalues = std::move(eigenvalues[ax]);
      }
      axes.push_back(std::move(axis));
    }
    const int grid = grid_points_per_axis > 0 ? grid_points_per_axis : 2 * max_freq + 1;
    return SpectralBasis(std::move(axes), grid);
  }

  int rank() const { return static_cast<int>(axes_.size()); }
  const std::vector<AxisBasis>& axes() const { return axes_; }
  int grid_points_per_axis() const { return grid_points_; }
  const TensorShape& coefficient_shape() const { return shape_; }

  FreeFlowSpec free_flow() const {
    std::vector<std::vector<double>> eigs;
    for (const auto& axis : axes_) eigs.push_back(axis.eigenvalues);
    return FreeFlowSpec::spectral(std::move(eigs));
  }

 private:
  std::vector<AxisBasis> axes_;
  int grid_points_;
  TensorShape shape_{std::vector<int>{1}};
};

// Row-major samples over the tensor-product grid x_p = 2 pi p / P per axis.
struct GridField {
  std::vector<int> axis_points;
  std::vector<Complex> samples;

  double cell_volume() const {
    double v = 1.0;
    for (int p : axis_points) v *= 2.0 * std::numbers::pi / static_cast<double>(p);
    return v;
  }
};

// Evaluates sum_alpha c_alpha e^{-i t E(alpha)} prod_k e^{i k_alpha x} /
// sqrt(2 pi) on the grid, one axis-transform at a time.
inline GridField reconstruct(const ComplexTensor& coeffs, const SpectralBasis& basis,
                             double time = 0.0) {
  if (!(coeffs.shape() == basis.coefficient_shape()))
    throw usage_error("reconstruct: coefficient shape does not match the basis");
  const ComplexTensor phased = apply_exp(basis.free_flow(), time, coeffs);

  const int P = basis.grid_points_per_axis();
  const double scale = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  std::vector<Complex> cur = phased.entries();
  std::vector<int> dims = coeffs.shape().dims();

  for (int ax = 0; ax < basis.rank(); ++ax) {
    const auto& freq = basis.axes()[static_cast<std::size_t>(ax)].frequencies;
    const int d = dims[static_cast<std::size_t>(ax)];
    std::vector<Complex> phi(static_cast<std::size_t>(d) * static_cast<std::size_t>(P));
    for (int j = 0; j < d; ++j)
      for (int p = 0; p < P; ++p)
        phi[static_cast<std::size_t>(j * P + p)] =
            std::polar(scale, static_cast<double>(freq[static_cast<std::size_t>(j)]) * 2.0 *
                                  std::numbers::pi * static_cast<double>(p) /
                                  static_cast<double>(P));

    std::size_t pre = 1, post = 1;
    for (int k = 0; k < ax; ++k) pre *= static_cast<std::size_t>(dims[static_cast<std::size_t>(k)]);
    for (std::size_t k = static_cast<std::size_t>(ax) + 1; k < dims.size(); ++k)
      post *= static_cast<std::size_t>(dims[k]);

    std::vector<Complex> next(pre * static_cast<std::size_t>(P) * post);
    for (std::size_t a = 0; a < pre; ++a)
      for (int p = 0; p < P; ++p)
        for (std::size_t b = 0; b < post; ++b) {
          Complex acc(0.0, 0.0);
          for (int j = 0; j < d; ++j)
            acc += cur[(a * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)) * post + b] *
                   phi[static_cast<std::size_t>(j * P + p)];
          next[(a * static_cast<std::size_t>(P) + static_cast<std::size_t>(p)) * post + b] = acc;
        }
    cur = std::move(next);
    dims[static_cast<std::size_t>(ax)] = P;
  }

  GridField out;
  out.axis_points = std::move(dims);
  out.samples = std::move(cur);
  return out;
}

// Riemann quadrature of <f, g> = integral conj(f) g over the periodic box.
inline Complex quadrature_inner(const GridField& f, const GridField& g) {
  if (f.axis_points != g.axis_points || f.samples.size() != g.samples.size())
    throw usage_error("quadrature_inner: grids do not match");
  Complex acc(0.0, 0.0);
  for (std::size_t i = 0; i < f.samples.size(); ++i)
    acc += std::conj(f.samples[i]) * g.samples[i];
  return acc * f.cell_volume();
}

// Max deviation between grid-side quadrature and coefficient-side inner
// products over all agent pairs; small values certify that the truncated
// wave functions carry the same geometry as their coefficient tensors.
inline double bridge_residual(std::span<const ComplexTensor> agents, const SpectralBasis& basis,
                              double time = 0.0) {
  if (agents.empty()) throw usage_error("bridge_residual: empty ensemble");
  std::vector<GridField> fields;
  fields.reserve(agents.size());
  for (const auto& a : agents) fields.push_back(reconstruct(a, basis, time));
  double worst = 0.0;
  for (std::size_t i = 0; i < agents.size(); ++i)
    for (std::size_t j = 0; j < agents.size(); ++j) {
      const Complex grid = quadrature_inner(fields[i], fields[j]);
      const Complex coef = frobenius_inner(agents[i], agents[j]);
      worst = std::max(worst, std::abs(grid - coef));
    }
  return worst;
}

// Grid-side flux for one coupling mask, as the literal quadrature
//   sum_j int_A int_A' | int_B [ conj(Psi_c(a0,b)) Psi_j(a1,b)
//                              - conj(Psi_j(a0,b)) Psi_c(a1,b) ] db |^2 da da'
// with A the mask-0 axes and B the mask-1 axes.  Deliberately evaluated by
// nested sums so it shares nothing with the coefficient-side flux kernel.
inline double flux_quadrature_oracle(std::span<const ComplexTensor> agents,
                                     const SpectralBasis& basis, const Bitmask& mask,
                                     double time = 0.0) {
  if (agents.empty()) throw usage_error("flux_quadrature_oracle: empty ensemble");
  const int P = basis.grid_points_per_axis();
  const TensorShape grid_shape(std::vector<int>(static_cast<std::size_t>(basis.rank()), P));
  const auto layout = detail::mask_layout(grid_shape, mask);
  std::vector<std::size_t> row_of, col_of;
  detail::mask_coordinates(grid_shape, layout, row_of, col_of);

  const double cell = 2.0 * std::numbers::pi / static_cast<double>(P);
  double vol_a = 1.0, vol_b = 1.0;
  for (int k = 0; k < mask.length(); ++k) (mask.bit(k) == 0 ? vol_a : vol_b) *= cell;

  const GridField fc = reconstruct(centroid(agents), basis, time);
  const auto mc =
      detail::reshape_by_mask(ComplexTensor(grid_shape, fc.samples), layout, row_of, col_of);

  const std::size_t rows = layout.rows, cols = layout.cols;
  double total = 0.0;
  for (const auto& agent : agents) {
    const GridField fj = reconstruct(agent, basis, time);
    const auto mj =
        detail::reshape_by_mask(ComplexTensor(grid_shape, fj.samples), layout, row_of, col_of);
    for (std::size_t a0 = 0; a0 < rows; ++a0)
      for (std::size_t a1 = 0; a1 < rows; ++a1) {
        Complex kernel(0.0, 0.0);
        for (std::size_t b = 0; b < cols; ++b)
          kernel += std::conj(mc[a0 * cols + b]) * mj[a1 * cols + b] -
                    std::conj(mj[a0 * cols + b]) * mc[a1 * cols + b];
        total += std::norm(kernel * vol_b) * vol_a * vol_a;
      }
  }
  return total;
}

// Text export: "axes=P1,P2,..." then one "re,im" pair per sample, row-major.
inline void write_gridfield(std::ostream& os, const GridField& field) {
  os << "axes=";
  for (std::size_t k = 0; k < field.axis_points.size(); ++k)
    os << (k ? "," : "") << field.axis_points[k];
  os << '\n';
  char line[64];
  for (const Complex& v : field.samples) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g", v.real(), v.imag());
    os << line << '\n';
  }
}

}  // namespace lohe
