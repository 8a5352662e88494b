#pragma once

// Order parameter, aggregation fluxes, conserved functionals and the
// asymptotic-state classifier.
//
// The flux attached to a coupling mask is sum_j || M_c M_j^dagger -
// M_j M_c^dagger ||_F^2 in the mask reshape (rows over mask-0 axes, columns
// over mask-1 axes); d(R^2)/dt equals sum_masks (kappa / N) * flux along
// solutions, which flux_identity_residual checks by central differences.

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "lohe/models.hpp"
#include "lohe/tensor.hpp"
#include "lohe/trajectory.hpp"

namespace lohe {

inline double order_parameter(std::span<const ComplexTensor> agents) {
  return frobenius_norm(centroid(agents));
}

// sum_j || M_c M_j^dagger - M_j M_c^dagger ||_F^2 over the mask reshape.
inline double aggregation_flux(std::span<const ComplexTensor> agents, const Bitmask& mask) {
  if (agents.empty()) throw usage_error("aggregation_flux: empty ensemble");
  const ComplexTensor tc = centroid(agents);
  const auto layout = detail::mask_layout(tc.shape(), mask);
  std::vector<std::size_t> row_of, col_of;
  detail::mask_coordinates(tc.shape(), layout, row_of, col_of);
  const auto mc = detail::reshape_by_mask(tc, layout, row_of, col_of);
  const std::size_t r = layout.rows, s = layout.cols;

  double total = 0.0;
  for (const auto& tj : agents) {
    const auto mj = detail::reshape_by_mask(tj, layout, row_of, col_of);
    const auto cj = detail::matmul_bdagger(mc, mj, r, s, r);  // M_c M_j^dagger, r x r
    double acc = 0.0;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) acc += std::norm(cj[i * r + j] - std::conj(cj[j * r + i]));
    total += acc;
  }
  return total;
}

struct FluxReport {
  std::map<Bitmask, double> per_mask;  // flux values, >= 0
  double total = 0.0;                  // sum kappa/N * flux over active masks
};

inline FluxReport flux_report(std::span<const ComplexTensor> agents,
                              const CouplingMap& couplings) {
  FluxReport report;
  const double n = static_cast<double>(agents.size());
  for (const auto& [mask, kappa] : couplings.active()) {
    const double f = aggregation_flux(agents, mask);
    report.per_mask.emplace(mask, f);
    report.total += kappa / n * f;
  }
  return report;
}

// Max relative deviation between the central-difference d(R^2)/dt and the
// per-record flux prediction at interior record points.  Points where both
// sides fall below `atol` contribute zero, which keeps fully decayed or
// zero-coupling tails from dividing rounding noise by a vanishing flux.
inline double flux_identity_residual(const TrajectoryRecord& record, const CouplingMap& couplings,
                                     double atol = 1e-9) {
  const std::size_t n = record.times.size();
  if (n < 3) throw usage_error("flux_identity_residual: need at least three records");
  if (record.order_parameter.size() != n)
    throw usage_error("flux_identity_residual: order parameter series missing");
  if (record.agent_count < 1) throw usage_error("flux_identity_residual: agent count missing");
  const auto active = couplings.active();
  for (const auto& [mask, kappa] : active) {
    const auto it = record.flux.find(mask);
    if (it == record.flux.end() || it->second.size() != n)
      throw usage_error("flux_identity_residual: flux series missing for an active mask");
  }

  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double r2p = record.order_parameter[k + 1] * record.order_parameter[k + 1];
    const double r2m = record.order_parameter[k - 1] * record.order_parameter[k - 1];
    const double fd = (r2p - r2m) / (record.times[k + 1] - record.times[k - 1]);
    double pred = 0.0;
    for (const auto& [mask, kappa] : active)
      pred += kappa / static_cast<double>(record.agent_count) * record.flux.at(mask)[k];
    const double dev = std::abs(fd - pred);
    const double scale = std::max(std::abs(fd), std::abs(pred));
    if (scale < atol) continue;
    worst = std::max(worst, dev / scale);
  }
  return worst;
}

// Product of Gram entries around a cycle of agent indices:
// <psi_{c0}, psi_{c1}> <psi_{c1}, psi_{c2}> ... <psi_{c_{k-1}}, psi_{c0}>.
inline Complex j_functional(std::span<const ComplexTensor> agents, std::span<const int> cycle) {
  if (cycle.size() < 2) throw usage_error("j_functional: cycle needs at least two indices");
  for (int idx : cycle)
    if (idx < 0 || idx >= static_cast<int>(agents.size()))
      throw usage_error("j_functional: agent index out of range");
  Complex acc(1.0, 0.0);
  for (std::size_t l = 0; l < cycle.size(); ++l) {
    const auto& a = agents[static_cast<std::size_t>(cycle[l])];
    const auto& b = agents[static_cast<std::size_t>(cycle[(l + 1) % cycle.size()])];
    acc *= frobenius_inner(a, b);
  }
  return acc;
}

// Row-major N x N matrix of <psi_i, psi_j>.
inline std::vector<Complex> pairwise_gram(std::span<const ComplexTensor> agents) {
  if (agents.empty()) throw usage_error("pairwise_gram: empty ensemble");
  const std::size_t n = agents.size();
  std::vector<Complex> g(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g[i * n + j] = frobenius_inner(agents[i], agents[j]);
  return g;
}

enum class Verdict { Aggregated, BiPolar, Undecided };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Aggregated: return "Aggregated";
    case Verdict::BiPolar: return "BiPolar";
    case Verdict::Undecided: return "Undecided";
  }
  return "?";
}

struct ClassifyThresholds {
  double aggregation = 1e-6;  // diameter below this is full consensus
  double alignment = 1e-4;    // per-agent distance to the +/- reference branch
  double r_tol = 1e-6;        // cross-check |R - |1 - 2n/N||
};

struct AsymptoticState {
  Verdict verdict = Verdict::Undecided;
  int bipolar_n = 0;  // min(n+, N - n+), zero unless BiPolar
  double final_diameter = 0.0;
  double final_r = 0.0;
  std::vector<int> signs;  // +1 / -1 branch per agent, empty unless BiPolar
};

// Classifies the last snapshot of a trajectory tail of unit-norm agents.
inline AsymptoticState classify_state(std::span<const std::vector<ComplexTensor>> tail,
                                      const ClassifyThresholds& thresholds = {}) {
  if (tail.empty()) throw usage_error("classify_state: empty trajectory tail");
  const std::vector<ComplexTensor>& agents = tail.back();
  if (agents.empty()) throw usage_error("classify_state: empty snapshot");

  AsymptoticState out;
  out.final_diameter = ensemble_diameter(agents);
  out.final_r = order_parameter(agents);
  if (out.final_diameter < thresholds.aggregation) {
    out.verdict = Verdict::Aggregated;
    return out;
  }

  const ComplexTensor& ref = agents[0];
  std::vector<int> signs;
  int n_plus = 0;
  for (const auto& agent : agents) {
    ComplexTensor dp = agent;
    dp -= ref;
    ComplexTensor dm = agent;
    dm += ref;
    const double plus = frobenius_norm(dp);
    const double minus = frobenius_norm(dm);
    if (std::min(plus, minus) >= thresholds.alignment) return out;  // Undecided
    signs.push_back(plus <= minus ? 1 : -1);
    if (signs.back() == 1) ++n_plus;
  }
  const int n_total = static_cast<int>(agents.size());
  const double r_expected =
      std::abs(1.0 - 2.0 * static_cast<double>(n_plus) / static_cast<double>(n_total));
  if (std::abs(out.final_r - r_expected) > thresholds.r_tol) return out;  // Undecided

  out.verdict = Verdict::BiPolar;
  out.bipolar_n = std::min(n_plus, n_total - n_plus);
  out.signs = std::move(signs);
  return out;
}

}  // namespace lohe
