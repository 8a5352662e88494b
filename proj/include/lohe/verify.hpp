#pragma once

// Built-in verification harness behind `lohesim verify`.  Every check pins a
// structural identity of the dynamics on a fixed scenario and reports the
// measured deviation against a tolerance.  A tolerance override <= 0 keeps
// each check's default.

#include <cmath>
#include <complex>
#include <initializer_list>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lohe/diagnostics.hpp"
#include "lohe/integrate.hpp"
#include "lohe/models.hpp"
#include "lohe/spectral.hpp"

namespace lohe::cli {

struct VerifyResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
};

namespace detail {

inline void record_check(std::vector<VerifyResult>& out, std::string name, double value,
                         double tol_default, double tol_override) {
  const double tol = tol_override > 0.0 ? tol_override : tol_default;
  out.push_back({std::move(name), value <= tol && std::isfinite(value), value, tol});
}

inline std::map<Bitmask, double> mask_map(
    std::initializer_list<std::pair<const char*, double>> init) {
  std::map<Bitmask, double> m;
  for (const auto& [mask, kappa] : init) m.emplace(Bitmask::from_string(mask), kappa);
  return m;
}

inline double sup_state_gap(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  double gap = 0.0;
  for (std::size_t k = 0; k < a.states.size(); ++k)
    for (std::size_t j = 0; j < a.states[k].size(); ++j) {
      ComplexTensor d = a.states[k][j];
      d -= b.states[k][j];
      gap = std::max(gap, frobenius_norm(d));
    }
  return gap;
}

}  // namespace detail

// Norm conservation per model family over one time unit.
inline void verify_conservation(std::vector<VerifyResult>& out, double tol = 0.0) {
  const FreeFlowSpec rank1 = FreeFlowSpec::spectral({{0.0, 0.5, 0.5, 2.0}});
  const FreeFlowSpec rank2 = FreeFlowSpec::spectral({{0.0, 1.0}, {0.0, 0.5}});
  const FreeFlowSpec rank3 = FreeFlowSpec::spectral({{0.0, 1.0}, {0.0, 0.5}, {0.0, 2.0}});

  const std::vector<std::pair<ModelFamily, ModelParams>> scenarios = {
      {ModelFamily::LoheSphere,
       {{4}, 4, detail::mask_map({{"0", 1.0}, {"1", 0.5}}), rank1, 101}},
      {ModelFamily::SchrodingerLohe, {{4}, 4, detail::mask_map({{"0", 1.0}}), rank1, 102}},
      {ModelFamily::RotationalSL, {{4}, 4, detail::mask_map({{"1", 1.0}}), rank1, 103}},
      {ModelFamily::LoheMatrix,
       {{2, 2}, 3, detail::mask_map({{"01", 0.7}, {"10", 0.4}}), rank2, 104}},
      {ModelFamily::SLMatrix,
       {{2, 2}, 3, detail::mask_map({{"01", 0.7}, {"10", 0.4}}), rank2, 105}},
      {ModelFamily::SLTensor,
       {{2, 2, 2}, 3, detail::mask_map({{"001", 0.6}, {"110", 0.4}}), rank3, 106}},
      {ModelFamily::LoheTensor,
       {{2, 2, 2}, 3, detail::mask_map({{"010", 0.5}, {"101", 0.3}}), rank3, 107}},
  };

  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 1.0;
  cfg.record_stride = 100;
  for (const auto& [family, params] : scenarios) {
    const auto rec = integrate(build_model(family, params), cfg);
    double drift = 0.0;
    for (double d : rec.norm_drift_max) drift = std::max(drift, d);
    detail::record_check(out, std::string("conservation/") + family_name(family), drift, 1e-8,
                         tol);
  }
}

// Split-and-compose against the direct integration on lifted models.
inline void verify_splitting(std::vector<VerifyResult>& out, double tol = 0.0) {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 2.0;
  cfg.record_stride = 200;
  ObserverSet obs;
  obs.states = true;

  {
    const auto e = build_model(
        ModelFamily::SchrodingerLohe,
        {{4}, 3, detail::mask_map({{"0", 1.0}}), FreeFlowSpec::spectral({{0.0, 0.5, 0.5, 2.0}}),
         111});
    const double gap = detail::sup_state_gap(integrate(e, cfg, obs), split_integrate(e, cfg, obs));
    detail::record_check(out, "splitting/schrodinger_lohe", gap, 1e-6, tol);
  }
  {
    const auto e = build_model(ModelFamily::SLMatrix,
                               {{2, 2},
                                3,
                                detail::mask_map({{"01", 0.7}, {"10", 0.4}}),
                                FreeFlowSpec::spectral({{0.0, 1.0}, {0.0, 0.5}}),
                                112});
    const double gap = detail::sup_state_gap(integrate(e, cfg, obs), split_integrate(e, cfg, obs));
    detail::record_check(out, "splitting/slm", gap, 1e-6, tol);
  }
}

// Phase-family dynamics against the Kuramoto reduction.
inline void verify_kuramoto(std::vector<VerifyResult>& out, double tol = 0.0) {
  const double kappa = 1.0;
  const TensorShape shape({4});
  const FreeFlowSpec flow = FreeFlowSpec::spectral({{0.0, 0.5, 0.5, 2.0}});

  {  // velocity identity at the initial snapshot
    const auto fam = phase_family_ensemble(shape, 5, 121);
    const Ensemble e(fam.agents, CouplingMap(detail::mask_map({{"1", kappa}})), flow, true);
    const auto rhs = lt_rhs(e);
    const auto kur = kuramoto_rhs({fam.phases, kappa});
    double worst = 0.0;
    for (std::size_t j = 0; j < fam.agents.size(); ++j) {
      ComplexTensor coupling = rhs[j];
      coupling -= apply_generator(flow, fam.agents[j]);
      const double model_velocity = frobenius_inner(fam.agents[j], coupling).imag();
      worst = std::max(worst, std::abs(model_velocity - kur[j]));
    }
    detail::record_check(out, "kuramoto/velocity", worst, 1e-8, tol);
  }

  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 2.0;
  cfg.record_stride = 200;
  ObserverSet obs;
  obs.states = true;

  {  // the family is invariant along the flow
    const auto fam = phase_family_ensemble(shape, 5, 122);
    const Ensemble e(fam.agents, CouplingMap(detail::mask_map({{"1", kappa}})), flow, true);
    const auto rec = integrate(e, cfg, obs);
    double worst = 0.0;
    for (std::size_t k = 0; k < rec.states.size(); ++k) {
      const auto base_t = apply_exp(flow, rec.times[k], fam.base);
      worst = std::max(worst, extract_phase_family(rec.states[k], base_t).max_residual);
    }
    detail::record_check(out, "kuramoto/family", worst, 1e-8, tol);
  }

  {  // two agents: tan(delta/2) contracts at rate 2 kappa
    cfg.t_end = 1.0;
    const auto fam = phase_family_ensemble(shape, 2, 123);
    const Ensemble e(fam.agents, CouplingMap(detail::mask_map({{"1", kappa}})), flow, true);
    const auto rec = integrate(e, cfg, obs);
    const auto base_t = apply_exp(flow, rec.times.back(), fam.base);
    const auto phases = extract_phase_family(rec.states.back(), base_t).phases;
    const double want =
        std::tan(0.5 * (fam.phases[1] - fam.phases[0])) * std::exp(-2.0 * kappa * cfg.t_end);
    const double got = std::tan(0.5 * (phases[1] - phases[0]));
    detail::record_check(out, "kuramoto/two_agent", std::abs(got - want), 1e-6, tol);
  }
}

// d(R^2)/dt against the recorded fluxes.
inline void verify_flux(std::vector<VerifyResult>& out, double tol = 0.0) {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.record_stride = 10;

  {
    cfg.t_end = 2.0;
    const auto e = build_model(
        ModelFamily::SchrodingerLohe,
        {{6}, 4, detail::mask_map({{"0", 1.0}}),
         FreeFlowSpec::spectral({{0.0, 0.5, 0.5, 2.0, 2.0, 4.5}}), 131});
    detail::record_check(out, "flux/rank1", flux_identity_residual(integrate(e, cfg), e.couplings()),
                         1e-4, tol);
  }
  {
    cfg.t_end = 1.0;
    const auto e = build_model(ModelFamily::SLMatrix,
                               {{2, 2},
                                3,
                                detail::mask_map({{"01", 0.7}, {"10", 0.4}}),
                                FreeFlowSpec::spectral({{0.0, 1.0}, {0.0, 0.5}}),
                                132});
    detail::record_check(out, "flux/rank2", flux_identity_residual(integrate(e, cfg), e.couplings()),
                         1e-4, tol);
  }
}

// Coefficient-side geometry against grid quadrature.
inline void verify_bridge(std::vector<VerifyResult>& out, double tol = 0.0) {
  {
    const auto basis = SpectralBasis::fourier({8}, 17);
    const auto agents = random_unit_ensemble(basis.coefficient_shape(), 3, 141);
    detail::record_check(out, "bridge/inner_rank1", bridge_residual(agents, basis, 0.7), 1e-10,
                         tol);
    for (const char* m : {"0", "1"}) {
      const double gap =
          std::abs(flux_quadrature_oracle(agents, basis, Bitmask::from_string(m), 0.7) -
                   aggregation_flux(agents, Bitmask::from_string(m)));
      detail::record_check(out, std::string("bridge/flux_mask_") + m, gap, 1e-8, tol);
    }
  }
  {
    const auto basis = SpectralBasis::fourier({4, 3});
    const auto agents = random_unit_ensemble(basis.coefficient_shape(), 3, 142);
    detail::record_check(out, "bridge/inner_rank2", bridge_residual(agents, basis, 0.4), 1e-10,
                         tol);
    for (const char* m : {"01", "10"}) {
      const double gap =
          std::abs(flux_quadrature_oracle(agents, basis, Bitmask::from_string(m), 0.4) -
                   aggregation_flux(agents, Bitmask::from_string(m)));
      detail::record_check(out, std::string("bridge/flux_mask_") + m, gap, 1e-8, tol);
    }
  }
}

// Generic coupling kernel against hand-coded rank-1 and rank-2 laws.
inline void verify_equivalence(std::vector<VerifyResult>& out, double tol = 0.0) {
  {  // sphere: mask 0 -> <v,v> c - <c,v> v, mask 1 -> (<v,c> - <c,v>) v
    const auto agents = random_unit_ensemble(TensorShape({5}), 4, 151);
    const ComplexTensor tc = centroid(agents);
    double worst = 0.0;
    for (const auto& v : agents) {
      const Complex vv = frobenius_inner(v, v);
      const Complex cv = frobenius_inner(tc, v);
      const Complex vc = frobenius_inner(v, tc);

      ComplexTensor want0 = tc;
      want0 *= vv;
      ComplexTensor sub0 = v;
      sub0 *= cv;
      want0 -= sub0;
      ComplexTensor got0 = coupling_term(tc, v, Bitmask::from_string("0"));
      got0 -= want0;
      worst = std::max(worst, frobenius_norm(got0));

      ComplexTensor want1 = v;
      want1 *= (vc - cv);
      ComplexTensor got1 = coupling_term(tc, v, Bitmask::from_string("1"));
      got1 -= want1;
      worst = std::max(worst, frobenius_norm(got1));
    }
    detail::record_check(out, "equivalence/sphere", worst, 1e-12, tol);
  }

  {  // matrices: 01 -> Ac Aj+ Aj - Aj Ac+ Aj, 10 -> Aj Aj+ Ac - Aj Ac+ Aj
    const int d1 = 3, d2 = 2;
    const auto agents = random_unit_ensemble(TensorShape({d1, d2}), 3, 152);
    const ComplexTensor tc = centroid(agents);
    const auto mul = [&](const std::vector<Complex>& a, const std::vector<Complex>& b, int n,
                         int k, int p) {
      std::vector<Complex> c(static_cast<std::size_t>(n) * static_cast<std::size_t>(p));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) {
          Complex acc(0, 0);
          for (int l = 0; l < k; ++l)
            acc += a[static_cast<std::size_t>(i * k + l)] * b[static_cast<std::size_t>(l * p + j)];
          c[static_cast<std::size_t>(i * p + j)] = acc;
        }
      return c;
    };
    const auto adj = [&](const std::vector<Complex>& a, int n, int p) {
      std::vector<Complex> c(static_cast<std::size_t>(n) * static_cast<std::size_t>(p));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j)
          c[static_cast<std::size_t>(j * n + i)] = std::conj(a[static_cast<std::size_t>(i * p + j)]);
      return c;
    };

    double worst = 0.0;
    for (const auto& aj : agents) {
      const auto& ac = tc.entries();
      const auto& am = aj.entries();
      const auto ajd = adj(am, d1, d2);
      const auto acd = adj(ac, d1, d2);

      const auto want01 = [&] {
        auto left = mul(ac, mul(ajd, am, d2, d1, d2), d1, d2, d2);
        const auto right = mul(am, mul(acd, am, d2, d1, d2), d1, d2, d2);
        for (std::size_t i = 0; i < left.size(); ++i) left[i] -= right[i];
        return left;
      }();
      const auto want10 = [&] {
        auto left = mul(am, mul(ajd, ac, d2, d1, d2), d1, d2, d2);
        const auto right = mul(am, mul(acd, am, d2, d1, d2), d1, d2, d2);
        for (std::size_t i = 0; i < left.size(); ++i) left[i] -= right[i];
        return left;
      }();

      const auto got01 = coupling_term(tc, aj, Bitmask::from_string("01"));
      const auto got10 = coupling_term(tc, aj, Bitmask::from_string("10"));
      double acc01 = 0.0, acc10 = 0.0;
      for (std::size_t i = 0; i < want01.size(); ++i) {
        acc01 += std::norm(got01[i] - want01[i]);
        acc10 += std::norm(got10[i] - want10[i]);
      }
      worst = std::max({worst, std::sqrt(acc01), std::sqrt(acc10)});
    }
    detail::record_check(out, "equivalence/matrix", worst, 1e-12, tol);
  }
}

inline std::vector<VerifyResult> run_verify(const std::string& suite, double tol = 0.0) {
  std::vector<VerifyResult> out;
  bool matched = false;
  const bool all = suite == "all";
  if (all || suite == "conservation") {
    verify_conservation(out, tol);
    matched = true;
  }
  if (all || suite == "splitting") {
    verify_splitting(out, tol);
    matched = true;
  }
  if (all || suite == "kuramoto") {
    verify_kuramoto(out, tol);
    matched = true;
  }
  if (all || suite == "flux") {
    verify_flux(out, tol);
    matched = true;
  }
  if (all || suite == "bridge") {
    verify_bridge(out, tol);
    matched = true;
  }
  if (all || suite == "equivalence") {
    verify_equivalence(out, tol);
    matched = true;
  }
  if (!matched)
    throw usage_error("verify: unknown suite '" + suite +
                      "' (conservation, splitting, kuramoto, flux, bridge, equivalence, all)");
  return out;
}

inline bool all_passed(std::span<const VerifyResult> results) {
  for (const auto& r : results)
    if (!r.pass) return false;
  return !results.empty();
}

inline void print_verify_results(std::ostream& os, std::span<const VerifyResult> results) {
  char buf[64];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof(buf), "%.3g (tol %.3g)", r.value, r.tolerance);
    os << (r.pass ? "[pass] " : "[FAIL] ") << r.name << ": " << buf << '\n';
  }
}

}  // namespace lohe::cli
