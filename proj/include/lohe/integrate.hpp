#pragma once

// Fixed-step RK4 time integration of the hierarchy, with norm-conservation
// surveillance, and the split integrator that composes the zero-free-flow
// subsystem with exp(tF) at record times.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "lohe/diagnostics.hpp"
#include "lohe/freeflow.hpp"
#include "lohe/models.hpp"
#include "lohe/tensor.hpp"
#include "lohe/trajectory.hpp"

namespace lohe {

namespace detail {

inline void check_stage_finite(const std::vector<ComplexTensor>& stage, const char* name) {
  for (const auto& t : stage)
    if (!is_finite(t))
      throw numeric_error(std::string("rk4_step: non-finite values in stage ") + name);
}

// y += a * x
inline void axpy_state(std::vector<ComplexTensor>& y, double a,
                       const std::vector<ComplexTensor>& x) {
  for (std::size_t j = 0; j < y.size(); ++j) {
    auto& ye = y[j].entries();
    const auto& xe = x[j].entries();
    for (std::size_t i = 0; i < ye.size(); ++i) ye[i] += a * xe[i];
  }
}

}  // namespace detail

// One classical RK4 step of y' = rhs(y); every stage is checked for finite
// values and failures name the stage.
template <class Rhs>
std::vector<ComplexTensor> rk4_step(const std::vector<ComplexTensor>& state, Rhs&& rhs,
                                    double dt) {
  if (state.empty()) throw usage_error("rk4_step: empty state");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw usage_error("rk4_step: dt must be > 0");

  const auto k1 = rhs(state);
  detail::check_stage_finite(k1, "k1");
  auto y2 = state;
  detail::axpy_state(y2, dt / 2.0, k1);
  const auto k2 = rhs(y2);
  detail::check_stage_finite(k2, "k2");
  auto y3 = state;
  detail::axpy_state(y3, dt / 2.0, k2);
  const auto k3 = rhs(y3);
  detail::check_stage_finite(k3, "k3");
  auto y4 = state;
  detail::axpy_state(y4, dt, k3);
  const auto k4 = rhs(y4);
  detail::check_stage_finite(k4, "k4");

  auto out = state;
  detail::axpy_state(out, dt / 6.0, k1);
  detail::axpy_state(out, dt / 3.0, k2);
  detail::axpy_state(out, dt / 3.0, k3);
  detail::axpy_state(out, dt / 6.0, k4);
  return out;
}

namespace detail {

struct StepGrid {
  std::size_t steps = 0;
  double dt_last = 0.0;  // final step length in (0, dt]

  static StepGrid make(const SimConfig& config) {
    StepGrid g;
    const double ratio = config.t_end / config.dt;
    const double rounded = std::round(ratio);
    // snap to an integer step count when t_end is a multiple of dt up to
    // rounding, otherwise take a shorter final step
    if (rounded >= 1.0 && std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, ratio))
      g.steps = static_cast<std::size_t>(rounded);
    else
      g.steps = static_cast<std::size_t>(std::ceil(ratio));
    if (g.steps == 0) g.steps = 1;
    g.dt_last = config.t_end - static_cast<double>(g.steps - 1) * config.dt;
    if (g.dt_last <= 0.0 && g.steps > 1) {
      g.steps -= 1;
      g.dt_last = config.t_end - static_cast<double>(g.steps - 1) * config.dt;
    }
    return g;
  }

  double time_of(std::size_t step, const SimConfig& config) const {
    if (step >= steps) return config.t_end;
    return static_cast<double>(step) * config.dt;
  }
};

template <class Rhs, class Compose>
TrajectoryRecord run_fixed_rk4(const Ensemble& ensemble, const SimConfig& config,
                               const ObserverSet& observers, Rhs&& rhs, Compose&& compose) {
  config.validate();
  const auto grid = StepGrid::make(config);
  auto state = ensemble.agents();
  const auto active = ensemble.couplings().active();

  std::vector<double> norms0;
  norms0.reserve(state.size());
  for (const auto& t : state) norms0.push_back(frobenius_norm(t));

  TrajectoryRecord record;
  record.agent_count = ensemble.size();

  const auto record_point = [&](double t, const std::vector<ComplexTensor>& raw) {
    const std::vector<ComplexTensor>& composed = compose(t, raw);
    record.times.push_back(t);
    if (observers.order_parameter) record.order_parameter.push_back(order_parameter(composed));
    if (observers.diameter) record.diameter.push_back(ensemble_diameter(composed));
    if (observers.norm_drift) {
      double drift = 0.0;
      for (std::size_t j = 0; j < composed.size(); ++j)
        drift = std::max(drift, std::abs(frobenius_norm(composed[j]) - norms0[j]));
      record.norm_drift_max.push_back(drift);
    }
    if (observers.flux)
      for (const auto& [mask, kappa] : active)
        record.flux[mask].push_back(aggregation_flux(composed, mask));
    if (observers.gram) record.gram.push_back(pairwise_gram(composed));
    if (observers.states) record.states.push_back(composed);
  };

  record_point(0.0, state);
  for (std::size_t step = 1; step <= grid.steps; ++step) {
    const double h = (step == grid.steps) ? grid.dt_last : config.dt;
    state = rk4_step(state, rhs, h);
    const double t = grid.time_of(step, config);

    double drift = 0.0;
    for (std::size_t j = 0; j < state.size(); ++j)
      drift = std::max(drift, std::abs(frobenius_norm(state[j]) - norms0[j]));
    if (drift > config.conservation_tol * (1.0 + t))
      throw numeric_error("integrate: norm drift " + std::to_string(drift) +
                          " exceeds tolerance at t = " + std::to_string(t));

    if (step % static_cast<std::size_t>(config.record_stride) == 0 || step == grid.steps)
      record_point(t, state);
  }
  return record;
}

}  // namespace detail

// Integrates the full hierarchy derivative.  Records at every record_stride-th
// step (step 0 and the final step always) and aborts with a numeric error if
// any agent norm drifts from its initial value by more than
// conservation_tol * (1 + t).
inline TrajectoryRecord integrate(const Ensemble& ensemble, const SimConfig& config,
                                  const ObserverSet& observers = {}) {
  const auto rhs = [&](const std::vector<ComplexTensor>& y) {
    return lt_rhs(y, ensemble.couplings(), ensemble.free_flow());
  };
  const auto compose = [](double, const std::vector<ComplexTensor>& y)
      -> const std::vector<ComplexTensor>& { return y; };
  return detail::run_fixed_rk4(ensemble, config, observers, rhs, compose);
}

// Solution splitting: integrates the zero-free-flow subsystem and composes
// with exp(tF) at record times.  Requires a spectral free flow or a dense
// generator that passes the compatibility validation at the ensemble's
// active masks (checked here; failure is a usage error).
inline TrajectoryRecord split_integrate(const Ensemble& ensemble, const SimConfig& config,
                                        const ObserverSet& observers = {}) {
  const FreeFlowSpec& ff = ensemble.free_flow();
  if (ff.kind() == FreeFlowSpec::Kind::Absent)
    throw usage_error("split_integrate: ensemble has no free flow to split off");
  if (ff.kind() == FreeFlowSpec::Kind::DenseGenerator) {
    std::vector<Bitmask> masks;
    for (const auto& [mask, kappa] : ensemble.couplings().active()) masks.push_back(mask);
    if (!masks.empty()) {
      const auto report = validate_generator(ff, ensemble.shape(), masks);
      if (!report.passed)
        throw usage_error(
            "split_integrate: dense generator fails the splitting compatibility check "
            "(max deviation " +
            std::to_string(report.max_deviation) + ")");
    }
  }

  const FreeFlowSpec no_flow = FreeFlowSpec::absent();
  const auto rhs = [&](const std::vector<ComplexTensor>& y) {
    return lt_rhs(y, ensemble.couplings(), no_flow);
  };
  std::vector<ComplexTensor> composed;
  const auto compose = [&](double t,
                           const std::vector<ComplexTensor>& y) -> const std::vector<ComplexTensor>& {
    composed.clear();
    composed.reserve(y.size());
    for (const auto& s : y) composed.push_back(apply_exp(ff, t, s));
    return composed;
  };
  return detail::run_fixed_rk4(ensemble, config, observers, rhs, compose);
}

}  // namespace lohe
