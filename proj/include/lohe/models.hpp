#pragma once

// Model families of the aggregation hierarchy and their shared derivative.
// Every family is an instance of one tensor equation
//
//   dT_j/dt = F T_j + sum_masks kappa_mask (A_c conj(A_j) A_j - A_j conj(A_c) A_j)
//
// differing only in rank, coupling map and free flow: the sphere model is
// rank 1 with masks {0, 1}, the matrix model rank 2 with masks {01, 10}, and
// the Schrodinger liftings are the same structures on spectral coefficients.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lohe/freeflow.hpp"
#include "lohe/tensor.hpp"

namespace lohe {

// Mask -> coupling strength; strengths must be finite and >= 0, masks must
// share one length.  A missing mask means zero coupling and is skipped by
// the evaluator, as are explicit zeros.
class CouplingMap {
 public:
  CouplingMap() = default;

  explicit CouplingMap(std::map<Bitmask, double> strengths) : strengths_(std::move(strengths)) {
    for (const auto& [mask, kappa] : strengths_) {
      if (!std::isfinite(kappa) || kappa < 0.0)
        throw usage_error("CouplingMap: coupling strengths must be finite and >= 0");
      if (mask.length() != strengths_.begin()->first.length())
        throw usage_error("CouplingMap: masks must share one length");
    }
  }

  const std::map<Bitmask, double>& strengths() const { return strengths_; }
  bool empty() const { return strengths_.empty(); }

  // zero when the map is empty, i.e. unconstrained
  int rank() const { return strengths_.empty() ? 0 : strengths_.begin()->first.length(); }

  std::vector<std::pair<Bitmask, double>> active() const {
    std::vector<std::pair<Bitmask, double>> out;
    for (const auto& [mask, kappa] : strengths_)
      if (kappa > 0.0) out.emplace_back(mask, kappa);
    return out;
  }

 private:
  std::map<Bitmask, double> strengths_;
};

// Agents with one shared shape plus the coupling and free-flow structure.
class Ensemble {
 public:
  Ensemble(std::vector<ComplexTensor> agents, CouplingMap couplings, FreeFlowSpec free_flow,
           bool require_unit_norm = false)
      : agents_(std::move(agents)),
        couplings_(std::move(couplings)),
        free_flow_(std::move(free_flow)),
        unit_norm_(require_unit_norm) {
    if (agents_.empty()) throw usage_error("Ensemble: need at least one agent");
    const TensorShape& shape = agents_[0].shape();
    for (const auto& t : agents_) {
      if (t.shape() != shape) throw usage_error("Ensemble: agents must share one shape");
      if (!is_finite(t)) throw usage_error("Ensemble: agent entries must be finite");
      if (unit_norm_ && std::abs(frobenius_norm(t) - 1.0) > 1e-12)
        throw usage_error("Ensemble: family requires unit-norm agents");
    }
    if (!couplings_.empty() && couplings_.rank() != shape.rank())
      throw usage_error("Ensemble: coupling mask length does not match tensor rank");
    free_flow_.check_shape(shape);
  }

  const std::vector<ComplexTensor>& agents() const { return agents_; }
  const CouplingMap& couplings() const { return couplings_; }
  const FreeFlowSpec& free_flow() const { return free_flow_; }
  bool unit_norm_required() const { return unit_norm_; }
  int size() const { return static_cast<int>(agents_.size()); }
  const TensorShape& shape() const { return agents_[0].shape(); }

  Ensemble with_agents(std::vector<ComplexTensor> agents) const {
    return Ensemble(std::move(agents), couplings_, free_flow_, unit_norm_);
  }

 private:
  std::vector<ComplexTensor> agents_;
  CouplingMap couplings_;
  FreeFlowSpec free_flow_;
  bool unit_norm_ = false;
};

// Full hierarchy derivative at an arbitrary state (the integrator calls this
// at RK stages).  The centroid is summed once, left to right, so replays are
// bit-identical.
inline std::vector<ComplexTensor> lt_rhs(std::span<const ComplexTensor> agents,
                                         const CouplingMap& couplings,
                                         const FreeFlowSpec& free_flow) {
  if (agents.empty()) throw usage_error("lt_rhs: empty ensemble");
  const ComplexTensor tc = centroid(agents);
  const auto active = couplings.active();
  std::vector<ComplexTensor> out;
  out.reserve(agents.size());
  for (const auto& tj : agents) {
    ComplexTensor r = apply_generator(free_flow, tj);
    for (const auto& [mask, kappa] : active) {
      ComplexTensor term = coupling_term(tc, tj, mask);
      term *= Complex(kappa, 0.0);
      r += term;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<ComplexTensor> lt_rhs(const Ensemble& ensemble) {
  return lt_rhs(ensemble.agents(), ensemble.couplings(), ensemble.free_flow());
}

// --- deterministic initial data ---------------------------------------------

// Box-Muller over the fully specified mt19937_64 stream; avoids the
// implementation-defined std::normal_distribution so replays are portable.
inline double standard_normal(std::mt19937_64& rng) {
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

inline ComplexTensor random_unit_tensor(const TensorShape& shape, std::mt19937_64& rng) {
  std::vector<Complex> e(shape.size());
  for (auto& v : e) {
    const double re = standard_normal(rng);
    const double im = standard_normal(rng);
    v = Complex(re, im);
  }
  ComplexTensor t(shape, std::move(e));
  const double n = frobenius_norm(t);
  if (n == 0.0) throw numeric_error("random_unit_tensor: zero draw");
  t *= Complex(1.0 / n, 0.0);
  return t;
}

inline ComplexTensor random_unit_tensor(const TensorShape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_unit_tensor(shape, rng);
}

inline std::vector<ComplexTensor> random_unit_ensemble(const TensorShape& shape, int n,
                                                       std::uint64_t seed) {
  if (n < 1) throw usage_error("random_unit_ensemble: need n >= 1");
  std::mt19937_64 rng(seed);
  std::vector<ComplexTensor> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(random_unit_tensor(shape, rng));
  return out;
}

// n_total agents on one random unit state: the first n_total - n_minus on
// +Psi, the remaining n_minus on -Psi.  Order parameter |1 - 2 n_minus / N|
// exactly (up to the normalization rounding).
inline std::vector<ComplexTensor> bipolar_ensemble(const TensorShape& shape, int n_total,
                                                   int n_minus, std::uint64_t seed) {
  if (n_total < 2 || n_minus < 1 || n_minus >= n_total)
    throw usage_error("bipolar_ensemble: need N >= 2 and 1 <= n_minus < N");
  const ComplexTensor psi = random_unit_tensor(shape, seed);
  ComplexTensor neg = psi;
  neg *= Complex(-1.0, 0.0);
  std::vector<ComplexTensor> out(static_cast<std::size_t>(n_total), psi);
  for (int i = n_total - n_minus; i < n_total; ++i) out[static_cast<std::size_t>(i)] = neg;
  return out;
}

struct PhaseFamilyEnsemble {
  ComplexTensor base;
  std::vector<double> phases;
  std::vector<ComplexTensor> agents;
};

// agents j = exp(i theta_j) base with a shared random base and uniform random
// phases.
inline PhaseFamilyEnsemble phase_family_ensemble(const TensorShape& shape, int n,
                                                 std::uint64_t seed) {
  if (n < 1) throw usage_error("phase_family_ensemble: need n >= 1");
  std::mt19937_64 rng(seed);
  PhaseFamilyEnsemble out;
  out.base = random_unit_tensor(shape, rng);
  for (int j = 0; j < n; ++j) {
    const double theta =
        6.283185307179586476925286766559 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    out.phases.push_back(theta);
    ComplexTensor agent = out.base;
    agent *= std::polar(1.0, theta);
    out.agents.push_back(std::move(agent));
  }
  return out;
}

// --- family builders ---------------------------------------------------------

enum class ModelFamily {
  LoheSphere,
  LoheMatrix,
  SchrodingerLohe,
  RotationalSL,
  SLMatrix,
  SLTensor,
  LoheTensor,
};

inline const char* family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::LoheSphere: return "lohe_sphere";
    case ModelFamily::LoheMatrix: return "lohe_matrix";
    case ModelFamily::SchrodingerLohe: return "schrodinger_lohe";
    case ModelFamily::RotationalSL: return "rotational_sl";
    case ModelFamily::SLMatrix: return "slm";
    case ModelFamily::SLTensor: return "slt";
    case ModelFamily::LoheTensor: return "lohe_tensor";
  }
  return "?";
}

inline ModelFamily family_from_name(const std::string& name) {
  for (ModelFamily f : {ModelFamily::LoheSphere, ModelFamily::LoheMatrix,
                        ModelFamily::SchrodingerLohe, ModelFamily::RotationalSL,
                        ModelFamily::SLMatrix, ModelFamily::SLTensor, ModelFamily::LoheTensor})
    if (name == family_name(f)) return f;
  throw usage_error("unknown model family '" + name + "'");
}

struct ModelParams {
  std::vector<int> dims;
  int agents = 0;
  std::map<Bitmask, double> kappa;
  // Liftings accept SpectralDiagonal (Absent means a zero Hamiltonian); the
  // finite families also accept a dense skew-Hermitian generator.
  FreeFlowSpec free_flow = FreeFlowSpec::absent();
  std::uint64_t seed = 0;
};

namespace detail {

inline void require_masks_subset(const std::map<Bitmask, double>& kappa,
                                 std::initializer_list<const char*> allowed,
                                 const char* family) {
  for (const auto& [mask, unused] : kappa) {
    bool ok = false;
    for (const char* a : allowed)
      if (mask.to_string() == a) ok = true;
    if (!ok)
      throw usage_error(std::string(family) + ": mask '" + mask.to_string() +
                        "' is not part of this family");
  }
}

}  // namespace detail

// Constructs the family's Ensemble with seeded random unit initial data.
// Callers wanting special initial data (bipolar, phase family, file) swap
// agents in afterwards via Ensemble::with_agents.
inline Ensemble build_model(ModelFamily family, const ModelParams& p) {
  if (static_cast<int>(p.dims.size()) > max_model_rank)
    throw usage_error("build_model: rank capped at 3");
  const TensorShape shape(p.dims);
  if (p.agents < 1) throw usage_error("build_model: need at least one agent");

  const bool spectral_only = family == ModelFamily::SchrodingerLohe ||
                             family == ModelFamily::RotationalSL ||
                             family == ModelFamily::SLMatrix || family == ModelFamily::SLTensor;
  if (spectral_only && p.free_flow.kind() == FreeFlowSpec::Kind::DenseGenerator)
    throw usage_error("build_model: lifting families take a spectral free flow");

  const bool unit_norm = family != ModelFamily::LoheMatrix && family != ModelFamily::LoheTensor;

  const int rank = shape.rank();
  switch (family) {
    case ModelFamily::LoheSphere:
      if (rank != 1) throw usage_error("lohe_sphere: rank must be 1");
      detail::require_masks_subset(p.kappa, {"0", "1"}, "lohe_sphere");
      break;
    case ModelFamily::SchrodingerLohe:
      if (rank != 1) throw usage_error("schrodinger_lohe: rank must be 1");
      detail::require_masks_subset(p.kappa, {"0"}, "schrodinger_lohe");
      break;
    case ModelFamily::RotationalSL:
      if (rank != 1) throw usage_error("rotational_sl: rank must be 1");
      detail::require_masks_subset(p.kappa, {"1"}, "rotational_sl");
      break;
    case ModelFamily::LoheMatrix:
      if (rank != 2) throw usage_error("lohe_matrix: rank must be 2");
      detail::require_masks_subset(p.kappa, {"01", "10"}, "lohe_matrix");
      break;
    case ModelFamily::SLMatrix:
      if (rank != 2) throw usage_error("slm: rank must be 2");
      detail::require_masks_subset(p.kappa, {"01", "10"}, "slm");
      break;
    case ModelFamily::SLTensor:
    case ModelFamily::LoheTensor:
      for (const auto& [mask, unused] : p.kappa)
        if (mask.length() != rank)
          throw usage_error("build_model: mask length does not match rank");
      break;
  }

  return Ensemble(random_unit_ensemble(shape, p.agents, p.seed), CouplingMap(p.kappa),
                  p.free_flow, unit_norm);
}

// --- Kuramoto reduction -------------------------------------------------------

// Phase ensemble of the reduction; `coupling` is the kappa of the rotational
// lifting, the reduction's own factor 2 is applied inside kuramoto_rhs.
struct PhaseState {
  std::vector<double> phases;
  double coupling = 0.0;
};

inline std::vector<double> kuramoto_rhs(const PhaseState& state) {
  if (state.phases.empty()) throw usage_error("kuramoto_rhs: empty phase vector");
  if (!std::isfinite(state.coupling) || state.coupling < 0.0)
    throw usage_error("kuramoto_rhs: coupling must be finite and >= 0");
  for (double th : state.phases)
    if (!std::isfinite(th)) throw usage_error("kuramoto_rhs: non-finite phase");
  const auto n = state.phases.size();
  const double scale = 2.0 * state.coupling / static_cast<double>(n);
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += std::sin(state.phases[k] - state.phases[j]);
    out[j] = scale * acc;
  }
  return out;
}

// --- phase-family membership ----------------------------------------------------

struct PhaseFamilyReport {
  std::vector<double> phases;  // arg <base_t, agent_j>
  double max_residual = 0.0;   // worst || agent_j - e^{i theta_j} base_t ||
};

// Extracts per-agent phases against an already-evolved base state.  Callers
// walking a trajectory pass apply_exp(free_flow, t, base) here per snapshot.
inline PhaseFamilyReport extract_phase_family(std::span<const ComplexTensor> agents,
                                              const ComplexTensor& evolved_base) {
  if (agents.empty()) throw usage_error("extract_phase_family: empty ensemble");
  PhaseFamilyReport report;
  for (const auto& agent : agents) {
    const Complex s = frobenius_inner(evolved_base, agent);
    const double theta = (s == Complex(0, 0)) ? 0.0 : std::arg(s);
    report.phases.push_back(theta);
    ComplexTensor delta = agent;
    ComplexTensor rotated = evolved_base;
    rotated *= std::polar(1.0, theta);
    delta -= rotated;
    report.max_residual = std::max(report.max_residual, frobenius_norm(delta));
  }
  return report;
}

// Verifies the ensemble currently sits in the phase family of `base`;
// initial data outside the family is a usage error.
inline PhaseFamilyReport phase_family_check(const Ensemble& ensemble, const ComplexTensor& base,
                                            double tolerance = 1e-6) {
  const PhaseFamilyReport report = extract_phase_family(ensemble.agents(), base);
  if (report.max_residual > tolerance)
    throw usage_error("phase_family_check: initial data is not in the phase family");
  return report;
}

}  // namespace lohe
