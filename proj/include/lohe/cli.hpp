#pragma once

// JSON-configured front end shared by the lohesim tool and the tests: run
// configurations, initial-data assembly, output writers, the coupling sweep
// and the built-in verification harness.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lohe/diagnostics.hpp"
#include "lohe/integrate.hpp"
#include "lohe/models.hpp"
#include "lohe/spectral.hpp"

namespace lohe::cli {

using nlohmann::json;

enum class InitialKind { Random, File, Bipolar, PhaseFamily };

inline const char* initial_kind_name(InitialKind k) {
  switch (k) {
    case InitialKind::Random: return "random";
    case InitialKind::File: return "file";
    case InitialKind::Bipolar: return "bipolar";
    case InitialKind::PhaseFamily: return "phase_family";
  }
  return "?";
}

inline InitialKind initial_kind_from_name(const std::string& name) {
  for (InitialKind k : {InitialKind::Random, InitialKind::File, InitialKind::Bipolar,
                        InitialKind::PhaseFamily})
    if (name == initial_kind_name(k)) return k;
  throw usage_error("config: unknown initial kind '" + name + "'");
}

struct RunConfig {
  ModelFamily family = ModelFamily::SchrodingerLohe;
  ModelParams params;  // free_flow stays Absent here; make_free_flow builds it

  std::string free_flow_kind = "none";  // none | spectral | dense
  std::vector<std::vector<double>> eigenvalues;
  std::string generator_file;

  InitialKind initial = InitialKind::Random;
  std::string initial_file;
  bool normalize = false;
  int bipolar_n = 1;

  SimConfig sim;
  bool split = false;

  ObserverSet observers;
  std::string output_dir = "out";
  bool write_series = true;
  bool write_summary = true;
  bool write_snapshot = false;
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                           const char* block) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys)
      if (item.key() == k) known = true;
    if (!known)
      throw usage_error("config: unknown key '" + item.key() + "' in " + block);
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const json& j) {
  try {
    detail::reject_unknown(j, {"model", "free_flow", "initial", "integrate", "outputs"}, "config");
    RunConfig cfg;

    const json& model = j.at("model");
    detail::reject_unknown(model, {"family", "dims", "agents", "kappa"}, "model");
    cfg.family = family_from_name(model.at("family").get<std::string>());
    cfg.params.dims = model.at("dims").get<std::vector<int>>();
    cfg.params.agents = model.at("agents").get<int>();
    if (model.contains("kappa"))
      for (const auto& item : model.at("kappa").items())
        cfg.params.kappa.emplace(Bitmask::from_string(item.key()), item.value().get<double>());

    if (j.contains("free_flow")) {
      const json& ff = j.at("free_flow");
      detail::reject_unknown(ff, {"kind", "eigenvalues", "generator_file"}, "free_flow");
      cfg.free_flow_kind = ff.at("kind").get<std::string>();
      if (cfg.free_flow_kind == "none") {
      } else if (cfg.free_flow_kind == "spectral") {
        cfg.eigenvalues = ff.at("eigenvalues").get<std::vector<std::vector<double>>>();
      } else if (cfg.free_flow_kind == "dense") {
        cfg.generator_file = ff.at("generator_file").get<std::string>();
      } else {
        throw usage_error("config: free_flow.kind must be none, spectral or dense");
      }
    }

    if (j.contains("initial")) {
      const json& init = j.at("initial");
      detail::reject_unknown(init, {"kind", "seed", "file", "normalize", "bipolar_n"}, "initial");
      if (init.contains("kind"))
        cfg.initial = initial_kind_from_name(init.at("kind").get<std::string>());
      if (init.contains("seed")) cfg.params.seed = init.at("seed").get<std::uint64_t>();
      if (init.contains("file")) cfg.initial_file = init.at("file").get<std::string>();
      if (init.contains("normalize")) cfg.normalize = init.at("normalize").get<bool>();
      if (init.contains("bipolar_n")) cfg.bipolar_n = init.at("bipolar_n").get<int>();
      if (cfg.initial == InitialKind::File && cfg.initial_file.empty())
        throw usage_error("config: initial.kind = file needs initial.file");
    }

    if (j.contains("integrate")) {
      const json& in = j.at("integrate");
      detail::reject_unknown(in, {"dt", "t_end", "record_stride", "conservation_tol", "split"},
                             "integrate");
      if (in.contains("dt")) cfg.sim.dt = in.at("dt").get<double>();
      if (in.contains("t_end")) cfg.sim.t_end = in.at("t_end").get<double>();
      if (in.contains("record_stride")) cfg.sim.record_stride = in.at("record_stride").get<int>();
      if (in.contains("conservation_tol"))
        cfg.sim.conservation_tol = in.at("conservation_tol").get<double>();
      if (in.contains("split")) cfg.split = in.at("split").get<bool>();
    }

    if (j.contains("outputs")) {
      const json& out = j.at("outputs");
      detail::reject_unknown(out, {"directory", "series", "summary", "snapshot", "observers"},
                             "outputs");
      if (out.contains("directory")) cfg.output_dir = out.at("directory").get<std::string>();
      if (out.contains("series")) cfg.write_series = out.at("series").get<bool>();
      if (out.contains("summary")) cfg.write_summary = out.at("summary").get<bool>();
      if (out.contains("snapshot")) cfg.write_snapshot = out.at("snapshot").get<bool>();
      if (out.contains("observers")) {
        const json& obs = out.at("observers");
        detail::reject_unknown(
            obs, {"order_parameter", "diameter", "norm_drift", "flux", "gram", "states"},
            "observers");
        if (obs.contains("order_parameter"))
          cfg.observers.order_parameter = obs.at("order_parameter").get<bool>();
        if (obs.contains("diameter")) cfg.observers.diameter = obs.at("diameter").get<bool>();
        if (obs.contains("norm_drift")) cfg.observers.norm_drift = obs.at("norm_drift").get<bool>();
        if (obs.contains("flux")) cfg.observers.flux = obs.at("flux").get<bool>();
        if (obs.contains("gram")) cfg.observers.gram = obs.at("gram").get<bool>();
        if (obs.contains("states")) cfg.observers.states = obs.at("states").get<bool>();
      }
    }
    return cfg;
  } catch (const json::exception& e) {
    throw usage_error(std::string("config: ") + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw usage_error(std::string("config: ") + e.what());
  }
  return parse_run_config(j);
}

// Echo that parses back to the same configuration; summary.json embeds it.
inline json run_config_to_json(const RunConfig& cfg) {
  json j;
  j["model"]["family"] = family_name(cfg.family);
  j["model"]["dims"] = cfg.params.dims;
  j["model"]["agents"] = cfg.params.agents;
  j["model"]["kappa"] = json::object();
  for (const auto& [mask, kappa] : cfg.params.kappa) j["model"]["kappa"][mask.to_string()] = kappa;

  j["free_flow"]["kind"] = cfg.free_flow_kind;
  if (cfg.free_flow_kind == "spectral") j["free_flow"]["eigenvalues"] = cfg.eigenvalues;
  if (cfg.free_flow_kind == "dense") j["free_flow"]["generator_file"] = cfg.generator_file;

  j["initial"]["kind"] = initial_kind_name(cfg.initial);
  j["initial"]["seed"] = cfg.params.seed;
  if (cfg.initial == InitialKind::File) {
    j["initial"]["file"] = cfg.initial_file;
    j["initial"]["normalize"] = cfg.normalize;
  }
  if (cfg.initial == InitialKind::Bipolar) j["initial"]["bipolar_n"] = cfg.bipolar_n;

  j["integrate"]["dt"] = cfg.sim.dt;
  j["integrate"]["t_end"] = cfg.sim.t_end;
  j["integrate"]["record_stride"] = cfg.sim.record_stride;
  j["integrate"]["conservation_tol"] = cfg.sim.conservation_tol;
  j["integrate"]["split"] = cfg.split;

  j["outputs"]["directory"] = cfg.output_dir;
  j["outputs"]["series"] = cfg.write_series;
  j["outputs"]["summary"] = cfg.write_summary;
  j["outputs"]["snapshot"] = cfg.write_snapshot;
  j["outputs"]["observers"]["order_parameter"] = cfg.observers.order_parameter;
  j["outputs"]["observers"]["diameter"] = cfg.observers.diameter;
  j["outputs"]["observers"]["norm_drift"] = cfg.observers.norm_drift;
  j["outputs"]["observers"]["flux"] = cfg.observers.flux;
  j["outputs"]["observers"]["gram"] = cfg.observers.gram;
  j["outputs"]["observers"]["states"] = cfg.observers.states;
  return j;
}

// --- ensemble snapshots ------------------------------------------------------

inline void save_ensemble(std::ostream& os, std::span<const ComplexTensor> agents) {
  if (agents.empty()) throw usage_error("save_ensemble: empty ensemble");
  const auto& dims = agents.front().shape().dims();
  os << "shape=";
  for (std::size_t k = 0; k < dims.size(); ++k) os << (k ? "," : "") << dims[k];
  os << "\nagents=" << agents.size() << '\n';
  char buf[96];
  for (const auto& agent : agents)
    for (const Complex& v : agent.entries()) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g", v.real(), v.imag());
      os << buf << '\n';
    }
}

inline void save_ensemble(const std::string& path, std::span<const ComplexTensor> agents) {
  std::ofstream os(path);
  if (!os) throw usage_error("save_ensemble: cannot open '" + path + "'");
  save_ensemble(os, agents);
}

inline std::vector<ComplexTensor> load_ensemble(std::istream& is) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    lines.push_back(line.substr(first));
  }
  if (lines.size() < 2 || lines[0].rfind("shape=", 0) != 0 || lines[1].rfind("agents=", 0) != 0)
    throw usage_error("ensemble snapshot: expected shape= and agents= headers");

  std::vector<int> dims;
  {
    std::istringstream hs(lines[0].substr(6));
    std::string tok;
    while (std::getline(hs, tok, ',')) dims.push_back(std::stoi(tok));
  }
  const TensorShape shape(dims);
  const long agents = std::stol(lines[1].substr(7));
  if (agents < 1) throw usage_error("ensemble snapshot: agent count must be >= 1");
  const std::size_t expected = 2 + static_cast<std::size_t>(agents) * shape.size();
  if (lines.size() != expected)
    throw usage_error("ensemble snapshot: entry count does not match the header");

  std::vector<ComplexTensor> out;
  std::size_t cursor = 2;
  for (long a = 0; a < agents; ++a) {
    std::vector<Complex> entries(shape.size());
    for (auto& v : entries) {
      double re = 0.0, im = 0.0;
      if (std::sscanf(lines[cursor].c_str(), "%lf,%lf", &re, &im) != 2)
        throw usage_error("ensemble snapshot: bad entry '" + lines[cursor] + "'");
      v = Complex(re, im);
      ++cursor;
    }
    out.emplace_back(shape, std::move(entries));
  }
  return out;
}

inline std::vector<ComplexTensor> load_ensemble(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw usage_error("ensemble snapshot: cannot open '" + path + "'");
  return load_ensemble(is);
}

// --- assembling runs -----------------------------------------------------------

inline FreeFlowSpec make_free_flow(const RunConfig& cfg) {
  if (cfg.free_flow_kind == "none") return FreeFlowSpec::absent();
  if (cfg.free_flow_kind == "spectral") return FreeFlowSpec::spectral(cfg.eigenvalues);
  if (cfg.free_flow_kind == "dense") return load_dense_generator(cfg.generator_file);
  throw usage_error("config: free_flow.kind must be none, spectral or dense");
}

inline Ensemble make_ensemble(const RunConfig& cfg) {
  ModelParams p = cfg.params;
  p.free_flow = make_free_flow(cfg);
  Ensemble base = build_model(cfg.family, p);
  const TensorShape shape(p.dims);
  switch (cfg.initial) {
    case InitialKind::Random:
      return base;
    case InitialKind::Bipolar:
      return base.with_agents(bipolar_ensemble(shape, p.agents, cfg.bipolar_n, p.seed));
    case InitialKind::PhaseFamily:
      return base.with_agents(phase_family_ensemble(shape, p.agents, p.seed).agents);
    case InitialKind::File: {
      auto agents = load_ensemble(cfg.initial_file);
      if (static_cast<int>(agents.size()) != p.agents)
        throw usage_error("config: initial file does not hold model.agents states");
      if (!(agents.front().shape() == shape))
        throw usage_error("config: initial file shape does not match model.dims");
      if (cfg.normalize)
        for (auto& a : agents) {
          const double n = frobenius_norm(a);
          if (n == 0.0) throw usage_error("config: cannot normalize a zero state");
          a *= Complex(1.0 / n, 0.0);
        }
      return base.with_agents(std::move(agents));
    }
  }
  throw usage_error("config: unknown initial kind");
}

struct SimulationOutcome {
  TrajectoryRecord record;
  std::vector<ComplexTensor> final_agents;
  AsymptoticState state;
  double wall_seconds = 0.0;
};

inline SimulationOutcome run_simulation(const RunConfig& cfg) {
  const Ensemble ensemble = make_ensemble(cfg);
  ObserverSet observers = cfg.observers;
  observers.states = true;  // classifier and snapshot writer need the end state
  const auto t0 = std::chrono::steady_clock::now();
  SimulationOutcome out;
  out.record = cfg.split ? split_integrate(ensemble, cfg.sim, observers)
                         : integrate(ensemble, cfg.sim, observers);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.state = classify_state(out.record.states);
  out.final_agents = out.record.states.back();
  if (!cfg.observers.states) out.record.states.clear();
  return out;
}

// --- output writers ---------------------------------------------------------

inline void write_series_csv(std::ostream& os, const TrajectoryRecord& rec) {
  os << "t";
  if (!rec.order_parameter.empty()) os << ",order_parameter";
  if (!rec.diameter.empty()) os << ",diameter";
  if (!rec.norm_drift_max.empty()) os << ",norm_drift_max";
  for (const auto& [mask, series] : rec.flux) os << ",flux_" << mask.to_string();
  os << '\n';
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    put(rec.times[k]);
    if (!rec.order_parameter.empty()) {
      os << ',';
      put(rec.order_parameter[k]);
    }
    if (!rec.diameter.empty()) {
      os << ',';
      put(rec.diameter[k]);
    }
    if (!rec.norm_drift_max.empty()) {
      os << ',';
      put(rec.norm_drift_max[k]);
    }
    for (const auto& [mask, series] : rec.flux) {
      os << ',';
      put(series[k]);
    }
    os << '\n';
  }
}

inline json summary_json(const RunConfig& cfg, const SimulationOutcome& out) {
  json s;
  s["final"]["time"] = out.record.times.back();
  s["final"]["order_parameter"] = out.state.final_r;
  s["final"]["diameter"] = out.state.final_diameter;
  s["final"]["verdict"] = verdict_name(out.state.verdict);
  s["final"]["bipolar_n"] = out.state.bipolar_n;
  s["integrator"] = cfg.split ? "splitting" : "rk4";
  s["wall_seconds"] = out.wall_seconds;
  s["config"] = run_config_to_json(cfg);
  return s;
}

// Writes series.csv / summary.json / snapshot.txt under cfg.output_dir as
// configured.
inline void write_outputs(const RunConfig& cfg, const SimulationOutcome& out) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  if (cfg.write_series) {
    std::ofstream os(fs::path(cfg.output_dir) / "series.csv");
    if (!os) throw usage_error("outputs: cannot write series.csv");
    write_series_csv(os, out.record);
  }
  if (cfg.write_summary) {
    std::ofstream os(fs::path(cfg.output_dir) / "summary.json");
    if (!os) throw usage_error("outputs: cannot write summary.json");
    os << summary_json(cfg, out).dump(2) << '\n';
  }
  if (cfg.write_snapshot)
    save_ensemble((fs::path(cfg.output_dir) / "snapshot.txt").string(), out.final_agents);
}

// --- coupling sweep ------------------------------------------------------------

struct SweepRow {
  double kappa = 0.0;
  double final_r = 0.0;
  double final_diameter = 0.0;
  Verdict verdict = Verdict::Undecided;
};

inline int sweep_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LOHE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

// Runs the base configuration once per kappa value on the given mask.  Each
// run is independent and single-threaded, so the rows do not depend on the
// fan-out width.
inline std::vector<SweepRow> run_sweep(const RunConfig& base, const Bitmask& mask,
                                       double kappa_min, double kappa_max, int steps,
                                       int threads = 0) {
  if (steps < 1) throw usage_error("sweep: steps must be >= 1");
  if (!(kappa_max >= kappa_min)) throw usage_error("sweep: kappa_max must be >= kappa_min");

  std::vector<double> kappas;
  for (int i = 0; i < steps; ++i)
    kappas.push_back(steps == 1 ? kappa_min
                                : kappa_min + (kappa_max - kappa_min) * i / (steps - 1));

  std::vector<SweepRow> rows(kappas.size());
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= kappas.size()) return;
      try {
        RunConfig cfg = base;
        cfg.params.kappa[mask] = kappas[i];
        const SimulationOutcome out = run_simulation(cfg);
        rows[i] = {kappas[i], out.state.final_r, out.state.final_diameter, out.state.verdict};
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        cursor.store(kappas.size());
        return;
      }
    }
  };

  const int n = std::min<int>(sweep_threads(threads), static_cast<int>(kappas.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
  os << "kappa,final_r,final_diameter,verdict\n";
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  for (const auto& row : rows) {
    put(row.kappa);
    os << ',';
    put(row.final_r);
    os << ',';
    put(row.final_diameter);
    os << ',' << verdict_name(row.verdict) << '\n';
  }
}

}  // namespace lohe::cli
