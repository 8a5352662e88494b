#pragma once

// Simulation configuration and the recorded output of a run.

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "lohe/tensor.hpp"

namespace lohe {

struct SimConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  int record_stride = 1;          // record every k-th step (step 0 and the last always)
  double conservation_tol = 1e-6; // abort when norm drift exceeds tol * (1 + t)
  std::uint64_t seed = 0;         // initial-data generation

  void validate() const {
    if (!std::isfinite(dt) || dt <= 0.0) throw usage_error("SimConfig: dt must be > 0");
    if (!std::isfinite(t_end) || t_end < dt)
      throw usage_error("SimConfig: t_end must be >= dt");
    if (record_stride < 1) throw usage_error("SimConfig: record_stride must be >= 1");
    if (!std::isfinite(conservation_tol) || conservation_tol <= 0.0)
      throw usage_error("SimConfig: conservation_tol must be > 0");
  }
};

// Which series integrate() fills in.
struct ObserverSet {
  bool order_parameter = true;
  bool diameter = true;
  bool norm_drift = true;
  bool flux = true;   // one series per active coupling mask
  bool gram = false;  // row-major N x N Gram matrix per record
  bool states = false;
};

// All recorded series share times.size(); absent observers leave their
// containers empty.
struct TrajectoryRecord {
  int agent_count = 0;
  std::vector<double> times;
  std::vector<double> order_parameter;
  std::vector<double> diameter;
  std::vector<double> norm_drift_max;
  std::map<Bitmask, std::vector<double>> flux;
  std::vector<std::vector<Complex>> gram;
  std::vector<std::vector<ComplexTensor>> states;
};

}  // namespace lohe
