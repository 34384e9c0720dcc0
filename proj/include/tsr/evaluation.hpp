#pragma once

/// \file evaluation.hpp
/// Generalization error, identified-velocity error, reconstruction export
/// and multi-run study summaries.

#include "tsr/networks.hpp"
#include "tsr/simulators.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tsr {

/// Density estimate evaluated at matched (t, x) lists.
using DensityEstimate = std::function<std::vector<double>(std::span<const double>, std::span<const double>)>;

/// Lower and upper integration bound in space at time t.
using RegionBounds = std::function<std::pair<double, double>(double)>;

/// Bounds spanned by the first and last probe vehicle (min and max
/// position over the set, linearly interpolated in time).
RegionBounds probe_region(const TrajectorySet& probes);

/// Integral of (rho - rhohat)^2 over the truth grid's time rows and, per
/// row, over [lo(t), hi(t)]. Composite trapezoidal rule on the grid nodes
/// inside the interval plus the two interval end points. Rows outside
/// [t_begin, t_end] are skipped.
double generalization_error(const DensityGrid& truth, const DensityEstimate& estimate, const RegionBounds& bounds,
                            double t_begin = -1e300, double t_end = 1e300);
double generalization_error(const DensityGrid& truth, const ParameterSet& ps, const RegionBounds& bounds);

/// max over 1001 uniform densities of |vhat - v_ref|.
double velocity_error(const ParameterSet& ps, const VelocityModel& reference);
double velocity_error(const std::function<double(double)>& v, const VelocityModel& reference);

struct GridSpec {
  double t0 = 0.0;
  double dt = 0.0;
  int nt = 0;
  double x0 = 0.0;
  double dx = 0.0;
  int nx = 0;
};

struct Reconstruction {
  DensityGrid density;
  TrajectorySet trajectories;
};

/// Evaluates rhohat on the grid and every yhat_i on its time rows. Throws
/// std::domain_error if the grid leaves the normalization box.
Reconstruction export_reconstruction(const ParameterSet& ps, const GridSpec& spec);
void write_reconstruction(const Reconstruction& r, const std::filesystem::path& dir);

struct EvaluationResult {
  std::string case_name;
  bool pretrain = true;
  std::uint64_t seed = 0;
  double ge = 0.0;
  double velocity_error = -1.0;  // negative when no reference is known
  double time_s = 0.0;
  bool ok = true;
  std::string error;
};

struct GroupStats {
  std::string case_name;
  bool pretrain = true;
  int runs = 0;
  int failures = 0;
  double mean = 0.0;
  double variance = 0.0;  // sample variance (n - 1)
  double mean_time_s = 0.0;
};

struct StudySummary {
  std::vector<EvaluationResult> results;
  std::vector<GroupStats> groups() const;
  /// Statistics of one (case, pretrain) group; throws if absent.
  GroupStats group(const std::string& case_name, bool pretrain) const;

  void write_csv(std::ostream& os) const;
  void write_csv(const std::filesystem::path& path) const;
  static StudySummary read_csv(std::istream& is);
  void write_table(std::ostream& os) const;
};

using StudyRunner = std::function<EvaluationResult(const std::string& case_name, std::uint64_t seed, bool pretrain)>;
using StudyProgress = std::function<void(const EvaluationResult&)>;

/// For each case, each pretraining flag and each seed, runs `runner`;
/// failures are recorded and the study continues.
StudySummary run_study(const std::vector<std::string>& cases, const std::vector<std::uint64_t>& seeds,
                       const StudyRunner& runner, const StudyProgress& progress = {});

}  // namespace tsr
