#pragma once

/// \file dataset.hpp
/// Probe-vehicle measurement datasets: sampling from simulator output, the
/// density noise model, kernel density estimation from full trajectory
/// tables, and the on-disk format (`t,pv,y,rho,v` CSV plus a JSON sidecar).

#include "tsr/simulators.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace tsr {

struct ProbeRecord {
  double t = 0.0;
  int pv = 0;
  double y = 0.0;
  double rho = 0.0;
  double v = 0.0;
};

struct NoiseMetadata {
  double sigma_rho = 0.0;
  double bias_range = 0.0;
  std::vector<double> true_bias;  // per PV, empty when no noise was applied
  std::uint64_t seed = 0;
};

/// Measurements from N probe vehicles sampled at a shared clock {t_k}.
/// Record (i, k) lives at index i * n_mea + k.
class ProbeDataset {
 public:
  ProbeDataset() = default;
  ProbeDataset(std::vector<double> times, int n_pv);

  int n_pv() const { return n_pv_; }
  int n_mea() const { return static_cast<int>(times_.size()); }
  std::size_t size() const { return y_.size(); }
  const std::vector<double>& times() const { return times_; }

  double& y(int i, int k) { return y_[idx(i, k)]; }
  double& rho(int i, int k) { return rho_[idx(i, k)]; }
  double& v(int i, int k) { return v_[idx(i, k)]; }
  double y(int i, int k) const { return y_[idx(i, k)]; }
  double rho(int i, int k) const { return rho_[idx(i, k)]; }
  double v(int i, int k) const { return v_[idx(i, k)]; }
  ProbeRecord record(int i, int k) const { return {times_[k], i, y(i, k), rho(i, k), v(i, k)}; }

  const std::vector<double>& all_y() const { return y_; }
  const std::vector<double>& all_rho() const { return rho_; }
  const std::vector<double>& all_v() const { return v_; }

  /// Space-time bounding box of the measurements.
  double t_min() const { return times_.front(); }
  double t_max() const { return times_.back(); }
  double y_min() const;
  double y_max() const;

  NoiseMetadata noise;
  std::vector<int> vehicle_ids;  // source vehicle of each PV
  nlohmann::json metadata = nlohmann::json::object();  // free-form provenance

  /// Rounds every field to the 9-significant-digit CSV precision, so that the
  /// in-memory dataset equals what a write/read cycle produces.
  void quantize();

  void write_csv(std::ostream& os) const;
  /// Writes `<path>` and the sidecar `<path>.meta.json`.
  void save(const std::filesystem::path& path) const;
  static ProbeDataset read_csv(std::istream& is);
  /// Reads `<path>` and, when present, its sidecar.
  static ProbeDataset load(const std::filesystem::path& path);

  nlohmann::json sidecar() const;
  void apply_sidecar(const nlohmann::json& j);

  bool operator==(const ProbeDataset& o) const;

 private:
  std::size_t idx(int i, int k) const {
    return static_cast<std::size_t>(i) * times_.size() + static_cast<std::size_t>(k);
  }
  std::vector<double> times_;
  int n_pv_ = 0;
  std::vector<double> y_, rho_, v_;
};

/// Samples `n_mea` uniform instants over the trajectories' common time span.
/// Density comes from bilinear interpolation of `grid`; speed either from
/// `v(rho)` (noiseless) or, when `v` is empty, from central differences of
/// the trajectories themselves.
ProbeDataset sample_probes(const DensityGrid& grid, const TrajectorySet& traj,
                           const std::optional<VelocityModel>& v, int n_mea);

/// rho <- clip(rho + b_i + eta, 0, 1), b_i ~ U(-bias_range, bias_range) per
/// PV, eta ~ N(0, sigma_rho^2). Positions and speeds are untouched.
ProbeDataset add_noise(const ProbeDataset& d, double sigma_rho, double bias_range, std::uint64_t seed);

struct KernelSpec {
  double sigma_space = 0.01;  // km
  double sigma_time = 0.06;   // min
  double cell_dx = 0.005;     // km
  double cell_dt = 0.01;      // min
  double truncation = 4.0;    // kernel support in standard deviations
};

/// Space-time region of an ingestion: the full simulated road and time span
/// (`x_begin..x_end`, `t_begin..t_end`) plus the window kept in the output.
struct IngestDomain {
  double t_begin = 0.0;
  double t_end = 1.0;
  double x_begin = 0.0;
  double x_end = 3.0;
  double window_begin = 0.0;
  double window_end = 2.5;
  /// Normalizing jam density in vehicles/km; <= 0 uses the 99.5th
  /// percentile of the raw estimate.
  double jam_density = 0.0;
};

/// Kernel estimate in vehicles per km over the full domain, before
/// normalization: presence counts per cell, convolved with a separable,
/// discretely normalized Gaussian.
DensityGrid kernel_density_raw(const TrajectorySet& all, const KernelSpec& kernel, const IngestDomain& domain);

struct IngestResult {
  DensityGrid density;   // normalized to [0, 1], restricted to the window
  double jam_density = 0.0;
};

IngestResult ingest_trajectories(const TrajectorySet& all, const KernelSpec& kernel, const IngestDomain& domain);

/// Thrown when a Bernoulli selection picks no vehicle.
class EmptySelection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Independent Bernoulli(p) draw per vehicle, in vehicle order.
std::vector<int> select_probes(const TrajectorySet& table, double p, std::uint64_t seed);

}  // namespace tsr
