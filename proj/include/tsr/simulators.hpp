#pragma once

/// \file simulators.hpp
/// Ground-truth generators: a Godunov finite-volume solver for the LWR
/// conservation law, a follow-the-leader microscopic simulator, and
/// probe-vehicle trajectory integration through a density field.

#include "tsr/traffic_models.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace tsr {

/// Raised for inconsistent simulation settings (CFL violation, bad extents).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Density samples on a regular space-time lattice. Row n holds time
/// t0 + n dt, column j holds position x0 + j dx.
struct DensityGrid {
  double t0 = 0.0;
  double dt = 0.0;
  double x0 = 0.0;
  double dx = 0.0;
  int nt = 0;
  int nx = 0;
  std::vector<double> values;  // row-major, nt * nx

  DensityGrid() = default;
  DensityGrid(double t0, double dt, double x0, double dx, int nt, int nx, double fill = 0.0);

  double& at(int n, int j) { return values[static_cast<std::size_t>(n) * nx + j]; }
  double at(int n, int j) const { return values[static_cast<std::size_t>(n) * nx + j]; }
  double time(int n) const { return t0 + n * dt; }
  double position(int j) const { return x0 + j * dx; }
  double t_end() const { return time(nt - 1); }
  double x_end() const { return position(nx - 1); }

  /// Spatial extent covered by the lattice cells: nodes +- dx / 2.
  double x_lower() const { return x0 - 0.5 * dx; }
  double x_upper() const { return x_end() + 0.5 * dx; }
  bool contains(double t, double x) const;

  /// Bilinear interpolation; positions in the outer half cells clamp to the
  /// boundary node. Throws std::domain_error outside the extent.
  double interpolate(double t, double x) const;

  void write_csv(std::ostream& os) const;
  void write_csv(const std::filesystem::path& path) const;
  static DensityGrid read_csv(std::istream& is);
  static DensityGrid read_csv(const std::filesystem::path& path);
};

struct Trajectory {
  int id = 0;
  std::vector<double> t;  // strictly increasing
  std::vector<double> y;

  /// Linear interpolation in time; throws outside [t.front(), t.back()].
  double position_at(double time) const;
  double t_begin() const { return t.front(); }
  double t_finish() const { return t.back(); }
};

struct TrajectorySet {
  std::vector<Trajectory> vehicles;

  const Trajectory& by_id(int id) const;
  void write_csv(std::ostream& os) const;
  void write_csv(const std::filesystem::path& path) const;
  static TrajectorySet read_csv(std::istream& is);
  static TrajectorySet read_csv(const std::filesystem::path& path);
};

/// One row of a trajectory table (`t,vehicle_id,y`).
struct TrajectoryRow {
  double t = 0.0;
  int vehicle_id = 0;
  double y = 0.0;
};

/// Groups rows by vehicle and sorts each vehicle by time. Duplicate
/// (t, vehicle) rows are rejected.
TrajectorySet trajectories_from_rows(std::vector<TrajectoryRow> rows);

enum class BoundaryKind {
  Closed,         // zero flux through both ends
  InflowOutflow,  // left ghost cell carries an inflow density, right ghost copies
};

struct GodunovSetup {
  double length = 3.0;   // domain [0, length], km
  double horizon = 3.0;  // T, min
  double dx = 0.01;      // km
  double dt = 0.0;       // 0: pick 0.9 x the CFL bound
  double cfl_safety = 0.9;
  BoundaryKind boundary = BoundaryKind::InflowOutflow;
  std::function<double(double)> inflow;  // density at the left ghost cell, by time
};

/// Explicit conservative update with the Godunov flux
/// min(demand(rho_L), supply(rho_R)). The output lattice stores every time
/// step; cells are centered at (j + 1/2) dx.
DensityGrid godunov_solve(const FluxModel& f, const std::function<double(double)>& rho0,
                          const GodunovSetup& setup);

struct VehicleFleet {
  std::vector<double> positions;  // y_1 < ... < y_N (index N-1 is the leader)
  std::function<double(double)> leader_speed;
};

struct FtlSetup {
  double horizon = 3.0;
  double dt = 1e-3;
  double vehicle_length = 0.005;  // km, spacing at jam density
  int record_every = 1;
};

/// Thrown when integration would break the strict ordering of vehicles.
class OrderingViolation : public std::runtime_error {
 public:
  OrderingViolation(int step, int vehicle);
  int step() const { return step_; }
  int vehicle() const { return vehicle_; }

 private:
  int step_;
  int vehicle_;
};

/// Follow-the-leader system y_i' = v(min(1, L_veh / (y_{i+1} - y_i))),
/// leader y_N' = V_lead(t), by explicit Euler.
TrajectorySet ftl_simulate(const VelocityModel& v, const VehicleFleet& fleet0, const FtlSetup& setup);

/// Probe trajectories y_i' = v(rho(t, y_i)) through a density field, by
/// explicit Euler with bilinear interpolation. Trajectories clamp at the
/// right edge of the field. `dt <= 0` selects grid.dt / 5.
TrajectorySet pv_trajectories(const DensityGrid& grid, const VelocityModel& v,
                              const std::vector<double>& y_init, double dt = 0.0);

}  // namespace tsr
