#include "tsr/simulators.hpp"

#include "tsr/csv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>

namespace tsr {

DensityGrid::DensityGrid(double t0_, double dt_, double x0_, double dx_, int nt_, int nx_, double fill)
    : t0(t0_), dt(dt_), x0(x0_), dx(dx_), nt(nt_), nx(nx_),
      values(static_cast<std::size_t>(nt_) * nx_, fill) {
  if (nt < 1 || nx < 1) throw ConfigError("density grid needs at least one node per axis");
}

bool DensityGrid::contains(double t, double x) const {
  const double tt = 1e-9 * std::max(1.0, std::abs(t_end()));
  return t >= t0 - tt && t <= t_end() + tt && x >= x_lower() && x <= x_upper();
}

double DensityGrid::interpolate(double t, double x) const {
  if (!contains(t, x)) {
    throw std::domain_error("point (" + std::to_string(t) + ", " + std::to_string(x) +
                            ") outside the density grid");
  }
  double s = nt > 1 ? std::clamp((t - t0) / dt, 0.0, static_cast<double>(nt - 1)) : 0.0;
  double r = nx > 1 ? std::clamp((x - x0) / dx, 0.0, static_cast<double>(nx - 1)) : 0.0;
  int n = std::min(static_cast<int>(s), std::max(nt - 2, 0));
  int j = std::min(static_cast<int>(r), std::max(nx - 2, 0));
  const double wt = nt > 1 ? s - n : 0.0;
  const double wx = nx > 1 ? r - j : 0.0;
  const int n1 = std::min(n + 1, nt - 1);
  const int j1 = std::min(j + 1, nx - 1);
  const double a = at(n, j) + wx * (at(n, j1) - at(n, j));
  const double b = at(n1, j) + wx * (at(n1, j1) - at(n1, j));
  return a + wt * (b - a);
}

void DensityGrid::write_csv(std::ostream& os) const {
  os << "t,x,rho\n";
  for (int n = 0; n < nt; ++n) {
    const std::string ts = csv::g9(time(n));
    for (int j = 0; j < nx; ++j) {
      os << ts << ',' << csv::g9(position(j)) << ',' << csv::g9(at(n, j)) << '\n';
    }
  }
}

void DensityGrid::write_csv(const std::filesystem::path& path) const {
  auto os = csv::open_out(path);
  write_csv(os);
}

DensityGrid DensityGrid::read_csv(std::istream& is) {
  csv::expect_header(is, "t,x,rho");
  std::vector<double> ts, xs, vs;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = csv::split(line);
    if (f.size() != 3) throw std::runtime_error("line " + std::to_string(line_no) + ": expected 3 fields");
    ts.push_back(csv::to_double(f[0], line_no));
    xs.push_back(csv::to_double(f[1], line_no));
    vs.push_back(csv::to_double(f[2], line_no));
  }
  if (ts.empty()) throw std::runtime_error("density grid CSV has no rows");
  int nx = 0;
  while (nx < static_cast<int>(ts.size()) && ts[nx] == ts[0]) ++nx;
  if (ts.size() % nx != 0) throw std::runtime_error("density grid CSV is not a full lattice");
  const int nt = static_cast<int>(ts.size()) / nx;
  const double dt = nt > 1 ? (ts.back() - ts.front()) / (nt - 1) : 0.0;
  const double dx = nx > 1 ? (xs[nx - 1] - xs[0]) / (nx - 1) : 0.0;
  DensityGrid g(ts[0], dt, xs[0], dx, nt, nx);
  g.values = std::move(vs);
  return g;
}

DensityGrid DensityGrid::read_csv(const std::filesystem::path& path) {
  auto is = csv::open_in(path);
  return read_csv(is);
}

double Trajectory::position_at(double time) const {
  if (t.empty()) throw std::logic_error("empty trajectory");
  const double tol = 1e-9 * std::max(1.0, std::abs(t.back()));
  if (time < t.front() - tol || time > t.back() + tol) {
    throw std::domain_error("time " + std::to_string(time) + " outside trajectory of vehicle " +
                            std::to_string(id));
  }
  if (time <= t.front()) return y.front();
  if (time >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t k = static_cast<std::size_t>(it - t.begin());
  const double w = (time - t[k - 1]) / (t[k] - t[k - 1]);
  return y[k - 1] + w * (y[k] - y[k - 1]);
}

const Trajectory& TrajectorySet::by_id(int id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return v;
  }
  throw std::out_of_range("no trajectory for vehicle " + std::to_string(id));
}

void TrajectorySet::write_csv(std::ostream& os) const {
  os << "t,vehicle_id,y\n";
  for (const auto& v : vehicles) {
    for (std::size_t k = 0; k < v.t.size(); ++k) {
      os << csv::g9(v.t[k]) << ',' << v.id << ',' << csv::g9(v.y[k]) << '\n';
    }
  }
}

void TrajectorySet::write_csv(const std::filesystem::path& path) const {
  auto os = csv::open_out(path);
  write_csv(os);
}

TrajectorySet TrajectorySet::read_csv(std::istream& is) {
  csv::expect_header(is, "t,vehicle_id,y");
  std::vector<TrajectoryRow> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = csv::split(line);
    if (f.size() != 3) throw std::runtime_error("line " + std::to_string(line_no) + ": expected 3 fields");
    rows.push_back({csv::to_double(f[0], line_no), csv::to_int(f[1], line_no), csv::to_double(f[2], line_no)});
  }
  return trajectories_from_rows(std::move(rows));
}

TrajectorySet TrajectorySet::read_csv(const std::filesystem::path& path) {
  auto is = csv::open_in(path);
  return read_csv(is);
}

TrajectorySet trajectories_from_rows(std::vector<TrajectoryRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const TrajectoryRow& a, const TrajectoryRow& b) {
    return a.vehicle_id != b.vehicle_id ? a.vehicle_id < b.vehicle_id : a.t < b.t;
  });
  TrajectorySet set;
  for (const auto& r : rows) {
    if (set.vehicles.empty() || set.vehicles.back().id != r.vehicle_id) {
      set.vehicles.push_back(Trajectory{r.vehicle_id, {}, {}});
    }
    auto& v = set.vehicles.back();
    if (!v.t.empty() && v.t.back() == r.t) {
      throw std::invalid_argument("duplicate row for vehicle " + std::to_string(r.vehicle_id) +
                                  " at t=" + std::to_string(r.t));
    }
    v.t.push_back(r.t);
    v.y.push_back(r.y);
  }
  return set;
}

DensityGrid godunov_solve(const FluxModel& f, const std::function<double(double)>& rho0,
                          const GodunovSetup& setup) {
  if (!(setup.length > 0.0) || !(setup.horizon > 0.0) || !(setup.dx > 0.0)) {
    throw ConfigError("godunov: length, horizon and dx must be positive");
  }
  const int nx = std::max(1, static_cast<int>(std::lround(setup.length / setup.dx)));
  const double dx = setup.length / nx;
  const double speed = f.velocity.max_characteristic_speed();
  const double dt_max = dx / speed;
  double dt = setup.dt;
  if (dt > 0.0) {
    if (dt > dt_max * (1.0 + 1e-12)) {
      throw ConfigError("godunov: CFL violated, dt=" + std::to_string(dt) +
                        " exceeds the maximal admissible dt=" + std::to_string(dt_max));
    }
  } else {
    dt = setup.cfl_safety * dt_max;
  }
  const int steps = std::max(1, static_cast<int>(std::ceil(setup.horizon / dt - 1e-9)));
  dt = setup.horizon / steps;

  const double peak = f.velocity.flux_argmax();
  auto demand = [&](double r) { return f.flux(std::min(r, peak)); };
  auto supply = [&](double r) { return f.flux(std::max(r, peak)); };
  auto checked = [](double r, const char* what) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw ConfigError(std::string("godunov: ") + what + " density " + std::to_string(r) + " outside [0, 1]");
    }
    return r;
  };

  DensityGrid grid(0.0, dt, 0.5 * dx, dx, steps + 1, nx);
  std::vector<double> rho(nx), next(nx), dem(nx), sup(nx), flux(nx + 1);
  for (int j = 0; j < nx; ++j) rho[j] = checked(rho0((j + 0.5) * dx), "initial");
  std::copy(rho.begin(), rho.end(), grid.values.begin());

  const double ratio = dt / dx;
  for (int n = 0; n < steps; ++n) {
    for (int j = 0; j < nx; ++j) {
      dem[j] = demand(rho[j]);
      sup[j] = supply(rho[j]);
    }
    if (setup.boundary == BoundaryKind::Closed) {
      flux[0] = 0.0;
      flux[nx] = 0.0;
    } else {
      if (!setup.inflow) throw ConfigError("godunov: inflow boundary needs an inflow signal");
      const double in = checked(setup.inflow(n * dt), "inflow");
      flux[0] = std::min(demand(in), sup[0]);
      flux[nx] = std::min(dem[nx - 1], sup[nx - 1]);
    }
    for (int j = 1; j < nx; ++j) flux[j] = std::min(dem[j - 1], sup[j]);
    for (int j = 0; j < nx; ++j) next[j] = rho[j] - ratio * (flux[j + 1] - flux[j]);
    rho.swap(next);
    std::copy(rho.begin(), rho.end(), grid.values.begin() + static_cast<std::ptrdiff_t>(n + 1) * nx);
  }
  return grid;
}

OrderingViolation::OrderingViolation(int step, int vehicle)
    : std::runtime_error("vehicle ordering violated at step " + std::to_string(step) +
                         " (vehicle " + std::to_string(vehicle) + " reached its leader)"),
      step_(step), vehicle_(vehicle) {}

TrajectorySet ftl_simulate(const VelocityModel& v, const VehicleFleet& fleet0, const FtlSetup& setup) {
  const auto& y0 = fleet0.positions;
  const int n = static_cast<int>(y0.size());
  if (n < 1) throw ConfigError("ftl: empty fleet");
  if (!fleet0.leader_speed) throw ConfigError("ftl: missing leader speed profile");
  for (int i = 0; i + 1 < n; ++i) {
    if (!(y0[i] < y0[i + 1])) throw ConfigError("ftl: initial positions must be strictly increasing");
  }
  if (!(setup.dt > 0.0) || !(setup.horizon > 0.0) || !(setup.vehicle_length > 0.0)) {
    throw ConfigError("ftl: dt, horizon and vehicle length must be positive");
  }
  const int steps = std::max(1, static_cast<int>(std::ceil(setup.horizon / setup.dt - 1e-9)));
  const double dt = setup.horizon / steps;
  const int every = std::max(1, setup.record_every);

  TrajectorySet out;
  out.vehicles.resize(n);
  for (int i = 0; i < n; ++i) out.vehicles[i].id = i;
  std::vector<double> y = y0, speed(n);
  auto record = [&](double t) {
    for (int i = 0; i < n; ++i) {
      out.vehicles[i].t.push_back(t);
      out.vehicles[i].y.push_back(y[i]);
    }
  };
  record(0.0);
  for (int s = 0; s < steps; ++s) {
    const double t = s * dt;
    for (int i = 0; i + 1 < n; ++i) {
      const double rho = std::min(1.0, setup.vehicle_length / (y[i + 1] - y[i]));
      speed[i] = v.velocity(rho);
    }
    speed[n - 1] = fleet0.leader_speed(t);
    for (int i = 0; i < n; ++i) y[i] += dt * speed[i];
    for (int i = 0; i + 1 < n; ++i) {
      if (!(y[i + 1] - y[i] > 0.0)) throw OrderingViolation(s, i);
    }
    if ((s + 1) % every == 0 || s + 1 == steps) record((s + 1) * dt);
  }
  return out;
}

TrajectorySet pv_trajectories(const DensityGrid& grid, const VelocityModel& v,
                              const std::vector<double>& y_init, double dt) {
  if (dt <= 0.0) dt = grid.dt / 5.0;
  const double span = grid.t_end() - grid.t0;
  const int steps = span > 0.0 ? std::max(1, static_cast<int>(std::ceil(span / dt - 1e-9))) : 0;
  if (steps > 0) dt = span / steps;
  TrajectorySet out;
  for (std::size_t i = 0; i < y_init.size(); ++i) {
    const double y_start = y_init[i];
    if (!(y_start >= grid.x_lower() && y_start <= grid.x_upper())) {
      throw std::domain_error("initial probe position " + std::to_string(y_start) + " outside the grid");
    }
    Trajectory tr;
    tr.id = static_cast<int>(i);
    tr.t.reserve(steps + 1);
    tr.y.reserve(steps + 1);
    double y = y_start;
    tr.t.push_back(grid.t0);
    tr.y.push_back(y);
    for (int s = 0; s < steps; ++s) {
      const double t = grid.t0 + s * dt;
      const double rho = std::clamp(grid.interpolate(t, y), 0.0, 1.0);
      y = std::min(y + dt * v.velocity(rho), grid.x_upper());
      tr.t.push_back(grid.t0 + (s + 1) * dt);
      tr.y.push_back(y);
    }
    out.vehicles.push_back(std::move(tr));
  }
  return out;
}

}  // namespace tsr
