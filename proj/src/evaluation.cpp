#include "tsr/evaluation.hpp"

#include "tsr/csv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>

namespace tsr {

RegionBounds probe_region(const TrajectorySet& probes) {
  if (probes.vehicles.empty()) throw std::invalid_argument("probe_region: no trajectories");
  return [probes](double t) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& v : probes.vehicles) {
      const double tt = std::clamp(t, v.t_begin(), v.t_finish());
      const double y = v.position_at(tt);
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    return std::make_pair(lo, hi);
  };
}

double generalization_error(const DensityGrid& truth, const DensityEstimate& estimate, const RegionBounds& bounds,
                            double t_begin, double t_end) {
  struct Row {
    double t;
    std::vector<double> x, rho;
  };
  std::vector<Row> rows;
  std::vector<double> qt, qx;
  const double tol = 1e-12 * std::max(1.0, std::abs(truth.t_end()));
  for (int n = 0; n < truth.nt; ++n) {
    const double t = truth.time(n);
    if (t < t_begin - tol || t > t_end + tol) continue;
    auto [lo, hi] = bounds(t);
    lo = std::max(lo, truth.x_lower());
    hi = std::min(hi, truth.x_upper());
    if (!(hi > lo)) {
      throw std::domain_error("generalization_error: empty integration region at t = " + csv::g9(t));
    }
    Row r{t, {}, {}};
    r.x.push_back(lo);
    r.rho.push_back(truth.interpolate(t, lo));
    for (int j = 0; j < truth.nx; ++j) {
      const double x = truth.position(j);
      if (x > lo && x < hi) {
        r.x.push_back(x);
        r.rho.push_back(truth.at(n, j));
      }
    }
    r.x.push_back(hi);
    r.rho.push_back(truth.interpolate(t, hi));
    for (double x : r.x) {
      qt.push_back(t);
      qx.push_back(x);
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) return 0.0;
  const std::vector<double> est = estimate(qt, qx);
  if (est.size() != qt.size()) throw std::logic_error("density estimate returned the wrong number of values");
  std::vector<double> row_integral;
  std::size_t at = 0;
  for (const auto& r : rows) {
    double s = 0.0;
    double prev = 0.0;
    for (std::size_t j = 0; j < r.x.size(); ++j, ++at) {
      const double e = r.rho[j] - est[at];
      const double e2 = e * e;
      if (j > 0) s += 0.5 * (prev + e2) * (r.x[j] - r.x[j - 1]);
      prev = e2;
    }
    row_integral.push_back(s);
  }
  double ge = 0.0;
  for (std::size_t n = 1; n < rows.size(); ++n) {
    ge += 0.5 * (row_integral[n - 1] + row_integral[n]) * (rows[n].t - rows[n - 1].t);
  }
  return ge;
}

double generalization_error(const DensityGrid& truth, const ParameterSet& ps, const RegionBounds& bounds) {
  return generalization_error(
      truth, [&ps](std::span<const double> t, std::span<const double> x) { return density_forward(ps, t, x); },
      bounds);
}

double velocity_error(const std::function<double(double)>& v, const VelocityModel& reference) {
  double worst = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    const double rho = k / 1000.0;
    worst = std::max(worst, std::abs(v(rho) - reference.velocity(rho)));
  }
  return worst;
}

double velocity_error(const ParameterSet& ps, const VelocityModel& reference) {
  std::vector<double> rho(1001);
  for (int k = 0; k <= 1000; ++k) rho[k] = k / 1000.0;
  const auto curve = velocity_curve(ps, rho);
  double worst = 0.0;
  for (int k = 0; k <= 1000; ++k) worst = std::max(worst, std::abs(curve[k].v - reference.velocity(rho[k])));
  return worst;
}

Reconstruction export_reconstruction(const ParameterSet& ps, const GridSpec& spec) {
  if (spec.nt < 1 || spec.nx < 1) throw std::invalid_argument("export: empty grid");
  const Normalization& n = ps.normalization();
  const double t_last = spec.t0 + (spec.nt - 1) * spec.dt;
  const double x_last = spec.x0 + (spec.nx - 1) * spec.dx;
  const double slack = 1e-9 * std::max({1.0, std::abs(n.t_max), std::abs(n.y_max)});
  if (!n.contains(spec.t0, spec.x0, slack) || !n.contains(t_last, x_last, slack)) {
    throw std::domain_error("export grid leaves the trained region [" + csv::g9(n.t_min) + ", " + csv::g9(n.t_max) +
                            "] x [" + csv::g9(n.y_min) + ", " + csv::g9(n.y_max) + "]");
  }
  Reconstruction r;
  r.density = DensityGrid(spec.t0, spec.dt, spec.x0, spec.dx, spec.nt, spec.nx);
  std::vector<double> t, x, times(spec.nt);
  for (int i = 0; i < spec.nt; ++i) {
    times[i] = r.density.time(i);
    for (int j = 0; j < spec.nx; ++j) {
      t.push_back(times[i]);
      x.push_back(r.density.position(j));
    }
  }
  r.density.values = density_forward(ps, t, x);
  for (int i = 0; i < ps.n_pv(); ++i) {
    Trajectory tr;
    tr.id = i;
    tr.t = times;
    tr.y = trajectory_forward(ps, i, times);
    r.trajectories.vehicles.push_back(std::move(tr));
  }
  return r;
}

void write_reconstruction(const Reconstruction& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  r.density.write_csv(dir / "reconstruction_density.csv");
  r.trajectories.write_csv(dir / "reconstruction_trajectories.csv");
}

std::vector<GroupStats> StudySummary::groups() const {
  std::vector<GroupStats> out;
  auto find = [&](const std::string& c, bool p) -> GroupStats& {
    for (auto& g : out) {
      if (g.case_name == c && g.pretrain == p) return g;
    }
    out.push_back(GroupStats{c, p});
    return out.back();
  };
  std::map<std::pair<std::string, bool>, std::vector<double>> ges, times;
  for (const auto& r : results) {
    GroupStats& g = find(r.case_name, r.pretrain);
    if (!r.ok) {
      ++g.failures;
      continue;
    }
    ++g.runs;
    ges[{r.case_name, r.pretrain}].push_back(r.ge);
    times[{r.case_name, r.pretrain}].push_back(r.time_s);
  }
  for (auto& g : out) {
    const auto& v = ges[{g.case_name, g.pretrain}];
    const auto& tv = times[{g.case_name, g.pretrain}];
    if (v.empty()) {
      g.mean = g.variance = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double s = 0.0, st = 0.0;
    for (double x : v) s += x;
    for (double x : tv) st += x;
    g.mean = s / v.size();
    g.mean_time_s = st / tv.size();
    double ss = 0.0;
    for (double x : v) ss += (x - g.mean) * (x - g.mean);
    g.variance = v.size() > 1 ? ss / (v.size() - 1) : 0.0;
  }
  return out;
}

GroupStats StudySummary::group(const std::string& case_name, bool pretrain) const {
  for (const auto& g : groups()) {
    if (g.case_name == case_name && g.pretrain == pretrain) return g;
  }
  throw std::out_of_range("study has no results for case '" + case_name + "'");
}

void StudySummary::write_csv(std::ostream& os) const {
  os << "case,pretrain,seed,ge,time_s\n";
  for (const auto& r : results) {
    os << r.case_name << ',' << (r.pretrain ? 1 : 0) << ',' << r.seed << ','
       << (r.ok ? csv::g17(r.ge) : std::string("nan")) << ',' << csv::g17(r.time_s) << '\n';
  }
}

void StudySummary::write_csv(const std::filesystem::path& path) const {
  auto os = csv::open_out(path);
  write_csv(os);
}

StudySummary StudySummary::read_csv(std::istream& is) {
  csv::expect_header(is, "case,pretrain,seed,ge,time_s");
  StudySummary s;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 5) throw std::runtime_error("line " + std::to_string(line_no) + ": expected 5 fields");
    EvaluationResult r;
    r.case_name = std::string(f[0]);
    r.pretrain = csv::to_int(f[1], line_no) != 0;
    r.seed = static_cast<std::uint64_t>(std::stoull(std::string(f[2])));
    r.ge = csv::to_double(f[3], line_no);
    r.ok = !std::isnan(r.ge);
    r.time_s = csv::to_double(f[4], line_no);
    s.results.push_back(std::move(r));
  }
  return s;
}

void StudySummary::write_table(std::ostream& os) const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %-9s %5s %8s %14s %14s %10s\n", "case", "pretrain", "runs", "failed",
                "mean GE", "var GE", "mean t[s]");
  os << buf;
  for (const auto& g : groups()) {
    std::snprintf(buf, sizeof buf, "%-14s %-9s %5d %8d %14.6g %14.6g %10.3g\n", g.case_name.c_str(),
                  g.pretrain ? "yes" : "no", g.runs, g.failures, g.mean, g.variance, g.mean_time_s);
    os << buf;
  }
}

StudySummary run_study(const std::vector<std::string>& cases, const std::vector<std::uint64_t>& seeds,
                       const StudyRunner& runner, const StudyProgress& progress) {
  if (seeds.size() < 2) throw std::invalid_argument("a study needs at least 2 runs per case");
  StudySummary s;
  for (const auto& c : cases) {
    for (bool pretrain : {true, false}) {
      for (std::uint64_t seed : seeds) {
        const auto start = std::chrono::steady_clock::now();
        EvaluationResult r;
        try {
          r = runner(c, seed, pretrain);
        } catch (const std::exception& e) {
          r.ok = false;
          r.error = e.what();
          r.ge = std::numeric_limits<double>::quiet_NaN();
        }
        r.case_name = c;
        r.pretrain = pretrain;
        r.seed = seed;
        if (!(r.time_s > 0.0)) {
          r.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
        if (progress) progress(r);
        s.results.push_back(std::move(r));
      }
    }
  }
  return s;
}

}  // namespace tsr
