#include "tsr/dataset.hpp"

#include "tsr/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

namespace tsr {

ProbeDataset::ProbeDataset(std::vector<double> times, int n_pv)
    : times_(std::move(times)), n_pv_(n_pv) {
  if (n_pv_ < 1) throw std::invalid_argument("dataset needs at least one probe vehicle");
  if (times_.empty()) throw std::invalid_argument("dataset needs at least one sampling instant");
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k] > times_[k - 1])) throw std::invalid_argument("sampling instants must increase");
  }
  const std::size_t n = static_cast<std::size_t>(n_pv_) * times_.size();
  y_.assign(n, 0.0);
  rho_.assign(n, 0.0);
  v_.assign(n, 0.0);
  vehicle_ids.resize(n_pv_);
  for (int i = 0; i < n_pv_; ++i) vehicle_ids[i] = i;
}

double ProbeDataset::y_min() const { return *std::min_element(y_.begin(), y_.end()); }
double ProbeDataset::y_max() const { return *std::max_element(y_.begin(), y_.end()); }

void ProbeDataset::quantize() {
  for (auto& t : times_) t = csv::quantize9(t);
  for (auto& a : y_) a = csv::quantize9(a);
  for (auto& a : rho_) a = csv::quantize9(a);
  for (auto& a : v_) a = csv::quantize9(a);
}

void ProbeDataset::write_csv(std::ostream& os) const {
  os << "t,pv,y,rho,v\n";
  for (int i = 0; i < n_pv_; ++i) {
    for (int k = 0; k < n_mea(); ++k) {
      os << csv::g9(times_[k]) << ',' << i << ',' << csv::g9(y(i, k)) << ',' << csv::g9(rho(i, k))
         << ',' << csv::g9(v(i, k)) << '\n';
    }
  }
}

nlohmann::json ProbeDataset::sidecar() const {
  nlohmann::json j;
  j["n_pv"] = n_pv_;
  j["n_mea"] = n_mea();
  j["noise"] = {{"sigma_rho", noise.sigma_rho},
                {"bias_range", noise.bias_range},
                {"true_bias", noise.true_bias},
                {"seed", noise.seed}};
  j["vehicle_ids"] = vehicle_ids;
  j["metadata"] = metadata;
  return j;
}

void ProbeDataset::apply_sidecar(const nlohmann::json& j) {
  if (j.at("n_pv").get<int>() != n_pv_ || j.at("n_mea").get<int>() != n_mea()) {
    throw std::runtime_error("dataset sidecar does not match the CSV shape");
  }
  const auto& nz = j.at("noise");
  noise.sigma_rho = nz.at("sigma_rho").get<double>();
  noise.bias_range = nz.at("bias_range").get<double>();
  noise.true_bias = nz.at("true_bias").get<std::vector<double>>();
  noise.seed = nz.at("seed").get<std::uint64_t>();
  vehicle_ids = j.at("vehicle_ids").get<std::vector<int>>();
  metadata = j.at("metadata");
}

void ProbeDataset::save(const std::filesystem::path& path) const {
  {
    auto os = csv::open_out(path);
    write_csv(os);
  }
  auto meta = csv::open_out(path.string() + ".meta.json");
  meta << sidecar().dump(2) << '\n';
}

ProbeDataset ProbeDataset::read_csv(std::istream& is) {
  csv::expect_header(is, "t,pv,y,rho,v");
  std::map<int, std::vector<ProbeRecord>> by_pv;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = csv::split(line);
    if (f.size() != 5) throw std::runtime_error("line " + std::to_string(line_no) + ": expected 5 fields");
    ProbeRecord r{csv::to_double(f[0], line_no), csv::to_int(f[1], line_no), csv::to_double(f[2], line_no),
                  csv::to_double(f[3], line_no), csv::to_double(f[4], line_no)};
    by_pv[r.pv].push_back(r);
  }
  if (by_pv.empty()) throw std::runtime_error("dataset CSV has no records");
  const int n_pv = static_cast<int>(by_pv.size());
  if (by_pv.begin()->first != 0 || by_pv.rbegin()->first != n_pv - 1) {
    throw std::runtime_error("dataset PV indices must be 0..N-1");
  }
  auto& first = by_pv.begin()->second;
  std::sort(first.begin(), first.end(), [](auto& a, auto& b) { return a.t < b.t; });
  std::vector<double> times;
  for (const auto& r : first) times.push_back(r.t);
  ProbeDataset d(times, n_pv);
  for (auto& [i, recs] : by_pv) {
    std::sort(recs.begin(), recs.end(), [](auto& a, auto& b) { return a.t < b.t; });
    if (recs.size() != times.size()) {
      throw std::runtime_error("PV " + std::to_string(i) + " does not have the shared sampling instants");
    }
    for (std::size_t k = 0; k < recs.size(); ++k) {
      if (recs[k].t != times[k]) {
        throw std::runtime_error("PV " + std::to_string(i) + " does not have the shared sampling instants");
      }
      d.y(i, static_cast<int>(k)) = recs[k].y;
      d.rho(i, static_cast<int>(k)) = recs[k].rho;
      d.v(i, static_cast<int>(k)) = recs[k].v;
    }
  }
  return d;
}

ProbeDataset ProbeDataset::load(const std::filesystem::path& path) {
  auto is = csv::open_in(path);
  ProbeDataset d = read_csv(is);
  const std::filesystem::path meta = path.string() + ".meta.json";
  if (std::filesystem::exists(meta)) {
    auto ms = csv::open_in(meta);
    d.apply_sidecar(nlohmann::json::parse(ms));
  }
  return d;
}

bool ProbeDataset::operator==(const ProbeDataset& o) const {
  return times_ == o.times_ && n_pv_ == o.n_pv_ && y_ == o.y_ && rho_ == o.rho_ && v_ == o.v_ &&
         noise.sigma_rho == o.noise.sigma_rho && noise.bias_range == o.noise.bias_range &&
         noise.true_bias == o.noise.true_bias && noise.seed == o.noise.seed &&
         vehicle_ids == o.vehicle_ids && metadata == o.metadata;
}

ProbeDataset sample_probes(const DensityGrid& grid, const TrajectorySet& traj,
                           const std::optional<VelocityModel>& v, int n_mea) {
  if (n_mea < 2) throw ConfigError("sample_probes: need at least 2 samples per probe");
  if (traj.vehicles.empty()) throw ConfigError("sample_probes: no trajectories");
  double a = grid.t0, b = grid.t_end();
  for (const auto& tr : traj.vehicles) {
    a = std::max(a, tr.t_begin());
    b = std::min(b, tr.t_finish());
  }
  if (!(b > a)) throw ConfigError("sample_probes: trajectories share no time span with the grid");
  std::vector<double> times(n_mea);
  for (int k = 0; k < n_mea; ++k) times[k] = k + 1 == n_mea ? b : a + k * (b - a) / (n_mea - 1);

  ProbeDataset d(times, static_cast<int>(traj.vehicles.size()));
  const double h = 1e-3 * (b - a);
  for (int i = 0; i < d.n_pv(); ++i) {
    const auto& tr = traj.vehicles[i];
    d.vehicle_ids[i] = tr.id;
    for (int k = 0; k < n_mea; ++k) {
      const double t = times[k];
      const double y = tr.position_at(t);
      const double rho = std::clamp(grid.interpolate(t, y), 0.0, 1.0);
      d.y(i, k) = y;
      d.rho(i, k) = rho;
      if (v) {
        d.v(i, k) = v->velocity(rho);
      } else {
        const double lo = std::max(tr.t_begin(), t - h);
        const double hi = std::min(tr.t_finish(), t + h);
        d.v(i, k) = std::max(0.0, (tr.position_at(hi) - tr.position_at(lo)) / (hi - lo));
      }
    }
  }
  d.quantize();
  return d;
}

ProbeDataset add_noise(const ProbeDataset& d, double sigma_rho, double bias_range, std::uint64_t seed) {
  if (!(sigma_rho >= 0.0) || !(bias_range >= 0.0)) {
    throw std::invalid_argument("noise levels must be nonnegative");
  }
  ProbeDataset out = d;
  std::mt19937_64 rng(seed);
  std::vector<double> bias(d.n_pv(), 0.0);
  if (bias_range > 0.0) {
    std::uniform_real_distribution<double> u(-bias_range, bias_range);
    for (auto& b : bias) b = u(rng);
  }
  std::normal_distribution<double> eta(0.0, sigma_rho > 0.0 ? sigma_rho : 1.0);
  for (int i = 0; i < d.n_pv(); ++i) {
    for (int k = 0; k < d.n_mea(); ++k) {
      const double e = sigma_rho > 0.0 ? eta(rng) : 0.0;
      out.rho(i, k) = std::clamp(d.rho(i, k) + bias[i] + e, 0.0, 1.0);
    }
  }
  out.noise.sigma_rho = sigma_rho;
  out.noise.bias_range = bias_range;
  out.noise.true_bias = bias;
  out.noise.seed = seed;
  out.quantize();
  return out;
}

namespace {

std::vector<double> gaussian_weights(double sigma, double h, double truncation) {
  const int half = std::max(1, static_cast<int>(std::ceil(truncation * sigma / h)));
  std::vector<double> w(2 * half + 1);
  double total = 0.0;
  for (int m = -half; m <= half; ++m) {
    const double z = m * h / sigma;
    w[m + half] = std::exp(-0.5 * z * z);
    total += w[m + half];
  }
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace

DensityGrid kernel_density_raw(const TrajectorySet& all, const KernelSpec& kernel, const IngestDomain& domain) {
  if (all.vehicles.empty()) throw std::invalid_argument("ingestion: empty trajectory table");
  if (!(kernel.sigma_space > 0.0) || !(kernel.sigma_time > 0.0)) {
    throw std::invalid_argument("ingestion: kernel widths must be strictly positive");
  }
  if (!(kernel.cell_dx > 0.0) || !(kernel.cell_dt > 0.0)) {
    throw std::invalid_argument("ingestion: cell sizes must be strictly positive");
  }
  if (!(domain.x_end > domain.x_begin) || !(domain.t_end > domain.t_begin)) {
    throw std::invalid_argument("ingestion: empty domain");
  }
  const int nx = std::max(1, static_cast<int>(std::lround((domain.x_end - domain.x_begin) / kernel.cell_dx)));
  const double dx = (domain.x_end - domain.x_begin) / nx;
  const int nt = std::max(1, static_cast<int>(std::lround((domain.t_end - domain.t_begin) / kernel.cell_dt))) + 1;
  const double dt = (domain.t_end - domain.t_begin) / (nt - 1);
  DensityGrid count(domain.t_begin, dt, domain.x_begin + 0.5 * dx, dx, nt, nx);

  for (const auto& tr : all.vehicles) {
    for (int n = 0; n < nt; ++n) {
      const double t = count.time(n);
      if (t < tr.t_begin() || t > tr.t_finish()) continue;
      const double y = tr.position_at(t);
      if (y < domain.x_begin || y >= domain.x_end) continue;
      const int j = std::min(nx - 1, static_cast<int>((y - domain.x_begin) / dx));
      count.at(n, j) += 1.0 / dx;
    }
  }

  const auto wx = gaussian_weights(kernel.sigma_space, dx, kernel.truncation);
  const auto wt = gaussian_weights(kernel.sigma_time, dt, kernel.truncation);
  const int hx = static_cast<int>(wx.size() / 2), ht = static_cast<int>(wt.size() / 2);
  DensityGrid tmp = count;
  for (int n = 0; n < nt; ++n) {
    for (int j = 0; j < nx; ++j) {
      double s = 0.0;
      for (int m = -hx; m <= hx; ++m) {
        const int jj = j + m;
        if (jj >= 0 && jj < nx) s += wx[m + hx] * count.at(n, jj);
      }
      tmp.at(n, j) = s;
    }
  }
  DensityGrid out = tmp;
  for (int n = 0; n < nt; ++n) {
    for (int j = 0; j < nx; ++j) {
      double s = 0.0;
      for (int m = -ht; m <= ht; ++m) {
        const int nn = n + m;
        if (nn >= 0 && nn < nt) s += wt[m + ht] * tmp.at(nn, j);
      }
      out.at(n, j) = s;
    }
  }
  return out;
}

IngestResult ingest_trajectories(const TrajectorySet& all, const KernelSpec& kernel, const IngestDomain& domain) {
  const DensityGrid raw = kernel_density_raw(all, kernel, domain);
  int j0 = -1, j1 = -1;
  for (int j = 0; j < raw.nx; ++j) {
    const double x = raw.position(j);
    if (x >= domain.window_begin && x <= domain.window_end) {
      if (j0 < 0) j0 = j;
      j1 = j;
    }
  }
  if (j0 < 0) throw std::invalid_argument("ingestion: window contains no grid cell");

  double jam = domain.jam_density;
  if (jam <= 0.0) {
    std::vector<double> positive;
    for (int n = 0; n < raw.nt; ++n) {
      for (int j = j0; j <= j1; ++j) {
        if (raw.at(n, j) > 1e-9) positive.push_back(raw.at(n, j));
      }
    }
    if (positive.empty()) throw std::invalid_argument("ingestion: no vehicle inside the window");
    const std::size_t q = std::min(positive.size() - 1,
                                   static_cast<std::size_t>(std::floor(0.995 * (positive.size() - 1))));
    std::nth_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(q), positive.end());
    jam = positive[q];
  }

  IngestResult res;
  res.jam_density = jam;
  res.density = DensityGrid(raw.t0, raw.dt, raw.position(j0), raw.dx, raw.nt, j1 - j0 + 1);
  for (int n = 0; n < raw.nt; ++n) {
    for (int j = j0; j <= j1; ++j) res.density.at(n, j - j0) = std::clamp(raw.at(n, j) / jam, 0.0, 1.0);
  }
  return res;
}

std::vector<int> select_probes(const TrajectorySet& table, double p, std::uint64_t seed) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("probe probability must be in (0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution pick(p);
  std::vector<int> ids;
  for (const auto& v : table.vehicles) {
    if (pick(rng)) ids.push_back(v.id);
  }
  if (ids.empty()) {
    throw EmptySelection("no probe vehicle selected with seed " + std::to_string(seed) +
                         "; retry with a different seed");
  }
  return ids;
}

}  // namespace tsr
