// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--config FILE] [--default-config FILE] [--only 1,2,...]
//              [--runs N] [--seeds N] [--out DIR]

#include "cli.hpp"

#include "tsr/config.hpp"
#include "tsr/csv.hpp"
#include "tsr/dataset.hpp"
#include "tsr/evaluation.hpp"
#include "tsr/experiment.hpp"
#include "tsr/loss.hpp"
#include "tsr/networks.hpp"
#include "tsr/simulators.hpp"
#include "tsr/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace tsr;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string g(double x) { return csv::g9(x); }

double rel_err(double a, double b, double floor) { return std::abs(a - b) / std::max(std::abs(b), floor); }

// Richardson-extrapolated central differences.
template <class F>
double d1(F&& f, double x, double h) {
  auto c = [&](double s) { return (f(x + s) - f(x - s)) / (2 * s); };
  return (4 * c(h / 2) - c(h)) / 3;
}

template <class F>
double d2(F&& f, double x, double h) {
  auto c = [&](double s) { return (f(x + s) - 2 * f(x) + f(x - s)) / (s * s); };
  return (4 * c(h / 2) - c(h)) / 3;
}

ParameterSet perturbed(std::uint64_t seed, int n_pv, double spread) {
  Normalization n{0.0, 3.0, 0.2, 2.2, 0.9};
  ParameterSet ps = initialize(NetworkSpecs{}, n_pv, n, 0.1, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-spread, spread);
  for (double& v : ps.values) v += u(rng);
  ps.clamp_biases();
  return ps;
}

// ---------------------------------------------------------------------------

Verdict criterion_kernels() {
  Verdict v;
  const auto t0 = Clock::now();

  // Network derivatives against finite differences.
  double first = 0.0, second = 0.0;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ut(0.1, 2.9), ux(0.3, 2.1), ur(0.05, 0.95);
  for (int k = 0; k < 100; ++k) {
    const ParameterSet ps = perturbed(1000 + k, 1, 0.3);
    const double t = ut(rng), x = ux(rng), r = ur(rng);
    ad::Tape tape;
    std::vector<ad::Tensor> storage;
    const Bound b = Bound::make(tape, ps, storage, false);
    const ad::JetLayout both = ad::JetLayout::full(2), in_time = ad::JetLayout::first_order(1);
    const TensorJet j = density_jet(b, both, tape.constant(t), tape.constant(x));
    auto in_t = [&](double s) { return density_forward(ps, s, x); };
    auto in_x = [&](double s) { return density_forward(ps, t, s); };
    auto mixed = [&](double s) { return d1([&](double q) { return density_forward(ps, s, q); }, x, 1e-3); };
    first = std::max({first, rel_err(j.grad(0).scalar(), d1(in_t, t, 1e-3), 1e-6),
                      rel_err(j.grad(1).scalar(), d1(in_x, x, 1e-3), 1e-6)});
    second = std::max({second, rel_err(j.hess(0, 0).scalar(), d2(in_t, t, 2e-3), 1e-6),
                       rel_err(j.hess(1, 1).scalar(), d2(in_x, x, 2e-3), 1e-6),
                       rel_err(j.hess(0, 1).scalar(), d1(mixed, t, 2e-3), 1e-6)});

    const TensorJet y = trajectory_jet(b, 0, in_time, tape.constant(t));
    first = std::max(first, rel_err(y.grad(0).scalar(),
                                    d1([&](double s) { return trajectory_forward(ps, 0, s); }, t, 1e-3), 1e-6));

    const double rr[1] = {r};
    const VelocityDerivatives vd = velocity_curve(ps, rr)[0];
    auto vel = [&](double s) { return velocity_forward(ps, s); };
    first = std::max(first, rel_err(vd.dv, d1(vel, r, 1e-3), 1e-6));
    second = std::max(second, rel_err(vd.d2v, d2(vel, r, 2e-3), 1e-6));
  }

  // Parameter gradient of the full cost along random directions.
  double grad_err = 0.0;
  {
    ParameterSet ps = perturbed(77, 2, 0.2);
    std::vector<double> times(12);
    for (int k = 0; k < 12; ++k) times[k] = 0.2 + 0.2 * k;
    ProbeDataset d(times, 2);
    for (int i = 0; i < 2; ++i) {
      for (int k = 0; k < 12; ++k) {
        d.y(i, k) = 0.4 + 0.9 * i + 0.3 * times[k];
        d.rho(i, k) = 0.3 + 0.1 * std::sin(3.0 * k + i);
        d.v(i, k) = 0.9 * (1.0 - d.rho(i, k));
      }
    }
    const CollocationSets c = sample_collocation(d, 40, 10, 20, 4);
    CostWeights w;
    w.lambda = {1.0, 1.0, 1.0, 0.5, 0.5, 2.0, 0.3, 1.5, 4.0};
    const CostEvaluation ev = total_cost_gradient(ps, d, c, w);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> dir(ps.values.size());
      double norm = 0.0;
      for (double& q : dir) {
        q = nd(rng);
        norm += q * q;
      }
      double analytic = 0.0;
      for (std::size_t i = 0; i < dir.size(); ++i) analytic += (dir[i] /= std::sqrt(norm)) * ev.gradient[i];
      auto along = [&](double s) {
        ParameterSet q = ps;
        for (std::size_t i = 0; i < dir.size(); ++i) q.values[i] += s * dir[i];
        return total_cost(q, d, c, w).total;
      };
      grad_err = std::max(grad_err, rel_err(analytic, d1(along, 0.0, 1e-4), 1e-6));
    }
  }
  v.detail << "autodiff max rel err: first " << g(first) << ", second " << g(second) << ", cost gradient "
           << g(grad_err) << ";";
  v.require(first <= 1e-5 && grad_err <= 1e-5, "first derivatives");
  v.require(second <= 1e-4, "second derivatives");

  // Conservation and invariant domain with closed boundaries.
  double drift = 0.0;
  bool inside = true;
  for (const FluxModel& f : {FluxModel{VelocityModel::greenshields(1.0)},
                            FluxModel{VelocityModel::smoothed_newell_daganzo(1.0, 0.6, 0.01)}}) {
    GodunovSetup s;
    s.boundary = BoundaryKind::Closed;
    s.length = 3.0;
    s.dx = 0.01;
    const double dt = 0.9 * s.dx;
    s.dt = dt;
    s.horizon = 1000 * dt;
    const DensityGrid out = godunov_solve(
        f, [](double x) { return 0.5 + 0.45 * std::sin(2.1 * x) * std::cos(5.3 * x); }, s);
    double m0 = 0.0;
    for (int j = 0; j < out.nx; ++j) m0 += out.at(0, j);
    for (int n = 1; n < out.nt; ++n) {
      double m = 0.0;
      for (int j = 0; j < out.nx; ++j) {
        const double r = out.at(n, j);
        inside = inside && r >= 0.0 && r <= 1.0;
        m += r;
      }
      drift = std::max(drift, std::abs(m - m0) / m0);
    }
  }
  v.detail << " mass drift over 1000 steps " << g(drift) << ";";
  v.require(drift <= 1e-12, "conservation");
  v.require(inside, "invariant domain");

  // Riemann problems for Greenshields with V_f = 1.
  const FluxModel gs{VelocityModel::greenshields(1.0)};
  const double dx = 0.01, x0 = 5.0;
  auto crossing = [&](const DensityGrid& out, int n, bool decreasing) {
    for (int j = 0; j + 1 < out.nx; ++j) {
      const double a = out.at(n, j) - 0.5, b = out.at(n, j + 1) - 0.5;
      if (decreasing ? (a >= 0.0 && b < 0.0) : (a <= 0.0 && b > 0.0)) {
        return out.position(j) + dx * a / (a - b);
      }
    }
    return std::numeric_limits<double>::quiet_NaN();
  };
  auto riemann = [&](double left, double right) {
    GodunovSetup s;
    s.length = 10.0;
    s.dx = dx;
    s.dt = 0.9 * dx;
    s.horizon = 500 * s.dt;
    s.inflow = [left](double) { return left; };
    return godunov_solve(gs, [=](double x) { return x < x0 ? left : right; }, s);
  };
  const DensityGrid shock = riemann(0.2, 0.8);
  double shock_shift = 0.0;
  for (int n = 0; n < shock.nt; ++n) shock_shift = std::max(shock_shift, std::abs(crossing(shock, n, false) - x0));
  const DensityGrid fan = riemann(1.0, 0.0);
  const double fan_shift = std::abs(crossing(fan, fan.nt - 1, true) - x0);
  v.detail << " shock interface moved " << g(shock_shift / dx) << " cells in " << shock.nt - 1
           << " steps; rarefaction 1/2-level off x/t = 0 by " << g(fan_shift / dx) << " cells;";
  v.require(std::isfinite(shock_shift) && shock_shift <= dx, "stationary shock");
  v.require(std::isfinite(fan_shift) && fan_shift <= 2 * dx, "rarefaction");

  const double elapsed = seconds_since(t0);
  v.detail << " " << g(elapsed) << " s";
  v.require(elapsed < 60.0, "time budget");
  return v;
}

// ---------------------------------------------------------------------------

struct StudyRecord {
  EvaluationResult result;
  double l9_grid = 0.0;        // mean concavity violation on 1001 densities
  double max_increase = 0.0;   // largest rise of vhat between neighbours
  bool lambda_ok = true;       // hard non-decreasing, data constant
};

StudyRecord score(const ExperimentConfig& cfg, const CaseData& c, std::uint64_t seed, bool pretrain) {
  const auto t0 = Clock::now();
  const CaseRun run = run_case(cfg, c, seed, pretrain);
  StudyRecord s;
  s.result = run.result;
  s.result.time_s = seconds_since(t0);
  std::vector<double> rho(1001);
  for (int k = 0; k <= 1000; ++k) rho[k] = k / 1000.0;
  const auto curve = velocity_curve(run.report.parameters, rho);
  for (int k = 0; k <= 1000; ++k) {
    const double n = 2.0 * curve[k].dv + rho[k] * curve[k].d2v;
    s.l9_grid += std::pow(std::max(0.0, n), 2) / 1001.0;
    if (k > 0) s.max_increase = std::max(s.max_increase, curve[k].v - curve[k - 1].v);
  }
  const CostWeights& w0 = cfg.loss.weights;
  const auto& tr = run.report.trace;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    for (int j = 0; j < kCostCount; ++j) {
      const double prev = k ? tr[k - 1].lambda[j] : w0.lambda[j];
      if (w0.kind[j] == CostKind::Hard) s.lambda_ok = s.lambda_ok && tr[k].lambda[j] >= prev;
      if (w0.kind[j] == CostKind::Data) s.lambda_ok = s.lambda_ok && tr[k].lambda[j] == w0.lambda[j];
    }
  }
  return s;
}

void print_run(const std::string& tag, const StudyRecord& r) {
  std::cout << "  " << tag << " seed " << r.result.seed << ": GE " << g(r.result.ge);
  if (r.result.velocity_error >= 0.0) std::cout << ", velocity error " << g(r.result.velocity_error);
  std::cout << ", " << g(r.result.time_s) << " s" << std::endl;
}

struct StudyState {
  std::map<std::tuple<std::string, bool, std::uint64_t>, StudyRecord> runs;
  bool complete = false;
};

StudyRecord& cached_run(StudyState& st, const ExperimentConfig& cfg, const std::string& name, std::uint64_t seed,
                        bool pretrain) {
  const auto key = std::make_tuple(name, pretrain, seed);
  auto it = st.runs.find(key);
  if (it != st.runs.end()) return it->second;
  StudyRecord r;
  try {
    const CaseData c = generate_case(cfg, name, seed);
    r = score(cfg, c, seed, pretrain);
  } catch (const std::exception& e) {
    r.result.ok = false;
    r.result.error = e.what();
  }
  r.result.case_name = name;
  r.result.seed = seed;
  r.result.pretrain = pretrain;
  print_run(name + (pretrain ? " pretrain" : " no-pretrain"), r);
  return st.runs.emplace(key, r).first->second;
}

Verdict criterion_reconstruction(const ExperimentConfig& cfg, int n_seeds, StudyState& st) {
  Verdict v;
  ExperimentConfig data_only = cfg;
  for (int k : {5, 6, 7, 8}) data_only.loss.weights.lambda[k] = 0.0;
  const double vf = cfg.model.free_flow;
  std::vector<double> ratio, verr, l9, rise, times;
  int failures = 0;
  for (int s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    const StudyRecord& phys = cached_run(st, cfg, "greenshields", seed, true);
    StudyRecord base;
    try {
      const CaseData c = generate_case(data_only, "greenshields", seed);
      base = score(data_only, c, seed, true);
      base.result.seed = seed;
      print_run("greenshields data-only", base);
    } catch (const std::exception& e) {
      base.result.ok = false;
    }
    if (!phys.result.ok || !base.result.ok) {
      ++failures;
      continue;
    }
    ratio.push_back(phys.result.ge / base.result.ge);
    verr.push_back(phys.result.velocity_error);
    l9.push_back(phys.l9_grid);
    rise.push_back(phys.max_increase);
    times.push_back(phys.result.time_s);
  }
  v.require(failures == 0, std::to_string(failures) + " failed runs");
  if (ratio.empty()) return v;
  const double mr = median(ratio), mv = median(verr), ml9 = median(l9), mrise = median(rise);
  v.detail << "median over " << ratio.size() << " seeds: GE ratio physics/data-only " << g(mr) << " (per seed";
  for (double r : ratio) v.detail << " " << g(r);
  v.detail << "), velocity error " << g(mv) << " (<= " << g(0.15 * vf) << "), L9 " << g(ml9)
           << ", largest vhat rise " << g(mrise) << ", max run " << g(*std::max_element(times.begin(), times.end()))
           << " s";
  v.require(mr <= 0.5, "GE ratio");
  v.require(mv <= 0.15 * vf, "velocity error");
  v.require(ml9 <= 1e-4, "L9");
  v.require(mrise <= 1e-3 * vf, "vhat non-increasing");
  return v;
}

Verdict criterion_pretraining(const ExperimentConfig& cfg, int runs, StudyState& st, const fs::path& out) {
  Verdict v;
  StudySummary summary;
  for (const auto& name : case_names()) {
    for (bool pre : {true, false}) {
      for (int s = 0; s < runs; ++s) {
        summary.results.push_back(cached_run(st, cfg, name, cfg.seed + static_cast<std::uint64_t>(s), pre).result);
      }
    }
  }
  fs::create_directories(out);
  summary.write_csv(out / "study.csv");
  summary.write_table(std::cout);
  for (const std::string name : {"greenshields", "nd"}) {
    const GroupStats a = summary.group(name, true), b = summary.group(name, false);
    v.detail << (name == "nd" ? " " : "") << name << ": mean GE " << g(a.mean) << " vs " << g(b.mean) << ", variance " << g(a.variance) << " vs "
             << g(b.variance) << ";";
    v.require(a.failures == 0 && b.failures == 0, name + " runs failed");
    v.require(a.mean <= b.mean, name + " mean");
    v.require(a.variance <= b.variance, name + " variance");
  }
  const GroupStats ma = summary.group("micro", true), mb = summary.group("micro", false);
  v.detail << " micro: mean GE " << g(ma.mean) << " vs " << g(mb.mean) << " (" << ma.runs << "+" << mb.runs
           << " runs completed)";
  v.require(ma.runs > 0 && mb.runs > 0, "micro study");
  return v;
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Verdict criterion_invariants(const ExperimentConfig& cfg, const fs::path& out) {
  Verdict v;
  const auto t0 = Clock::now();
  int zero_at_jam = 0, outside = 0, checked = 0;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> wide(-1e3, 1e3), box(0.0, 3.0);
  for (int k = 0; k < 100; ++k) {
    const ParameterSet ps = perturbed(5000 + k, 1, k < 50 ? 2.0 : 50.0);
    zero_at_jam += velocity_forward(ps, 1.0) == 0.0;
    std::vector<double> t, x;
    for (int q = 0; q < 100; ++q) {
      t.push_back(q % 2 ? wide(rng) : box(rng));
      x.push_back(q % 3 ? box(rng) : wide(rng));
    }
    for (double r : density_forward(ps, t, x)) {
      ++checked;
      outside += !(r > 0.0 && r < 1.0);
    }
  }
  v.detail << "vhat(1) = 0 in " << zero_at_jam << "/100 draws; " << outside << "/" << checked
           << " densities outside (0,1);";
  v.require(zero_at_jam == 100, "vhat(1)");
  v.require(outside == 0, "density range");

  // Short training runs through the command line, twice with one seed.
  ExperimentConfig quick = cfg;
  quick.trainer.epochs = 60;
  quick.trainer.second_order_iterations = 20;
  const fs::path dir = out / "reproducibility";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "quick.yaml");
    os << to_yaml(quick);
  }
  std::ostringstream sink;
  const std::string c = (dir / "quick.yaml").string();
  bool ran = cli::run({"generate", "--config", c, "--out", (dir / "a").string()}, sink, sink) == cli::kExitOk;
  if (ran) fs::copy(dir / "a", dir / "b", fs::copy_options::recursive);
  for (const char* run : {"a", "b"}) {
    ran = ran && cli::run({"train", "--config", c, "--out", (dir / run).string()}, sink, sink) == cli::kExitOk;
  }
  v.require(ran, "command-line runs: " + sink.str());
  const std::string la = slurp(dir / "a" / files::log), lb = slurp(dir / "b" / files::log);
  const bool same_log = !la.empty() && la == lb;
  const bool same_ckpt = slurp(dir / "a" / files::checkpoint) == slurp(dir / "b" / files::checkpoint);
  v.detail << " repeated training logs " << (same_log ? "identical" : "differ") << " ("
           << std::count(la.begin(), la.end(), '\n') - 1 << " rows), checkpoints "
           << (same_ckpt ? "identical" : "differ") << ";";
  v.require(same_log && same_ckpt, "bit-exact reproduction");

  // Weight trajectories from the same run.
  bool hard_ok = true, data_ok = true;
  {
    std::ifstream is(dir / "a" / files::log);
    std::string line;
    std::getline(is, line);
    std::vector<double> prev(quick.loss.weights.lambda.begin(), quick.loss.weights.lambda.end());
    while (std::getline(is, line)) {
      const auto f = csv::split(line);
      for (int j = 0; j < kCostCount; ++j) {
        const double lam = csv::to_double(f[11 + j], 0);
        if (quick.loss.weights.kind[j] == CostKind::Hard) hard_ok = hard_ok && lam >= prev[j];
        if (quick.loss.weights.kind[j] == CostKind::Data) data_ok = data_ok && lam == quick.loss.weights.lambda[j];
        prev[j] = lam;
      }
    }
  }
  v.detail << " hard weights " << (hard_ok ? "non-decreasing" : "decrease") << ", data weights "
           << (data_ok ? "constant" : "change") << ";";
  v.require(hard_ok, "hard weights");
  v.require(data_ok, "data weights");
  const double elapsed = seconds_since(t0);
  v.detail << " " << g(elapsed) << " s";
  v.require(elapsed < 60.0, "time budget");
  return v;
}

// ---------------------------------------------------------------------------

Verdict criterion_ingestion(const fs::path& default_config) {
  Verdict v;
  double worst = 0.0;
  for (double speed : {0.0, 0.4}) {
    Trajectory tr;
    tr.id = 1;
    for (int k = 0; k <= 500; ++k) {
      tr.t.push_back(1.0 + k * 0.002);
      tr.y.push_back(1.2345 + speed * k * 0.002);
    }
    TrajectorySet set;
    set.vehicles.push_back(tr);
    IngestDomain dom;
    dom.t_end = 3.0;
    const DensityGrid raw = kernel_density_raw(set, KernelSpec{}, dom);
    double mass = 0.0, oracle = 0.0;
    for (double x : raw.values) mass += x * raw.dx * raw.dt;
    for (int n = 0; n < raw.nt; ++n) oracle += (raw.time(n) >= tr.t_begin() && raw.time(n) <= tr.t_finish()) * raw.dt;
    worst = std::max(worst, std::abs(mass - oracle) / oracle);
  }
  v.detail << "kernel mass rel err " << g(worst) << ";";
  v.require(worst <= 0.01, "kernel mass");

  const ExperimentConfig cfg = load_config(default_config);
  const auto& in = cfg.ingestion;
  const bool defaults = in.sigma_space == 0.01 && in.sigma_time == 0.06 && cfg.dataset.p == 0.1 &&
                        in.window_begin == 0.0 && in.window_end == 2.5;
  v.detail << " " << default_config.filename().string() << ": sigma_space " << g(in.sigma_space) << ", sigma_time "
           << g(in.sigma_time) << ", p " << g(cfg.dataset.p) << ", window [" << g(in.window_begin) << ", "
           << g(in.window_end) << "];";
  v.require(defaults, "shipped defaults");
  const CaseData c = generate_case(cfg, "micro", cfg.seed);
  const ExperimentConfig echoed = parse_config(c.dataset.metadata.at("config").get<std::string>());
  const bool echo = echoed.ingestion == cfg.ingestion && echoed.dataset.p == cfg.dataset.p &&
                    echoed.case_name == "micro";
  v.detail << " micro run metadata " << (echo ? "echoes" : "does not echo") << " them (" << c.dataset.n_pv()
           << " probes of " << c.all_vehicles.vehicles.size() << " vehicles)";
  v.require(echo, "metadata echo");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string config = std::string(TSR_CONFIG_DIR) + "/acceptance.yaml";
  std::string default_config = std::string(TSR_CONFIG_DIR) + "/default.yaml";
  std::string out = "acceptance_out";
  std::vector<int> only;
  int runs = 10, seeds = 5;
  app.add_option("--config", config, "Scenario for criteria 2 and 3")->check(CLI::ExistingFile);
  app.add_option("--default-config", default_config, "Shipped default configuration")->check(CLI::ExistingFile);
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  app.add_option("--runs", runs, "Runs per case and pretraining flag");
  app.add_option("--seeds", seeds, "Seeds of the reconstruction criterion");
  app.add_option("--out", out, "Output directory");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5} : std::set<int>(only.begin(), only.end());
  const ExperimentConfig cfg = load_config(config);
  StudyState st;
  const char* names[] = {"", "numerical kernels", "end-to-end Greenshields reconstruction", "pre-training ablation",
                         "structural invariants", "ingestion pipeline"};
  bool all = true;
  for (int k : selected) {
    if (k < 1 || k > 5) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      switch (k) {
        case 1: v = criterion_kernels(); break;
        case 2: v = criterion_reconstruction(cfg, seeds, st); break;
        case 3: v = criterion_pretraining(cfg, runs, st, out); break;
        case 4: v = criterion_invariants(cfg, out); break;
        case 5: v = criterion_ingestion(default_config); break;
      }
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    all = all && v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << k << " (" << names[k] << "): " << v.detail.str()
              << " [" << g(seconds_since(t0)) << " s]" << std::endl;
  }
  return all ? 0 : 1;
}
