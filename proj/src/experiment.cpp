#include "tsr/experiment.hpp"

#include "tsr/csv.hpp"

#include <algorithm>
#include <cmath>

namespace tsr {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kNoiseSalt = 0x6e6f697365ULL;
constexpr std::uint64_t kSelectSalt = 0x73656c656374ULL;

double square_wave(double t, double high, double low, double period) {
  const double phase = t / period - std::floor(t / period);
  return phase < 0.5 ? high : low;
}

std::vector<double> even_positions(int n, double a, double b) {
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = n == 1 ? a : a + i * (b - a) / (n - 1);
  return y;
}

// Keeps the part of a trajectory before its first exit from [lo, hi].
Trajectory crop_to_window(const Trajectory& tr, double lo, double hi) {
  Trajectory out;
  out.id = tr.id;
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    if (tr.y[k] < lo || tr.y[k] > hi) break;
    out.t.push_back(tr.t[k]);
    out.y.push_back(tr.y[k]);
  }
  return out;
}

CaseData godunov_case(const ExperimentConfig& cfg, const std::string& name, std::uint64_t seed) {
  const auto& dom = cfg.domain;
  CaseData c;
  c.name = name;
  const VelocityModel v = name == "nd" ? make_velocity_model(cfg.model, VelocityKind::SmoothedNewellDaganzo)
                                       : make_velocity_model(cfg.model, VelocityKind::Greenshields);
  c.reference = v;
  GodunovSetup setup;
  setup.length = dom.length;
  setup.horizon = dom.horizon;
  setup.dx = dom.dx;
  setup.boundary = BoundaryKind::InflowOutflow;
  setup.inflow = [dom](double t) {
    if (dom.inflow_smoothing <= 0.0) return square_wave(t, dom.inflow_high, dom.inflow_low, dom.inflow_period);
    const double s = std::tanh(std::sin(2.0 * M_PI * t / dom.inflow_period) / dom.inflow_smoothing);
    return dom.inflow_low + (dom.inflow_high - dom.inflow_low) * 0.5 * (1.0 + s);
  };
  auto rho0 = [dom](double x) {
    if (dom.edge_width <= 0.0) {
      return x >= dom.block_begin && x <= dom.block_end ? dom.block_density : dom.initial_density;
    }
    const double w = dom.edge_width;
    const double bump = 0.5 * (std::tanh((x - dom.block_begin) / w) - std::tanh((x - dom.block_end) / w));
    return dom.initial_density + (dom.block_density - dom.initial_density) * bump;
  };
  c.truth = godunov_solve(FluxModel{v}, rho0, setup);
  c.probes =
      pv_trajectories(c.truth, v, even_positions(cfg.dataset.n_pv, cfg.dataset.pv_begin, cfg.dataset.pv_end));
  const ProbeDataset clean = sample_probes(c.truth, c.probes, v, cfg.dataset.n_mea);
  c.dataset = add_noise(clean, cfg.dataset.sigma_rho, cfg.dataset.bias_range, mix(seed ^ kNoiseSalt));
  return c;
}

CaseData micro_case(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& ig = cfg.ingestion;
  const auto& mc = cfg.micro;
  CaseData c;
  c.name = "micro";
  const VelocityModel v = make_velocity_model(cfg.model, cfg.model.kind);

  VehicleFleet fleet;
  for (int i = 0; i < mc.vehicles; ++i) fleet.positions.push_back(mc.rear + i * mc.spacing);
  fleet.leader_speed = [mc](double t) { return square_wave(t, mc.leader_high, mc.leader_low, mc.leader_period); };
  FtlSetup ftl;
  ftl.horizon = mc.horizon;
  ftl.dt = mc.dt;
  ftl.vehicle_length = cfg.model.vehicle_length;
  ftl.record_every = mc.record_every;
  c.all_vehicles = ftl_simulate(v, fleet, ftl);

  KernelSpec kernel{cfg.ingestion.sigma_space, cfg.ingestion.sigma_time, cfg.ingestion.cell_dx,
                    cfg.ingestion.cell_dt, cfg.ingestion.truncation};
  IngestDomain idom;
  idom.t_begin = 0.0;
  idom.t_end = mc.horizon;
  idom.x_begin = 0.0;
  idom.x_end = mc.length;
  idom.window_begin = ig.window_begin;
  idom.window_end = ig.window_end;
  idom.jam_density = cfg.ingestion.jam_density;
  IngestResult ing = ingest_trajectories(c.all_vehicles, kernel, idom);
  c.truth = std::move(ing.density);
  c.jam_density = ing.jam_density;

  const std::vector<int> ids = select_probes(c.all_vehicles, cfg.dataset.p, mix(seed ^ kSelectSalt));
  const double lo = std::max(ig.window_begin, c.truth.x_lower());
  const double hi = std::min(ig.window_end, c.truth.x_upper());
  for (int id : ids) {
    Trajectory tr = crop_to_window(c.all_vehicles.by_id(id), lo, hi);
    if (tr.t.size() < 2) {
      throw ConfigError("micro: probe vehicle " + std::to_string(id) + " starts outside the window");
    }
    c.probes.vehicles.push_back(std::move(tr));
  }
  double span_end = mc.horizon;
  for (const auto& tr : c.probes.vehicles) span_end = std::min(span_end, tr.t_finish());
  if (span_end < 0.5 * mc.horizon) {
    throw ConfigError("micro: probe vehicles leave the window before half the horizon");
  }
  const ProbeDataset clean = sample_probes(c.truth, c.probes, std::nullopt, cfg.dataset.n_mea);
  c.dataset = add_noise(clean, cfg.dataset.sigma_rho, cfg.dataset.bias_range, mix(seed ^ kNoiseSalt));
  c.dataset.metadata["kernel"] = {{"sigma_space", kernel.sigma_space}, {"sigma_time", kernel.sigma_time},
                                  {"cell_dx", kernel.cell_dx},         {"cell_dt", kernel.cell_dt},
                                  {"truncation", kernel.truncation},   {"jam_density", c.jam_density},
                                  {"p", cfg.dataset.p},
                                  {"window", {ig.window_begin, ig.window_end}}};
  return c;
}

}  // namespace

VelocityModel make_velocity_model(const ModelSection& m, VelocityKind kind) {
  switch (kind) {
    case VelocityKind::Greenshields: return VelocityModel::greenshields(m.free_flow);
    case VelocityKind::NewellDaganzo: return VelocityModel::newell_daganzo(m.free_flow, m.wave_speed);
    case VelocityKind::SmoothedNewellDaganzo:
      return VelocityModel::smoothed_newell_daganzo(m.free_flow, m.wave_speed, m.smoothing);
    case VelocityKind::Learned: break;
  }
  throw ConfigError("model.kind: a learned model cannot generate data");
}

CaseData generate_case(const ExperimentConfig& cfg, const std::string& case_name, std::uint64_t seed) {
  cfg.validate();
  CaseData c;
  if (case_name == "greenshields" || case_name == "nd") {
    c = godunov_case(cfg, case_name, seed);
  } else if (case_name == "micro") {
    c = micro_case(cfg, seed);
  } else {
    throw ConfigError("case: unknown case '" + case_name + "' (expected greenshields, nd or micro)");
  }
  ExperimentConfig effective = cfg;
  effective.case_name = case_name;
  effective.seed = seed;
  c.dataset.metadata["case"] = case_name;
  c.dataset.metadata["seed"] = seed;
  c.dataset.metadata["config"] = to_yaml(effective);
  return c;
}

void write_case(const CaseData& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  c.truth.write_csv(dir / files::truth);
  c.probes.write_csv(dir / files::probes);
  if (!c.all_vehicles.vehicles.empty()) c.all_vehicles.write_csv(dir / files::vehicles);
  c.dataset.save(dir / files::dataset);
}

PipelineConfig pipeline_config(const ExperimentConfig& cfg, std::uint64_t seed, bool pretrain) {
  PipelineConfig p;
  p.specs.density.hidden = cfg.network.density;
  p.specs.trajectory.hidden = cfg.network.trajectory;
  p.specs.velocity.hidden = cfg.network.velocity;
  p.gamma0 = cfg.network.gamma0;
  p.n_phy_rho = cfg.loss.n_phy_rho;
  p.n_phy_y = cfg.loss.n_phy_y;
  p.n_phy_v = cfg.loss.n_phy_v;
  p.weights = cfg.loss.weights;
  p.trainer = cfg.trainer;
  p.trainer.pretraining = pretrain && cfg.trainer.pretraining;
  p.seed = seed;
  return p;
}

EvaluationResult evaluate_case(const CaseData& c, const ParameterSet& ps) {
  EvaluationResult r;
  r.case_name = c.name;
  const ProbeDataset& d = c.dataset;
  r.ge = generalization_error(
      c.truth, [&ps](std::span<const double> t, std::span<const double> x) { return density_forward(ps, t, x); },
      probe_region(c.probes), d.t_min(), d.t_max());
  if (c.reference) r.velocity_error = velocity_error(ps, *c.reference);
  return r;
}

CaseRun run_case(const ExperimentConfig& cfg, const CaseData& c, std::uint64_t seed, bool pretrain,
                 const TraceSink& sink) {
  CaseRun run;
  run.report = run_pipeline(c.dataset, pipeline_config(cfg, seed, pretrain), sink);
  run.result = evaluate_case(c, run.report.parameters);
  run.result.seed = seed;
  run.result.pretrain = pretrain;
  run.result.time_s = run.report.wall_time_s;
  return run;
}

}  // namespace tsr
