#include "cli.hpp"

#include "tsr/config.hpp"
#include "tsr/csv.hpp"
#include "tsr/evaluation.hpp"
#include "tsr/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

namespace tsr::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string case_name;
  std::optional<std::uint64_t> seed;
  int runs = 10;
  std::string out = ".";
  bool no_pretrain = false;
  std::string dataset, checkpoint, truth, probes;
};

// Input files that fail to load are user errors, not numerical ones.
template <class F>
auto load_input(const fs::path& p, const char* what, F&& f) {
  if (!fs::exists(p)) throw ConfigError(std::string("missing ") + what + " file " + p.string());
  try {
    return f(p);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot read ") + what + " file " + p.string() + ": " + e.what());
  }
}

ExperimentConfig effective_config(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (!o.case_name.empty()) cfg.case_name = o.case_name;
  if (o.seed) cfg.seed = *o.seed;
  if (o.no_pretrain) cfg.trainer.pretraining = false;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& p, const std::string& s) {
  auto os = csv::open_out(p);
  os << s;
}

std::optional<VelocityModel> reference_for(const ExperimentConfig& cfg) {
  if (cfg.case_name == "greenshields") return make_velocity_model(cfg.model, VelocityKind::Greenshields);
  if (cfg.case_name == "nd") return make_velocity_model(cfg.model, VelocityKind::SmoothedNewellDaganzo);
  return std::nullopt;
}

nlohmann::json report_json(const TrainingReport& r, const TrainerConfig& t) {
  nlohmann::json j;
  j["termination"] = r.termination;
  j["epochs_run"] = r.epochs_run;
  j["second_order_iterations"] = r.second_order_iterations;
  j["wall_time_s"] = r.wall_time_s;
  j["seed"] = r.seed;
  j["alpha_lambda"] = t.alpha_lambda;
  j["growth_cap"] = t.growth_cap;
  nlohmann::json w;
  w["lambda"] = r.weights.lambda;
  std::vector<std::string> kinds;
  for (auto k : r.weights.kind) kinds.emplace_back(to_string(k));
  w["kinds"] = kinds;
  w["soft_target"] = r.weights.soft_target;
  w["soft_bound"] = r.weights.soft_bound;
  j["weights"] = w;
  if (!r.trace.empty()) {
    j["final_costs"] = r.trace.back().costs.L;
    j["final_total"] = r.trace.back().costs.total;
  }
  return j;
}

int cmd_generate(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = effective_config(o);
  const CaseData c = generate_case(cfg, cfg.case_name, cfg.seed);
  const fs::path dir = o.out;
  write_case(c, dir);
  write_text(dir / files::config, to_yaml(cfg));
  if (c.name == "micro") c.truth.write_csv(dir / "ingested_density.csv");
  out << "case " << c.name << ": " << c.dataset.n_pv() << " probe vehicles, " << c.dataset.n_mea()
      << " samples each, truth grid " << c.truth.nt << " x " << c.truth.nx << "\n";
  out << "wrote " << (dir / files::dataset).string() << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = effective_config(o);
  const fs::path dir = o.out;
  const fs::path data_path = o.dataset.empty() ? dir / files::dataset : fs::path(o.dataset);
  const ProbeDataset d = load_input(data_path, "dataset", [](const fs::path& p) { return ProbeDataset::load(p); });
  fs::create_directories(dir);
  PipelineConfig pc = pipeline_config(cfg, cfg.seed, cfg.trainer.pretraining);
  if (pc.trainer.checkpoint_every > 0 && pc.trainer.checkpoint_dir.empty()) pc.trainer.checkpoint_dir = dir;

  auto log = csv::open_out(dir / files::log);
  write_log_header(log);
  auto sink = [&log](const TraceEntry& e) { write_log_row(log, e); };
  try {
    const TrainingReport r = run_pipeline(d, pc, sink);
    log.flush();
    r.parameters.save(dir / files::checkpoint);
    write_text(dir / "training_report.json", report_json(r, pc.trainer).dump(2) + "\n");
    write_text(dir / files::config, to_yaml(cfg));
    out << "trained " << r.epochs_run << " epochs + " << r.second_order_iterations
        << " second-order iterations in " << csv::g9(r.wall_time_s) << " s (" << r.termination << ")\n";
    if (!r.trace.empty()) out << "final total cost " << csv::g9(r.trace.back().costs.total) << "\n";
    return kExitOk;
  } catch (const TrainingDiverged& e) {
    log.flush();
    e.partial().parameters.save(dir / "checkpoint_partial.json");
    err << "error: training diverged: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = effective_config(o);
  const fs::path dir = o.out;
  const fs::path ck = o.checkpoint.empty() ? dir / files::checkpoint : fs::path(o.checkpoint);
  const fs::path tr = o.truth.empty() ? dir / files::truth : fs::path(o.truth);
  const fs::path pr = o.probes.empty() ? dir / files::probes : fs::path(o.probes);
  const ParameterSet ps = load_input(ck, "checkpoint", [](const fs::path& p) { return ParameterSet::load(p); });
  const DensityGrid truth = load_input(tr, "truth", [](const fs::path& p) { return DensityGrid::read_csv(p); });
  const TrajectorySet probes =
      load_input(pr, "probe trajectory", [](const fs::path& p) { return TrajectorySet::read_csv(p); });

  if (static_cast<int>(probes.vehicles.size()) != ps.n_pv()) {
    throw ConfigError("checkpoint has " + std::to_string(ps.n_pv()) + " trajectory networks but the probe file has " +
                      std::to_string(probes.vehicles.size()) + " vehicles");
  }
  const Normalization& n = ps.normalization();
  const double slack = 1e-6 * std::max({1.0, std::abs(n.t_max), std::abs(n.y_max)});
  if (n.t_min < truth.t0 - slack || n.t_max > truth.t_end() + slack || n.y_min < truth.x_lower() - slack ||
      n.y_max > truth.x_upper() + slack) {
    throw ConfigError("checkpoint normalization box [" + csv::g9(n.t_min) + ", " + csv::g9(n.t_max) + "] x [" +
                      csv::g9(n.y_min) + ", " + csv::g9(n.y_max) + "] is not covered by the truth grid");
  }
  const RegionBounds bounds = probe_region(probes);
  for (double t : {n.t_min, 0.5 * (n.t_min + n.t_max), n.t_max}) {
    const auto [lo, hi] = bounds(t);
    if (lo < n.y_min - slack || hi > n.y_max + slack) {
      throw ConfigError("probe trajectories leave the checkpoint normalization box at t = " + csv::g9(t));
    }
  }

  EvaluationResult r;
  r.case_name = cfg.case_name;
  r.seed = ps.seed;
  r.ge = generalization_error(
      truth, [&ps](std::span<const double> t, std::span<const double> x) { return density_forward(ps, t, x); },
      bounds, n.t_min, n.t_max);
  if (const auto ref = reference_for(cfg)) r.velocity_error = velocity_error(ps, *ref);

  // Export on the truth nodes that lie inside the trained box.
  GridSpec spec;
  spec.dt = truth.dt;
  spec.dx = truth.dx;
  const double tol = 1e-9;
  int n0 = 0, n1 = truth.nt - 1, j0 = 0, j1 = truth.nx - 1;
  while (n0 < truth.nt && truth.time(n0) < n.t_min - tol) ++n0;
  while (n1 >= 0 && truth.time(n1) > n.t_max + tol) --n1;
  while (j0 < truth.nx && truth.position(j0) < n.y_min - tol) ++j0;
  while (j1 >= 0 && truth.position(j1) > n.y_max + tol) --j1;
  if (n1 >= n0 && j1 >= j0) {
    spec.t0 = truth.time(n0);
    spec.nt = n1 - n0 + 1;
    spec.x0 = truth.position(j0);
    spec.nx = j1 - j0 + 1;
    write_reconstruction(export_reconstruction(ps, spec), dir);
  }

  nlohmann::json j;
  j["case"] = r.case_name;
  j["ge"] = r.ge;
  if (r.velocity_error >= 0.0) j["velocity_error"] = r.velocity_error;
  j["checkpoint"] = ck.string();
  j["truth"] = tr.string();
  fs::create_directories(dir);
  write_text(dir / "evaluation.json", j.dump(2) + "\n");
  out << "GE " << csv::g9(r.ge) << "\n";
  if (r.velocity_error >= 0.0) out << "velocity_error " << csv::g9(r.velocity_error) << "\n";
  return kExitOk;
}

int cmd_study(const Options& o, bool case_given, std::ostream& out) {
  const ExperimentConfig cfg = effective_config(o);
  if (o.runs < 2) throw ConfigError("--runs must be >= 2");
  std::vector<std::string> cases = case_given ? std::vector<std::string>{cfg.case_name} : case_names();
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < o.runs; ++k) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(k));
  const fs::path dir = o.out;
  fs::create_directories(dir);

  auto runner = [&cfg](const std::string& name, std::uint64_t seed, bool pretrain) {
    const CaseData c = generate_case(cfg, name, seed);
    return run_case(cfg, c, seed, pretrain).result;
  };
  auto progress = [&out](const EvaluationResult& r) {
    out << r.case_name << " seed " << r.seed << (r.pretrain ? " pretrain" : " no-pretrain") << ": ";
    if (r.ok) {
      out << "GE " << csv::g9(r.ge) << ", " << csv::g9(r.time_s) << " s\n";
    } else {
      out << "failed (" << r.error << ")\n";
    }
    out.flush();
  };
  const StudySummary s = run_study(cases, seeds, runner, progress);
  s.write_csv(dir / "study.csv");
  {
    auto os = csv::open_out(dir / "study_summary.txt");
    s.write_table(os);
  }
  write_text(dir / files::config, to_yaml(cfg));
  s.write_table(out);
  const bool any_ok = std::any_of(s.results.begin(), s.results.end(), [](const auto& r) { return r.ok; });
  return any_ok ? kExitOk : kExitNumerical;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Traffic state reconstruction from probe vehicles"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Base seed");
  app.add_option("--config", o.config, "YAML experiment configuration")->check(CLI::ExistingFile);
  auto* case_opt = app.add_option("--case", o.case_name, "greenshields, nd or micro")
                       ->check(CLI::IsMember({"greenshields", "nd", "micro"}));
  app.add_option("--runs", o.runs, "Runs per case and pretraining flag (study)");
  app.add_option("--out", o.out, "Output directory");
  app.add_flag("--no-pretrain", o.no_pretrain, "Skip the first-order pre-training phase");

  auto* gen = app.add_subcommand("generate", "Simulate a case and write truth and probe datasets");
  auto* train = app.add_subcommand("train", "Train on a probe dataset");
  train->add_option("--dataset", o.dataset, "Probe dataset CSV (default OUT/dataset.csv)");
  auto* eval = app.add_subcommand("evaluate", "Score a checkpoint against a truth grid and export it");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint JSON (default OUT/checkpoint.json)");
  eval->add_option("--truth", o.truth, "Truth density CSV (default OUT/truth_density.csv)");
  eval->add_option("--probes", o.probes, "True probe trajectories CSV (default OUT/probe_trajectories.csv)");
  auto* study = app.add_subcommand("study", "Repeated runs with and without pretraining");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUser;
  }
  if (*seed_opt) o.seed = seed;

  try {
    if (*gen) return cmd_generate(o, out);
    if (*train) return cmd_train(o, out, err);
    if (*eval) return cmd_evaluate(o, out);
    if (*study) return cmd_study(o, static_cast<bool>(*case_opt), out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const TrainingDiverged& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUser;
}

}  // namespace tsr::cli
