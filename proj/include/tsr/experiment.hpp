#pragma once

/// \file experiment.hpp
/// The three experiment cases (Godunov data under Greenshields or smoothed
/// Newell-Daganzo flux, and follow-the-leader micro data) and the glue that
/// turns a configuration into datasets, trained parameters and scores.

#include "tsr/config.hpp"
#include "tsr/dataset.hpp"
#include "tsr/evaluation.hpp"
#include "tsr/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace tsr {

struct CaseData {
  std::string name;
  DensityGrid truth;           // Godunov solution, or the ingested kernel estimate
  TrajectorySet all_vehicles;  // micro case only
  TrajectorySet probes;        // true PV trajectories
  ProbeDataset dataset;        // noisy measurements
  std::optional<VelocityModel> reference;
  double jam_density = 0.0;  // vehicles/km, micro case only
};

/// Velocity model of the configured kind and parameters.
VelocityModel make_velocity_model(const ModelSection& m, VelocityKind kind);

/// Builds one case. Truth fields are deterministic given the config; the
/// probe selection and the measurement noise depend on `seed`.
CaseData generate_case(const ExperimentConfig& cfg, const std::string& case_name, std::uint64_t seed);

/// File names used by write_case and the CLI.
namespace files {
inline constexpr const char* truth = "truth_density.csv";
inline constexpr const char* vehicles = "trajectories.csv";
inline constexpr const char* probes = "probe_trajectories.csv";
inline constexpr const char* dataset = "dataset.csv";
inline constexpr const char* checkpoint = "checkpoint.json";
inline constexpr const char* log = "training_log.csv";
inline constexpr const char* config = "config.yaml";
}  // namespace files

void write_case(const CaseData& c, const std::filesystem::path& dir);

PipelineConfig pipeline_config(const ExperimentConfig& cfg, std::uint64_t seed, bool pretrain);

/// GE over the measurement time span between the outermost true PVs, and
/// the velocity error when the case has a reference model.
EvaluationResult evaluate_case(const CaseData& c, const ParameterSet& ps);

struct CaseRun {
  TrainingReport report;
  EvaluationResult result;
};

CaseRun run_case(const ExperimentConfig& cfg, const CaseData& c, std::uint64_t seed, bool pretrain,
                 const TraceSink& sink = {});

}  // namespace tsr
