#pragma once

/// \file config.hpp
/// Experiment configuration: one YAML file with flat sections. Parsing is
/// total: every key is known and typed, and errors name the key path.

#include "tsr/loss.hpp"
#include "tsr/simulators.hpp"
#include "tsr/trainer.hpp"
#include "tsr/traffic_models.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tsr {

struct ModelSection {
  VelocityKind kind = VelocityKind::Greenshields;  // spacing-to-speed map of the micro case
  double free_flow = 1.0;                          // V_f, km/min
  double wave_speed = 0.6;                         // W, km/min
  double smoothing = 0.01;                         // soft-min width of the smoothed ND flux
  double vehicle_length = 0.005;                   // L_veh, km
  bool operator==(const ModelSection&) const = default;
};

/// Road, horizon and scenario of the two Godunov cases.
struct DomainSection {
  double length = 3.0;  // road [0, length], km
  double horizon = 3.0;  // T, min
  double dx = 0.01;
  // Godunov scenario: background density with one dense block, fed by a
  // square-wave inflow.
  double initial_density = 0.3;
  double block_density = 0.8;
  double block_begin = 1.2;
  double block_end = 1.8;
  double inflow_low = 0.2;
  double inflow_high = 0.7;
  double inflow_period = 1.0;
  double edge_width = 0.0;        // tanh width of the block edges, km; 0 = sharp
  double inflow_smoothing = 0.0;  // tanh sharpness of the inflow wave; 0 = square
  bool operator==(const DomainSection&) const = default;
};

struct DatasetSection {
  int n_pv = 5;
  double p = 0.1;  // probe share in the micro case
  int n_mea = 200;
  double sigma_rho = 0.05;
  double bias_range = 0.05;
  double pv_begin = 0.1;  // initial PV positions, evenly spaced
  double pv_end = 1.0;
  bool operator==(const DatasetSection&) const = default;
};

struct IngestionSection {
  double sigma_space = 0.01;
  double sigma_time = 0.06;
  double cell_dx = 0.005;
  double cell_dt = 0.01;
  double truncation = 4.0;
  double jam_density = 0.0;  // vehicles/km; 0 selects the 99.5th percentile
  double window_begin = 0.0;  // reconstructed stretch of the micro road, km
  double window_end = 2.5;
  bool operator==(const IngestionSection&) const = default;
};

struct MicroSection {
  double length = 3.0;   // road, km
  double horizon = 3.0;  // min
  int vehicles = 120;
  double spacing = 0.01;  // initial headway, km
  double rear = 0.1;      // initial position of the last vehicle, km
  double leader_high = 0.5;
  double leader_low = 0.05;
  double leader_period = 1.0;
  double dt = 1e-3;
  int record_every = 10;
  bool operator==(const MicroSection&) const = default;
};

struct NetworkSection {
  std::vector<int> density{10, 10, 10, 10, 10};
  std::vector<int> trajectory{5, 5, 5};
  std::vector<int> velocity{5, 5};
  double gamma0 = 0.05;
  bool operator==(const NetworkSection&) const = default;
};

struct LossSection {
  int n_phy_rho = 500;
  int n_phy_y = 100;
  int n_phy_v = 200;
  CostWeights weights;
  bool operator==(const LossSection&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string case_name = "greenshields";
  ModelSection model;
  DomainSection domain;
  DatasetSection dataset;
  IngestionSection ingestion;
  MicroSection micro;
  NetworkSection network;
  LossSection loss;
  TrainerConfig trainer;

  /// Range and consistency checks beyond typing; throws ConfigError.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

inline const std::vector<std::string>& case_names() {
  static const std::vector<std::string> names{"greenshields", "nd", "micro"};
  return names;
}

/// Parses YAML text; missing keys keep their defaults, unknown keys and
/// type errors raise ConfigError naming the key path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The effective configuration as YAML; parse_config(to_yaml(c)) == c.
std::string to_yaml(const ExperimentConfig& c);

}  // namespace tsr
