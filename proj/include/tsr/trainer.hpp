#pragma once

/// \file trainer.hpp
/// Two-phase training: first-order pre-training (ADAM) with dual updates of
/// the cost weights, then quasi-Newton refinement (L-BFGS) with the weights
/// frozen.

#include "tsr/loss.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsr {

struct TrainerConfig {
  int epochs = 2000;
  double alpha = 5e-3;
  double alpha_final = 5e-3;  // exponential decay from alpha over the epochs
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double alpha_lambda = 1e-3;
  double growth_cap = 10.0;  // L_cap in the hard-weight growth factor
  bool pretraining = true;
  int second_order_iterations = 500;
  double tolerance = 1e-8;  // gradient-norm stop of the second phase
  int history = 20;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;

  void validate() const;
  bool operator==(const TrainerConfig&) const = default;
};

struct TraceEntry {
  int step = 0;  // 1-based over both phases
  int phase = 1;  // 1 = pre-training, 2 = second order
  CostBreakdown costs;
  CostArray lambda{};
  double gamma2 = 0.0;
};

struct TrainingReport {
  std::vector<TraceEntry> trace;
  ParameterSet parameters;
  CostWeights weights;
  double wall_time_s = 0.0;
  int epochs_run = 0;
  int second_order_iterations = 0;
  std::string termination;
  std::uint64_t seed = 0;
};

/// Raised when the total cost stops being finite; carries the last finite
/// state and the trace so far.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, TrainingReport partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const TrainingReport& partial() const { return partial_; }

 private:
  TrainingReport partial_;
};

/// Data weights stay fixed; hard weights grow as lambda (1 + alpha_lambda
/// min(L, cap)); soft weights relax toward target * D / L (D = weighted data
/// cost) and are clamped to [0, bound].
CostWeights update_weights(const CostWeights& w, const CostBreakdown& b, const TrainerConfig& cfg);

using TraceSink = std::function<void(const TraceEntry&)>;

struct PretrainResult {
  ParameterSet parameters;
  CostWeights weights;
  std::vector<TraceEntry> trace;
};

PretrainResult pretrain(const ParameterSet& theta0, const ProbeDataset& d, const CollocationSets& c,
                        const CostWeights& w0, const TrainerConfig& cfg, const TraceSink& sink = {});

TrainingReport train_second_order(const ParameterSet& theta, const ProbeDataset& d, const CollocationSets& c,
                                  const CostWeights& w, const TrainerConfig& cfg, int first_step = 1,
                                  const TraceSink& sink = {});

/// Generic minimizer used by the second phase.
struct Objective {
  std::function<double(const std::vector<double>&, std::vector<double>&)> value_gradient;
  std::function<void(std::vector<double>&)> project;  // optional feasibility map
};

struct LbfgsResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  std::string termination;
  std::vector<double> accepted;  // cost after each accepted step
};

LbfgsResult lbfgs_minimize(const Objective& obj, std::vector<double> x0, int max_iterations, double tolerance,
                           int history, const std::function<void(int, const std::vector<double>&, double)>& on_step = {});

struct PipelineConfig {
  NetworkSpecs specs;
  double gamma0 = 0.05;
  int n_phy_rho = 500;
  int n_phy_y = 100;
  int n_phy_v = 200;
  CostWeights weights;
  TrainerConfig trainer;
  std::uint64_t seed = 1;
};

/// initialize -> (pretrain) -> freeze weights -> second order.
TrainingReport run_pipeline(const ProbeDataset& d, const PipelineConfig& cfg, const TraceSink& sink = {});

void write_log_header(std::ostream& os);
void write_log_row(std::ostream& os, const TraceEntry& e);

}  // namespace tsr
