#include "helpers.hpp"

#include "tsr/trainer.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace tsr;

namespace {

ProbeDataset tiny_dataset() {
  const auto in = tsr::test::linear_instance(0.4, 1.0);
  return in.data;
}

NetworkSpecs tiny_specs() {
  NetworkSpecs s;
  s.density.hidden = {5, 5};
  s.trajectory.hidden = {3};
  s.velocity.hidden = {3};
  return s;
}

PipelineConfig tiny_pipeline(bool pretraining) {
  PipelineConfig cfg;
  cfg.specs = tiny_specs();
  cfg.n_phy_rho = 40;
  cfg.n_phy_y = 10;
  cfg.n_phy_v = 20;
  cfg.trainer.epochs = 15;
  cfg.trainer.second_order_iterations = 20;
  cfg.trainer.pretraining = pretraining;
  cfg.seed = 4;
  return cfg;
}

}  // namespace

TEST_CASE("weight updates by cost kind") {
  CostWeights w;
  w.lambda = {1, 1, 1, 1, 1, 2, 0.2, 3, 1};
  CostBreakdown b;
  b.L = {0.1, 0.2, 0.3, 0.0, 0.0, 0.5, 0.01, 50.0, 0.0};
  TrainerConfig cfg;
  cfg.alpha_lambda = 0.1;
  cfg.growth_cap = 10.0;
  const CostWeights u = update_weights(w, b, cfg);
  for (int k = 0; k < 5; ++k) CHECK(u.lambda[k] == w.lambda[k]);
  CHECK(u.lambda[5] == doctest::Approx(2.0 * (1.0 + 0.1 * 0.5)));
  CHECK(u.lambda[7] == doctest::Approx(3.0 * (1.0 + 0.1 * 10.0)));
  CHECK(u.lambda[8] == 1.0);
  // D = 0.6, target = 0.1 * 0.6 / 0.01 = 6
  CHECK(u.lambda[6] == doctest::Approx(0.2 + 0.1 * (6.0 - 0.2)));
  CostWeights near = w;
  near.lambda[6] = 0.99;
  CHECK(update_weights(near, b, cfg).lambda[6] == 1.0);
  b.L[6] = 1.0;
  CHECK(update_weights(w, b, cfg).lambda[6] == doctest::Approx(0.2 + 0.1 * (0.06 - 0.2)));
  b.L[6] = 0.0;
  CHECK(update_weights(w, b, cfg).lambda[6] == doctest::Approx(0.2 + 0.1 * (1.0 - 0.2)));
  for (int k = 5; k < kCostCount; ++k) CHECK(u.lambda[k] >= 0.0);
  CostWeights off = w;
  off.lambda[5] = off.lambda[6] = off.lambda[7] = off.lambda[8] = 0.0;
  CHECK(update_weights(off, b, cfg) == off);
}

TEST_CASE("pre-training without epochs is the identity") {
  const auto in = tsr::test::linear_instance();
  TrainerConfig cfg;
  cfg.epochs = 0;
  const PretrainResult r = pretrain(in.ps, in.data, in.colloc, CostWeights{}, cfg);
  CHECK(r.parameters == in.ps);
  CHECK(r.weights == CostWeights{});
  CHECK(r.trace.empty());
}

TEST_CASE("a stationary instance does not move") {
  const auto in = tsr::test::zero_instance();
  TrainerConfig cfg;
  cfg.epochs = 25;
  cfg.second_order_iterations = 10;
  const PretrainResult pre = pretrain(in.ps, in.data, in.colloc, CostWeights{}, cfg);
  CHECK(pre.parameters == in.ps);
  for (int k = 0; k < kCostCount; ++k) {
    // Only the soft weight moves, toward its bound since L7 = 0.
    if (k != 6) CHECK(pre.weights.lambda[k] == CostWeights{}.lambda[k]);
  }
  CHECK(pre.weights.lambda[6] > 0.0);
  for (const auto& e : pre.trace) CHECK(e.costs.total == 0.0);
  const TrainingReport rep = train_second_order(in.ps, in.data, in.colloc, CostWeights{}, cfg);
  CHECK(rep.parameters == in.ps);
  CHECK(rep.termination == "gradient tolerance");
  CHECK(rep.second_order_iterations == 0);
}

TEST_CASE("a small learning rate decreases a trajectory-dominated cost") {
  auto in = tsr::test::linear_instance();
  const ParameterSet ps = initialize(NetworkSpecs{}, 3, in.ps.normalization(), 0.0, 8);
  CostWeights w;
  w.lambda.fill(0.0);
  w.lambda[0] = 1.0;
  w.lambda[1] = 1e-12;
  w.lambda[2] = 1e-12;
  TrainerConfig cfg;
  cfg.epochs = 60;
  cfg.alpha = cfg.alpha_final = 1e-4;
  const PretrainResult r = pretrain(ps, in.data, in.colloc, w, cfg);
  REQUIRE(r.trace.size() == 60);
  for (std::size_t e = 1; e < r.trace.size(); ++e) CHECK(r.trace[e].costs.L[0] < r.trace[e - 1].costs.L[0]);
}

TEST_CASE("quasi-Newton minimizer on a quadratic") {
  const double a = 3.0, b = -1.5;
  Objective obj;
  obj.value_gradient = [&](const std::vector<double>& x, std::vector<double>& g) {
    g = {2.0 * (x[0] - a) + 0.5 * (x[1] - b), 0.5 * (x[0] - a) + 8.0 * (x[1] - b)};
    return (x[0] - a) * (x[0] - a) + 0.5 * (x[0] - a) * (x[1] - b) + 4.0 * (x[1] - b) * (x[1] - b);
  };
  const LbfgsResult r = lbfgs_minimize(obj, {-4.0, 7.0}, 50, 1e-10, 5);
  CHECK(std::abs(r.x[0] - a) <= 1e-8);
  CHECK(std::abs(r.x[1] - b) <= 1e-8);
  CHECK(r.iterations <= 50);
  CHECK(r.termination == "gradient tolerance");
  for (std::size_t k = 1; k < r.accepted.size(); ++k) CHECK(r.accepted[k] <= r.accepted[k - 1]);

  const LbfgsResult at = lbfgs_minimize(obj, {a, b}, 50, 1e-10, 5);
  CHECK(at.iterations == 0);
  CHECK(at.termination == "gradient tolerance");

  const LbfgsResult capped = lbfgs_minimize(obj, {-4.0, 7.0}, 1, 1e-14, 5);
  CHECK(capped.iterations == 1);
  CHECK(capped.termination == "iteration cap");
}

TEST_CASE("second-order steps never increase the total cost") {
  const ProbeDataset d = tiny_dataset();
  const ParameterSet ps = initialize(tiny_specs(), d.n_pv(), Normalization::from_dataset(d), 0.1, 2);
  const CollocationSets c = sample_collocation(d, 40, 10, 20, 3);
  TrainerConfig cfg;
  cfg.second_order_iterations = 40;
  const TrainingReport r = train_second_order(ps, d, c, CostWeights{}, cfg);
  REQUIRE_FALSE(r.trace.empty());
  double prev = total_cost(ps, d, c, CostWeights{}).total;
  for (const auto& e : r.trace) {
    CHECK(e.phase == 2);
    CHECK(e.costs.total <= prev);
    prev = e.costs.total;
  }
  CHECK(total_cost(r.parameters, d, c, CostWeights{}).total == doctest::Approx(prev).epsilon(1e-12));
}

TEST_CASE("pipeline") {
  const ProbeDataset d = tiny_dataset();
  const PipelineConfig with = tiny_pipeline(true), without = tiny_pipeline(false);
  const TrainingReport a = run_pipeline(d, with);
  const TrainingReport b = run_pipeline(d, without);

  SUBCASE("trace layout") {
    CHECK(a.trace.size() == static_cast<std::size_t>(a.epochs_run + a.second_order_iterations));
    CHECK(a.epochs_run == 15);
    for (std::size_t k = 0; k < a.trace.size(); ++k) {
      CHECK(a.trace[k].step == static_cast<int>(k) + 1);
      CHECK(a.trace[k].phase == (k < 15 ? 1 : 2));
    }
    CHECK(b.epochs_run == 0);
    CHECK(b.trace.size() == static_cast<std::size_t>(b.second_order_iterations));
  }
  SUBCASE("pre-training changes the outcome") {
    CHECK_FALSE(a.parameters == b.parameters);
    CHECK(b.weights == without.weights);
    for (const auto& e : b.trace) CHECK(e.lambda == without.weights.lambda);
  }
  SUBCASE("weight trajectories") {
    for (std::size_t k = 1; k < a.trace.size(); ++k) {
      for (int j = 0; j < kCostCount; ++j) {
        if (with.weights.kind[j] == CostKind::Hard) CHECK(a.trace[k].lambda[j] >= a.trace[k - 1].lambda[j]);
        if (with.weights.kind[j] == CostKind::Data) CHECK(a.trace[k].lambda[j] == with.weights.lambda[j]);
      }
    }
    CHECK(a.weights.lambda == a.trace.back().lambda);
  }
  SUBCASE("determinism") {
    const TrainingReport again = run_pipeline(d, with);
    CHECK(again.parameters == a.parameters);
    CHECK(again.trace.size() == a.trace.size());
    CHECK(again.trace.back().costs.total == a.trace.back().costs.total);
    PipelineConfig other = with;
    other.seed = 5;
    CHECK_FALSE(run_pipeline(d, other).parameters == a.parameters);
  }
}

TEST_CASE("pure regression still trains") {
  const ProbeDataset d = tiny_dataset();
  PipelineConfig cfg = tiny_pipeline(true);
  cfg.weights.lambda[5] = cfg.weights.lambda[6] = cfg.weights.lambda[7] = cfg.weights.lambda[8] = 0.0;
  CHECK_NOTHROW(cfg.weights.validate());
  const TrainingReport r = run_pipeline(d, cfg);
  CHECK(r.trace.back().costs.total < r.trace.front().costs.total);
  for (const auto& e : r.trace) {
    for (int k = 5; k < kCostCount; ++k) CHECK(e.lambda[k] == 0.0);
  }
}

TEST_CASE("invalid configurations are rejected") {
  TrainerConfig cfg;
  cfg.epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainerConfig{};
  cfg.history = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  const auto in = tsr::test::zero_instance();
  CostWeights w;
  w.lambda[1] = 0.0;
  CHECK_THROWS_AS(pretrain(in.ps, in.data, in.colloc, w, TrainerConfig{}), std::invalid_argument);
}

TEST_CASE("training log rows") {
  std::ostringstream os;
  write_log_header(os);
  CHECK(os.str() ==
        "epoch,L1,L2,L3,L4,L5,L6,L7,L8,L9,total,lambda1,lambda2,lambda3,lambda4,lambda5,lambda6,lambda7,lambda8,"
        "lambda9,gamma2\n");
  TraceEntry e;
  e.step = 7;
  e.costs.L[0] = 0.25;
  e.costs.total = 0.5;
  e.lambda.fill(1.0);
  e.gamma2 = 0.01;
  std::ostringstream row;
  write_log_row(row, e);
  const std::string s = row.str();
  CHECK(s.rfind("7,0.25,", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), ',') == 20);
  CHECK(s.back() == '\n');
}
