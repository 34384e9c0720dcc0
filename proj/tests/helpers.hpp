#pragma once

#include "tsr/dataset.hpp"
#include "tsr/expr.hpp"
#include "tsr/loss.hpp"
#include "tsr/networks.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace tsr::test {

/// |a - b| relative to |b|, with an absolute floor near zero.
inline bool close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= std::max(rel * std::abs(b), abs_floor);
}

/// The density network of `ps` as an expression tree, with inputs
/// (x, t) in that order (swapped against the network code on purpose).
inline ad::Expr density_expr(const ParameterSet& ps) {
  using ad::Expr;
  const Normalization& n = ps.normalization();
  std::vector<Expr> h{Expr::apply("affine", {Expr::input(1)}, {n.t_scale(), -n.t_mid() * n.t_scale()}),
                      Expr::apply("affine", {Expr::input(0)}, {n.x_scale(), -n.x_mid() * n.x_scale()})};
  const BlockRange r = ps.density_blocks();
  for (int b = r.begin; b < r.end; b += 2) {
    const auto& shape = ps.layout().block(b);
    const auto w = ps.block(b);
    const auto bias = ps.block(b + 1);
    std::vector<Expr> next;
    for (int i = 0; i < shape.rows; ++i) {
      std::vector<double> p;
      for (int j = 0; j < shape.cols; ++j) p.push_back(w[j * shape.rows + i]);
      p.push_back(bias[i]);
      Expr z = Expr::apply("affine", h, p);
      next.push_back(b + 2 < r.end ? Expr::apply("tanh", {z}) : z);
    }
    h = std::move(next);
  }
  return Expr::apply("affine", {Expr::apply("tanh", {h[0]})}, {0.5, 0.5});
}

/// A default-sized parameter set on the unit box with random weights,
/// random biases and random n_rho.
inline ParameterSet random_parameters(std::uint64_t seed, int n_pv = 2, double spread = 1.0) {
  Normalization n;
  n.t_min = 0.0;
  n.t_max = 3.0;
  n.y_min = 0.2;
  n.y_max = 2.2;
  n.v_scale = 0.9;
  ParameterSet ps = initialize(NetworkSpecs{}, n_pv, n, 0.05, seed);
  std::mt19937_64 rng(seed * 7919 + 1);
  std::uniform_real_distribution<double> u(-0.3 * spread, 0.3 * spread);
  for (double& v : ps.values) v += u(rng);
  ps.clamp_biases();
  return ps;
}

inline void zero_blocks(ParameterSet& ps, BlockRange r) {
  for (int b = r.begin; b < r.end; ++b)
    for (double& w : ps.block(b)) w = 0.0;
}

/// Density network constant at `rho` (zero final layer).
inline void set_constant_density(ParameterSet& ps, double rho) {
  zero_blocks(ps, ps.density_blocks());
  ps.block(ps.density_blocks().end - 1)[0] = std::atanh(2.0 * rho - 1.0);
}

/// v(rho) = vf (1 - rho), the Greenshields form, through a constant core.
inline void set_greenshields_velocity(ParameterSet& ps, double vf) {
  zero_blocks(ps, ps.velocity_blocks());
  const double s = vf / ps.normalization().v_scale;
  ps.block(ps.velocity_blocks().end - 1)[0] = std::log(std::expm1(s));
}

/// Trajectory network of PV i close to y0 + speed t: every hidden layer
/// passes one small signal through the linear part of tanh.
inline void set_linear_trajectory(ParameterSet& ps, int i, double y0, double speed, double delta = 1e-4) {
  const BlockRange r = ps.trajectory_blocks(i);
  zero_blocks(ps, r);
  const Normalization& n = ps.normalization();
  ps.block(r.begin)[0] = delta;
  for (int b = r.begin + 2; b + 2 < r.end; b += 2) ps.block(b)[0] = 1.0;
  ps.block(r.end - 2)[0] = n.x_scale() * speed / (delta * n.t_scale());
  ps.block(r.end - 1)[0] = n.x_scale() * (y0 + speed * n.t_mid() - n.x_mid());
}

struct Instance {
  ParameterSet ps;
  ProbeDataset data;
  CollocationSets colloc;
};

/// One stationary PV inside a constant field, with parameters at which
/// every cost and every gradient entry vanishes exactly.
inline Instance zero_instance() {
  std::vector<double> times(10);
  for (int k = 0; k < 10; ++k) times[k] = 0.1 * k;
  ProbeDataset d(times, 1);
  for (int k = 0; k < 10; ++k) {
    d.y(0, k) = 1.0;
    d.rho(0, k) = 0.5;
    d.v(0, k) = 0.0;
  }
  ParameterSet ps = initialize(NetworkSpecs{}, 1, Normalization::from_dataset(d), 0.0, 4);
  zero_blocks(ps, ps.density_blocks());
  zero_blocks(ps, ps.trajectory_blocks(0));
  zero_blocks(ps, ps.velocity_blocks());
  ps.block(ps.velocity_blocks().end - 1)[0] = -800.0;
  return {ps, d, sample_collocation(d, 50, 20, 20, 3)};
}

/// Noiseless probes in a constant Greenshields field, and parameters fitted
/// to it in closed form.
inline Instance linear_instance(double rho_c = 0.3, double vf = 1.0) {
  const DensityGrid g(0.0, 0.05, 0.005, 0.01, 41, 300, rho_c);
  const VelocityModel v = VelocityModel::greenshields(vf);
  const std::vector<double> y0{0.2, 0.6, 1.0};
  const TrajectorySet probes = pv_trajectories(g, v, y0);
  const ProbeDataset d = sample_probes(g, probes, v, 25);
  ParameterSet ps = initialize(NetworkSpecs{}, 3, Normalization::from_dataset(d), 0.0, 9);
  set_constant_density(ps, rho_c);
  set_greenshields_velocity(ps, vf);
  for (int i = 0; i < 3; ++i) set_linear_trajectory(ps, i, y0[i], v.velocity(rho_c));
  return {ps, d, sample_collocation(d, 100, 30, 40, 5)};
}

}  // namespace tsr::test
