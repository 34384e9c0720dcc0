#include "tsr/loss.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace tsr {

using ad::JetLayout;
using ad::Matrix;
using ad::Tensor;

std::string_view to_string(CostKind k) {
  switch (k) {
    case CostKind::Data: return "data";
    case CostKind::Soft: return "soft";
    case CostKind::Hard: return "hard";
  }
  return "data";
}

CostKind cost_kind_from_string(std::string_view s) {
  if (s == "data") return CostKind::Data;
  if (s == "soft") return CostKind::Soft;
  if (s == "hard") return CostKind::Hard;
  throw std::invalid_argument("unknown cost kind '" + std::string(s) + "' (expected data, soft or hard)");
}

CollocationSets sample_collocation(const ProbeDataset& d, int n_rho, int n_y, int n_v, std::uint64_t seed) {
  if (n_rho < 1 || n_y < 1 || n_v < 1) throw std::invalid_argument("collocation sizes must be >= 1");
  CollocationSets c;
  c.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(d.t_min(), d.t_max());
  std::uniform_real_distribution<double> ux(d.y_min(), d.y_max());
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  c.rho_t.resize(n_rho);
  c.rho_x.resize(n_rho);
  for (int k = 0; k < n_rho; ++k) {
    c.rho_t[k] = ut(rng);
    c.rho_x[k] = ux(rng);
  }
  c.traj_t.resize(n_y);
  for (auto& t : c.traj_t) t = ut(rng);
  c.vel_rho.resize(n_v);
  for (auto& r : c.vel_rho) r = ur(rng);
  return c;
}

void CostWeights::validate() const {
  for (int k = 0; k < kCostCount; ++k) {
    if (!(lambda[k] >= 0.0) || !std::isfinite(lambda[k])) {
      throw std::invalid_argument("lambda" + std::to_string(k + 1) + " must be a nonnegative number");
    }
    if (kind[k] == CostKind::Soft && !(soft_bound[k] >= 0.0)) {
      throw std::invalid_argument("soft bound of lambda" + std::to_string(k + 1) + " must be nonnegative");
    }
  }
  if (!(lambda[1] > 0.0) || !(lambda[2] > 0.0)) {
    throw std::invalid_argument("lambda2 and lambda3 must be strictly positive");
  }
  if (physics_enabled() && (!(lambda[5] > 0.0) || !(lambda[7] > 0.0))) {
    throw std::invalid_argument("lambda6 and lambda8 must be strictly positive (or all physics weights zero)");
  }
}

bool CostWeights::physics_enabled() const { return lambda[5] > 0.0 || lambda[7] > 0.0 || lambda[8] > 0.0; }

namespace {

using Want = std::array<bool, kCostCount>;

Tensor row(ad::Tape& tape, const std::vector<double>& v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) m(0, static_cast<Eigen::Index>(k)) = v[k];
  return tape.constant(std::move(m));
}

Tensor masked_sum(ad::Tape& tape, const Tensor& squared, const std::vector<double>& mask) {
  return ad::sum(squared * row(tape, mask));
}

struct Graph {
  std::array<std::optional<Tensor>, kCostCount> L;
  std::optional<Tensor> density_residual;
};

// Builds every requested cost on one tape. Measurement and trajectory costs
// share a single density evaluation over the columns
//   [A: measured positions (t_k, y_i) | B: per PV, data times then
//    collocation times at yhat_i],
// and a single velocity evaluation over [A | B | C: measured densities].
Graph build(ad::Tape& tape, const Bound& b, const ProbeDataset* d, const CollocationSets* c, const Want& want) {
  const ParameterSet& ps = *b.ps;
  Graph g;
  const int N = ps.n_pv();
  if (d && d->n_pv() != N) throw std::invalid_argument("dataset and parameter set disagree on the PV count");
  const int nm = d ? d->n_mea() : 0;
  const int ny = c ? static_cast<int>(c->traj_t.size()) : 0;
  if ((want[0] || want[1] || want[2] || want[3] || want[4]) && !d) {
    throw std::invalid_argument("data costs need a dataset");
  }
  if ((want[5] || want[7] || want[8]) && !c) throw std::invalid_argument("physics costs need collocation points");

  const bool need_a = want[1];
  const bool need_data_traj = want[0] || want[3] || want[4];
  const bool need_colloc_traj = want[7];
  const int pd = need_data_traj ? nm : 0;
  const int pc = need_colloc_traj ? ny : 0;
  const int per = pd + pc;
  const int M = N * nm;
  const int cols_a = need_a ? M : 0;
  const int cols_b = N * per;
  const int cols_c = want[2] ? M : 0;
  const int cols_rho = cols_a + cols_b;
  const int cols_v = cols_rho + cols_c;

  if (cols_rho + cols_c > 0) {
    std::vector<double> t_row(cols_rho), y_target(cols_rho, 0.0), rho_target(cols_rho, 0.0);
    std::vector<double> m1(cols_rho, 0.0), m2(cols_rho, 0.0), m4(cols_rho, 0.0);
    std::vector<double> v_target(cols_v, 0.0), m3(cols_v, 0.0), m5(cols_v, 0.0), m8(cols_v, 0.0);
    Matrix owner = Matrix::Zero(N, std::max(cols_rho, 1));
    const double inv_m = M > 0 ? 1.0 / M : 0.0;
    const double inv_c = ny > 0 ? 1.0 / (static_cast<double>(N) * ny) : 0.0;
    std::vector<double> y_a;
    int col = 0;
    if (need_a) {
      for (int i = 0; i < N; ++i) {
        for (int k = 0; k < nm; ++k, ++col) {
          t_row[col] = d->times()[k];
          y_a.push_back(d->y(i, k));
          rho_target[col] = d->rho(i, k);
          owner(i, col) = 1.0;
          m2[col] = inv_m;
        }
      }
    }
    for (int i = 0; i < N; ++i) {
      for (int k = 0; k < pd; ++k, ++col) {
        t_row[col] = d->times()[k];
        y_target[col] = d->y(i, k);
        rho_target[col] = d->rho(i, k);
        v_target[col] = d->v(i, k);
        owner(i, col) = 1.0;
        if (want[0]) m1[col] = inv_m;
        if (want[3]) m4[col] = inv_m;
        if (want[4]) m5[col] = inv_m;
      }
      for (int k = 0; k < pc; ++k, ++col) {
        t_row[col] = c->traj_t[k];
        m8[col] = inv_c;
      }
    }
    std::vector<double> rho_meas;
    if (want[2]) {
      for (int i = 0; i < N; ++i) {
        for (int k = 0; k < nm; ++k) {
          rho_meas.push_back(d->rho(i, k));
          v_target[cols_rho + i * nm + k] = d->v(i, k);
          m3[cols_rho + i * nm + k] = inv_m;
        }
      }
    }

    std::optional<Tensor> rho_hat, traj_speed;
    if (cols_rho > 0) {
      std::vector<Tensor> x_parts, speed_parts;
      if (need_a) x_parts.push_back(row(tape, y_a));
      const JetLayout layout = JetLayout::first_order(need_colloc_traj ? 1 : 0);
      std::vector<double> t_pv;
      for (int k = 0; k < pd; ++k) t_pv.push_back(d->times()[k]);
      for (int k = 0; k < pc; ++k) t_pv.push_back(c->traj_t[k]);
      if (per > 0) {
        const Tensor t_pv_row = row(tape, t_pv);
        for (int i = 0; i < N; ++i) {
          const TensorJet y = trajectory_jet(b, i, layout, t_pv_row);
          x_parts.push_back(y.v);
          if (need_colloc_traj) speed_parts.push_back(y.grad(0));
        }
      }
      const Tensor x = tape.hconcat(x_parts);
      rho_hat = density_value(b, row(tape, t_row), x);
      if (want[0]) g.L[0] = masked_sum(tape, ad::square(x - row(tape, y_target)), m1);
      if (want[1] || want[3]) {
        Tensor r = row(tape, rho_target) - *rho_hat;
        r = r - ad::matmul(b.n_rho(), tape.constant(owner));
        const Tensor r2 = ad::square(r);
        if (want[1]) g.L[1] = masked_sum(tape, r2, m2);
        if (want[3]) g.L[3] = masked_sum(tape, r2, m4);
      }
      if (need_colloc_traj) {
        std::vector<Tensor> parts;
        if (cols_a > 0) parts.push_back(tape.constant(Matrix::Zero(1, cols_a)));
        for (auto& s : speed_parts) parts.push_back(s);
        if (cols_c > 0) parts.push_back(tape.constant(Matrix::Zero(1, cols_c)));
        traj_speed = tape.hconcat(parts);
      }
    }
    if (want[2] || want[4] || want[7]) {
      std::vector<Tensor> v_in;
      if (rho_hat) v_in.push_back(*rho_hat);
      if (want[2]) v_in.push_back(row(tape, rho_meas));
      const Tensor v_hat = velocity_value(b, tape.hconcat(v_in));
      if (want[2] || want[4]) {
        const Tensor r2 = ad::square(row(tape, v_target) - v_hat);
        if (want[2]) g.L[2] = masked_sum(tape, r2, m3);
        if (want[4]) g.L[4] = masked_sum(tape, r2, m5);
      }
      if (want[7]) g.L[7] = masked_sum(tape, ad::square(*traj_speed - v_hat), m8);
    }
  }

  if (want[5]) {
    const JetLayout layout{2, {{1, 1}}};
    const TensorJet r = density_jet(b, layout, row(tape, c->rho_t), row(tape, c->rho_x));
    const JetLayout dlayout = JetLayout::first_order(1);
    const TensorJet v = velocity_jet(b, ad::make_variable(dlayout, r.v, 0));
    const Tensor fprime = v.v + r.v * v.grad(0);
    const Tensor res = r.grad(0) + fprime * r.grad(1) - (b.g() * b.g()) * r.hess(1, 1);
    g.density_residual = res;
    g.L[5] = ad::sum(ad::square(res)) * (1.0 / static_cast<double>(c->rho_t.size()));
  }
  if (want[6]) g.L[6] = b.g() * b.g();
  if (want[8]) {
    const JetLayout layout = JetLayout::full(1);
    const Tensor rho = row(tape, c->vel_rho);
    const TensorJet v = velocity_jet(b, ad::make_variable(layout, rho, 0));
    const Tensor n = 2.0 * v.grad(0) + rho * v.hess(0, 0);
    g.L[8] = ad::sum(ad::square(ad::relu(n))) * (1.0 / static_cast<double>(c->vel_rho.size()));
  }

  for (int k = 0; k < kCostCount; ++k) {
    if (g.L[k] && !std::isfinite(g.L[k]->scalar())) {
      throw ad::NonFiniteCost(k + 1, "non-finite cost L" + std::to_string(k + 1));
    }
  }
  return g;
}

Want all() {
  Want w;
  w.fill(true);
  return w;
}

double single(const ParameterSet& ps, const ProbeDataset* d, const CollocationSets* c, int k) {
  ad::Tape tape;
  std::vector<Tensor> storage;
  const Bound b = Bound::make(tape, ps, storage, false);
  Want w{};
  w[k] = true;
  return build(tape, b, d, c, w).L[k]->scalar();
}

CostBreakdown breakdown_of(const Graph& g, const CostWeights& w) {
  CostBreakdown out;
  for (int k = 0; k < kCostCount; ++k) {
    out.L[k] = g.L[k]->scalar();
    out.total += w.lambda[k] * out.L[k];
  }
  return out;
}

}  // namespace

std::array<double, 5> data_costs(const ParameterSet& ps, const ProbeDataset& d) {
  ad::Tape tape;
  std::vector<Tensor> storage;
  const Bound b = Bound::make(tape, ps, storage, false);
  const Graph g = build(tape, b, &d, nullptr, Want{true, true, true, true, true});
  return {g.L[0]->scalar(), g.L[1]->scalar(), g.L[2]->scalar(), g.L[3]->scalar(), g.L[4]->scalar()};
}

double cost_L6(const ParameterSet& ps, const CollocationSets& c) { return single(ps, nullptr, &c, 5); }
double cost_L7(const ParameterSet& ps) { return ps.gamma2(); }
double cost_L8(const ParameterSet& ps, const CollocationSets& c) { return single(ps, nullptr, &c, 7); }
double cost_L9(const ParameterSet& ps, const CollocationSets& c) { return single(ps, nullptr, &c, 8); }

std::vector<double> density_residuals(const ParameterSet& ps, const CollocationSets& c) {
  ad::Tape tape;
  std::vector<Tensor> storage;
  const Bound b = Bound::make(tape, ps, storage, false);
  Want w{};
  w[5] = true;
  const Graph g = build(tape, b, nullptr, &c, w);
  const Matrix& m = g.density_residual->value();
  return std::vector<double>(m.data(), m.data() + m.size());
}

CostBreakdown total_cost(const ParameterSet& ps, const ProbeDataset& d, const CollocationSets& c,
                         const CostWeights& w) {
  ad::Tape tape;
  std::vector<Tensor> storage;
  const Bound b = Bound::make(tape, ps, storage, false);
  return breakdown_of(build(tape, b, &d, &c, all()), w);
}

CostEvaluation total_cost_gradient(const ParameterSet& ps, const ProbeDataset& d, const CollocationSets& c,
                                   const CostWeights& w) {
  ad::Tape tape;
  std::vector<Tensor> storage;
  const Bound b = Bound::make(tape, ps, storage, true);
  const Graph g = build(tape, b, &d, &c, all());
  CostEvaluation out;
  out.breakdown = breakdown_of(g, w);
  std::optional<Tensor> root;
  for (int k = 0; k < kCostCount; ++k) {
    if (w.lambda[k] == 0.0) continue;
    const Tensor term = *g.L[k] * w.lambda[k];
    root = root ? *root + term : term;
  }
  if (!root) {
    out.gradient.assign(static_cast<std::size_t>(ps.size()), 0.0);
  } else {
    out.gradient = tape.backward(*root);
  }
  return out;
}

CostArray cost_gradient_norms(const ParameterSet& ps, const ProbeDataset& d, const CollocationSets& c) {
  CostArray out{};
  for (int k = 0; k < kCostCount; ++k) {
    ad::Tape tape;
    std::vector<Tensor> storage;
    const Bound b = Bound::make(tape, ps, storage, true);
    Want w{};
    w[k] = true;
    const Graph g = build(tape, b, &d, &c, w);
    double s = 0.0;
    for (double x : tape.backward(*g.L[k])) s += x * x;
    out[k] = std::sqrt(s);
  }
  return out;
}

}  // namespace tsr
