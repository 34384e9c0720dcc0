#include "tsr/trainer.hpp"

#include "tsr/csv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>

namespace tsr {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

TraceEntry entry(int step, int phase, const CostBreakdown& b, const CostWeights& w, const ParameterSet& ps) {
  TraceEntry e;
  e.step = step;
  e.phase = phase;
  e.costs = b;
  e.lambda = w.lambda;
  e.gamma2 = ps.gamma2();
  return e;
}

void maybe_checkpoint(const TrainerConfig& cfg, int step, const ParameterSet& ps) {
  if (cfg.checkpoint_every <= 0 || step % cfg.checkpoint_every != 0 || cfg.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(cfg.checkpoint_dir);
  ps.save(cfg.checkpoint_dir / ("checkpoint_" + std::to_string(step) + ".json"));
}

struct Sample {
  double f = 0.0;
  double slope = 0.0;
  std::vector<double> x, g;
};

// Strong Wolfe line search along d from (x, f0, g0); the trial point is
// projected before evaluation.
bool wolfe_search(const Objective& obj, const std::vector<double>& x, double f0, double slope0,
                  const std::vector<double>& d, double a_init, Sample& out) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  constexpr int max_eval = 30;
  int evals = 0;
  auto phi = [&](double a) {
    Sample s;
    s.x.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) s.x[i] = x[i] + a * d[i];
    if (obj.project) obj.project(s.x);
    s.g.assign(x.size(), 0.0);
    s.f = obj.value_gradient(s.x, s.g);
    s.slope = std::isfinite(s.f) ? dot(s.g, d) : std::numeric_limits<double>::infinity();
    ++evals;
    return s;
  };
  auto armijo = [&](double a, const Sample& s) { return std::isfinite(s.f) && s.f <= f0 + c1 * a * slope0; };

  double a_lo = 0.0, a_hi = 0.0;
  Sample s_lo{f0, slope0, x, {}};
  bool have_lo_sample = false;
  Sample s_hi;
  double a = a_init, a_prev = 0.0;
  Sample s_prev{f0, slope0, x, {}};
  bool bracketed = false;
  while (evals < max_eval) {
    Sample s = phi(a);
    if (!armijo(a, s) || (evals > 1 && s.f >= s_prev.f)) {
      a_lo = a_prev;
      s_lo = s_prev;
      have_lo_sample = evals > 1;
      a_hi = a;
      s_hi = s;
      bracketed = true;
      break;
    }
    if (std::abs(s.slope) <= -c2 * slope0) {
      out = std::move(s);
      return true;
    }
    if (s.slope >= 0.0) {
      a_lo = a;
      s_lo = s;
      have_lo_sample = true;
      a_hi = a_prev;
      s_hi = s_prev;
      bracketed = true;
      break;
    }
    a_prev = a;
    s_prev = std::move(s);
    a *= 2.0;
  }
  if (!bracketed) {
    if (s_prev.f < f0) {
      out = std::move(s_prev);
      return true;
    }
    return false;
  }
  while (evals < max_eval) {
    const double lo = std::min(a_lo, a_hi), hi = std::max(a_lo, a_hi);
    double a_new = 0.5 * (a_lo + a_hi);
    if (std::isfinite(s_hi.f) && std::isfinite(s_hi.slope)) {
      // cubic interpolation through both end points
      const double d1 = s_lo.slope + s_hi.slope - 3.0 * (s_lo.f - s_hi.f) / (a_lo - a_hi);
      const double rad = d1 * d1 - s_lo.slope * s_hi.slope;
      if (rad >= 0.0) {
        const double d2 = std::copysign(std::sqrt(rad), a_hi - a_lo);
        const double cand =
            a_hi - (a_hi - a_lo) * (s_hi.slope + d2 - d1) / (s_hi.slope - s_lo.slope + 2.0 * d2);
        if (std::isfinite(cand)) a_new = cand;
      }
    }
    const double w = hi - lo;
    a_new = std::clamp(a_new, lo + 0.1 * w, hi - 0.1 * w);
    if (w <= 1e-16 * std::max(1.0, hi)) break;
    Sample s = phi(a_new);
    if (!armijo(a_new, s) || s.f >= s_lo.f) {
      a_hi = a_new;
      s_hi = std::move(s);
    } else {
      if (std::abs(s.slope) <= -c2 * slope0) {
        out = std::move(s);
        return true;
      }
      if (s.slope * (a_hi - a_lo) >= 0.0) {
        a_hi = a_lo;
        s_hi = s_lo;
      }
      a_lo = a_new;
      s_lo = std::move(s);
      have_lo_sample = true;
    }
  }
  if (have_lo_sample && a_lo > 0.0 && s_lo.f < f0) {
    out = std::move(s_lo);
    return true;
  }
  return false;
}

}  // namespace

void TrainerConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("trainer.epochs must be >= 0");
  if (!(alpha > 0.0) || !(alpha_final > 0.0)) throw std::invalid_argument("trainer.alpha must be > 0");
  if (!(alpha_lambda > 0.0)) throw std::invalid_argument("trainer.alpha_lambda must be > 0");
  if (!(tolerance > 0.0)) throw std::invalid_argument("trainer.tolerance must be > 0");
  if (second_order_iterations < 0) throw std::invalid_argument("trainer.second_order_iterations must be >= 0");
  if (history < 1) throw std::invalid_argument("trainer.history must be >= 1");
  if (!(growth_cap > 0.0)) throw std::invalid_argument("trainer.growth_cap must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_epsilon > 0.0)) {
    throw std::invalid_argument("trainer: invalid ADAM moment parameters");
  }
}

CostWeights update_weights(const CostWeights& w, const CostBreakdown& b, const TrainerConfig& cfg) {
  CostWeights out = w;
  if (!w.physics_enabled()) return out;
  double data = 0.0;
  for (int k = 0; k < kCostCount; ++k) {
    if (w.kind[k] == CostKind::Data) data += w.lambda[k] * b.L[k];
  }
  for (int k = 0; k < kCostCount; ++k) {
    switch (w.kind[k]) {
      case CostKind::Data: break;
      case CostKind::Hard:
        out.lambda[k] = w.lambda[k] * (1.0 + cfg.alpha_lambda * std::min(std::max(b.L[k], 0.0), cfg.growth_cap));
        break;
      case CostKind::Soft: {
        const double target = b.L[k] > 0.0 ? w.soft_target[k] * data / b.L[k] : w.soft_bound[k];
        const double next = w.lambda[k] + cfg.alpha_lambda * (target - w.lambda[k]);
        out.lambda[k] = std::clamp(next, 0.0, w.soft_bound[k]);
        break;
      }
    }
  }
  return out;
}

PretrainResult pretrain(const ParameterSet& theta0, const ProbeDataset& d, const CollocationSets& c,
                        const CostWeights& w0, const TrainerConfig& cfg, const TraceSink& sink) {
  cfg.validate();
  w0.validate();
  PretrainResult r{theta0, w0, {}};
  const std::size_t n = theta0.values.size();
  std::vector<double> m(n, 0.0), v(n, 0.0);
  double b1 = 1.0, b2 = 1.0;
  for (int e = 1; e <= cfg.epochs; ++e) {
    CostEvaluation ev;
    try {
      ev = total_cost_gradient(r.parameters, d, c, r.weights);
    } catch (const ad::NonFiniteCost& err) {
      TrainingReport partial;
      partial.trace = r.trace;
      partial.parameters = r.parameters;
      partial.weights = r.weights;
      partial.epochs_run = e - 1;
      partial.termination = std::string("diverged: ") + err.what();
      throw TrainingDiverged(partial.termination, std::move(partial));
    }
    TraceEntry te = entry(e, 1, ev.breakdown, r.weights, r.parameters);
    if (sink) sink(te);
    r.trace.push_back(std::move(te));

    const double frac = cfg.epochs > 1 ? static_cast<double>(e - 1) / (cfg.epochs - 1) : 0.0;
    const double alpha = cfg.alpha * std::pow(cfg.alpha_final / cfg.alpha, frac);
    b1 *= cfg.beta1;
    b2 *= cfg.beta2;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = ev.gradient[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mh = m[i] / (1.0 - b1);
      const double vh = v[i] / (1.0 - b2);
      r.parameters.values[i] -= alpha * mh / (std::sqrt(vh) + cfg.adam_epsilon);
    }
    r.parameters.clamp_biases();
    r.weights = update_weights(r.weights, ev.breakdown, cfg);
    maybe_checkpoint(cfg, e, r.parameters);
  }
  return r;
}

LbfgsResult lbfgs_minimize(const Objective& obj, std::vector<double> x0, int max_iterations, double tolerance,
                           int history, const std::function<void(int, const std::vector<double>&, double)>& on_step) {
  LbfgsResult res;
  res.x = std::move(x0);
  if (obj.project) obj.project(res.x);
  std::vector<double> g(res.x.size(), 0.0);
  res.f = obj.value_gradient(res.x, g);
  if (!std::isfinite(res.f)) {
    res.termination = "non-finite cost at the starting point";
    return res;
  }
  if (norm2(g) <= tolerance) {
    res.termination = "gradient tolerance";
    return res;
  }
  std::deque<std::vector<double>> S, Y;
  std::deque<double> rho;
  const std::size_t n = res.x.size();
  std::vector<double> d(n), q(n), alpha_k(static_cast<std::size_t>(history));
  res.termination = "iteration cap";
  for (int it = 1; it <= max_iterations; ++it) {
    q = g;
    const int m = static_cast<int>(S.size());
    for (int j = m - 1; j >= 0; --j) {
      alpha_k[j] = rho[j] * dot(S[j], q);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alpha_k[j] * Y[j][i];
    }
    const double gamma = m > 0 ? dot(S[m - 1], Y[m - 1]) / dot(Y[m - 1], Y[m - 1]) : 1.0 / std::max(1.0, norm2(g));
    for (std::size_t i = 0; i < n; ++i) q[i] *= gamma;
    for (int j = 0; j < m; ++j) {
      const double beta = rho[j] * dot(Y[j], q);
      for (std::size_t i = 0; i < n; ++i) q[i] += S[j][i] * (alpha_k[j] - beta);
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = -q[i];
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      const double s = 1.0 / std::max(1.0, norm2(g));
      for (std::size_t i = 0; i < n; ++i) d[i] = -s * g[i];
      slope = dot(g, d);
    }
    Sample next;
    if (!wolfe_search(obj, res.x, res.f, slope, d, 1.0, next)) {
      res.termination = "line search failed";
      break;
    }
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = next.x[i] - res.x[i];
      y[i] = next.g[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * norm2(s) * norm2(y)) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > history) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    res.x = std::move(next.x);
    g = std::move(next.g);
    res.f = next.f;
    res.iterations = it;
    res.accepted.push_back(res.f);
    if (on_step) on_step(it, res.x, res.f);
    if (norm2(g) <= tolerance) {
      res.termination = "gradient tolerance";
      break;
    }
  }
  return res;
}

TrainingReport train_second_order(const ParameterSet& theta, const ProbeDataset& d, const CollocationSets& c,
                                  const CostWeights& w, const TrainerConfig& cfg, int first_step,
                                  const TraceSink& sink) {
  cfg.validate();
  w.validate();
  TrainingReport rep;
  rep.parameters = theta;
  rep.weights = w;
  rep.seed = theta.seed;
  try {
    total_cost(theta, d, c, w);
  } catch (const ad::NonFiniteCost& err) {
    rep.termination = std::string("diverged: ") + err.what();
    throw TrainingDiverged(rep.termination, rep);
  }

  ParameterSet work = theta;
  // Recent evaluations, so accepted steps are logged without re-evaluation.
  std::deque<std::pair<std::vector<double>, CostBreakdown>> recent;
  Objective obj;
  obj.value_gradient = [&](const std::vector<double>& x, std::vector<double>& g) {
    work.values = x;
    try {
      CostEvaluation ev = total_cost_gradient(work, d, c, w);
      g = std::move(ev.gradient);
      recent.emplace_back(x, ev.breakdown);
      if (recent.size() > 8) recent.pop_front();
      return ev.breakdown.total;
    } catch (const ad::NonFiniteCost&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  obj.project = [&work](std::vector<double>& x) {
    work.values = std::move(x);
    work.clamp_biases();
    x = std::move(work.values);
  };
  auto on_step = [&](int it, const std::vector<double>& x, double) {
    TraceEntry te;
    te.step = first_step + it - 1;
    te.phase = 2;
    te.lambda = w.lambda;
    for (auto r = recent.rbegin(); r != recent.rend(); ++r) {
      if (r->first == x) {
        te.costs = r->second;
        break;
      }
    }
    work.values = x;
    te.gamma2 = work.gamma2();
    if (sink) sink(te);
    rep.trace.push_back(te);
    maybe_checkpoint(cfg, te.step, work);
  };
  LbfgsResult lr = lbfgs_minimize(obj, theta.values, cfg.second_order_iterations, cfg.tolerance, cfg.history,
                                  on_step);
  rep.parameters.values = lr.x;
  rep.second_order_iterations = lr.iterations;
  rep.termination = lr.termination;
  return rep;
}

TrainingReport run_pipeline(const ProbeDataset& d, const PipelineConfig& cfg, const TraceSink& sink) {
  const auto start = std::chrono::steady_clock::now();
  cfg.trainer.validate();
  cfg.weights.validate();
  const Normalization norm = Normalization::from_dataset(d);
  ParameterSet ps = initialize(cfg.specs, d.n_pv(), norm, cfg.gamma0, splitmix64(cfg.seed));
  const CollocationSets c =
      sample_collocation(d, cfg.n_phy_rho, cfg.n_phy_y, cfg.n_phy_v, splitmix64(cfg.seed ^ 0x5bd1e995ULL));
  CostWeights w = cfg.weights;
  std::vector<TraceEntry> trace;
  int epochs = 0;
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  try {
    if (cfg.trainer.pretraining) {
      PretrainResult pre = pretrain(ps, d, c, w, cfg.trainer, sink);
      ps = std::move(pre.parameters);
      w = pre.weights;
      trace = std::move(pre.trace);
      epochs = cfg.trainer.epochs;
    }
    TrainingReport rep =
        train_second_order(ps, d, c, w, cfg.trainer, static_cast<int>(trace.size()) + 1, sink);
    trace.insert(trace.end(), rep.trace.begin(), rep.trace.end());
    rep.trace = std::move(trace);
    rep.epochs_run = epochs;
    rep.seed = cfg.seed;
    rep.wall_time_s = elapsed();
    return rep;
  } catch (const TrainingDiverged& e) {
    TrainingReport partial = e.partial();
    trace.insert(trace.end(), partial.trace.begin(), partial.trace.end());
    partial.trace = std::move(trace);
    partial.seed = cfg.seed;
    partial.wall_time_s = elapsed();
    throw TrainingDiverged(e.what(), std::move(partial));
  }
}

void write_log_header(std::ostream& os) {
  os << "epoch";
  for (int k = 1; k <= kCostCount; ++k) os << ",L" << k;
  os << ",total";
  for (int k = 1; k <= kCostCount; ++k) os << ",lambda" << k;
  os << ",gamma2\n";
}

void write_log_row(std::ostream& os, const TraceEntry& e) {
  os << e.step;
  for (double v : e.costs.L) os << ',' << csv::g17(v);
  os << ',' << csv::g17(e.costs.total);
  for (double v : e.lambda) os << ',' << csv::g17(v);
  os << ',' << csv::g17(e.gamma2) << '\n';
}

}  // namespace tsr
