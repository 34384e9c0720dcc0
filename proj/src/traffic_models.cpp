#include "tsr/traffic_models.hpp"

#include "tsr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tsr {

namespace {

void check_density(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::domain_error("density " + std::to_string(rho) + " outside [0, 1]");
  }
}

// Derivatives of G(rho) / rho from those of G.
VelocityDerivatives quotient(double rho, double g, double g1, double g2) {
  const double r2 = rho * rho;
  return {g / rho, g1 / rho - g / r2, g2 / rho - 2.0 * g1 / r2 + 2.0 * g / (r2 * rho)};
}

}  // namespace

std::string_view to_string(VelocityKind kind) {
  switch (kind) {
    case VelocityKind::Greenshields: return "greenshields";
    case VelocityKind::NewellDaganzo: return "newell_daganzo";
    case VelocityKind::SmoothedNewellDaganzo: return "smoothed_newell_daganzo";
    case VelocityKind::Learned: return "learned";
  }
  return "unknown";
}

VelocityKind velocity_kind_from_string(std::string_view name) {
  if (name == "greenshields") return VelocityKind::Greenshields;
  if (name == "newell_daganzo" || name == "nd") return VelocityKind::NewellDaganzo;
  if (name == "smoothed_newell_daganzo" || name == "smoothed_nd") {
    return VelocityKind::SmoothedNewellDaganzo;
  }
  if (name == "learned") return VelocityKind::Learned;
  throw std::invalid_argument("unknown velocity model kind '" + std::string(name) + "'");
}

VelocityModel VelocityModel::greenshields(double free_flow) {
  if (!(free_flow > 0.0)) throw std::invalid_argument("free-flow speed must be positive");
  VelocityModel m;
  m.kind_ = VelocityKind::Greenshields;
  m.vf_ = free_flow;
  return m;
}

VelocityModel VelocityModel::newell_daganzo(double free_flow, double wave_speed) {
  if (!(free_flow > 0.0) || !(wave_speed > 0.0)) {
    throw std::invalid_argument("free-flow and wave speeds must be positive");
  }
  VelocityModel m;
  m.kind_ = VelocityKind::NewellDaganzo;
  m.vf_ = free_flow;
  m.w_ = wave_speed;
  return m;
}

VelocityModel VelocityModel::smoothed_newell_daganzo(double free_flow, double wave_speed,
                                                     double eps) {
  VelocityModel m = newell_daganzo(free_flow, wave_speed);
  if (!(eps > 0.0)) throw std::invalid_argument("smoothing width must be positive");
  m.kind_ = VelocityKind::SmoothedNewellDaganzo;
  m.eps_ = eps;
  const double sigma = m.critical_density();
  m.eps_flux_ = eps * (free_flow + wave_speed);
  m.f_at_0_ = -m.eps_flux_ * ad::softplus(-sigma / eps);
  m.f_at_1_ = -m.eps_flux_ * ad::softplus(-(1.0 - sigma) / eps);
  return m;
}

VelocityModel VelocityModel::learned(LearnedFn fn) {
  if (!fn) throw std::invalid_argument("learned velocity model needs a function");
  VelocityModel m;
  m.kind_ = VelocityKind::Learned;
  m.learned_ = std::move(fn);
  return m;
}

double VelocityModel::critical_density() const {
  switch (kind_) {
    case VelocityKind::NewellDaganzo:
    case VelocityKind::SmoothedNewellDaganzo: return w_ / (vf_ + w_);
    default: return 0.5;
  }
}

VelocityDerivatives VelocityModel::smoothed_derivatives(double rho) const {
  const double sigma = critical_density();
  const double e = eps_, ef = eps_flux_;
  if (rho < sigma) {
    // v = A + G / rho, G = -ef (sp(u) - sp(u0)), G(0) = 0.
    const double a = vf_ + f_at_0_ - f_at_1_;
    const double u = (rho - sigma) / e;
    const double u0 = -sigma / e;
    if (rho < 1e-6) {
      const double s0 = ad::sigmoid(u0);
      const double g1 = -ef * s0 / e;
      const double g2 = -ef * s0 * (1.0 - s0) / (e * e);
      const double g3 = -ef * s0 * (1.0 - s0) * (1.0 - 2.0 * s0) / (e * e * e);
      return {a + g1 + 0.5 * g2 * rho, 0.5 * g2 + g3 * rho / 3.0, g3 / 3.0};
    }
    const double s = ad::sigmoid(u);
    const double g = -ef * (ad::softplus(u) - ad::softplus(u0));
    const double g1 = -ef * s / e;
    const double g2 = -ef * s * (1.0 - s) / (e * e);
    auto q = quotient(rho, g, g1, g2);
    q.v += a;
    return q;
  }
  const double z = (sigma - rho) / e;
  const double s = ad::sigmoid(z);
  const double f = w_ * (1.0 - rho) - ef * ad::softplus(z) - (1.0 - rho) * f_at_0_ - rho * f_at_1_;
  const double f1 = -w_ + ef * s / e + f_at_0_ - f_at_1_;
  const double f2 = -ef * s * (1.0 - s) / (e * e);
  auto q = quotient(rho, f, f1, f2);
  if (rho == 1.0) q.v = 0.0;
  return q;
}

double VelocityModel::velocity(double rho) const {
  check_density(rho);
  switch (kind_) {
    case VelocityKind::Greenshields: return vf_ * (1.0 - rho);
    case VelocityKind::NewellDaganzo:
      if (rho < critical_density()) return vf_;
      return w_ * (1.0 - rho) / rho;
    case VelocityKind::SmoothedNewellDaganzo: return std::max(0.0, smoothed_derivatives(rho).v);
    case VelocityKind::Learned: return learned_(rho).v;
  }
  return 0.0;
}

VelocityDerivatives VelocityModel::velocity_derivatives(double rho) const {
  check_density(rho);
  switch (kind_) {
    case VelocityKind::Greenshields: return {vf_ * (1.0 - rho), -vf_, 0.0};
    case VelocityKind::NewellDaganzo: {
      const double sigma = critical_density();
      if (rho == sigma) {
        throw NonDifferentiable("Newell-Daganzo velocity is not differentiable at the critical "
                                "density; use the smoothed_newell_daganzo kind");
      }
      if (rho < sigma) return {vf_, 0.0, 0.0};
      return {w_ * (1.0 - rho) / rho, -w_ / (rho * rho), 2.0 * w_ / (rho * rho * rho)};
    }
    case VelocityKind::SmoothedNewellDaganzo: return smoothed_derivatives(rho);
    case VelocityKind::Learned: return learned_(rho);
  }
  return {};
}

double VelocityModel::max_characteristic_speed() const {
  switch (kind_) {
    case VelocityKind::Greenshields: return vf_;
    case VelocityKind::NewellDaganzo: return std::max(vf_, w_);
    case VelocityKind::SmoothedNewellDaganzo: {
      const auto d0 = velocity_derivatives(0.0);
      const auto d1 = velocity_derivatives(1.0);
      return std::max(std::abs(d0.v), std::abs(d1.v + d1.dv));
    }
    case VelocityKind::Learned: {
      double m = 0.0;
      for (int i = 0; i <= 1000; ++i) {
        const double r = i / 1000.0;
        const auto d = learned_(r);
        m = std::max(m, std::abs(d.v + r * d.dv));
      }
      return m;
    }
  }
  return 0.0;
}

double VelocityModel::flux_argmax() const {
  switch (kind_) {
    case VelocityKind::Greenshields: return 0.5;
    case VelocityKind::NewellDaganzo: return critical_density();
    case VelocityKind::SmoothedNewellDaganzo: {
      const double p = (vf_ + f_at_0_ - f_at_1_) / (vf_ + w_);
      return std::clamp(critical_density() + eps_ * std::log(p / (1.0 - p)), 0.0, 1.0);
    }
    case VelocityKind::Learned: {
      double best = 0.0, arg = 0.0;
      for (int i = 0; i <= 10000; ++i) {
        const double r = i / 10000.0;
        const double f = r * learned_(r).v;
        if (f > best) {
          best = f;
          arg = r;
        }
      }
      return arg;
    }
  }
  return 0.5;
}

double FluxModel::flux(double rho) const {
  check_density(rho);
  switch (velocity.kind()) {
    case VelocityKind::Greenshields: return velocity.free_flow() * rho * (1.0 - rho);
    case VelocityKind::NewellDaganzo:
      return std::min(velocity.free_flow() * rho, velocity.wave_speed() * (1.0 - rho));
    default: return rho * velocity.velocity(rho);
  }
}

FluxDerivatives FluxModel::derivatives(double rho) const {
  const auto d = velocity.velocity_derivatives(rho);
  return {d.v + rho * d.dv, 2.0 * d.dv + rho * d.d2v};
}

double velocity(const VelocityModel& m, double rho) { return m.velocity(rho); }
double flux(const FluxModel& m, double rho) { return m.flux(rho); }
FluxDerivatives flux_derivatives(const FluxModel& m, double rho) { return m.derivatives(rho); }

ConsistencyReport consistency_check(const VelocityModel& m, int n_samples, double tol) {
  if (n_samples < 3) throw std::invalid_argument("consistency check needs at least 3 samples");
  ConsistencyReport rep;
  rep.worst_f2 = rep.worst_dv = rep.worst_gap = -std::numeric_limits<double>::infinity();
  const double sigma = m.critical_density();
  for (int i = 0; i < n_samples; ++i) {
    const double rho = static_cast<double>(i) / (n_samples - 1);
    if (m.kind() == VelocityKind::NewellDaganzo && rho == sigma) continue;
    const auto d = m.velocity_derivatives(rho);
    const double f1 = d.v + rho * d.dv;
    const double f2 = 2.0 * d.dv + rho * d.d2v;
    rep.worst_f2 = std::max(rep.worst_f2, f2);
    rep.worst_dv = std::max(rep.worst_dv, d.dv);
    rep.worst_gap = std::max(rep.worst_gap, f1 - d.v);
    ++rep.samples;
  }
  rep.f_concave = rep.worst_f2 <= tol;
  rep.v_decreasing = rep.worst_dv <= tol;
  rep.f_prime_below_v = rep.worst_gap <= tol;
  rep.all_pass = rep.f_concave && rep.v_decreasing && rep.f_prime_below_v;
  return rep;
}

}  // namespace tsr
