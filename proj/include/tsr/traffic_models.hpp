#pragma once

/// \file traffic_models.hpp
/// Velocity-density and flux-density relations of first-order traffic models.
///
/// Units throughout the toolkit: space in km, time in min, speeds in km/min.
/// Densities are normalized to [0, 1] (1 = jam).

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tsr {

enum class VelocityKind { Greenshields, NewellDaganzo, SmoothedNewellDaganzo, Learned };

std::string_view to_string(VelocityKind kind);
VelocityKind velocity_kind_from_string(std::string_view name);

/// v, v', v'' at one density.
struct VelocityDerivatives {
  double v = 0.0;
  double dv = 0.0;
  double d2v = 0.0;
};

struct FluxDerivatives {
  double df = 0.0;
  double d2f = 0.0;
};

/// Thrown by derivative queries at the kink of the raw Newell-Daganzo flux.
class NonDifferentiable : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class VelocityModel {
 public:
  using LearnedFn = std::function<VelocityDerivatives(double)>;

  static VelocityModel greenshields(double free_flow);
  static VelocityModel newell_daganzo(double free_flow, double wave_speed);
  /// Triangular flux with its kink replaced by a soft minimum of density
  /// width `eps`; the flux is shifted by an affine term so that f(0) = f(1) = 0
  /// holds exactly.
  static VelocityModel smoothed_newell_daganzo(double free_flow, double wave_speed,
                                               double eps = 0.01);
  /// Wraps an externally supplied velocity function (e.g. a trained network).
  static VelocityModel learned(LearnedFn fn);

  VelocityKind kind() const { return kind_; }
  double free_flow() const { return vf_; }
  double wave_speed() const { return w_; }
  double smoothing() const { return eps_; }
  /// sigma = W / (V_f + W); 0.5 reported for Greenshields.
  double critical_density() const;

  double velocity(double rho) const;
  VelocityDerivatives velocity_derivatives(double rho) const;

  /// Largest |f'| over [0, 1]; used for CFL bounds.
  double max_characteristic_speed() const;
  /// argmax of the flux over [0, 1].
  double flux_argmax() const;

 private:
  VelocityModel() = default;
  VelocityDerivatives smoothed_derivatives(double rho) const;

  VelocityKind kind_ = VelocityKind::Greenshields;
  double vf_ = 1.0;
  double w_ = 1.0;
  double eps_ = 0.01;
  // Smoothed ND constants: flux width and endpoint values of the raw soft-min.
  double eps_flux_ = 0.0;
  double f_at_0_ = 0.0;
  double f_at_1_ = 0.0;
  LearnedFn learned_;
};

/// f(rho) = rho v(rho).
struct FluxModel {
  VelocityModel velocity;

  double flux(double rho) const;
  FluxDerivatives derivatives(double rho) const;
};

double velocity(const VelocityModel& m, double rho);
double flux(const FluxModel& m, double rho);
/// f' = v + rho v', f'' = 2 v' + rho v''.
FluxDerivatives flux_derivatives(const FluxModel& m, double rho);

struct ConsistencyReport {
  bool f_concave = true;
  bool v_decreasing = true;
  bool f_prime_below_v = true;
  bool all_pass = true;
  double worst_f2 = 0.0;        // max f''
  double worst_dv = 0.0;        // max v'
  double worst_gap = 0.0;       // max f' - v
  int samples = 0;
};

/// Checks f'' <= tol, v' <= tol and f' - v <= tol at `n_samples` uniformly
/// spaced densities in [0, 1]. The raw Newell-Daganzo kink is skipped.
ConsistencyReport consistency_check(const VelocityModel& m, int n_samples, double tol = 1e-9);

}  // namespace tsr
