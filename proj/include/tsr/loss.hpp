#pragma once

/// \file loss.hpp
/// The nine training costs, the residual operators they penalize, physics
/// collocation sampling and the weighted total.
///
///   L1  trajectory fit           mean (y_i(t_k) - yhat_i(t_k))^2
///   L2  density fit              mean ((rho_i - n_i) - rhohat(t_k, y_i))^2
///   L3  velocity identification  mean (v_i - vhat(rho_i))^2
///   L4  density along yhat       mean ((rho_i - n_i) - rhohat(t_k, yhat_i))^2
///   L5  speed along yhat         mean (v_i - vhat(rhohat(t_k, yhat_i)))^2
///   L6  density dynamics         mean (rho_t + f'(rho) rho_x - gamma^2 rho_xx)^2
///   L7  viscosity                gamma^2
///   L8  trajectory dynamics      mean (yhat_i' - vhat(rhohat(t, yhat_i)))^2
///   L9  flux concavity           mean max(0, 2 vhat' + rho vhat'')^2

#include "tsr/dataset.hpp"
#include "tsr/networks.hpp"

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace tsr {

inline constexpr int kCostCount = 9;
using CostArray = std::array<double, kCostCount>;

enum class CostKind { Data, Soft, Hard };
std::string_view to_string(CostKind k);
CostKind cost_kind_from_string(std::string_view s);

struct CollocationSets {
  std::vector<double> rho_t, rho_x;  // density residual points
  std::vector<double> traj_t;        // trajectory residual times, shared by all PVs
  std::vector<double> vel_rho;       // concavity points in [0, 1]
  std::uint64_t seed = 0;
  bool operator==(const CollocationSets&) const = default;
};

/// Uniform draws over the dataset's bounding box [t_min, t_max] x [y_min,
/// y_max], over [t_min, t_max], and over [0, 1], in that order.
CollocationSets sample_collocation(const ProbeDataset& d, int n_rho, int n_y, int n_v, std::uint64_t seed);

struct CostWeights {
  CostArray lambda{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0};
  std::array<CostKind, kCostCount> kind{CostKind::Data, CostKind::Data, CostKind::Data,
                                        CostKind::Data, CostKind::Data, CostKind::Hard,
                                        CostKind::Soft, CostKind::Hard, CostKind::Hard};
  CostArray soft_target{0, 0, 0, 0, 0, 0, 0.1, 0, 0};
  CostArray soft_bound{0, 0, 0, 0, 0, 0, 1.0, 0, 0};

  /// All weights must be nonnegative and L2, L3, L6, L8 strictly weighted.
  /// Pure regression (L6, L8, L9 all unweighted) is accepted as well.
  void validate() const;
  bool physics_enabled() const;
  bool operator==(const CostWeights&) const = default;
};

struct CostBreakdown {
  CostArray L{};
  double total = 0.0;
  CostArray grad_norm{};  // filled by cost_gradient_norms only
};

struct CostEvaluation {
  CostBreakdown breakdown;
  std::vector<double> gradient;
};

/// L1..L5 on the measurement records.
std::array<double, 5> data_costs(const ParameterSet& ps, const ProbeDataset& d);
double cost_L6(const ParameterSet& ps, const CollocationSets& c);
double cost_L7(const ParameterSet& ps);
double cost_L8(const ParameterSet& ps, const CollocationSets& c);
double cost_L9(const ParameterSet& ps, const CollocationSets& c);

/// Residual of the density dynamics at each density collocation point.
std::vector<double> density_residuals(const ParameterSet& ps, const CollocationSets& c);

CostBreakdown total_cost(const ParameterSet& ps, const ProbeDataset& d, const CollocationSets& c,
                         const CostWeights& w);
/// Total cost and its parameter gradient from one backward sweep. Throws
/// ad::NonFiniteCost naming the first non-finite component.
CostEvaluation total_cost_gradient(const ParameterSet& ps, const ProbeDataset& d, const CollocationSets& c,
                                   const CostWeights& w);
/// Euclidean norm of every unweighted cost gradient.
CostArray cost_gradient_norms(const ParameterSet& ps, const ProbeDataset& d, const CollocationSets& c);

}  // namespace tsr
