#pragma once

/// \file networks.hpp
/// Trainable function approximators: the density field rho(t, x), one
/// trajectory network per probe vehicle, the velocity function v(rho), and
/// the auxiliary scalars (density biases n_rho_i and the viscosity parameter
/// g with gamma^2 = g^2), all stored in one flat parameter vector.

#include "tsr/autodiff.hpp"
#include "tsr/jet.hpp"
#include "tsr/traffic_models.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tsr {

class ProbeDataset;

enum class OutputTransform {
  Identity,
  UnitInterval,  // (tanh(z) + 1) / 2
  Position,      // affine map from [-1, 1] back to the position range
  Velocity,      // v_scale (1 - rho) softplus(z)
};

struct MLPSpec {
  int inputs = 1;
  std::vector<int> hidden;
  int outputs = 1;
  std::string activation = "tanh";
  OutputTransform output = OutputTransform::Identity;

  int parameter_count() const;
  /// Throws std::invalid_argument unless all widths are >= 1 and the
  /// activation is tanh.
  void validate() const;
  bool operator==(const MLPSpec&) const = default;
};

struct NetworkSpecs {
  MLPSpec density{2, {10, 10, 10, 10, 10}, 1, "tanh", OutputTransform::UnitInterval};
  MLPSpec trajectory{1, {5, 5, 5}, 1, "tanh", OutputTransform::Position};
  MLPSpec velocity{1, {5, 5}, 1, "tanh", OutputTransform::Velocity};
  bool operator==(const NetworkSpecs&) const = default;
};

/// Affine maps of (t, x) onto [-1, 1]^2 built from a dataset's bounding box,
/// plus the speed scale of the velocity network.
struct Normalization {
  double t_min = 0.0;
  double t_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
  double v_scale = 1.0;

  static Normalization from_dataset(const ProbeDataset& d);

  double t_scale() const { return 2.0 / (t_max - t_min); }
  double x_scale() const { return 2.0 / (y_max - y_min); }
  double t_mid() const { return 0.5 * (t_min + t_max); }
  double x_mid() const { return 0.5 * (y_min + y_max); }
  double normalize_t(double t) const { return (t - t_mid()) * t_scale(); }
  double normalize_x(double x) const { return (x - x_mid()) * x_scale(); }
  bool contains(double t, double x, double slack = 1e-9) const;
  bool operator==(const Normalization&) const = default;
};

struct BlockRange {
  int begin = 0;
  int end = 0;
};

class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(NetworkSpecs specs, int n_pv, Normalization norm);

  const ad::ParameterLayout& layout() const { return layout_; }
  const NetworkSpecs& specs() const { return specs_; }
  const Normalization& normalization() const { return norm_; }
  int n_pv() const { return n_pv_; }
  int size() const { return layout_.size(); }

  BlockRange density_blocks() const { return density_; }
  BlockRange trajectory_blocks(int i) const;
  BlockRange velocity_blocks() const { return velocity_; }
  int n_rho_block() const { return n_rho_; }
  int g_block() const { return g_; }

  std::span<double> block(int b);
  std::span<const double> block(int b) const;

  double gamma2() const;
  double n_rho(int i) const;
  /// Projects n_rho_i onto [-0.5, 0.5].
  void clamp_biases();

  nlohmann::json to_json() const;
  static ParameterSet from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ParameterSet load(const std::filesystem::path& path);

  bool operator==(const ParameterSet& o) const;

  std::vector<double> values;
  std::uint64_t seed = 0;

 private:
  NetworkSpecs specs_;
  Normalization norm_;
  int n_pv_ = 0;
  ad::ParameterLayout layout_;
  BlockRange density_;
  std::vector<BlockRange> trajectory_;
  BlockRange velocity_;
  int n_rho_ = -1;
  int g_ = -1;
};

inline constexpr double kBiasLimit = 0.5;

/// Scaled uniform initialization: each weight matrix is drawn from
/// U(-a, a) with a chosen so that pre-activations have unit variance for
/// inputs uniform on [-1, 1]; biases start at 0, n_rho_i at 0, g at gamma0.
ParameterSet initialize(const NetworkSpecs& specs, int n_pv, const Normalization& norm,
                        double gamma0, std::uint64_t seed);

/// A parameter set bound to a tape (as leaves or constants).
struct Bound {
  const ParameterSet* ps = nullptr;
  std::span<const ad::Tensor> leaves;

  static Bound make(ad::Tape& tape, const ParameterSet& ps, std::vector<ad::Tensor>& storage,
                    bool differentiable);
  std::span<const ad::Tensor> range(BlockRange r) const {
    return leaves.subspan(r.begin, r.end - r.begin);
  }
  const ad::Tensor& n_rho() const { return leaves[ps->n_rho_block()]; }
  const ad::Tensor& g() const { return leaves[ps->g_block()]; }
};

using TensorJet = ad::Jet<ad::Tensor>;

/// Generic tanh MLP; `blocks` alternate weight and bias, last layer linear.
TensorJet mlp_forward(std::span<const ad::Tensor> blocks, const TensorJet& x);

/// Density at physical (t, x), both 1 x B. Jet inputs: 0 = t, 1 = x.
TensorJet density_jet(const Bound& b, const ad::JetLayout& layout, const ad::Tensor& t,
                      const ad::Tensor& x);
ad::Tensor density_value(const Bound& b, const ad::Tensor& t, const ad::Tensor& x);

/// Position of PV `i` at physical times t (1 x B); jet input 0 = t.
TensorJet trajectory_jet(const Bound& b, int i, const ad::JetLayout& layout, const ad::Tensor& t);
ad::Tensor trajectory_value(const Bound& b, int i, const ad::Tensor& t);

/// v(rho) for a jet-valued density (derivatives propagate through rho).
TensorJet velocity_jet(const Bound& b, const TensorJet& rho);
ad::Tensor velocity_value(const Bound& b, const ad::Tensor& rho);

// Plain evaluation helpers over an immutable parameter set.
std::vector<double> density_forward(const ParameterSet& ps, std::span<const double> t,
                                    std::span<const double> x);
double density_forward(const ParameterSet& ps, double t, double x);
std::vector<double> trajectory_forward(const ParameterSet& ps, int i, std::span<const double> t);
double trajectory_forward(const ParameterSet& ps, int i, double t);
/// Throws std::domain_error for rho outside [0, 1].
double velocity_forward(const ParameterSet& ps, double rho);
std::vector<VelocityDerivatives> velocity_curve(const ParameterSet& ps, std::span<const double> rho);

/// The trained velocity function as a traffic model.
VelocityModel learned_velocity(const ParameterSet& ps);

}  // namespace tsr
