#include "tsr/networks.hpp"

#include "tsr/csv.hpp"
#include "tsr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace tsr {

using ad::Jet;
using ad::JetLayout;
using ad::Matrix;
using ad::Tensor;

namespace {

const JetLayout& value_layout() {
  static const JetLayout layout = JetLayout::first_order(0);
  return layout;
}

constexpr double kDensitySaturation = 18.0;

// Mean square of tanh(z) for z ~ N(0, 1).
constexpr double kTanhMeanSquare = 0.394294;

std::string transform_name(OutputTransform t) {
  switch (t) {
    case OutputTransform::Identity: return "identity";
    case OutputTransform::UnitInterval: return "unit_interval";
    case OutputTransform::Position: return "position";
    case OutputTransform::Velocity: return "velocity";
  }
  return "identity";
}

OutputTransform transform_from(const std::string& s) {
  if (s == "identity") return OutputTransform::Identity;
  if (s == "unit_interval") return OutputTransform::UnitInterval;
  if (s == "position") return OutputTransform::Position;
  if (s == "velocity") return OutputTransform::Velocity;
  throw std::invalid_argument("unknown output transform '" + s + "'");
}

nlohmann::json spec_json(const MLPSpec& s) {
  return {{"inputs", s.inputs},
          {"hidden", s.hidden},
          {"outputs", s.outputs},
          {"activation", s.activation},
          {"output", transform_name(s.output)}};
}

MLPSpec spec_from(const nlohmann::json& j) {
  MLPSpec s;
  s.inputs = j.at("inputs").get<int>();
  s.hidden = j.at("hidden").get<std::vector<int>>();
  s.outputs = j.at("outputs").get<int>();
  s.activation = j.at("activation").get<std::string>();
  s.output = transform_from(j.at("output").get<std::string>());
  return s;
}

BlockRange add_mlp(ad::ParameterLayout& layout, const std::string& prefix, const MLPSpec& spec) {
  spec.validate();
  BlockRange r;
  r.begin = layout.block_count();
  int in = spec.inputs;
  std::vector<int> widths = spec.hidden;
  widths.push_back(spec.outputs);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    layout.add({prefix + ".W" + std::to_string(l), widths[l], in});
    layout.add({prefix + ".b" + std::to_string(l), widths[l], 1});
    in = widths[l];
  }
  r.end = layout.block_count();
  return r;
}

Tensor row(ad::Tape& tape, std::span<const double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) m(0, static_cast<Eigen::Index>(k)) = v[k];
  return tape.constant(std::move(m));
}

std::vector<double> to_vector(const Tensor& t) {
  const Matrix& m = t.value();
  return std::vector<double>(m.data(), m.data() + m.size());
}

}  // namespace

int MLPSpec::parameter_count() const {
  int total = 0, in = inputs;
  for (int w : hidden) {
    total += w * in + w;
    in = w;
  }
  return total + outputs * in + outputs;
}

void MLPSpec::validate() const {
  if (inputs < 1 || outputs < 1) throw std::invalid_argument("network widths must be >= 1");
  for (int w : hidden) {
    if (w < 1) throw std::invalid_argument("network widths must be >= 1");
  }
  if (activation != "tanh") throw std::invalid_argument("unsupported activation '" + activation + "'");
}

Normalization Normalization::from_dataset(const ProbeDataset& d) {
  Normalization n;
  n.t_min = d.t_min();
  n.t_max = d.t_max();
  n.y_min = d.y_min();
  n.y_max = d.y_max();
  if (!(n.t_max > n.t_min)) {
    n.t_min -= 0.5;
    n.t_max += 0.5;
  }
  if (!(n.y_max > n.y_min)) {
    n.y_min -= 0.5;
    n.y_max += 0.5;
  }
  double vmax = 0.0;
  for (double v : d.all_v()) vmax = std::max(vmax, v);
  n.v_scale = vmax > 0.0 ? vmax : 1.0;
  return n;
}

bool Normalization::contains(double t, double x, double slack) const {
  return t >= t_min - slack && t <= t_max + slack && x >= y_min - slack && x <= y_max + slack;
}

ParameterSet::ParameterSet(NetworkSpecs specs, int n_pv, Normalization norm)
    : specs_(std::move(specs)), norm_(norm), n_pv_(n_pv) {
  if (n_pv_ < 1) throw std::invalid_argument("parameter set needs at least one probe vehicle");
  if (specs_.density.inputs != 2 || specs_.trajectory.inputs != 1 || specs_.velocity.inputs != 1 ||
      specs_.density.outputs != 1 || specs_.trajectory.outputs != 1 || specs_.velocity.outputs != 1) {
    throw std::invalid_argument("network input/output widths are fixed to (2,1), (1,1), (1,1)");
  }
  density_ = add_mlp(layout_, "density", specs_.density);
  for (int i = 0; i < n_pv_; ++i) {
    trajectory_.push_back(add_mlp(layout_, "trajectory" + std::to_string(i), specs_.trajectory));
  }
  velocity_ = add_mlp(layout_, "velocity", specs_.velocity);
  n_rho_ = layout_.add({"n_rho", 1, n_pv_});
  g_ = layout_.add({"g", 1, 1});
  values.assign(static_cast<std::size_t>(layout_.size()), 0.0);
}

BlockRange ParameterSet::trajectory_blocks(int i) const {
  if (i < 0 || i >= n_pv_) {
    throw std::out_of_range("probe vehicle index " + std::to_string(i) + " out of range");
  }
  return trajectory_[static_cast<std::size_t>(i)];
}

std::span<double> ParameterSet::block(int b) {
  return std::span<double>(values).subspan(layout_.offset(b), layout_.block(b).size());
}

std::span<const double> ParameterSet::block(int b) const {
  return std::span<const double>(values).subspan(layout_.offset(b), layout_.block(b).size());
}

double ParameterSet::gamma2() const {
  const double g = block(g_)[0];
  return g * g;
}

double ParameterSet::n_rho(int i) const {
  if (i < 0 || i >= n_pv_) throw std::out_of_range("probe vehicle index out of range");
  return block(n_rho_)[i];
}

void ParameterSet::clamp_biases() {
  for (double& b : block(n_rho_)) b = std::clamp(b, -kBiasLimit, kBiasLimit);
}

nlohmann::json ParameterSet::to_json() const {
  nlohmann::json j;
  j["format"] = "tsr-parameters";
  j["version"] = 1;
  j["specs"] = {{"density", spec_json(specs_.density)},
                {"trajectory", spec_json(specs_.trajectory)},
                {"velocity", spec_json(specs_.velocity)}};
  j["normalization"] = {{"t_min", norm_.t_min}, {"t_max", norm_.t_max}, {"y_min", norm_.y_min},
                        {"y_max", norm_.y_max}, {"v_scale", norm_.v_scale}};
  j["n_pv"] = n_pv_;
  j["seed"] = seed;
  j["values"] = values;
  return j;
}

ParameterSet ParameterSet::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "tsr-parameters") {
    throw std::runtime_error("not a parameter checkpoint");
  }
  NetworkSpecs specs;
  specs.density = spec_from(j.at("specs").at("density"));
  specs.trajectory = spec_from(j.at("specs").at("trajectory"));
  specs.velocity = spec_from(j.at("specs").at("velocity"));
  const auto& n = j.at("normalization");
  Normalization norm{n.at("t_min").get<double>(), n.at("t_max").get<double>(), n.at("y_min").get<double>(),
                     n.at("y_max").get<double>(), n.at("v_scale").get<double>()};
  ParameterSet ps(specs, j.at("n_pv").get<int>(), norm);
  ps.seed = j.at("seed").get<std::uint64_t>();
  auto v = j.at("values").get<std::vector<double>>();
  if (static_cast<int>(v.size()) != ps.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(v.size()) + " values, layout needs " +
                             std::to_string(ps.size()));
  }
  ps.values = std::move(v);
  return ps;
}

void ParameterSet::save(const std::filesystem::path& path) const {
  auto os = csv::open_out(path);
  os << to_json().dump() << '\n';
}

ParameterSet ParameterSet::load(const std::filesystem::path& path) {
  auto is = csv::open_in(path);
  return from_json(nlohmann::json::parse(is));
}

bool ParameterSet::operator==(const ParameterSet& o) const {
  return specs_ == o.specs_ && norm_ == o.norm_ && n_pv_ == o.n_pv_ && values == o.values && seed == o.seed;
}

ParameterSet initialize(const NetworkSpecs& specs, int n_pv, const Normalization& norm, double gamma0,
                        std::uint64_t seed) {
  ParameterSet ps(specs, n_pv, norm);
  ps.seed = seed;
  std::mt19937_64 rng(seed);
  auto init_range = [&](BlockRange r) {
    for (int b = r.begin; b < r.end; b += 2) {
      const auto& shape = ps.layout().block(b);
      const double mean_square = b == r.begin ? 1.0 / 3.0 : kTanhMeanSquare;
      const double a = std::sqrt(3.0 / (shape.cols * mean_square));
      std::uniform_real_distribution<double> u(-a, a);
      for (double& w : ps.block(b)) w = u(rng);
    }
  };
  init_range(ps.density_blocks());
  for (int i = 0; i < n_pv; ++i) init_range(ps.trajectory_blocks(i));
  init_range(ps.velocity_blocks());
  ps.block(ps.g_block())[0] = gamma0;
  return ps;
}

Bound Bound::make(ad::Tape& tape, const ParameterSet& ps, std::vector<Tensor>& storage, bool differentiable) {
  storage = differentiable ? tape.bind(ps.layout(), ps.values) : tape.bind_constant(ps.layout(), ps.values);
  return Bound{&ps, std::span<const Tensor>(storage)};
}

TensorJet mlp_forward(std::span<const Tensor> blocks, const TensorJet& x) {
  if (blocks.size() < 2 || blocks.size() % 2 != 0) throw std::invalid_argument("mlp: malformed block list");
  TensorJet h = x;
  const std::size_t layers = blocks.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::affine(blocks[2 * l], blocks[2 * l + 1], h);
    if (l + 1 < layers) h = ad::tanh(h);
  }
  return h;
}

TensorJet density_jet(const Bound& b, const JetLayout& layout, const Tensor& t, const Tensor& x) {
  const Normalization& n = b.ps->normalization();
  ad::Tape& tape = *t.tape();
  const Tensor tn = (t - n.t_mid()) * n.t_scale();
  const Tensor xn = (x - n.x_mid()) * n.x_scale();
  const Tensor parts[] = {tn, xn};
  std::vector<std::optional<Tensor>> seeds(static_cast<std::size_t>(layout.inputs));
  if (layout.inputs > 0) {
    Matrix dt = Matrix::Zero(2, t.cols());
    dt.row(0).setConstant(n.t_scale());
    seeds[0] = tape.constant(std::move(dt));
  }
  if (layout.inputs > 1) {
    Matrix dx = Matrix::Zero(2, x.cols());
    dx.row(1).setConstant(n.x_scale());
    seeds[1] = tape.constant(std::move(dx));
  }
  const TensorJet in = ad::make_seeded(layout, tape.vconcat(parts), std::move(seeds));
  const TensorJet z = mlp_forward(b.range(b.ps->density_blocks()), in);
  // pre-activation clipped to [-18, 18]
  const TensorJet zc = z - ad::relu(z - kDensitySaturation) + ad::relu(-z - kDensitySaturation);
  return 0.5 * ad::tanh(zc) + 0.5;
}

Tensor density_value(const Bound& b, const Tensor& t, const Tensor& x) {
  return density_jet(b, value_layout(), t, x).v;
}

TensorJet trajectory_jet(const Bound& b, int i, const JetLayout& layout, const Tensor& t) {
  const Normalization& n = b.ps->normalization();
  const BlockRange r = b.ps->trajectory_blocks(i);
  const Tensor tn = (t - n.t_mid()) * n.t_scale();
  std::vector<std::optional<Tensor>> seeds(static_cast<std::size_t>(layout.inputs));
  if (layout.inputs > 0) seeds[0] = t.tape()->constant_like(t, n.t_scale());
  const TensorJet in = ad::make_seeded(layout, tn, std::move(seeds));
  const TensorJet z = mlp_forward(b.range(r), in);
  return (1.0 / n.x_scale()) * z + n.x_mid();
}

Tensor trajectory_value(const Bound& b, int i, const Tensor& t) {
  return trajectory_jet(b, i, value_layout(), t).v;
}

TensorJet velocity_jet(const Bound& b, const TensorJet& rho) {
  const double v_scale = b.ps->normalization().v_scale;
  const TensorJet core = mlp_forward(b.range(b.ps->velocity_blocks()), 2.0 * rho - 1.0);
  return v_scale * ((1.0 - rho) * ad::softplus(core));
}

Tensor velocity_value(const Bound& b, const Tensor& rho) {
  return velocity_jet(b, ad::make_constant(value_layout(), rho)).v;
}

std::vector<double> density_forward(const ParameterSet& ps, std::span<const double> t, std::span<const double> x) {
  if (t.size() != x.size()) throw std::invalid_argument("density_forward: t and x sizes differ");
  if (t.empty()) return {};
  ad::Tape tape;
  std::vector<Tensor> storage;
  const Bound b = Bound::make(tape, ps, storage, false);
  return to_vector(density_value(b, row(tape, t), row(tape, x)));
}

double density_forward(const ParameterSet& ps, double t, double x) {
  return density_forward(ps, std::span<const double>(&t, 1), std::span<const double>(&x, 1))[0];
}

std::vector<double> trajectory_forward(const ParameterSet& ps, int i, std::span<const double> t) {
  ps.trajectory_blocks(i);
  if (t.empty()) return {};
  ad::Tape tape;
  std::vector<Tensor> storage;
  const Bound b = Bound::make(tape, ps, storage, false);
  return to_vector(trajectory_value(b, i, row(tape, t)));
}

double trajectory_forward(const ParameterSet& ps, int i, double t) {
  return trajectory_forward(ps, i, std::span<const double>(&t, 1))[0];
}

double velocity_forward(const ParameterSet& ps, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::domain_error("velocity: density outside [0, 1]");
  ad::Tape tape;
  std::vector<Tensor> storage;
  const Bound b = Bound::make(tape, ps, storage, false);
  return velocity_value(b, tape.constant(rho)).scalar();
}

std::vector<VelocityDerivatives> velocity_curve(const ParameterSet& ps, std::span<const double> rho) {
  for (double r : rho) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::domain_error("velocity: density outside [0, 1]");
  }
  if (rho.empty()) return {};
  ad::Tape tape;
  std::vector<Tensor> storage;
  const Bound b = Bound::make(tape, ps, storage, false);
  const JetLayout layout = JetLayout::full(1);
  const TensorJet v = velocity_jet(b, ad::make_variable(layout, row(tape, rho), 0));
  const Matrix& val = v.v.value();
  const Matrix& d1 = v.grad(0).value();
  const Matrix& d2 = v.hess(0, 0).value();
  std::vector<VelocityDerivatives> out(rho.size());
  for (std::size_t k = 0; k < rho.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    out[k] = {val(0, c), d1(0, c), d2(0, c)};
  }
  return out;
}

VelocityModel learned_velocity(const ParameterSet& ps) {
  auto copy = std::make_shared<const ParameterSet>(ps);
  return VelocityModel::learned([copy](double rho) {
    return velocity_curve(*copy, std::span<const double>(&rho, 1))[0];
  });
}

}  // namespace tsr
