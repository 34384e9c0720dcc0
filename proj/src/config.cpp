#include "tsr/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace tsr {

namespace {

class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_ + ": expected a mapping");
  }

  bool present() const { return node_ && node_.IsMap(); }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    if (!present()) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node& view = node_;
    return view[key];
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void get(const std::string& key, double& out) {
    auto n = child(key);
    if (!n) return;
    try {
      out = n.as<double>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(key) + ": expected a number");
    }
  }

  void get(const std::string& key, int& out) {
    auto n = child(key);
    if (!n) return;
    try {
      const std::string s = n.as<std::string>();
      std::size_t used = 0;
      const long v = std::stol(s, &used);
      if (used != s.size()) throw std::invalid_argument("trailing");
      out = static_cast<int>(v);
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": expected an integer");
    }
  }

  void get(const std::string& key, std::uint64_t& out) {
    auto n = child(key);
    if (!n) return;
    try {
      const std::string s = n.as<std::string>();
      std::size_t used = 0;
      if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
      const unsigned long long v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument("trailing");
      out = v;
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": expected a nonnegative integer");
    }
  }

  void get(const std::string& key, bool& out) {
    auto n = child(key);
    if (!n) return;
    try {
      out = n.as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(key) + ": expected true or false");
    }
  }

  void get(const std::string& key, std::string& out) {
    auto n = child(key);
    if (!n) return;
    if (!n.IsScalar()) throw ConfigError(where(key) + ": expected a string");
    out = n.as<std::string>();
  }

  void get(const std::string& key, std::vector<int>& out) {
    auto n = child(key);
    if (!n) return;
    if (!n.IsSequence()) throw ConfigError(where(key) + ": expected a list of integers");
    std::vector<int> v;
    for (std::size_t i = 0; i < n.size(); ++i) {
      try {
        v.push_back(n[i].as<int>());
      } catch (const YAML::Exception&) {
        throw ConfigError(where(key) + "[" + std::to_string(i) + "]: expected an integer");
      }
    }
    out = std::move(v);
  }

  void get(const std::string& key, CostArray& out) {
    auto n = child(key);
    if (!n) return;
    if (!n.IsSequence() || n.size() != kCostCount) {
      throw ConfigError(where(key) + ": expected a list of " + std::to_string(kCostCount) + " numbers");
    }
    for (std::size_t i = 0; i < n.size(); ++i) {
      try {
        out[i] = n[i].as<double>();
      } catch (const YAML::Exception&) {
        throw ConfigError(where(key) + "[" + std::to_string(i) + "]: expected a number");
      }
    }
  }

  void get(const std::string& key, std::array<CostKind, kCostCount>& out) {
    auto n = child(key);
    if (!n) return;
    if (!n.IsSequence() || n.size() != kCostCount) {
      throw ConfigError(where(key) + ": expected a list of " + std::to_string(kCostCount) + " kinds");
    }
    for (std::size_t i = 0; i < n.size(); ++i) {
      try {
        out[i] = cost_kind_from_string(n[i].as<std::string>());
      } catch (const std::exception&) {
        throw ConfigError(where(key) + "[" + std::to_string(i) + "]: expected data, soft or hard");
      }
    }
  }

  void get(const std::string& key, VelocityKind& out) {
    std::string s;
    get(key, s);
    if (s.empty()) return;
    try {
      out = velocity_kind_from_string(s);
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": unknown model kind '" + s + "'");
    }
  }

  void get(const std::string& key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  /// Rejects keys that were never asked for.
  void finish() const {
    if (!present()) return;
    for (const auto& kv : node_) {
      const std::string k = kv.first.as<std::string>();
      if (!seen_.count(k)) throw ConfigError(where(k) + ": unknown key");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

// Shortest text that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void emit_kv(YAML::Emitter& e, const char* key, double v) { e << YAML::Key << key << YAML::Value << shortest(v); }
void emit_kv(YAML::Emitter& e, const char* key, int v) { e << YAML::Key << key << YAML::Value << v; }
void emit_kv(YAML::Emitter& e, const char* key, bool v) {
  e << YAML::Key << key << YAML::Value << (v ? "true" : "false");
}
void emit_kv(YAML::Emitter& e, const char* key, const std::string& v) {
  e << YAML::Key << key << YAML::Value << YAML::DoubleQuoted << v;
}
void emit_kv(YAML::Emitter& e, const char* key, const std::vector<int>& v) {
  e << YAML::Key << key << YAML::Value << YAML::Flow << v;
}
void emit_kv(YAML::Emitter& e, const char* key, const CostArray& v) {
  e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double x : v) e << shortest(x);
  e << YAML::EndSeq;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (std::find(case_names().begin(), case_names().end(), case_name) == case_names().end()) {
    fail("case: unknown case '" + case_name + "' (expected greenshields, nd or micro)");
  }
  if (!(model.free_flow > 0.0)) fail("model.free_flow: must be > 0");
  if (!(model.wave_speed > 0.0)) fail("model.wave_speed: must be > 0");
  if (!(model.smoothing > 0.0)) fail("model.smoothing: must be > 0");
  if (!(model.vehicle_length > 0.0)) fail("model.vehicle_length: must be > 0");
  if (model.kind == VelocityKind::Learned) fail("model.kind: a learned model cannot generate data");
  if (!(domain.length > 0.0)) fail("domain.length: must be > 0");
  if (!(domain.horizon > 0.0)) fail("domain.horizon: must be > 0");
  if (!(domain.dx > 0.0)) fail("domain.dx: must be > 0");
  if (!(ingestion.window_end > ingestion.window_begin)) {
    fail("ingestion.window_end: must exceed ingestion.window_begin");
  }
  for (double r : {domain.initial_density, domain.block_density, domain.inflow_low, domain.inflow_high}) {
    if (!(r >= 0.0 && r <= 1.0)) fail("domain: densities must lie in [0, 1]");
  }
  if (!(domain.inflow_period > 0.0)) fail("domain.inflow_period: must be > 0");
  if (!(domain.edge_width >= 0.0)) fail("domain.edge_width: must be >= 0");
  if (!(domain.inflow_smoothing >= 0.0)) fail("domain.inflow_smoothing: must be >= 0");
  if (dataset.n_pv < 1) fail("dataset.n_pv: must be >= 1");
  if (!(dataset.p > 0.0 && dataset.p <= 1.0)) fail("dataset.p: must be in (0, 1]");
  if (dataset.n_mea < 2) fail("dataset.n_mea: must be >= 2");
  if (!(dataset.sigma_rho >= 0.0)) fail("dataset.sigma_rho: must be >= 0");
  if (!(dataset.bias_range >= 0.0)) fail("dataset.bias_range: must be >= 0");
  if (!(dataset.pv_end >= dataset.pv_begin)) fail("dataset.pv_end: must be >= dataset.pv_begin");
  if (!(ingestion.sigma_space > 0.0)) fail("ingestion.sigma_space: must be > 0");
  if (!(ingestion.sigma_time > 0.0)) fail("ingestion.sigma_time: must be > 0");
  if (!(ingestion.cell_dx > 0.0)) fail("ingestion.cell_dx: must be > 0");
  if (!(ingestion.cell_dt > 0.0)) fail("ingestion.cell_dt: must be > 0");
  if (!(ingestion.truncation > 0.0)) fail("ingestion.truncation: must be > 0");
  if (!(micro.length > 0.0)) fail("micro.length: must be > 0");
  if (!(micro.horizon > 0.0)) fail("micro.horizon: must be > 0");
  if (micro.vehicles < 1) fail("micro.vehicles: must be >= 1");
  if (!(micro.spacing > 0.0)) fail("micro.spacing: must be > 0");
  if (!(micro.dt > 0.0)) fail("micro.dt: must be > 0");
  if (micro.record_every < 1) fail("micro.record_every: must be >= 1");
  if (!(micro.leader_period > 0.0)) fail("micro.leader_period: must be > 0");
  if (!(network.gamma0 >= 0.0)) fail("network.gamma0: must be >= 0");
  if (loss.n_phy_rho < 1 || loss.n_phy_y < 1 || loss.n_phy_v < 1) fail("loss: collocation sizes must be >= 1");
  try {
    for (const auto* w : {&network.density, &network.trajectory, &network.velocity}) {
      for (int x : *w) {
        if (x < 1) throw std::invalid_argument("network widths must be >= 1");
      }
    }
    loss.weights.validate();
    trainer.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  ExperimentConfig c;
  Section top(root, "");
  top.get("seed", c.seed);
  top.get("case", c.case_name);
  {
    Section s(top.child("model"), "model");
    s.get("kind", c.model.kind);
    s.get("free_flow", c.model.free_flow);
    s.get("wave_speed", c.model.wave_speed);
    s.get("smoothing", c.model.smoothing);
    s.get("vehicle_length", c.model.vehicle_length);
    s.finish();
  }
  {
    Section s(top.child("domain"), "domain");
    s.get("length", c.domain.length);
    s.get("horizon", c.domain.horizon);
    s.get("dx", c.domain.dx);
    s.get("initial_density", c.domain.initial_density);
    s.get("block_density", c.domain.block_density);
    s.get("block_begin", c.domain.block_begin);
    s.get("block_end", c.domain.block_end);
    s.get("inflow_low", c.domain.inflow_low);
    s.get("inflow_high", c.domain.inflow_high);
    s.get("inflow_period", c.domain.inflow_period);
    s.get("edge_width", c.domain.edge_width);
    s.get("inflow_smoothing", c.domain.inflow_smoothing);
    s.finish();
  }
  {
    Section s(top.child("dataset"), "dataset");
    s.get("n_pv", c.dataset.n_pv);
    s.get("p", c.dataset.p);
    s.get("n_mea", c.dataset.n_mea);
    s.get("sigma_rho", c.dataset.sigma_rho);
    s.get("bias_range", c.dataset.bias_range);
    s.get("pv_begin", c.dataset.pv_begin);
    s.get("pv_end", c.dataset.pv_end);
    s.finish();
  }
  {
    Section s(top.child("ingestion"), "ingestion");
    s.get("sigma_space", c.ingestion.sigma_space);
    s.get("sigma_time", c.ingestion.sigma_time);
    s.get("cell_dx", c.ingestion.cell_dx);
    s.get("cell_dt", c.ingestion.cell_dt);
    s.get("truncation", c.ingestion.truncation);
    s.get("jam_density", c.ingestion.jam_density);
    s.get("window_begin", c.ingestion.window_begin);
    s.get("window_end", c.ingestion.window_end);
    s.finish();
  }
  {
    Section s(top.child("micro"), "micro");
    s.get("length", c.micro.length);
    s.get("horizon", c.micro.horizon);
    s.get("vehicles", c.micro.vehicles);
    s.get("spacing", c.micro.spacing);
    s.get("rear", c.micro.rear);
    s.get("leader_high", c.micro.leader_high);
    s.get("leader_low", c.micro.leader_low);
    s.get("leader_period", c.micro.leader_period);
    s.get("dt", c.micro.dt);
    s.get("record_every", c.micro.record_every);
    s.finish();
  }
  {
    Section s(top.child("network"), "network");
    s.get("density", c.network.density);
    s.get("trajectory", c.network.trajectory);
    s.get("velocity", c.network.velocity);
    s.get("gamma0", c.network.gamma0);
    s.finish();
  }
  {
    Section s(top.child("loss"), "loss");
    s.get("n_phy_rho", c.loss.n_phy_rho);
    s.get("n_phy_y", c.loss.n_phy_y);
    s.get("n_phy_v", c.loss.n_phy_v);
    s.get("lambda", c.loss.weights.lambda);
    s.get("kinds", c.loss.weights.kind);
    s.get("soft_target", c.loss.weights.soft_target);
    s.get("soft_bound", c.loss.weights.soft_bound);
    s.finish();
  }
  {
    Section s(top.child("trainer"), "trainer");
    s.get("epochs", c.trainer.epochs);
    s.get("alpha", c.trainer.alpha);
    bool has_final = static_cast<bool>(s.present() && s.child("alpha_final"));
    if (has_final) {
      s.get("alpha_final", c.trainer.alpha_final);
    } else {
      c.trainer.alpha_final = c.trainer.alpha;
    }
    s.get("beta1", c.trainer.beta1);
    s.get("beta2", c.trainer.beta2);
    s.get("adam_epsilon", c.trainer.adam_epsilon);
    s.get("alpha_lambda", c.trainer.alpha_lambda);
    s.get("growth_cap", c.trainer.growth_cap);
    s.get("pretraining", c.trainer.pretraining);
    s.get("second_order_iterations", c.trainer.second_order_iterations);
    s.get("tolerance", c.trainer.tolerance);
    s.get("history", c.trainer.history);
    s.get("checkpoint_every", c.trainer.checkpoint_every);
    s.get("checkpoint_dir", c.trainer.checkpoint_dir);
    s.finish();
  }
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string to_yaml(const ExperimentConfig& c) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  emit_kv(e, "case", c.case_name);

  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  emit_kv(e, "kind", std::string(to_string(c.model.kind)));
  emit_kv(e, "free_flow", c.model.free_flow);
  emit_kv(e, "wave_speed", c.model.wave_speed);
  emit_kv(e, "smoothing", c.model.smoothing);
  emit_kv(e, "vehicle_length", c.model.vehicle_length);
  e << YAML::EndMap;

  e << YAML::Key << "domain" << YAML::Value << YAML::BeginMap;
  emit_kv(e, "length", c.domain.length);
  emit_kv(e, "horizon", c.domain.horizon);
  emit_kv(e, "dx", c.domain.dx);
  emit_kv(e, "initial_density", c.domain.initial_density);
  emit_kv(e, "block_density", c.domain.block_density);
  emit_kv(e, "block_begin", c.domain.block_begin);
  emit_kv(e, "block_end", c.domain.block_end);
  emit_kv(e, "inflow_low", c.domain.inflow_low);
  emit_kv(e, "inflow_high", c.domain.inflow_high);
  emit_kv(e, "inflow_period", c.domain.inflow_period);
  emit_kv(e, "edge_width", c.domain.edge_width);
  emit_kv(e, "inflow_smoothing", c.domain.inflow_smoothing);
  e << YAML::EndMap;

  e << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  emit_kv(e, "n_pv", c.dataset.n_pv);
  emit_kv(e, "p", c.dataset.p);
  emit_kv(e, "n_mea", c.dataset.n_mea);
  emit_kv(e, "sigma_rho", c.dataset.sigma_rho);
  emit_kv(e, "bias_range", c.dataset.bias_range);
  emit_kv(e, "pv_begin", c.dataset.pv_begin);
  emit_kv(e, "pv_end", c.dataset.pv_end);
  e << YAML::EndMap;

  e << YAML::Key << "ingestion" << YAML::Value << YAML::BeginMap;
  emit_kv(e, "sigma_space", c.ingestion.sigma_space);
  emit_kv(e, "sigma_time", c.ingestion.sigma_time);
  emit_kv(e, "cell_dx", c.ingestion.cell_dx);
  emit_kv(e, "cell_dt", c.ingestion.cell_dt);
  emit_kv(e, "truncation", c.ingestion.truncation);
  emit_kv(e, "jam_density", c.ingestion.jam_density);
  emit_kv(e, "window_begin", c.ingestion.window_begin);
  emit_kv(e, "window_end", c.ingestion.window_end);
  e << YAML::EndMap;

  e << YAML::Key << "micro" << YAML::Value << YAML::BeginMap;
  emit_kv(e, "length", c.micro.length);
  emit_kv(e, "horizon", c.micro.horizon);
  emit_kv(e, "vehicles", c.micro.vehicles);
  emit_kv(e, "spacing", c.micro.spacing);
  emit_kv(e, "rear", c.micro.rear);
  emit_kv(e, "leader_high", c.micro.leader_high);
  emit_kv(e, "leader_low", c.micro.leader_low);
  emit_kv(e, "leader_period", c.micro.leader_period);
  emit_kv(e, "dt", c.micro.dt);
  emit_kv(e, "record_every", c.micro.record_every);
  e << YAML::EndMap;

  e << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  emit_kv(e, "density", c.network.density);
  emit_kv(e, "trajectory", c.network.trajectory);
  emit_kv(e, "velocity", c.network.velocity);
  emit_kv(e, "gamma0", c.network.gamma0);
  e << YAML::EndMap;

  e << YAML::Key << "loss" << YAML::Value << YAML::BeginMap;
  emit_kv(e, "n_phy_rho", c.loss.n_phy_rho);
  emit_kv(e, "n_phy_y", c.loss.n_phy_y);
  emit_kv(e, "n_phy_v", c.loss.n_phy_v);
  emit_kv(e, "lambda", c.loss.weights.lambda);
  e << YAML::Key << "kinds" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto k : c.loss.weights.kind) e << std::string(to_string(k));
  e << YAML::EndSeq;
  emit_kv(e, "soft_target", c.loss.weights.soft_target);
  emit_kv(e, "soft_bound", c.loss.weights.soft_bound);
  e << YAML::EndMap;

  e << YAML::Key << "trainer" << YAML::Value << YAML::BeginMap;
  emit_kv(e, "epochs", c.trainer.epochs);
  emit_kv(e, "alpha", c.trainer.alpha);
  emit_kv(e, "alpha_final", c.trainer.alpha_final);
  emit_kv(e, "beta1", c.trainer.beta1);
  emit_kv(e, "beta2", c.trainer.beta2);
  emit_kv(e, "adam_epsilon", c.trainer.adam_epsilon);
  emit_kv(e, "alpha_lambda", c.trainer.alpha_lambda);
  emit_kv(e, "growth_cap", c.trainer.growth_cap);
  emit_kv(e, "pretraining", c.trainer.pretraining);
  emit_kv(e, "second_order_iterations", c.trainer.second_order_iterations);
  emit_kv(e, "tolerance", c.trainer.tolerance);
  emit_kv(e, "history", c.trainer.history);
  emit_kv(e, "checkpoint_every", c.trainer.checkpoint_every);
  emit_kv(e, "checkpoint_dir", c.trainer.checkpoint_dir.string());
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace tsr
