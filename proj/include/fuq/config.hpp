#pragma once

#include <cstdint>
#include <fstream>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fuq/error.hpp"
#include "fuq/field.hpp"
#include "fuq/network.hpp"
#include "fuq/training.hpp"

namespace fuq {

enum class UqMethod { mcdropout, ensemble };

struct UqSettings {
  UqMethod method = UqMethod::mcdropout;
  std::size_t mc_samples = 100;
  std::size_t members = 30;
  std::uint64_t seed = 0;
  std::size_t chunk = 2048;
};

struct FlowSettings {
  std::optional<double> step_size;  // default: a quarter of the smallest grid spacing
  std::size_t max_steps = 1000;
  std::vector<Vec> seeds;
  std::size_t random_seeds = 0;
  std::uint64_t seed_rng = 0;
  bool write_realizations = true;
  std::string format = "json";  // json | obj | both
};

struct CriticalPointSettings {
  double zero_tolerance = 1e-6;
  std::size_t refine_iters = 50;
  std::optional<double> clamp_radius;  // default: half the smallest grid spacing
};

struct MetricSettings {
  std::optional<double> match_radius;  // default: 5 % of the domain diagonal
};

/// Everything a CLI run needs. Network widths/depths left unset take the
/// per-dimension defaults (2D: 100 wide, 10 blocks; 3D: 120 wide, 14 blocks).
struct RunConfig {
  std::optional<std::size_t> hidden_width;
  std::optional<std::size_t> num_res_blocks;
  double omega0 = 30.0;
  DropoutPlacement dropout_placement = DropoutPlacement::last_block;
  double dropout_p_train = 0.05;
  double dropout_p_test = 0.1;

  TrainConfig training;
  UqSettings uq;
  FlowSettings flow;
  CriticalPointSettings critical_points;
  MetricSettings metrics;
  std::string output_dir = "out";
  std::size_t jobs = 1;

  NetworkConfig network_for(std::size_t axes) const {
    NetworkConfig c;
    c.input_dim = axes;
    c.output_dim = axes;
    c.hidden_width = hidden_width.value_or(axes == 3 ? 120 : 100);
    c.num_res_blocks = num_res_blocks.value_or(axes == 3 ? 14 : 10);
    c.omega0 = omega0;
    c.dropout_placement = dropout_placement;
    c.dropout_p_train = dropout_p_train;
    c.dropout_p_test = dropout_p_test;
    return c;
  }

  void validate() const {
    network_for(2).validate();
    training.validate();
    if (uq.mc_samples < 1) fail(ErrorKind::InvalidConfig, "uq.mc_samples must be >= 1");
    if (uq.members < 1) fail(ErrorKind::InvalidConfig, "uq.members must be >= 1");
    if (uq.chunk < 1) fail(ErrorKind::InvalidConfig, "uq.chunk must be >= 1");
    if (flow.step_size && !(*flow.step_size > 0.0)) fail(ErrorKind::InvalidConfig, "flow.step_size must be > 0");
    if (flow.format != "json" && flow.format != "obj" && flow.format != "both")
      fail(ErrorKind::InvalidConfig, "flow.format must be json, obj or both");
    if (!(critical_points.zero_tolerance > 0.0)) fail(ErrorKind::InvalidConfig, "critical_points.zero_tolerance must be > 0");
    if (critical_points.clamp_radius && !(*critical_points.clamp_radius > 0.0))
      fail(ErrorKind::InvalidConfig, "critical_points.clamp_radius must be > 0");
    if (metrics.match_radius && !(*metrics.match_radius > 0.0)) fail(ErrorKind::InvalidConfig, "metrics.match_radius must be > 0");
    if (jobs < 1) fail(ErrorKind::InvalidConfig, "jobs must be >= 1");
  }
};

namespace detail {

/// Reads keys out of one JSON object and rejects whatever was not read.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(ErrorKind::InvalidConfig, "'" + name() + "' must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::InvalidConfig, "'" + qualified(key) + "': " + e.what());
    }
  }

  template <class T>
  void read_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_.at(key).is_null()) return;
    T value{};
    read(key, value);
    out = value;
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) fail(ErrorKind::InvalidConfig, "unknown key '" + qualified(k) + "'");
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string name() const { return path_.empty() ? "<root>" : path_; }

  const nlohmann::json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig rc;
  detail::ObjectReader root(j, "");

  if (const auto* n = root.child("network")) {
    detail::ObjectReader r(*n, "network");
    r.read_optional("hidden_width", rc.hidden_width);
    r.read_optional("num_res_blocks", rc.num_res_blocks);
    r.read("omega0", rc.omega0);
    std::string placement(to_string(rc.dropout_placement));
    r.read("dropout_placement", placement);
    try {
      rc.dropout_placement = parse_dropout_placement(placement);
    } catch (const Error& e) {
      fail(ErrorKind::InvalidConfig, std::string("network.dropout_placement: ") + e.what());
    }
    r.read("dropout_p_train", rc.dropout_p_train);
    r.read("dropout_p_test", rc.dropout_p_test);
    r.finish();
  }
  if (const auto* t = root.child("training")) {
    detail::ObjectReader r(*t, "training");
    auto& tc = rc.training;
    r.read("epochs", tc.epochs);
    r.read("batch_size", tc.batch_size);
    r.read("learning_rate", tc.learning_rate);
    r.read("beta1", tc.beta1);
    r.read("beta2", tc.beta2);
    r.read("epsilon", tc.epsilon);
    r.read("patience", tc.patience);
    r.read("decay_factor", tc.decay_factor);
    r.read("min_lr", tc.min_lr);
    r.read("seed", tc.seed);
    r.read("target_scaling", tc.target_scaling);
    r.finish();
  }
  if (const auto* u = root.child("uq")) {
    detail::ObjectReader r(*u, "uq");
    std::string method = rc.uq.method == UqMethod::mcdropout ? "mcdropout" : "ensemble";
    r.read("method", method);
    if (method == "mcdropout")
      rc.uq.method = UqMethod::mcdropout;
    else if (method == "ensemble")
      rc.uq.method = UqMethod::ensemble;
    else
      fail(ErrorKind::InvalidConfig, "uq.method must be mcdropout or ensemble");
    r.read("mc_samples", rc.uq.mc_samples);
    r.read("members", rc.uq.members);
    r.read("seed", rc.uq.seed);
    r.read("chunk", rc.uq.chunk);
    r.finish();
  }
  if (const auto* f = root.child("flow")) {
    detail::ObjectReader r(*f, "flow");
    r.read_optional("step_size", rc.flow.step_size);
    r.read("max_steps", rc.flow.max_steps);
    std::vector<std::vector<double>> seeds;
    r.read("seeds", seeds);
    for (const auto& s : seeds) {
      if (s.size() < 2 || s.size() > 3) fail(ErrorKind::InvalidConfig, "flow.seeds entries need 2 or 3 coordinates");
      Vec v(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) v[i] = s[i];
      rc.flow.seeds.push_back(v);
    }
    r.read("random_seeds", rc.flow.random_seeds);
    r.read("seed_rng", rc.flow.seed_rng);
    r.read("write_realizations", rc.flow.write_realizations);
    r.read("format", rc.flow.format);
    r.finish();
  }
  if (const auto* c = root.child("critical_points")) {
    detail::ObjectReader r(*c, "critical_points");
    r.read("zero_tolerance", rc.critical_points.zero_tolerance);
    r.read("refine_iters", rc.critical_points.refine_iters);
    r.read_optional("clamp_radius", rc.critical_points.clamp_radius);
    r.finish();
  }
  if (const auto* m = root.child("metrics")) {
    detail::ObjectReader r(*m, "metrics");
    r.read_optional("match_radius", rc.metrics.match_radius);
    r.finish();
  }
  if (const auto* o = root.child("output")) {
    detail::ObjectReader r(*o, "output");
    r.read("dir", rc.output_dir);
    r.finish();
  }
  root.read("jobs", rc.jobs);
  root.finish();
  rc.validate();
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, "config '" + path.string() + "': " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace fuq
