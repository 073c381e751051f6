#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fuq/error.hpp"
#include "fuq/field.hpp"
#include "fuq/flow.hpp"
#include "fuq/metrics.hpp"
#include "fuq/model.hpp"
#include "fuq/network.hpp"

namespace fuq::io {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Little-endian primitives

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline std::uint32_t to_little(std::uint32_t x) noexcept {
  if constexpr (std::endian::native == std::endian::big)
    return ((x & 0xFFu) << 24) | ((x & 0xFF00u) << 8) | ((x >> 8) & 0xFF00u) | (x >> 24);
  return x;
}

inline void append_f32(std::string& out, double value) {
  const auto bits = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(value)));
  char bytes[4];
  std::memcpy(bytes, &bits, 4);
  out.append(bytes, 4);
}

inline double read_f32(const char* p) noexcept {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  return static_cast<double>(std::bit_cast<float>(to_little(bits)));
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::IoError, "write to '" + path.string() + "' failed");
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, what + ": " + e.what());
  }
}

inline json vec_json(const Vec& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline Vec json_vec(const json& j) {
  if (!j.is_array() || j.empty() || j.size() > Vec::kMaxDim) fail(ErrorKind::ParseError, "expected a 1-3 element array");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Raw grid files: little-endian float32 payload, nodes in row-major order
// (x fastest), components interleaved per node, plus a JSON sidecar.

/// `field.raw` -> `field.json`.
inline fs::path sidecar_path_for(const fs::path& raw) {
  fs::path p = raw;
  return p.replace_extension(".json");
}

struct RawGrid {
  DomainSpec domain;
  std::size_t components = 0;
  std::vector<double> data;
  std::string name;
};

inline json sidecar_json(const DomainSpec& domain, std::size_t components, const std::string& name) {
  json j;
  j["dims"] = domain.dims();
  j["components"] = components;
  j["physical_min"] = detail::vec_json(domain.physical_min());
  j["physical_max"] = detail::vec_json(domain.physical_max());
  j["dtype"] = "float32";
  j["byte_order"] = "little";
  if (!name.empty()) j["name"] = name;
  return j;
}

inline void save_raw(const fs::path& raw_path, const fs::path& sidecar, const DomainSpec& domain,
                     std::size_t components, const std::vector<double>& data, const std::string& name = {}) {
  if (data.size() != domain.node_count() * components) fail(ErrorKind::SizeMismatch, "data length != nodes * components");
  std::string payload;
  payload.reserve(data.size() * 4);
  for (double v : data) detail::append_f32(payload, v);
  detail::write_file(raw_path, payload);
  detail::write_file(sidecar, sidecar_json(domain, components, name).dump(2) + "\n");
}

inline RawGrid load_raw(const fs::path& raw_path, const fs::path& sidecar) {
  const json meta = detail::parse_json(detail::read_file(sidecar), "sidecar '" + sidecar.string() + "'");
  RawGrid grid;
  try {
    const auto dims = meta.at("dims").get<std::vector<std::size_t>>();
    grid.components = meta.at("components").get<std::size_t>();
    if (meta.contains("dtype") && meta["dtype"] != "float32") fail(ErrorKind::ParseError, "only float32 payloads are supported");
    if (meta.contains("byte_order") && meta["byte_order"] != "little")
      fail(ErrorKind::ParseError, "only little-endian payloads are supported");
    if (meta.contains("physical_min") || meta.contains("physical_max"))
      grid.domain = DomainSpec(dims, detail::json_vec(meta.at("physical_min")), detail::json_vec(meta.at("physical_max")));
    else
      grid.domain = DomainSpec::with_index_bounds(dims);
    grid.name = meta.value("name", std::string{});
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, "sidecar '" + sidecar.string() + "': " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParseError) throw;
    fail(ErrorKind::ParseError, "sidecar '" + sidecar.string() + "': " + e.what());
  }
  if (grid.components < 1) fail(ErrorKind::ParseError, "components must be >= 1");

  const std::string payload = detail::read_file(raw_path);
  const std::size_t expected = grid.domain.node_count() * grid.components * 4;
  if (payload.size() != expected)
    fail(ErrorKind::SizeMismatch, "payload '" + raw_path.string() + "' has " + std::to_string(payload.size()) +
                                      " bytes, expected " + std::to_string(expected));
  grid.data.resize(grid.domain.node_count() * grid.components);
  for (std::size_t i = 0; i < grid.data.size(); ++i) {
    grid.data[i] = detail::read_f32(payload.data() + 4 * i);
    if (!std::isfinite(grid.data[i])) fail(ErrorKind::ParseError, "payload contains non-finite values");
  }
  return grid;
}

inline void save_raw_field(const GridVectorField& f, const fs::path& raw_path, const std::string& name = {}) {
  save_raw(raw_path, sidecar_path_for(raw_path), f.domain(), f.components(), f.data(), name);
}

inline GridVectorField load_raw_field(const fs::path& raw_path, const fs::path& sidecar) {
  RawGrid g = load_raw(raw_path, sidecar);
  if (g.components != g.domain.axes())
    fail(ErrorKind::DimensionMismatch, "vector field needs as many components as axes");
  return GridVectorField(g.domain, std::move(g.data));
}

inline GridVectorField load_raw_field(const fs::path& raw_path) { return load_raw_field(raw_path, sidecar_path_for(raw_path)); }

inline void save_scalar_field(const ScalarField& f, const fs::path& raw_path, const std::string& name = {}) {
  save_raw(raw_path, sidecar_path_for(raw_path), f.domain(), 1, f.data(), name);
}

inline ScalarField load_scalar_field(const fs::path& raw_path) {
  RawGrid g = load_raw(raw_path, sidecar_path_for(raw_path));
  if (g.components != 1) fail(ErrorKind::DimensionMismatch, "scalar field must have one component");
  return ScalarField(g.domain, std::move(g.data));
}

// ---------------------------------------------------------------------------
// Checkpoints: "FUQ1" | u32 LE header length | JSON header | f32 LE parameters.

inline constexpr char kCheckpointMagic[4] = {'F', 'U', 'Q', '1'};
inline constexpr int kCheckpointVersion = 1;

inline json network_config_json(const NetworkConfig& c) {
  json j;
  j["input_dim"] = c.input_dim;
  j["output_dim"] = c.output_dim;
  j["hidden_width"] = c.hidden_width;
  j["num_res_blocks"] = c.num_res_blocks;
  j["omega0"] = c.omega0;
  j["dropout_placement"] = std::string(to_string(c.dropout_placement));
  j["dropout_p_train"] = c.dropout_p_train;
  j["dropout_p_test"] = c.dropout_p_test;
  return j;
}

inline NetworkConfig network_config_from_json(const json& j) {
  NetworkConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.output_dim = j.at("output_dim").get<std::size_t>();
  c.hidden_width = j.at("hidden_width").get<std::size_t>();
  c.num_res_blocks = j.at("num_res_blocks").get<std::size_t>();
  c.omega0 = j.at("omega0").get<double>();
  c.dropout_placement = parse_dropout_placement(j.at("dropout_placement").get<std::string>());
  c.dropout_p_train = j.at("dropout_p_train").get<double>();
  c.dropout_p_test = j.at("dropout_p_test").get<double>();
  c.validate();
  return c;
}

inline json checkpoint_header(const NeuralField& model) {
  json h;
  h["format_version"] = kCheckpointVersion;
  h["network"] = network_config_json(model.config);
  h["normalization"] = {{"mapping", "affine per axis onto [-1,1]"},
                        {"dims", model.domain.dims()},
                        {"physical_min", detail::vec_json(model.domain.physical_min())},
                        {"physical_max", detail::vec_json(model.domain.physical_max())}};
  h["output_scaling"] = {{"shift", model.output_shift}, {"scale", model.output_scale}};
  h["seed"] = model.seed;
  h["parameter_count"] = model.params.size();
  h["parameter_order"] = "input W,b; per block L1 W,b then L2 W,b; output W,b; W row-major (out x in)";
  return h;
}

inline std::string encode_checkpoint(const NeuralField& model) {
  if (model.params.size() != model.config.parameter_count())
    fail(ErrorKind::ShapeMismatch, "parameter count does not match the network configuration");
  const std::string header = checkpoint_header(model).dump();
  std::string out(kCheckpointMagic, 4);
  const auto len = detail::to_little(static_cast<std::uint32_t>(header.size()));
  char len_bytes[4];
  std::memcpy(len_bytes, &len, 4);
  out.append(len_bytes, 4);
  out += header;
  for (double v : model.params.values) detail::append_f32(out, v);
  return out;
}

inline NeuralField decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    fail(ErrorKind::BadMagic, "not a checkpoint (magic mismatch)");
  std::uint32_t len;
  std::memcpy(&len, bytes.data() + 4, 4);
  len = detail::to_little(len);
  if (bytes.size() < 8 + static_cast<std::size_t>(len)) fail(ErrorKind::CorruptPayload, "checkpoint header truncated");
  json h;
  try {
    h = json::parse(bytes.substr(8, len));
  } catch (const json::exception& e) {
    fail(ErrorKind::CorruptPayload, std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  NeuralField model;
  try {
    if (h.at("format_version").get<int>() != kCheckpointVersion)
      fail(ErrorKind::VersionUnsupported, "checkpoint format version " + h.at("format_version").dump() + " is not supported");
    model.config = network_config_from_json(h.at("network"));
    const auto& norm = h.at("normalization");
    model.domain = DomainSpec(norm.at("dims").get<std::vector<std::size_t>>(), detail::json_vec(norm.at("physical_min")),
                              detail::json_vec(norm.at("physical_max")));
    model.output_shift = h.at("output_scaling").at("shift").get<std::vector<double>>();
    model.output_scale = h.at("output_scaling").at("scale").get<std::vector<double>>();
    model.seed = h.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::CorruptPayload, std::string("checkpoint header: ") + e.what());
  }
  if (model.output_shift.size() != model.config.output_dim || model.output_scale.size() != model.config.output_dim)
    fail(ErrorKind::CorruptPayload, "output scaling length does not match output_dim");
  const std::size_t count = model.config.parameter_count();
  const std::size_t payload = bytes.size() - 8 - len;
  if (payload != 4 * count)
    fail(ErrorKind::CorruptPayload, "checkpoint payload has " + std::to_string(payload) + " bytes, expected " +
                                        std::to_string(4 * count));
  model.params.values.resize(count);
  const char* p = bytes.data() + 8 + len;
  for (std::size_t i = 0; i < count; ++i) {
    model.params.values[i] = detail::read_f32(p + 4 * i);
    if (!std::isfinite(model.params.values[i])) fail(ErrorKind::CorruptPayload, "non-finite parameter");
  }
  return model;
}

inline void save_checkpoint(const NeuralField& model, const fs::path& path) { detail::write_file(path, encode_checkpoint(model)); }

inline NeuralField load_checkpoint(const fs::path& path) { return decode_checkpoint(detail::read_file(path)); }

/// Byte count of the parameters alone, as stored (float32).
inline std::size_t parameter_bytes(const NetworkConfig& c) noexcept { return 4 * c.parameter_count(); }

// ---------------------------------------------------------------------------
// Streamline bundles

enum class BundleFormat { structured_json, obj_polyline };

inline json points_json(const std::vector<Vec>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back(detail::vec_json(p));
  return a;
}

inline std::vector<Vec> json_points(const json& a) {
  std::vector<Vec> pts;
  for (const auto& p : a) pts.push_back(detail::json_vec(p));
  return pts;
}

inline Termination parse_termination(const std::string& s) {
  for (auto t : {Termination::domain_exit, Termination::max_steps, Termination::zero_velocity})
    if (to_string(t) == s) return t;
  fail(ErrorKind::ParseError, "unknown termination '" + s + "'");
}

inline json bundle_json(const StreamlineBundle& b, bool include_realizations = true) {
  const auto& a = b.aggregate;
  if (a.mean.empty()) fail(ErrorKind::EmptyBundle, "bundle has no aggregate");
  json j;
  j["seed"] = detail::vec_json(a.mean[a.seed_index]);
  j["seed_index"] = a.seed_index;
  j["vertex_count"] = a.mean.size();
  j["aggregate"] = {{"mean", points_json(a.mean)},
                    {"median", points_json(a.median)},
                    {"uncertainty", a.uncertainty},
                    {"support", a.support}};
  if (include_realizations) {
    json lines = json::array();
    for (const auto& l : b.realizations)
      lines.push_back({{"points", points_json(l.points)},
                       {"seed_index", l.seed_index},
                       {"forward_termination", std::string(to_string(l.forward_termination))},
                       {"backward_termination", std::string(to_string(l.backward_termination))}});
    j["realizations"] = std::move(lines);
  }
  return j;
}

inline StreamlineBundle bundle_from_json(const json& j) {
  StreamlineBundle b;
  try {
    const auto& a = j.at("aggregate");
    b.aggregate.mean = json_points(a.at("mean"));
    b.aggregate.median = json_points(a.at("median"));
    b.aggregate.uncertainty = a.at("uncertainty").get<std::vector<double>>();
    b.aggregate.support = a.at("support").get<std::vector<std::size_t>>();
    b.aggregate.seed_index = j.at("seed_index").get<std::size_t>();
    if (j.contains("realizations"))
      for (const auto& l : j["realizations"]) {
        Streamline s;
        s.points = json_points(l.at("points"));
        s.seed_index = l.at("seed_index").get<std::size_t>();
        s.forward_termination = parse_termination(l.at("forward_termination").get<std::string>());
        s.backward_termination = parse_termination(l.at("backward_termination").get<std::string>());
        b.realizations.push_back(std::move(s));
      }
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("streamline bundle: ") + e.what());
  }
  const auto n = b.aggregate.mean.size();
  if (b.aggregate.median.size() != n || b.aggregate.uncertainty.size() != n || b.aggregate.support.size() != n)
    fail(ErrorKind::ParseError, "streamline bundle arrays differ in length");
  return b;
}

inline std::string obj_polyline(const std::vector<Vec>& pts) {
  std::ostringstream os;
  os.precision(9);
  for (const auto& p : pts) os << "v " << p[0] << ' ' << p[1] << ' ' << (p.size() > 2 ? p[2] : 0.0) << '\n';
  os << 'l';
  for (std::size_t i = 0; i < pts.size(); ++i) os << ' ' << i + 1;
  os << '\n';
  return os.str();
}

/// `tube.obj` -> `tube.uncertainty.txt`, one value per vertex.
inline fs::path obj_scalar_path(const fs::path& obj) {
  fs::path p = obj;
  return p.replace_extension(".uncertainty.txt");
}

inline void export_streamline_bundle(const StreamlineBundle& b, const fs::path& path, BundleFormat format,
                                     bool include_realizations = true) {
  if (b.aggregate.mean.empty()) fail(ErrorKind::EmptyBundle, "cannot export an empty bundle");
  if (format == BundleFormat::structured_json) {
    detail::write_file(path, bundle_json(b, include_realizations).dump(1) + "\n");
    return;
  }
  detail::write_file(path, obj_polyline(b.aggregate.mean));
  std::ostringstream scalars;
  scalars.precision(17);
  for (double u : b.aggregate.uncertainty) scalars << u << '\n';
  detail::write_file(obj_scalar_path(path), scalars.str());
}

inline StreamlineBundle read_streamline_bundle(const fs::path& path) {
  return bundle_from_json(detail::parse_json(detail::read_file(path), path.string()));
}

// ---------------------------------------------------------------------------
// Critical points

inline json critical_points_json(const std::vector<CriticalPoint>& pts) {
  json a = json::array();
  for (const auto& cp : pts) {
    json jac = json::array();
    for (Eigen::Index r = 0; r < cp.jacobian.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < cp.jacobian.cols(); ++c) row.push_back(cp.jacobian(r, c));
      jac.push_back(std::move(row));
    }
    a.push_back({{"position", detail::vec_json(cp.position)}, {"kind", std::string(to_string(cp.kind))}, {"jacobian", jac}});
  }
  return a;
}

// ---------------------------------------------------------------------------
// Metric reports: flat "key<TAB>value" text and structured JSON.
// Infinite values (perfect PSNR) are written as the string "inf".

inline std::string format_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

inline std::string report_text(const MetricReport& r) {
  std::string out;
  for (const auto& [k, v] : r.settings) out += "# " + k + "\t" + v + "\n";
  for (const auto& [k, v] : r.values) out += k + "\t" + format_value(v) + "\n";
  return out;
}

inline ordered_json report_json(const MetricReport& r) {
  ordered_json j;
  j["settings"] = ordered_json::object();
  for (const auto& [k, v] : r.settings) j["settings"][k] = v;
  j["values"] = ordered_json::object();
  for (const auto& [k, v] : r.values) {
    if (std::isfinite(v))
      j["values"][k] = v;
    else
      j["values"][k] = format_value(v);
  }
  return j;
}

inline MetricReport report_from_json(const ordered_json& j) {
  MetricReport r;
  try {
    for (const auto& [k, v] : j.at("settings").items()) r.setting(k, v.get<std::string>());
    for (const auto& [k, v] : j.at("values").items()) {
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        r.set(k, s == "-inf" ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity());
      } else {
        r.set(k, v.get<double>());
      }
    }
  } catch (const ordered_json::exception& e) {
    fail(ErrorKind::ParseError, std::string("metric report: ") + e.what());
  }
  return r;
}

inline void write_text(const fs::path& path, const std::string& text) { detail::write_file(path, text); }
inline std::string read_text(const fs::path& path) { return detail::read_file(path); }

}  // namespace fuq::io
