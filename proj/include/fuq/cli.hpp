#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fuq/config.hpp"
#include "fuq/error.hpp"
#include "fuq/field.hpp"
#include "fuq/flow.hpp"
#include "fuq/io.hpp"
#include "fuq/metrics.hpp"
#include "fuq/model.hpp"
#include "fuq/training.hpp"
#include "fuq/uq.hpp"

namespace fuq::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Environment variable that overrides the configured output directory
/// (an explicit --out-dir still wins).
inline constexpr const char* kOutputDirEnv = "FUQ_OUTPUT_DIR";

/// Wall-clock per phase, written next to the outputs of every subcommand.
class PhaseTimer {
 public:
  template <class Fn>
  auto run(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&] { phases_.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()); };
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record();
    } else {
      auto result = fn();
      record();
      return result;
    }
  }

  double seconds(const std::string& name) const {
    double s = 0.0;
    for (const auto& [n, t] : phases_)
      if (n == name) s += t;
    return s;
  }

  ordered_json to_json(const std::string& command) const {
    ordered_json j;
    j["command"] = command;
    j["phases"] = ordered_json::array();
    double total = 0.0;
    for (const auto& [n, t] : phases_) {
      j["phases"].push_back({{"name", n}, {"seconds", t}});
      total += t;
    }
    j["total_seconds"] = total;
    return j;
  }

 private:
  std::vector<std::pair<std::string, double>> phases_;
};

namespace detail {

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidArgument, "cannot parse number '" + item + "'");
    }
  }
  return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline Vec to_vec(const std::vector<double>& v) {
  if (v.empty() || v.size() > 3) fail(ErrorKind::InvalidArgument, "expected 1-3 coordinates");
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

/// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<std::size_t> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

/// A trained predictor: one model (MC dropout or deterministic) or an ensemble.
struct Predictor {
  std::vector<NeuralField> models;
  bool ensemble = false;

  const NeuralField& first() const { return models.front(); }
  bool mc() const { return !ensemble && first().config.dropout_placement != DropoutPlacement::none; }
};

inline Predictor load_predictor(const std::string& model_path, const std::string& ensemble_path) {
  Predictor p;
  if (!model_path.empty() == !ensemble_path.empty())
    fail(ErrorKind::InvalidArgument, "pass exactly one of --model or --ensemble");
  if (!model_path.empty()) {
    p.models.push_back(io::load_checkpoint(model_path));
    return p;
  }
  p.ensemble = true;
  std::vector<fs::path> files;
  if (fs::is_directory(ensemble_path)) {
    for (const auto& e : fs::directory_iterator(ensemble_path))
      if (e.path().extension() == ".fuq") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    for (const auto& f : split(ensemble_path, ',')) files.emplace_back(f);
  }
  if (files.empty()) fail(ErrorKind::InvalidArgument, "no checkpoints found for --ensemble " + ensemble_path);
  for (const auto& f : files) p.models.push_back(io::load_checkpoint(f));
  return p;
}

struct RealizationOptions {
  std::optional<std::size_t> samples;
  std::optional<double> p_test;
};

/// MC sets for dropout models, member sets for ensembles, and a single
/// deterministic realization for a dropout-free single model.
inline FieldRealizationSet realizations_for(const Predictor& pred, const DomainSpec& grid, const RunConfig& cfg,
                                            const RealizationOptions& opt) {
  if (pred.ensemble) return sample_realizations_ensemble(pred.models, grid, cfg.uq.chunk, cfg.jobs);
  const NeuralField& m = pred.first();
  if (pred.mc()) {
    const double p = opt.p_test.value_or(m.config.dropout_p_test);
    return sample_realizations_mcdropout(m, grid, opt.samples.value_or(cfg.uq.mc_samples), p, cfg.uq.seed, cfg.uq.chunk,
                                         cfg.jobs);
  }
  FieldRealizationSet set;
  set.realizations.push_back(infer_grid(m, grid, cfg.uq.chunk));
  return set;
}

inline std::vector<Vec> streamline_seeds(const RunConfig& cfg, const DomainSpec& dom) {
  std::vector<Vec> seeds = cfg.flow.seeds;
  Rng rng(cfg.flow.seed_rng);
  for (std::size_t i = 0; i < cfg.flow.random_seeds; ++i) {
    Vec s(dom.axes());
    for (std::size_t a = 0; a < dom.axes(); ++a) {
      double u = rng.uniform();
      while (u == 0.0) u = rng.uniform();
      s[a] = dom.physical_min()[a] + u * (dom.physical_max()[a] - dom.physical_min()[a]);
    }
    seeds.push_back(s);
  }
  for (const auto& s : seeds)
    if (s.size() != dom.axes()) fail(ErrorKind::InvalidArgument, "seed dimension does not match the field");
  return seeds;
}

inline void write_json(const fs::path& path, const ordered_json& j) { io::write_text(path, j.dump(2) + "\n"); }
inline void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline ordered_json train_report_json(const TrainReport& r) {
  ordered_json j;
  j["epochs"] = r.epoch_loss.size();
  j["epoch_loss"] = r.epoch_loss;
  j["epoch_lr"] = r.epoch_lr;
  j["final_loss"] = r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back();
  return j;
}

/// Reconstruction metrics of a realization set against ground truth.
inline void add_reconstruction_metrics(MetricReport& report, const FieldRealizationSet& set,
                                       const GridVectorField& truth) {
  const GridVectorField mean = mean_field(set);
  report.set("psnr", psnr(mean, truth));
  report.set("rmse", rmse(mean, truth));
  report.set("mean_error_l1", mean_of(error_field(mean, truth).data()));
  if (set.size() >= 2) report.set("mean_uncertainty", mean_of(uncertainty_field(set).data()));
  report.set("realizations", static_cast<double>(set.size()));
}

}  // namespace detail

inline std::string usage() {
  return "usage: fuq <command> [options]\n"
         "commands: gen, train, train-ensemble, reconstruct, uncertainty, error, streamlines,\n"
         "          critpoints, variability, metrics, sweep\n"
         "run 'fuq <command> --help' for the options of a command\n";
}

/// Entry point shared by the `fuq` tool and the tests. Returns 0 on success,
/// 2 on usage errors and 1 on runtime errors; errors are reported on one
/// line as `fuq: error[<Category>]: <message>`.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Uncertainty-aware neural representations of vector fields"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  detail::Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON run configuration");
    sub->add_option("--out-dir", common.out_dir, "output directory (overrides config and $FUQ_OUTPUT_DIR)");
    sub->add_option("--jobs", common.jobs, "worker threads");
    sub->add_option("--seed", common.seed, "run seed (training, sampling and streamline seeds)");
    sub->add_option("--epochs", common.epochs, "override training.epochs");
  };

  // gen
  std::string gen_kind = "center", gen_dims = "64,64", gen_bounds, gen_center, gen_out;
  double gen_strength = 1.0;
  auto* gen = app.add_subcommand("gen", "write an analytic vector field");
  gen->add_option("--kind", gen_kind, "center|saddle|source|sink|rankine_vortex|double_gyre_steady|tornado_swirl_3d");
  gen->add_option("--dims", gen_dims, "grid size per axis, e.g. 64,64");
  gen->add_option("--bounds", gen_bounds, "min0,max0,min1,max1[,min2,max2] (default [-1,1] per axis)");
  gen->add_option("--center", gen_center, "critical point location (default: domain midpoint)");
  gen->add_option("--strength", gen_strength, "field strength");
  gen->add_option("--out", gen_out, "raw output path (default <out-dir>/field.raw)");
  add_common(gen);

  // model-consuming commands
  std::string field_path, truth_path, pred_path, model_path, ensemble_path, out_path, axis, values;
  std::optional<std::size_t> members, samples, random_seeds;
  std::optional<double> p_test;
  std::string seeds_arg;
  auto add_predictor = [&](CLI::App* sub) {
    sub->add_option("--model", model_path, "checkpoint of a single model");
    sub->add_option("--ensemble", ensemble_path, "directory of member checkpoints or comma-separated list");
    sub->add_option("--samples", samples, "MC samples (default uq.mc_samples)");
    sub->add_option("--p-test", p_test, "test-time dropout probability");
    sub->add_option("--field", field_path, "grid to evaluate on (default: the training grid)");
  };

  auto* train = app.add_subcommand("train", "train one model (MC dropout unless placement is none)");
  train->add_option("--field", field_path, "training field (.raw with .json sidecar)")->required();
  train->add_option("--out", out_path, "checkpoint path (default <out-dir>/model.fuq)");
  add_common(train);

  auto* train_ens = app.add_subcommand("train-ensemble", "train a deep ensemble");
  train_ens->add_option("--field", field_path, "training field")->required();
  train_ens->add_option("--members", members, "member count (default uq.members)");
  train_ens->add_option("--out", out_path, "member directory (default <out-dir>/ensemble)");
  add_common(train_ens);

  auto* recon = app.add_subcommand("reconstruct", "write the mean predicted field");
  add_predictor(recon);
  recon->add_option("--out", out_path, "raw output path (default <out-dir>/reconstruction.raw)");
  add_common(recon);

  auto* unc = app.add_subcommand("uncertainty", "write the per-node uncertainty field");
  add_predictor(unc);
  unc->add_option("--out", out_path, "raw output path (default <out-dir>/uncertainty.raw)");
  add_common(unc);

  auto* errc = app.add_subcommand("error", "write the per-node L1 error field");
  add_predictor(errc);
  errc->add_option("--pred", pred_path, "predicted field (instead of --model/--ensemble)");
  errc->add_option("--truth", truth_path, "ground-truth field")->required();
  errc->add_option("--out", out_path, "raw output path (default <out-dir>/error.raw)");
  add_common(errc);

  auto* sl = app.add_subcommand("streamlines", "trace uncertainty-aware streamline bundles");
  add_predictor(sl);
  sl->add_option("--truth", truth_path, "ground truth; enables Chamfer/Hausdorff metrics");
  sl->add_option("--seeds", seeds_arg, "explicit seeds 'x,y;x,y'");
  sl->add_option("--random-seeds", random_seeds, "number of uniform random seeds");
  add_common(sl);

  auto* cp = app.add_subcommand("critpoints", "detect and classify critical points");
  add_predictor(cp);
  cp->add_option("--pred", pred_path, "field to analyse directly (instead of --model/--ensemble)");
  cp->add_option("--truth", truth_path, "ground truth; enables critical-point RMSE");
  add_common(cp);

  auto* var = app.add_subcommand("variability", "critical-point variability field over all realizations");
  add_predictor(var);
  var->add_option("--out", out_path, "raw output path (default <out-dir>/variability.raw)");
  add_common(var);

  auto* met = app.add_subcommand("metrics", "PSNR / RMSE (and critical-point error) report");
  add_predictor(met);
  met->add_option("--pred", pred_path, "predicted field (instead of --model/--ensemble)");
  met->add_option("--truth", truth_path, "ground-truth field")->required();
  add_common(met);

  auto* sweep = app.add_subcommand("sweep", "study one configuration axis");
  sweep->add_option("--field", field_path, "training / ground-truth field")->required();
  sweep->add_option("--axis", axis, "mc-samples|members|p-test|placement|depth")->required();
  sweep->add_option("--values", values, "comma-separated axis values")->required();
  add_common(sweep);

  if (argc > 1 && argv[1][0] != '-') {
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == argv[1];
    if (!known) {
      err << usage() << "fuq: error[Usage]: unknown command '" << argv[1] << "'\n";
      return 2;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help(argc > 1 ? argv[1] : "");
    return 0;
  } catch (const CLI::ParseError& e) {
    err << usage() << "fuq: error[Usage]: " << e.what() << "\n";
    return 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  PhaseTimer timer;
  try {
    RunConfig cfg = common.config_path.empty() ? parse_run_config(json::object()) : load_run_config(common.config_path);
    if (common.jobs) cfg.jobs = std::max<std::size_t>(1, *common.jobs);
    if (common.seed) {
      cfg.training.seed = *common.seed;
      cfg.uq.seed = *common.seed;
      cfg.flow.seed_rng = *common.seed;
    }
    if (common.epochs) cfg.training.epochs = *common.epochs;
    if (random_seeds) cfg.flow.random_seeds = *random_seeds;
    if (!seeds_arg.empty())
      for (const auto& s : detail::split(seeds_arg, ';')) cfg.flow.seeds.push_back(detail::to_vec(detail::parse_list(s)));

    fs::path out_dir = cfg.output_dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) out_dir = env;
    if (!common.out_dir.empty()) out_dir = common.out_dir;
    auto output = [&](const std::string& def) { return out_path.empty() ? out_dir / def : fs::path(out_path); };

    auto grid_for = [&](const detail::Predictor& p) {
      return field_path.empty() ? p.first().domain : io::load_raw_field(field_path).domain();
    };
    const detail::RealizationOptions ropt{samples, p_test};

    if (name == "gen") {
      const auto dims_d = detail::parse_list(gen_dims);
      std::vector<std::size_t> dims;
      for (double d : dims_d) {
        if (d < 2 || d != std::floor(d)) fail(ErrorKind::InvalidArgument, "--dims entries must be integers >= 2");
        dims.push_back(static_cast<std::size_t>(d));
      }
      Vec lo(dims.size(), -1.0), hi(dims.size(), 1.0);
      if (!gen_bounds.empty()) {
        const auto b = detail::parse_list(gen_bounds);
        if (b.size() != 2 * dims.size()) fail(ErrorKind::InvalidArgument, "--bounds needs min,max per axis");
        for (std::size_t a = 0; a < dims.size(); ++a) {
          lo[a] = b[2 * a];
          hi[a] = b[2 * a + 1];
        }
      }
      const DomainSpec dom(dims, lo, hi);
      AnalyticField kind;
      kind.kind = parse_analytic_kind(gen_kind);
      kind.strength = gen_strength;
      if (!gen_center.empty()) kind.center = detail::to_vec(detail::parse_list(gen_center));
      const auto field = timer.run("generate", [&] { return generate_analytic(kind, dom); });
      const fs::path path = gen_out.empty() ? out_dir / "field.raw" : fs::path(gen_out);
      timer.run("write", [&] { io::save_raw_field(field, path, gen_kind); });
      out << "wrote " << path.string() << "\n";
    } else if (name == "train") {
      const auto field = timer.run("load", [&] { return io::load_raw_field(field_path); });
      const auto net = cfg.network_for(field.domain().axes());
      auto result = timer.run("train", [&] { return train_single_model(field, net, cfg.training); });
      const fs::path path = output("model.fuq");
      timer.run("write", [&] {
        io::save_checkpoint(result.model, path);
        detail::write_json(out_dir / "train_report.json", detail::train_report_json(result.report));
      });
      out << "final_loss\t" << io::format_value(result.report.epoch_loss.empty() ? 0.0 : result.report.epoch_loss.back())
          << "\ncheckpoint_bytes\t" << fs::file_size(path) << "\nparameter_bytes\t" << io::parameter_bytes(result.model.config)
          << "\nwrote " << path.string() << "\n";
    } else if (name == "train-ensemble") {
      const auto field = timer.run("load", [&] { return io::load_raw_field(field_path); });
      auto net = cfg.network_for(field.domain().axes());
      net.dropout_placement = DropoutPlacement::none;
      const std::size_t count = members.value_or(cfg.uq.members);
      auto results = timer.run("train", [&] { return train_ensemble(field, net, cfg.training, count, cfg.jobs); });
      const fs::path dir = output("ensemble");
      ordered_json reports = ordered_json::array();
      timer.run("write", [&] {
        for (std::size_t k = 0; k < results.size(); ++k) {
          char file[32];
          std::snprintf(file, sizeof file, "member_%03zu.fuq", k);
          io::save_checkpoint(results[k].model, dir / file);
          reports.push_back(detail::train_report_json(results[k].report));
        }
        detail::write_json(out_dir / "train_ensemble_report.json", reports);
      });
      out << "members\t" << results.size() << "\nwrote " << dir.string() << "\n";
    } else if (name == "reconstruct" || name == "uncertainty" || name == "variability") {
      const auto pred = timer.run("load", [&] { return detail::load_predictor(model_path, ensemble_path); });
      const DomainSpec grid = grid_for(pred);
      const auto set = timer.run("inference", [&] { return detail::realizations_for(pred, grid, cfg, ropt); });
      if (name == "reconstruct") {
        const auto mean = timer.run("reduce", [&] { return mean_field(set); });
        const fs::path path = output("reconstruction.raw");
        timer.run("write", [&] { io::save_raw_field(mean, path, "reconstruction"); });
        out << "wrote " << path.string() << "\n";
      } else if (name == "uncertainty") {
        const auto u = timer.run("reduce", [&] { return uncertainty_field(set); });
        const fs::path path = output("uncertainty.raw");
        timer.run("write", [&] { io::save_scalar_field(u, path, "uncertainty"); });
        out << "mean_uncertainty\t" << io::format_value(detail::mean_of(u.data())) << "\nwrote " << path.string() << "\n";
      } else {
        const auto& cpc = cfg.critical_points;
        const auto pts = timer.run("detect", [&] {
          return critical_points_all_realizations(set, cpc.zero_tolerance, cpc.refine_iters, cfg.jobs);
        });
        const auto v = timer.run("accumulate", [&] { return variability_field(pts, grid, cpc.clamp_radius); });
        const fs::path path = output("variability.raw");
        timer.run("write", [&] { io::save_scalar_field(v, path, "variability"); });
        out << "critical_points_total\t" << pts.size() << "\nwrote " << path.string() << "\n";
      }
    } else if (name == "error") {
      const auto truth = io::load_raw_field(truth_path);
      GridVectorField pred;
      if (!pred_path.empty()) {
        pred = io::load_raw_field(pred_path);
      } else {
        const auto p = detail::load_predictor(model_path, ensemble_path);
        pred = timer.run("inference", [&] { return mean_field(detail::realizations_for(p, truth.domain(), cfg, ropt)); });
      }
      const auto e = timer.run("reduce", [&] { return error_field(pred, truth); });
      const fs::path path = output("error.raw");
      io::save_scalar_field(e, path, "error");
      out << "mean_error_l1\t" << io::format_value(detail::mean_of(e.data())) << "\nwrote " << path.string() << "\n";
    } else if (name == "streamlines") {
      std::optional<GridVectorField> truth;
      if (!truth_path.empty()) truth = io::load_raw_field(truth_path);
      const auto pred = detail::load_predictor(model_path, ensemble_path);
      const DomainSpec grid = field_path.empty() ? (truth ? truth->domain() : pred.first().domain) : io::load_raw_field(field_path).domain();
      const auto set = timer.run("inference", [&] { return detail::realizations_for(pred, grid, cfg, ropt); });
      const auto seeds = detail::streamline_seeds(cfg, grid);
      if (seeds.empty()) fail(ErrorKind::InvalidArgument, "no streamline seeds (use flow.seeds, --seeds or --random-seeds)");
      const double h = cfg.flow.step_size.value_or(default_step_size(grid));
      std::vector<StreamlineBundle> bundles(seeds.size());
      timer.run("trace", [&] {
        for (std::size_t s = 0; s < seeds.size(); ++s) bundles[s] = trace_bundle(set, seeds[s], h, cfg.flow.max_steps, cfg.jobs);
      });

      MetricReport report;
      report.setting("command", "streamlines");
      report.setting("realizations", std::to_string(set.size()));
      report.setting("step_size", io::format_value(h));
      report.set("seeds", static_cast<double>(seeds.size()));
      std::vector<double> unc, cham, haus;
      for (const auto& b : bundles) unc.push_back(detail::mean_of(b.aggregate.uncertainty));
      report.set("mean_step_uncertainty", detail::mean_of(unc));
      if (truth) {
        timer.run("compare", [&] {
          for (std::size_t s = 0; s < seeds.size(); ++s) {
            const auto gt = trace_streamline(GridSampler(*truth), seeds[s], h, cfg.flow.max_steps);
            cham.push_back(chamfer(bundles[s].aggregate.mean, gt.points));
            haus.push_back(hausdorff(bundles[s].aggregate.mean, gt.points));
          }
        });
        report.set("streamline_chamfer_mean", detail::mean_of(cham));
        report.set("streamline_hausdorff_mean", detail::mean_of(haus));
      }

      timer.run("write", [&] {
        const bool js = cfg.flow.format != "obj", obj = cfg.flow.format != "json";
        if (js) {
          json all;
          all["bundles"] = json::array();
          for (const auto& b : bundles) all["bundles"].push_back(io::bundle_json(b, cfg.flow.write_realizations));
          io::write_text(out_dir / "streamlines.json", all.dump(1) + "\n");
        }
        if (obj)
          for (std::size_t s = 0; s < bundles.size(); ++s)
            io::export_streamline_bundle(bundles[s], out_dir / ("streamline_" + std::to_string(s) + ".obj"),
                                         io::BundleFormat::obj_polyline);
        io::write_text(out_dir / "streamlines_report.txt", io::report_text(report));
        detail::write_json(out_dir / "streamlines_report.json", io::report_json(report));
      });
      out << io::report_text(report);
    } else if (name == "critpoints") {
      GridVectorField field;
      if (!pred_path.empty()) {
        field = io::load_raw_field(pred_path);
      } else {
        const auto p = detail::load_predictor(model_path, ensemble_path);
        const DomainSpec grid = field_path.empty() ? (truth_path.empty() ? p.first().domain : io::load_raw_field(truth_path).domain())
                                                   : io::load_raw_field(field_path).domain();
        field = timer.run("inference", [&] { return mean_field(detail::realizations_for(p, grid, cfg, ropt)); });
      }
      const auto& cpc = cfg.critical_points;
      const auto pts = timer.run("detect", [&] { return detect_critical_points(field, cpc.zero_tolerance, cpc.refine_iters); });
      json doc;
      doc["critical_points"] = io::critical_points_json(pts);
      MetricReport report;
      report.setting("command", "critpoints");
      report.set("critical_points", static_cast<double>(pts.size()));
      if (!truth_path.empty()) {
        const auto truth = io::load_raw_field(truth_path);
        std::vector<Vec> tp, pp;
        for (const auto& c : detect_critical_points(truth, cpc.zero_tolerance, cpc.refine_iters)) tp.push_back(c.position);
        for (const auto& c : pts) pp.push_back(c.position);
        if (!tp.empty()) {
          const auto e = critical_point_rmse(pp, tp, cfg.metrics.match_radius.value_or(default_match_radius(truth.domain())));
          if (e.rmse) report.set("critical_point_rmse", *e.rmse);
          report.set("critical_points_missed", static_cast<double>(e.missed));
          report.set("critical_points_spurious", static_cast<double>(e.spurious));
        }
      }
      doc["report"] = json::parse(io::report_json(report).dump());
      detail::write_json(out_dir / "critical_points.json", doc);
      out << io::report_text(report);
    } else if (name == "metrics") {
      const auto truth = io::load_raw_field(truth_path);
      MetricReport report;
      report.setting("command", "metrics");
      GridVectorField mean;
      if (!pred_path.empty()) {
        FieldRealizationSet set;
        set.realizations.push_back(io::load_raw_field(pred_path));
        detail::add_reconstruction_metrics(report, set, truth);
        mean = set.realizations.front();
      } else {
        const auto p = detail::load_predictor(model_path, ensemble_path);
        report.setting("method", p.ensemble ? "ensemble" : (p.mc() ? "mcdropout" : "deterministic"));
        const auto set = timer.run("inference", [&] { return detail::realizations_for(p, truth.domain(), cfg, ropt); });
        timer.run("reduce", [&] { detail::add_reconstruction_metrics(report, set, truth); });
        mean = mean_field(set);
      }
      const auto& cpc = cfg.critical_points;
      std::vector<Vec> tp, pp;
      for (const auto& c : detect_critical_points(truth, cpc.zero_tolerance, cpc.refine_iters)) tp.push_back(c.position);
      if (!tp.empty()) {
        for (const auto& c : detect_critical_points(mean, cpc.zero_tolerance, cpc.refine_iters)) pp.push_back(c.position);
        const auto e = critical_point_rmse(pp, tp, cfg.metrics.match_radius.value_or(default_match_radius(truth.domain())));
        if (e.rmse) report.set("critical_point_rmse", *e.rmse);
        report.set("critical_points_missed", static_cast<double>(e.missed));
        report.set("critical_points_spurious", static_cast<double>(e.spurious));
      }
      io::write_text(out_dir / "metrics.txt", io::report_text(report));
      detail::write_json(out_dir / "metrics.json", io::report_json(report));
      out << io::report_text(report);
    } else if (name == "sweep") {
      const auto truth = timer.run("load", [&] { return io::load_raw_field(field_path); });
      const auto base_net = cfg.network_for(truth.domain().axes());
      const std::vector<std::string> raw_values = detail::split(values, ',');
      if (raw_values.empty()) fail(ErrorKind::InvalidArgument, "--values is empty");
      auto as_count = [](const std::string& s) {
        const auto v = detail::parse_list(s);
        if (v.size() != 1 || v[0] < 1 || v[0] != std::floor(v[0]))
          fail(ErrorKind::InvalidArgument, "expected a positive integer, got '" + s + "'");
        return static_cast<std::size_t>(v[0]);
      };

      std::vector<MetricReport> rows;
      auto row = [&](const std::string& value) {
        MetricReport r;
        r.setting("axis", axis);
        r.setting("value", value);
        return r;
      };
      auto mc_model = [&](const NetworkConfig& net) {
        auto result = timer.run("train", [&] { return train_single_model(truth, net, cfg.training); });
        return std::make_pair(io::decode_checkpoint(io::encode_checkpoint(result.model)), result.report.total_seconds);
      };
      auto eval_set = [&](MetricReport& r, const std::function<FieldRealizationSet()>& make) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto set = make();
        r.set("inference_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        detail::add_reconstruction_metrics(r, set, truth);
      };

      if (axis == "mc-samples" || axis == "p-test") {
        auto net = base_net;
        if (net.dropout_placement == DropoutPlacement::none) net.dropout_placement = DropoutPlacement::last_block;
        const auto [model, train_s] = mc_model(net);
        for (const auto& v : raw_values) {
          MetricReport r = row(v);
          const std::size_t m = axis == "mc-samples" ? as_count(v) : cfg.uq.mc_samples;
          const double p = axis == "p-test" ? detail::parse_list(v).at(0) : net.dropout_p_test;
          r.setting("method", "mcdropout");
          r.setting("mc_samples", std::to_string(m));
          r.setting("p_test", io::format_value(p));
          r.set("train_seconds", train_s);
          timer.run("inference", [&] {
            eval_set(r, [&] { return sample_realizations_mcdropout(model, truth.domain(), m, p, cfg.uq.seed, cfg.uq.chunk, cfg.jobs); });
          });
          rows.push_back(std::move(r));
        }
      } else if (axis == "members") {
        std::vector<std::size_t> counts;
        for (const auto& v : raw_values) counts.push_back(as_count(v));
        auto net = base_net;
        net.dropout_placement = DropoutPlacement::none;
        const std::size_t most = *std::max_element(counts.begin(), counts.end());
        auto results = timer.run("train", [&] { return train_ensemble(truth, net, cfg.training, most, cfg.jobs); });
        std::vector<NeuralField> models;
        std::vector<double> train_s;
        for (const auto& res : results) {
          models.push_back(io::decode_checkpoint(io::encode_checkpoint(res.model)));
          train_s.push_back(res.report.total_seconds);
        }
        for (std::size_t i = 0; i < counts.size(); ++i) {
          MetricReport r = row(raw_values[i]);
          r.setting("method", "ensemble");
          r.setting("members", std::to_string(counts[i]));
          r.set("train_seconds", std::accumulate(train_s.begin(), train_s.begin() + static_cast<std::ptrdiff_t>(counts[i]), 0.0));
          const std::vector<NeuralField> subset(models.begin(), models.begin() + static_cast<std::ptrdiff_t>(counts[i]));
          timer.run("inference", [&] {
            eval_set(r, [&] { return sample_realizations_ensemble(subset, truth.domain(), cfg.uq.chunk, cfg.jobs); });
          });
          rows.push_back(std::move(r));
        }
      } else if (axis == "placement" || axis == "depth") {
        for (const auto& v : raw_values) {
          MetricReport r = row(v);
          auto net = base_net;
          if (axis == "placement") {
            net.dropout_placement = parse_dropout_placement(v);
            if (net.dropout_placement == DropoutPlacement::none)
              fail(ErrorKind::InvalidArgument, "placement sweep values must enable dropout");
          } else {
            net.num_res_blocks = as_count(v);
          }
          r.setting("num_res_blocks", std::to_string(net.num_res_blocks));
          if (axis == "depth" && cfg.uq.method == UqMethod::ensemble) {
            net.dropout_placement = DropoutPlacement::none;
            r.setting("method", "ensemble");
            r.setting("members", std::to_string(cfg.uq.members));
            auto results = timer.run("train", [&] { return train_ensemble(truth, net, cfg.training, cfg.uq.members, cfg.jobs); });
            std::vector<NeuralField> models;
            double train_s = 0.0;
            for (const auto& res : results) {
              models.push_back(io::decode_checkpoint(io::encode_checkpoint(res.model)));
              train_s += res.report.total_seconds;
            }
            r.set("train_seconds", train_s);
            timer.run("inference", [&] {
              eval_set(r, [&] { return sample_realizations_ensemble(models, truth.domain(), cfg.uq.chunk, cfg.jobs); });
            });
          } else {
            if (net.dropout_placement == DropoutPlacement::none) net.dropout_placement = DropoutPlacement::last_block;
            r.setting("method", "mcdropout");
            r.setting("placement", std::string(to_string(net.dropout_placement)));
            r.setting("mc_samples", std::to_string(cfg.uq.mc_samples));
            const auto [model, train_s] = mc_model(net);
            r.set("train_seconds", train_s);
            timer.run("inference", [&] {
              eval_set(r, [&] {
                return sample_realizations_mcdropout(model, truth.domain(), cfg.uq.mc_samples, net.dropout_p_test, cfg.uq.seed,
                                                     cfg.uq.chunk, cfg.jobs);
              });
            });
          }
          rows.push_back(std::move(r));
        }
      } else {
        fail(ErrorKind::InvalidArgument, "unknown sweep axis '" + axis + "' (mc-samples|members|p-test|placement|depth)");
      }

      // One row per axis value, in request order. Timing columns are last.
      const std::vector<std::string> columns = {"psnr", "rmse", "mean_error_l1", "mean_uncertainty", "realizations",
                                                "train_seconds", "inference_seconds"};
      std::string table = "axis\tvalue";
      for (const auto& c : columns) table += "\t" + c;
      table += "\n";
      ordered_json arr = ordered_json::array();
      for (const auto& r : rows) {
        table += axis + "\t" + r.settings[1].second;
        for (const auto& c : columns) {
          const auto v = r.get(c);
          table += "\t" + (v ? io::format_value(*v) : std::string("NA"));
        }
        table += "\n";
        arr.push_back(io::report_json(r));
      }
      io::write_text(out_dir / "sweep.tsv", table);
      detail::write_json(out_dir / "sweep.json", arr);
      out << table;
    }
    fs::create_directories(out_dir);
    detail::write_json(out_dir / ("timing_" + name + ".json"), timer.to_json(name));
    return 0;
  } catch (const Error& e) {
    err << "fuq: error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "fuq: error[Internal]: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fuq::cli
