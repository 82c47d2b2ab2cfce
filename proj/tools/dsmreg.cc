// dsmreg: command-line driver for the DSM registration pipeline.
//
//   dsmreg synth    -> tiles, truth raster, truth_poses.json
//   dsmreg register -> report.json for one raster pair
//   dsmreg graph    -> graph.json
//   dsmreg solve    -> poses.json
//   dsmreg fuse     -> fused raster + contributor raster
//   dsmreg eval     -> metrics.json (+ error map)

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#ifdef DSMREG_CLI11_SINGLE_HEADER
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dsmreg/errors.h"
#include "dsmreg/fusion.h"
#include "dsmreg/icp.h"
#include "dsmreg/metrics.h"
#include "dsmreg/motion_averaging.h"
#include "dsmreg/raster_io.h"
#include "dsmreg/scene_graph.h"
#include "dsmreg/serialization.h"
#include "dsmreg/synth.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dsmreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitRegistration = 2;
constexpr int kExitGraph = 3;

struct PipelineConfig {
  std::vector<std::string> inputs;
  double overlap_threshold = 0.05;
  IcpParams icp;
  double tau = 10.0;
  int anchor = 0;
  std::string solver = "average";
  double target_gsd = 0.0;
  std::uint64_t seed = 0;
  std::string out = ".";
  int threads = 0;
  std::string format = "binary";
  std::string log_level = "warn";

  void validate() const {
    auto fail = [](const std::string& what) {
      throw DsmError(ErrorCode::kInvalidArgument, "config: " + what);
    };
    if (!(overlap_threshold >= 0.0 && overlap_threshold < 1.0))
      fail("overlap_threshold must be in [0, 1)");
    icp.validate();
    if (!(tau > 0.0)) fail("tau must be > 0");
    if (anchor < 0) fail("anchor must be >= 0");
    if (solver != "average" && solver != "greedy") fail("solver must be 'average' or 'greedy'");
    if (target_gsd < 0.0) fail("target_gsd must be >= 0");
    if (threads < 0) fail("threads must be >= 0");
    if (format != "binary" && format != "ascii") fail("format must be 'binary' or 'ascii'");
  }
};

// A config key: how to read it from JSON and which command-line options can
// override it.
struct ConfigKey {
  std::function<void(const json&)> assign;
  std::vector<CLI::Option*> options;
};

template <typename T>
std::function<void(const json&)> setter(T& target) {
  return [&target](const json& v) { target = v.get<T>(); };
}

class Cli {
 public:
  Cli() : app_("Registration, motion averaging and fusion of digital surface models", "dsmreg") {
    app_.require_subcommand(1);
    app_.fallthrough();
    app_.set_version_flag("--version", "dsmreg 0.1.0");

    keys_["inputs"].assign = setter(cfg_.inputs);
    keys_["overlap_threshold"].assign = setter(cfg_.overlap_threshold);
    keys_["n_queries"].assign = setter(cfg_.icp.n_queries);
    keys_["max_iterations"].assign = setter(cfg_.icp.max_iterations);
    keys_["rel_tol"].assign = setter(cfg_.icp.rel_tol);
    keys_["abs_tol"].assign = setter(cfg_.icp.abs_tol);
    keys_["trim_fraction"].assign = setter(cfg_.icp.trim_fraction);
    keys_["correspondence_reject"].assign = setter(cfg_.icp.correspondence_reject);
    keys_["max_ring_radius"].assign = setter(cfg_.icp.nn.max_ring_radius);
    keys_["tau"].assign = setter(cfg_.tau);
    keys_["anchor"].assign = setter(cfg_.anchor);
    keys_["solver"].assign = setter(cfg_.solver);
    keys_["target_gsd"].assign = setter(cfg_.target_gsd);
    keys_["seed"].assign = setter(cfg_.seed);
    keys_["out"].assign = setter(cfg_.out);
    keys_["threads"].assign = setter(cfg_.threads);
    keys_["format"].assign = setter(cfg_.format);
    keys_["log_level"].assign = setter(cfg_.log_level);

    app_.add_option("--config", config_path_, "JSON pipeline config; command-line flags win")
        ->check(CLI::ExistingFile);
    bind("seed", app_.add_option("--seed", cfg_.seed, "Random seed (query sampling, synth)"));
    bind("threads", app_.add_option("--threads", cfg_.threads, "Worker cap; 0 = hardware threads"));
    bind("out", app_.add_option("--out", cfg_.out, "Output directory"));
    bind("log_level", app_.add_option("--log-level", cfg_.log_level,
                                      "trace|debug|info|warn|error|off")
                          ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"})));

    add_register();
    add_graph();
    add_solve();
    add_fuse();
    add_eval();
    add_synth();
  }

  int run(int argc, char** argv) {
    try {
      app_.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app_.exit(e);
      return code == 0 ? kExitOk : kExitIo;
    }
    try {
      apply_config();
      setup_logging();
      cfg_.validate();
      return action_();
    } catch (const DisconnectedGraphError& e) {
      json components = e.components();
      return fail(e.code(), e.what(), {{"components", components}});
    } catch (const DsmError& e) {
      return fail(e.code(), e.what());
    } catch (const json::exception& e) {
      return fail(ErrorCode::kParseError, e.what());
    } catch (const std::exception& e) {
      return fail(ErrorCode::kIoError, e.what());
    }
  }

 private:
  void bind(const std::string& key, CLI::Option* opt) { keys_.at(key).options.push_back(opt); }

  void add_icp_options(CLI::App* cmd) {
    bind("n_queries", cmd->add_option("--n-queries", cfg_.icp.n_queries, "Query points per ICP iteration"));
    bind("max_iterations", cmd->add_option("--max-iterations", cfg_.icp.max_iterations, "ICP iteration cap"));
    bind("rel_tol", cmd->add_option("--rel-tol", cfg_.icp.rel_tol, "Stop on relative RMS change below this"));
    bind("abs_tol", cmd->add_option("--abs-tol", cfg_.icp.abs_tol, "Stop on pose change below this (rad + m)"));
    bind("trim_fraction", cmd->add_option("--trim-fraction", cfg_.icp.trim_fraction,
                                          "Fraction of worst correspondences dropped"));
    bind("correspondence_reject", cmd->add_option("--correspondence-reject", cfg_.icp.correspondence_reject,
                                                  "Drop correspondences farther apart than this (m)"));
    bind("max_ring_radius", cmd->add_option("--max-ring-radius", cfg_.icp.nn.max_ring_radius,
                                            "Ring-scan radius (px) around nodata anchors"));
  }

  void on_run(CLI::App* cmd, int (Cli::*fn)()) {
    cmd->callback([this, cmd, fn] {
      const auto it = outputs_.find(cmd->get_name());
      if (it != outputs_.end()) output_ = it->second;
      action_ = [this, fn] { return (this->*fn)(); };
    });
  }

  void add_output(CLI::App* cmd, const std::string& fallback, const std::string& what) {
    std::string& target = outputs_[cmd->get_name()];
    target = fallback;
    cmd->add_option("-o,--output", target, what + " (relative paths land in --out)")->capture_default_str();
  }

  void add_register() {
    auto* cmd = app_.add_subcommand("register", "Register one raster onto another (DSM-ICP)");
    cmd->add_option("moving", moving_, "Raster to move")->required();
    cmd->add_option("reference", reference_, "Reference raster")->required();
    add_output(cmd, "report.json", "Report JSON");
    add_icp_options(cmd);
    on_run(cmd, &Cli::cmd_register);
  }

  void add_graph() {
    auto* cmd = app_.add_subcommand("graph", "Build the weighted scene graph of overlapping rasters");
    bind("inputs", cmd->add_option("rasters", cfg_.inputs, "Input rasters (vertex ids follow this order)"));
    bind("overlap_threshold", cmd->add_option("--overlap-threshold", cfg_.overlap_threshold,
                                              "Minimum overlap score for an edge"));
    add_output(cmd, "graph.json", "Graph JSON");
    add_icp_options(cmd);
    on_run(cmd, &Cli::cmd_graph);
  }

  void add_solve() {
    auto* cmd = app_.add_subcommand("solve", "Estimate global poses from a scene graph");
    cmd->add_option("--graph", graph_path_, "Graph JSON from 'dsmreg graph'");
    bind("inputs", cmd->add_option("rasters", cfg_.inputs, "Rasters to graph first (when no --graph)"));
    bind("solver", cmd->add_option("--solver", cfg_.solver, "average | greedy")
                       ->check(CLI::IsMember({"average", "greedy"})));
    bind("anchor", cmd->add_option("--anchor", cfg_.anchor, "Vertex whose pose is the identity"));
    bind("overlap_threshold", cmd->add_option("--overlap-threshold", cfg_.overlap_threshold,
                                              "Minimum overlap score for an edge"));
    add_output(cmd, "poses.json", "Poses JSON");
    add_icp_options(cmd);
    on_run(cmd, &Cli::cmd_solve);
  }

  void add_fuse() {
    auto* cmd = app_.add_subcommand("fuse", "Resample posed rasters and fuse them by the median");
    bind("inputs", cmd->add_option("rasters", cfg_.inputs, "Rasters in vertex order"));
    cmd->add_option("--poses", poses_path_, "Poses JSON (identity poses when omitted)");
    bind("target_gsd", cmd->add_option("--gsd", cfg_.target_gsd, "Output pixel size; 0 = finest input"));
    bind("format", cmd->add_option("--format", cfg_.format, "Raster output format: binary | ascii"));
    add_output(cmd, "fused", "Fused raster");
    on_run(cmd, &Cli::cmd_fuse);
  }

  void add_eval() {
    auto* cmd = app_.add_subcommand("eval", "Outlier-gated RMSE of rasters against a reference or each other");
    bind("inputs", cmd->add_option("rasters", cfg_.inputs, "One raster with --reference, or several"));
    cmd->add_option("--reference", reference_, "Reference raster (e.g. ground truth)");
    cmd->add_option("--poses", poses_path_, "Poses applied before a pairwise evaluation");
    bind("tau", cmd->add_option("--tau", cfg_.tau, "Inlier threshold (m)"));
    cmd->add_option("--error-map", error_map_path_, "Write the signed difference raster here");
    cmd->add_flag("--align-first", align_first_, "Register the raster onto the reference first");
    bind("format", cmd->add_option("--format", cfg_.format, "Raster output format: binary | ascii"));
    add_output(cmd, "metrics.json", "Metrics JSON");
    add_icp_options(cmd);
    on_run(cmd, &Cli::cmd_eval);
  }

  void add_synth() {
    auto* cmd = app_.add_subcommand("synth", "Generate a synthetic mosaic with ground-truth poses");
    cmd->add_option("--rows", mosaic_.rows, "Tile rows")->capture_default_str();
    cmd->add_option("--cols", mosaic_.cols, "Tile columns")->capture_default_str();
    cmd->add_option("--tile-size", mosaic_.tile_size, "Tile side (px)")->capture_default_str();
    cmd->add_option("--overlap", mosaic_.overlap, "Shared fraction of the tile side")->capture_default_str();
    cmd->add_option("--gsd", mosaic_.gsd, "Pixel size (m)")->capture_default_str();
    cmd->add_option("--amplitude", mosaic_.amplitude, "Terrain amplitude (m)")->capture_default_str();
    cmd->add_option("--roughness", mosaic_.roughness, "Diamond-square decay exponent")->capture_default_str();
    cmd->add_option("--max-rotation-deg", mosaic_.perturbation.max_rotation_deg, "Max tile rotation")
        ->capture_default_str();
    cmd->add_option("--max-shift-px", mosaic_.perturbation.max_shift_px, "Max horizontal shift")
        ->capture_default_str();
    cmd->add_option("--max-dz", mosaic_.perturbation.max_dz, "Max vertical shift (m)")->capture_default_str();
    cmd->add_option("--min-fraction", mosaic_.perturbation.min_fraction,
                    "Perturbation magnitudes drawn from [min_fraction * max, max]")
        ->capture_default_str();
    cmd->add_flag("--perturb-anchor", mosaic_.perturb_anchor, "Also perturb tile 0");
    cmd->add_option("--nodata-fraction", mosaic_.nodata_fraction, "Fraction of each tile in holes")
        ->capture_default_str();
    cmd->add_option("--noise-sigma", mosaic_.noise_sigma, "Height noise (m)")->capture_default_str();
    bind("format", cmd->add_option("--format", cfg_.format, "Raster output format: binary | ascii"));
    on_run(cmd, &Cli::cmd_synth);
  }

  void apply_config() {
    if (config_path_.empty()) return;
    const json j = read_json_file(config_path_);
    if (!j.is_object()) throw ParseError(config_path_, 1, 0, "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      const auto it = keys_.find(key);
      if (it == keys_.end()) throw ParseError(config_path_, 0, 0, fmt::format("unknown config key '{}'", key));
      bool on_command_line = false;
      for (const CLI::Option* opt : it->second.options) on_command_line |= opt->count() > 0;
      if (on_command_line) continue;
      try {
        it->second.assign(value);
      } catch (const json::exception& e) {
        throw ParseError(config_path_, 0, 0, fmt::format("bad value for '{}': {}", key, e.what()));
      }
    }
  }

  void setup_logging() {
    auto logger = spdlog::stderr_color_mt("dsmreg");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(cfg_.log_level));
  }

  int fail(ErrorCode code, const std::string& message, json extra = json::object()) {
    int exit_code = kExitIo;
    switch (code) {
      case ErrorCode::kNoOverlap:
      case ErrorCode::kTooFewCorrespondences:
        exit_code = kExitRegistration;
        break;
      case ErrorCode::kDisconnectedGraph:
      case ErrorCode::kNotEnoughDsms:
        exit_code = kExitGraph;
        break;
      default:
        break;
    }
    json j = {{"error", std::string(error_code_name(code))}, {"message", message},
              {"exit_code", exit_code}};
    j.update(extra);
    std::cout << j.dump() << '\n';
    std::cerr << "dsmreg: " << message << '\n';
    return exit_code;
  }

  std::string out_path(const std::string& name) const {
    const fs::path p(name);
    return p.is_absolute() ? name : (fs::path(cfg_.out) / p).string();
  }

  void ensure_out_dir() const {
    std::error_code ec;
    fs::create_directories(cfg_.out, ec);
    if (ec) throw DsmError(ErrorCode::kIoError, fmt::format("cannot create {}: {}", cfg_.out, ec.message()));
  }

  std::string raster_name(const std::string& stem) const {
    if (fs::path(stem).has_extension()) return stem;
    return stem + (cfg_.format == "ascii" ? ".asc" : ".dsmg");
  }

  RasterFormat raster_format() const {
    return cfg_.format == "ascii" ? RasterFormat::kAsciiGrid : RasterFormat::kBinary;
  }

  IcpParams icp_params() const {
    IcpParams p = cfg_.icp;
    p.seed = cfg_.seed;
    p.threads = cfg_.threads;
    return p;
  }

  std::vector<DsmGrid> load_inputs(std::size_t min_count) const {
    if (cfg_.inputs.size() < min_count) {
      throw DsmError(ErrorCode::kInvalidArgument,
                     fmt::format("need at least {} input raster(s), got {}", min_count, cfg_.inputs.size()));
    }
    std::vector<DsmGrid> out;
    for (std::size_t k = 0; k < cfg_.inputs.size(); ++k)
      out.push_back(load_dsm(cfg_.inputs[k]).with_id(static_cast<int>(k)));
    return out;
  }

  std::vector<RigidTransform> load_poses(std::size_t count) const {
    if (poses_path_.empty()) return std::vector<RigidTransform>(count);
    const GlobalPoses poses = poses_from_json(read_json_file(poses_path_), poses_path_);
    if (poses.poses.size() != count) {
      throw DsmError(ErrorCode::kInvalidArgument,
                     fmt::format("{} holds {} poses for {} rasters", poses_path_, poses.poses.size(), count));
    }
    return poses.poses;
  }

  void write_json(const json& j, const std::string& name) const {
    ensure_out_dir();
    write_json_file(j, out_path(name));
  }

  int cmd_register() {
    const DsmGrid moving = load_dsm(moving_);
    const DsmGrid reference = load_dsm(reference_);
    try {
      const RegistrationReport report = dsm_icp(moving, reference, icp_params());
      json j = to_json(report);
      j["moving"] = moving_;
      j["reference"] = reference_;
      write_json(j, output_);
      spdlog::info("registered {} onto {}: err {:.6g} after {} iterations", moving_, reference_,
                   report.err, report.iterations);
      return kExitOk;
    } catch (const DsmError& e) {
      if (e.code() != ErrorCode::kNoOverlap && e.code() != ErrorCode::kTooFewCorrespondences) throw;
      write_json({{"error", std::string(error_code_name(e.code()))}, {"message", e.what()},
                  {"moving", moving_}, {"reference", reference_}},
                 output_);
      throw;
    }
  }

  SceneGraph build_scene_graph() const {
    const std::vector<DsmGrid> dsms = load_inputs(1);
    GraphOptions opt;
    opt.overlap_threshold = cfg_.overlap_threshold;
    opt.icp = icp_params();
    opt.threads = cfg_.threads;
    SceneGraph graph = assign_weights(build_graph(dsms, opt));
    for (std::size_t k = 0; k < dsms.size(); ++k) graph.vertices[k].path = cfg_.inputs[k];
    return graph;
  }

  int cmd_graph() {
    const SceneGraph graph = build_scene_graph();
    write_json(to_json(graph), output_);
    spdlog::info("graph: {} vertices, {} edges", graph.size(), graph.edges.size());
    return kExitOk;
  }

  int cmd_solve() {
    SceneGraph graph;
    if (!graph_path_.empty()) {
      graph = graph_from_json(read_json_file(graph_path_), graph_path_);
    } else {
      graph = build_scene_graph();
    }
    if (cfg_.anchor >= graph.size()) {
      throw DsmError(ErrorCode::kInvalidArgument,
                     fmt::format("anchor {} is not a vertex of the {}-vertex graph", cfg_.anchor, graph.size()));
    }
    const GlobalPoses poses =
        cfg_.solver == "greedy" ? greedy_mst_solve(graph, cfg_.anchor) : motion_average(graph, cfg_.anchor);
    json j = to_json(poses);
    j["solver"] = cfg_.solver;
    write_json(j, output_);
    spdlog::info("{} solve: objective {:.6g}", cfg_.solver, poses.objective);
    return kExitOk;
  }

  int cmd_fuse() {
    const std::vector<DsmGrid> dsms = load_inputs(1);
    const std::vector<RigidTransform> poses = load_poses(dsms.size());
    const FusedDsm fused = fuse(dsms, poses, cfg_.target_gsd);
    ensure_out_dir();
    const std::string path = out_path(raster_name(output_));
    const fs::path p(path);
    const std::string contributors =
        (p.parent_path() / (p.stem().string() + "_contributors" + p.extension().string())).string();
    write_dsm(fused.grid, path, raster_format());
    write_dsm(fused.contributors, contributors, raster_format());
    std::cout << json{{"fused", path}, {"contributors", contributors},
                      {"width", fused.grid.width()}, {"height", fused.grid.height()}}
                     .dump()
              << '\n';
    return kExitOk;
  }

  int cmd_eval() {
    const std::vector<DsmGrid> dsms = load_inputs(1);
    const MetricConfig metric{cfg_.tau};
    metric.validate();
    json j;
    if (!reference_.empty()) {
      if (dsms.size() != 1) {
        throw DsmError(ErrorCode::kInvalidArgument, "--reference takes exactly one raster to evaluate");
      }
      const DsmGrid reference = load_dsm(reference_);
      DsmGrid subject = dsms[0];
      if (!poses_path_.empty()) {
        const RigidTransform pose = load_poses(1)[0];
        subject = apply_pose(subject, pose, posed_lattice(subject, pose));
      }
      if (align_first_) {
        const RegistrationReport report = dsm_icp(subject, reference, icp_params());
        subject = apply_pose(subject, report.transform, posed_lattice(subject, report.transform));
        j["alignment"] = to_json(report);
      }
      const ErrorMap map = error_map(subject, reference, metric);
      j.update(to_json(map.summary));
      j["n_pairs_excluded"] = 0;
      if (!error_map_path_.empty()) {
        ensure_out_dir();
        write_dsm(map.map, out_path(raster_name(error_map_path_)), raster_format());
      }
    } else {
      if (dsms.size() < 2) throw DsmError(ErrorCode::kInvalidArgument, "pairwise evaluation needs >= 2 rasters");
      const std::vector<RigidTransform> poses = load_poses(dsms.size());
      const PairwiseSummary summary = mean_pairwise_rmse(dsms, poses, metric);
      double inlier_ratio = 0.0;
      json pairs = json::array();
      for (const PairRmse& p : summary.pairs) {
        inlier_ratio += p.result.inlier_ratio;
        json item = to_json(p.result);
        item["i"] = p.i;
        item["j"] = p.j;
        pairs.push_back(item);
      }
      j["rmse_tau"] = summary.mean_rmse;
      j["inlier_ratio"] = inlier_ratio / static_cast<double>(summary.pairs.size());
      j["n_pairs_excluded"] = summary.excluded.size();
      j["excluded"] = summary.excluded;
      j["pairs"] = pairs;
    }
    j["tau"] = cfg_.tau;
    write_json(j, output_);
    std::cout << json{{"rmse_tau", j["rmse_tau"]}, {"inlier_ratio", j["inlier_ratio"]},
                      {"n_pairs_excluded", j["n_pairs_excluded"]}}
                     .dump()
              << '\n';
    return kExitOk;
  }

  int cmd_synth() {
    mosaic_.seed = cfg_.seed;
    const MosaicScene scene = make_mosaic(mosaic_);
    ensure_out_dir();
    json tiles = json::array();
    for (std::size_t k = 0; k < scene.tiles.size(); ++k) {
      const std::string name = raster_name(fmt::format("tile_{:02d}", k));
      write_dsm(scene.tiles[k], out_path(name), raster_format());
      tiles.push_back(name);
    }
    write_dsm(scene.truth, out_path(raster_name("truth")), raster_format());
    GlobalPoses truth{0, scene.true_poses, 0.0};
    json poses = to_json(truth);
    json applied = json::array();
    for (const auto& a : scene.applied) applied.push_back(to_json(a));
    poses["applied"] = applied;
    poses["tiles"] = tiles;
    write_json(poses, "truth_poses.json");
    std::cout << json{{"tiles", tiles}, {"truth", raster_name("truth")}, {"poses", "truth_poses.json"}}.dump()
              << '\n';
    return kExitOk;
  }

  CLI::App app_;
  PipelineConfig cfg_;
  std::map<std::string, ConfigKey> keys_;
  std::function<int()> action_;
  MosaicSpec mosaic_;

  std::string config_path_;
  std::string moving_;
  std::string reference_;
  std::map<std::string, std::string> outputs_;
  std::string output_;
  std::string graph_path_;
  std::string poses_path_;
  std::string error_map_path_;
  bool align_first_ = false;
};

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  return cli.run(argc, argv);
}
