#include "fgrasp/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "fgrasp/error.hpp"
#include "fgrasp/eval.hpp"
#include "fgrasp/geometry.hpp"
#include "fgrasp/graspness.hpp"
#include "fgrasp/grouping.hpp"
#include "fgrasp/io.hpp"
#include "fgrasp/mra.hpp"
#include "fgrasp/normals.hpp"
#include "fgrasp/rng.hpp"
#include "fgrasp/semantic.hpp"
#include "fgrasp/simscene.hpp"
#include "fgrasp/types.hpp"

namespace fgrasp::cli {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config plumbing. Every tunable flag is also settable through --config, a
// JSON object whose keys are the long flag names without the leading dashes.
// Precedence: explicit flag > config value > built-in default. Unknown keys
// are rejected so typos cannot silently fall back to defaults.
// ---------------------------------------------------------------------------

struct ConfigBinding {
  CLI::Option* option = nullptr;
  std::function<void(const json&)> apply;
};

class ConfigTable {
 public:
  template <typename T>
  void bind(CLI::Option* option, std::string key, T& target) {
    entries_[key] = ConfigBinding{
        option, [&target, key](const json& value) {
          try {
            target = value.get<T>();
          } catch (const json::exception&) {
            throw ValidationError("config key '" + key + "' has the wrong type");
          }
        }};
  }

  void apply(const json& config) const {
    if (!config.is_object()) throw ValidationError("config must be a JSON object");
    for (const auto& [key, value] : config.items()) {
      auto it = entries_.find(key);
      if (it == entries_.end()) throw ValidationError("unknown config key '" + key + "'");
      if (it->second.option != nullptr && it->second.option->count() > 0) continue;
      it->second.apply(value);
    }
  }

 private:
  std::map<std::string, ConfigBinding> entries_;
};

std::string config_key(const std::string& flag) {
  // "--grid-views" -> "grid-views"
  std::size_t pos = flag.find_first_not_of('-');
  return pos == std::string::npos ? flag : flag.substr(pos);
}

struct CommonOpts {
  std::uint64_t seed = 0;
  int threads = 0;
  bool json_output = false;
  std::string config_path;
};

void add_common(CLI::App* cmd, ConfigTable& table, CommonOpts& common) {
  table.bind(cmd->add_option("--seed", common.seed, "random seed (default 0)"), "seed",
             common.seed);
  table.bind(cmd->add_option("--threads", common.threads, "worker threads, 0 = hardware"),
             "threads", common.threads);
  cmd->add_flag("--json", common.json_output, "machine-readable JSON on stdout");
  cmd->add_option("--config", common.config_path, "JSON file of tunables (flags win)");
}

template <typename T>
CLI::Option* bound(CLI::App* cmd, ConfigTable& table, const std::string& flag, T& target,
                   const std::string& desc) {
  CLI::Option* option = cmd->add_option(flag, target, desc)->capture_default_str();
  if constexpr (std::is_same_v<T, std::vector<double>>) option->delimiter(',');
  table.bind(option, config_key(flag), target);
  return option;
}

struct GripperOpts {
  double width = 0.10;
  double finger_length = 0.06;
  double finger_thickness = 0.01;
  double base_depth = 0.02;

  eval::GripperModel model() const { return {width, finger_length, finger_thickness, base_depth}; }
};

void add_gripper(CLI::App* cmd, ConfigTable& table, GripperOpts& g) {
  bound(cmd, table, "--gripper-width", g.width, "maximum jaw opening, meters");
  bound(cmd, table, "--finger-length", g.finger_length, "finger length, meters");
  bound(cmd, table, "--finger-thickness", g.finger_thickness, "finger thickness, meters");
  bound(cmd, table, "--base-depth", g.base_depth, "gripper base depth, meters");
}

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("read failed on " + path.string());
  try {
    return json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void apply_config(const CommonOpts& common, const ConfigTable& table) {
  if (common.config_path.empty()) return;
  table.apply(load_config_file(common.config_path));
}

void emit(const CommonOpts& common, const json& machine, const std::string& human) {
  if (common.json_output) {
    std::cout << machine.dump() << "\n";
  } else if (!human.empty()) {
    std::cout << human;
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed on " + path.string());
}

// Raw little-endian float32 dump for exported feature tensors.
void write_f32_file(const std::filesystem::path& path, const std::vector<double>& values) {
  std::vector<std::uint8_t> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    bytes[4 * i + 0] = static_cast<std::uint8_t>(u & 0xffu);
    bytes[4 * i + 1] = static_cast<std::uint8_t>((u >> 8) & 0xffu);
    bytes[4 * i + 2] = static_cast<std::uint8_t>((u >> 16) & 0xffu);
    bytes[4 * i + 3] = static_cast<std::uint8_t>((u >> 24) & 0xffu);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on " + path.string());
}

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json rotation_json(const Eigen::Matrix3d& r) {
  json a = json::array();
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) a.push_back(r(row, col));
  return a;
}

json viewpoints_json(const simscene::ViewpointSet& set) {
  json poses = json::array();
  for (const simscene::CameraPose& pose : set.poses) {
    poses.push_back({{"position", vec3_json(pose.position)},
                     {"rotation", rotation_json(pose.rotation)}});
  }
  return {{"count", set.poses.size()},
          {"radius", set.radius},
          {"min_pairwise_angle_deg", set.min_pairwise_angle_deg},
          {"poses", poses}};
}

// ---------------------------------------------------------------------------
// label
// ---------------------------------------------------------------------------

struct LabelState {
  CommonOpts common;
  ConfigTable table;
  GripperOpts gripper;
  std::string scene_path, out_path, grasps_out;
  double mu = 0.8;
  double clearance = 0.0;
  int grid_views = 60;
  int grid_angles = 12;
  std::vector<double> grid_depths{0.01, 0.02, 0.03, 0.04};
  std::size_t seeds = 64;
  double width_margin = 0.01;
};

int run_label(LabelState& s) {
  apply_config(s.common, s.table);
  if (s.out_path.empty() && s.grasps_out.empty())
    throw ValidationError("label needs --out and/or --grasps-out");

  Scene scene = io::read_scene(s.scene_path);
  graspness::CandidateGraspGrid grid =
      graspness::CandidateGraspGrid::standard(s.grid_views, s.grid_angles, s.grid_depths);
  const eval::GripperModel gripper = s.gripper.model();

  graspness::RawGraspnessOptions raw_opts;
  raw_opts.mu = s.mu;
  raw_opts.clearance = s.clearance;
  raw_opts.threads = s.common.threads;
  graspness::RawGraspnessResult raw = graspness::compute_raw_graspness(scene, grid, gripper,
                                                                       raw_opts);
  graspness::GraspnessField field = graspness::make_field(raw.raw, scene.object_ids);

  std::size_t nonzero = 0;
  double raw_max = 0.0;
  for (double v : field.raw) {
    if (v > 0.0) ++nonzero;
    raw_max = std::max(raw_max, v);
  }

  if (!s.out_path.empty()) {
    Scene labeled = scene;
    labeled.graspness = field.final;
    io::write_scene(labeled, s.out_path);
  }

  json report{{"points", scene.size()},
              {"nonzero_raw", nonzero},
              {"raw_max", raw_max}};
  std::ostringstream human;
  human << "labeled " << scene.size() << " points, " << nonzero << " graspable, raw max "
        << raw_max << "\n";

  if (!s.grasps_out.empty()) {
    graspness::ProposalOptions popt;
    popt.raw = raw_opts;
    popt.width_margin = s.width_margin;
    const std::size_t m = std::min(s.seeds, scene.size());
    std::vector<GraspPose> proposals =
        graspness::propose_grasps(scene, grid, gripper, field, raw, m, popt);
    io::write_grasps(proposals, s.grasps_out);
    report["seeds"] = m;
    report["grasps"] = proposals.size();
    human << "proposed " << proposals.size() << " grasps from " << m << " seeds -> "
          << s.grasps_out << "\n";
  }

  emit(s.common, report, human.str());
  return 0;
}

CLI::App* build_label(CLI::App& app, std::shared_ptr<LabelState> s) {
  CLI::App* cmd = app.add_subcommand("label", "graspness labels and grasp proposals");
  cmd->add_option("--scene", s->scene_path, "input scene (.fgpc)")->required();
  cmd->add_option("--out", s->out_path, "output scene with graspness channel");
  cmd->add_option("--grasps-out", s->grasps_out, "output grasp proposals (JSON)");
  bound(cmd, s->table, "--mu", s->mu, "labeling friction coefficient");
  bound(cmd, s->table, "--clearance", s->clearance, "collision clearance, meters");
  bound(cmd, s->table, "--grid-views", s->grid_views, "candidate approach directions");
  bound(cmd, s->table, "--grid-angles", s->grid_angles, "candidate in-plane rotations");
  bound(cmd, s->table, "--grid-depths", s->grid_depths, "candidate depths, meters");
  bound(cmd, s->table, "--seeds", s->seeds, "proposal seed count (clamped to scene size)");
  bound(cmd, s->table, "--width-margin", s->width_margin, "opening margin over contact span");
  add_gripper(cmd, s->table, s->gripper);
  add_common(cmd, s->table, s->common);
  return cmd;
}

// ---------------------------------------------------------------------------
// normals
// ---------------------------------------------------------------------------

struct NormalsState {
  CommonOpts common;
  ConfigTable table;
  std::string depth_path, meta_path, out_path, grasps_path;
  int stride = 1;
  double bin_width = 10.0;
};

int run_normals(NormalsState& s) {
  apply_config(s.common, s.table);
  DepthImage depth = io::read_depth(s.depth_path, s.meta_path);
  BackprojectResult bp = backproject(depth);
  normals::NormalField field = normals::estimate_normals(depth, bp, s.stride, s.common.threads);

  Scene scene;
  scene.points = bp.points;
  scene.normals = field.normals;
  io::write_scene(scene, s.out_path);

  std::size_t valid = 0;
  for (std::uint8_t v : field.valid) valid += v != 0;

  json report{{"points", scene.size()}, {"valid_normals", valid}};
  std::ostringstream human;
  human << scene.size() << " points, " << valid << " valid normals -> " << s.out_path << "\n";

  if (!s.grasps_path.empty()) {
    std::vector<GraspPose> grasps = io::read_grasps(s.grasps_path);
    normals::ViewNormalHistogram hist =
        normals::view_to_normal_statistics(scene, grasps, s.bin_width);
    json bins = json::array();
    for (std::size_t b = 0; b < hist.counts.size(); ++b) {
      bins.push_back({{"angle_lo_deg", s.bin_width * static_cast<double>(b)},
                      {"count", hist.counts[b]},
                      {"mean_score", hist.mean_score[b]}});
    }
    report["histogram"] = bins;
    report["top_percent_bins"] = hist.top_percent_bins;
    human << "view/normal histogram over " << grasps.size() << " grasps, top-1% bins:";
    for (std::size_t b : hist.top_percent_bins) human << " " << b;
    human << "\n";
  }

  emit(s.common, report, human.str());
  return 0;
}

CLI::App* build_normals(CLI::App& app, std::shared_ptr<NormalsState> s) {
  CLI::App* cmd = app.add_subcommand("normals", "depth map to oriented point cloud");
  cmd->add_option("--depth", s->depth_path, "input depth (.pgm)")->required();
  cmd->add_option("--meta", s->meta_path, "input intrinsics sidecar (.json)")->required();
  cmd->add_option("--out", s->out_path, "output scene (.fgpc)")->required();
  bound(cmd, s->table, "--stride", s->stride, "neighbor stride, pixels");
  cmd->add_option("--grasps", s->grasps_path, "optional grasps for view/normal statistics");
  bound(cmd, s->table, "--bin-width", s->bin_width, "histogram bin width, degrees");
  add_common(cmd, s->table, s->common);
  return cmd;
}

// ---------------------------------------------------------------------------
// group
// ---------------------------------------------------------------------------

struct GroupState {
  CommonOpts common;
  ConfigTable table;
  std::string scene_path, out_path, meta_out;
  std::size_t seeds = 64;
  std::vector<double> radii{0.01, 0.025, 0.05, 0.10};
  double h_min = -0.02;
  double h_max = 0.04;
  std::size_t cap = 64;
};

int run_group(GroupState& s) {
  apply_config(s.common, s.table);
  Scene scene = io::read_scene(s.scene_path);

  // Pointwise features for pooling: a constant occupancy channel plus the
  // unit normal when the scene carries one.
  const Eigen::Index n = static_cast<Eigen::Index>(scene.size());
  const Eigen::Index c_in = scene.has_normals() ? 4 : 1;
  scene.features.resize(n, c_in);
  for (Eigen::Index i = 0; i < n; ++i) {
    scene.features(i, 0) = 1.0;
    if (c_in == 4) {
      const Eigen::Vector3d& nrm = scene.normals[static_cast<std::size_t>(i)];
      scene.features(i, 1) = nrm.x();
      scene.features(i, 2) = nrm.y();
      scene.features(i, 3) = nrm.z();
    }
  }

  std::vector<double> final_graspness =
      scene.has_graspness() ? scene.graspness : std::vector<double>(scene.size(), 0.0);
  const std::size_t m = std::min(s.seeds, scene.size());
  SeedSet seeds = graspness::sample_seeds(final_graspness, scene, m);

  grouping::CylinderSpec spec;
  spec.radii = s.radii;
  spec.h_min = s.h_min;
  spec.h_max = s.h_max;
  spec.max_points = s.cap;
  grouping::GroupLists lists = grouping::cylinder_group(scene, seeds, spec, s.common.threads);
  grouping::MultiRangeFeatures feats =
      grouping::aggregate_features(scene, seeds, lists, spec, s.common.threads);

  write_f32_file(s.out_path, feats.values);
  json sidecar{{"groups", feats.groups},
               {"seeds", feats.seeds},
               {"channels", feats.channels},
               {"dtype", "float32"},
               {"layout", "(group * seeds + seed) * channels + channel"},
               {"counts", feats.counts},
               {"seed_indices", seeds.indices}};
  const std::filesystem::path meta_path =
      s.meta_out.empty() ? std::filesystem::path(s.out_path + ".json")
                         : std::filesystem::path(s.meta_out);
  write_text_file(meta_path, sidecar.dump(2) + "\n");

  std::ostringstream human;
  human << "pooled " << feats.groups << " x " << feats.seeds << " x " << feats.channels
        << " tensor -> " << s.out_path << "\n";
  emit(s.common, sidecar, human.str());
  return 0;
}

CLI::App* build_group(CLI::App& app, std::shared_ptr<GroupState> s) {
  CLI::App* cmd = app.add_subcommand("group", "multi-range cylinder grouping and pooling");
  cmd->add_option("--scene", s->scene_path, "input scene (.fgpc)")->required();
  cmd->add_option("--out", s->out_path, "output float32 tensor")->required();
  cmd->add_option("--meta-out", s->meta_out, "shape sidecar path (default <out>.json)");
  bound(cmd, s->table, "--seeds", s->seeds, "seed count (clamped to scene size)");
  bound(cmd, s->table, "--radii", s->radii, "cylinder radii, meters, ascending");
  bound(cmd, s->table, "--h-min", s->h_min, "axial lower bound, meters");
  bound(cmd, s->table, "--h-max", s->h_max, "axial upper bound, meters");
  bound(cmd, s->table, "--cap", s->cap, "max points per group");
  add_common(cmd, s->table, s->common);
  return cmd;
}

// ---------------------------------------------------------------------------
// mra-check
// ---------------------------------------------------------------------------

struct MraCheckState {
  CommonOpts common;
  ConfigTable table;
  int groups = 4;
  int seeds = 8;
  int channels = 16;
  int ff_dim = 32;
  int heads = 4;
  int trials = 20;
  double eps = 1e-5;
  double tol = 1e-5;
};

// Relative-error floor: below this magnitude the comparison is effectively
// absolute, matching the noise floor of central differences at eps = 1e-5
// in double precision.
constexpr double kFdFloor = 1e-3;

double rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), kFdFloor});
}

double loss_of(const grouping::MultiRangeFeatures& x, const mra::MraParams& params,
               const Eigen::MatrixXd& d_output, int threads) {
  return mra::mra_forward(x, params, threads).output.cwiseProduct(d_output).sum();
}

grouping::MultiRangeFeatures random_features(int groups, int seeds, int channels, Rng& rng) {
  grouping::MultiRangeFeatures x;
  x.groups = static_cast<std::size_t>(groups);
  x.seeds = static_cast<std::size_t>(seeds);
  x.channels = static_cast<std::size_t>(channels);
  x.values.resize(x.groups * x.seeds * x.channels);
  for (double& v : x.values) v = rng.uniform(-1.0, 1.0);
  x.counts.assign(x.groups * x.seeds, 1);
  return x;
}

int run_mra_check(MraCheckState& s) {
  apply_config(s.common, s.table);
  if (s.trials < 1) throw ValidationError("--trials must be at least 1");
  if (s.eps <= 0.0 || s.tol <= 0.0) throw ValidationError("--eps and --tol must be positive");

  Rng base(s.common.seed);
  double max_rel_params = 0.0, max_rel_inputs = 0.0, max_weight_err = 0.0;

  for (int trial = 0; trial < s.trials; ++trial) {
    Rng rng = base.fork(static_cast<std::uint64_t>(trial));
    mra::MraParams params = mra::init_params(s.channels, s.ff_dim, s.heads,
                                             s.common.seed + 1000 * static_cast<std::uint64_t>(trial) + 17);
    grouping::MultiRangeFeatures x = random_features(s.groups, s.seeds, s.channels, rng);
    Eigen::MatrixXd d_output(s.seeds, s.channels);
    for (Eigen::Index i = 0; i < d_output.size(); ++i)
      d_output.data()[i] = rng.uniform(-1.0, 1.0);

    mra::MraResult result = mra::mra_forward(x, params, s.common.threads);
    for (const Eigen::MatrixXd& w : result.weights)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        max_weight_err = std::max(max_weight_err, std::abs(w.col(c).sum() - 1.0));

    mra::MraGradients grads = mra::mra_backward(d_output, result.tape, s.common.threads);

    mra::MraParams probe = params;
    std::vector<double*> probe_ptrs = probe.scalar_pointers();
    std::vector<double*> grad_ptrs = grads.params.scalar_pointers();
    for (std::size_t i = 0; i < probe_ptrs.size(); ++i) {
      const double saved = *probe_ptrs[i];
      *probe_ptrs[i] = saved + s.eps;
      const double lp = loss_of(x, probe, d_output, s.common.threads);
      *probe_ptrs[i] = saved - s.eps;
      const double lm = loss_of(x, probe, d_output, s.common.threads);
      *probe_ptrs[i] = saved;
      max_rel_params = std::max(max_rel_params, rel_err(*grad_ptrs[i], (lp - lm) / (2 * s.eps)));
    }

    for (std::size_t i = 0; i < x.values.size(); ++i) {
      const double saved = x.values[i];
      x.values[i] = saved + s.eps;
      const double lp = loss_of(x, params, d_output, s.common.threads);
      x.values[i] = saved - s.eps;
      const double lm = loss_of(x, params, d_output, s.common.threads);
      x.values[i] = saved;
      max_rel_inputs = std::max(max_rel_inputs, rel_err(grads.x[i], (lp - lm) / (2 * s.eps)));
    }
  }

  // Single-range degeneration: with G = 1 the fusion weights are exactly 1,
  // so the fused output must equal the encoded sequence bit for bit.
  double g1_err = 0.0;
  {
    Rng rng = base.fork(0xf00d);
    mra::MraParams params = mra::init_params(s.channels, s.ff_dim, s.heads, s.common.seed + 5);
    grouping::MultiRangeFeatures x1 = random_features(1, s.seeds, s.channels, rng);
    mra::MraResult result = mra::mra_forward(x1, params, s.common.threads);
    for (int m = 0; m < s.seeds; ++m) {
      g1_err = std::max(
          g1_err, (result.output.row(m) - result.encoded[static_cast<std::size_t>(m)].row(0))
                      .cwiseAbs()
                      .maxCoeff());
    }
  }

  const bool pass = max_rel_params <= s.tol && max_rel_inputs <= s.tol &&
                    max_weight_err <= 1e-12 && g1_err == 0.0;

  json report{{"trials", s.trials},
              {"max_rel_err_params", max_rel_params},
              {"max_rel_err_inputs", max_rel_inputs},
              {"max_weight_sum_err", max_weight_err},
              {"single_range_identity_err", g1_err},
              {"tolerance", s.tol},
              {"pass", pass}};
  std::ostringstream human;
  human << "gradient check over " << s.trials << " trials: params " << max_rel_params
        << ", inputs " << max_rel_inputs << ", weight sums " << max_weight_err
        << ", single-range identity " << g1_err << (pass ? " [pass]" : " [FAIL]") << "\n";
  emit(s.common, report, human.str());
  return pass ? 0 : 1;
}

CLI::App* build_mra_check(CLI::App& app, std::shared_ptr<MraCheckState> s) {
  CLI::App* cmd = app.add_subcommand("mra-check", "attention kernel gradient verification");
  bound(cmd, s->table, "--groups", s->groups, "ranges G");
  bound(cmd, s->table, "--seeds", s->seeds, "seeds M");
  bound(cmd, s->table, "--channels", s->channels, "channels C");
  bound(cmd, s->table, "--ff-dim", s->ff_dim, "feed-forward width");
  bound(cmd, s->table, "--heads", s->heads, "attention heads");
  bound(cmd, s->table, "--trials", s->trials, "random trials");
  bound(cmd, s->table, "--eps", s->eps, "finite-difference step");
  bound(cmd, s->table, "--tol", s->tol, "max relative error accepted");
  add_common(cmd, s->table, s->common);
  return cmd;
}

// ---------------------------------------------------------------------------
// nms
// ---------------------------------------------------------------------------

struct NmsState {
  CommonOpts common;
  ConfigTable table;
  std::string grasps_path, out_path;
  double nms_t = 0.03;
  double nms_r = 30.0;
};

int run_nms(NmsState& s) {
  apply_config(s.common, s.table);
  std::vector<GraspPose> grasps = io::read_grasps(s.grasps_path);
  std::vector<GraspPose> kept = eval::grasp_nms(grasps, s.nms_t, s.nms_r);
  io::write_grasps(kept, s.out_path);
  json report{{"in", grasps.size()}, {"kept", kept.size()}};
  std::ostringstream human;
  human << "kept " << kept.size() << " of " << grasps.size() << " grasps -> " << s.out_path
        << "\n";
  emit(s.common, report, human.str());
  return 0;
}

CLI::App* build_nms(CLI::App& app, std::shared_ptr<NmsState> s) {
  CLI::App* cmd = app.add_subcommand("nms", "grasp non-maximum suppression");
  cmd->add_option("--grasps", s->grasps_path, "input grasps (JSON)")->required();
  cmd->add_option("--out", s->out_path, "output grasps (JSON)")->required();
  bound(cmd, s->table, "--nms-t", s->nms_t, "translation threshold, meters");
  bound(cmd, s->table, "--nms-r", s->nms_r, "rotation threshold, degrees");
  add_common(cmd, s->table, s->common);
  return cmd;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalState {
  CommonOpts common;
  ConfigTable table;
  GripperOpts gripper;
  std::string scene_path, grasps_path, out_path;
  int top_k = 50;
  double nms_t = 0.03;
  double nms_r = 30.0;
  bool no_nms = false;
  double clearance = 0.0;
  bool use_collision = true;
  std::vector<double> mus{eval::kFrictionSweep.begin(), eval::kFrictionSweep.end()};
};

int run_eval(EvalState& s) {
  apply_config(s.common, s.table);
  Scene scene = io::read_scene(s.scene_path);
  std::vector<GraspPose> grasps = io::read_grasps(s.grasps_path);
  const std::size_t before_nms = grasps.size();
  if (!s.no_nms) grasps = eval::grasp_nms(grasps, s.nms_t, s.nms_r);

  eval::EvalParams params;
  params.top_k = s.top_k;
  params.clearance = s.clearance;
  params.use_collision = s.use_collision;
  params.mus = s.mus;
  eval::EvalReport report = eval::evaluate_ap(grasps, scene, s.gripper.model(), params);

  json per_grasp = json::array();
  for (const eval::PerGraspResult& r : report.per_grasp) {
    json successes = json::array();
    for (bool ok : r.success_per_mu) successes.push_back(ok);
    per_grasp.push_back({{"score", r.grasp.score},
                         {"width", r.grasp.width},
                         {"scale", eval::scale_bin_name(eval::scale_bin(r.grasp.width))},
                         {"collision", r.collision},
                         {"success", successes}});
  }
  json out{{"ap", report.ap_overall},
           {"ap_small", report.ap_small},
           {"ap_medium", report.ap_medium},
           {"ap_large", report.ap_large},
           {"count_small", report.count_small},
           {"count_medium", report.count_medium},
           {"count_large", report.count_large},
           {"input", before_nms},
           {"evaluated", report.per_grasp.size()},
           {"top_k", s.top_k},
           {"mus", s.mus},
           {"per_grasp", per_grasp}};

  if (!s.out_path.empty()) write_text_file(s.out_path, out.dump(2) + "\n");

  std::ostringstream human;
  human << "AP " << report.ap_overall << " over " << report.per_grasp.size() << " grasps ("
        << before_nms << " before suppression)\n"
        << "  small  " << report.ap_small << " (" << report.count_small << ")\n"
        << "  medium " << report.ap_medium << " (" << report.count_medium << ")\n"
        << "  large  " << report.ap_large << " (" << report.count_large << ")\n";
  emit(s.common, out, human.str());
  return 0;
}

CLI::App* build_eval(CLI::App& app, std::shared_ptr<EvalState> s) {
  CLI::App* cmd = app.add_subcommand("eval", "grasp evaluation protocol");
  cmd->add_option("--scene", s->scene_path, "input scene (.fgpc)")->required();
  cmd->add_option("--grasps", s->grasps_path, "input grasps (JSON)")->required();
  cmd->add_option("--out", s->out_path, "write the JSON report here too");
  bound(cmd, s->table, "--top-k", s->top_k, "precision list length");
  bound(cmd, s->table, "--nms-t", s->nms_t, "suppression translation threshold, meters");
  bound(cmd, s->table, "--nms-r", s->nms_r, "suppression rotation threshold, degrees");
  cmd->add_flag("--no-nms", s->no_nms, "evaluate the list as given");
  bound(cmd, s->table, "--clearance", s->clearance, "collision clearance, meters");
  CLI::Option* coll = cmd->add_flag("--collision,!--no-collision", s->use_collision,
                                    "collision gate (default on)");
  s->table.bind(coll, "collision", s->use_collision);
  bound(cmd, s->table, "--mus", s->mus, "friction sweep, ascending");
  add_gripper(cmd, s->table, s->gripper);
  add_common(cmd, s->table, s->common);
  return cmd;
}

// ---------------------------------------------------------------------------
// simscene
// ---------------------------------------------------------------------------

struct SimsceneState {
  CommonOpts common;
  ConfigTable table;
  std::string out_dir, recipe_path;
  int count_min = 3;
  int count_max = 6;
  double extent = 0.4;
  double density = 30000.0;
  int max_retries = 50;
  int views = 256;
  int render = 4;
  double view_radius = 0.7;
  int width = 320;
  int height = 240;
  double fx = 280.0;
  double fy = 280.0;
  double cx = std::numeric_limits<double>::quiet_NaN();
  double cy = std::numeric_limits<double>::quiet_NaN();
  CLI::Option* opt_count_min = nullptr;
  CLI::Option* opt_count_max = nullptr;
  CLI::Option* opt_extent = nullptr;
  CLI::Option* opt_density = nullptr;
  CLI::Option* opt_retries = nullptr;
};

simscene::PrimitiveShape shape_from_json(const json& spec) {
  if (!spec.is_object()) throw ValidationError("recipe object entries must be JSON objects");
  simscene::PrimitiveShape shape;
  std::string kind;
  for (const auto& [key, value] : spec.items()) {
    try {
      if (key == "kind") {
        kind = value.get<std::string>();
      } else if (key == "half_extents") {
        auto v = value.get<std::vector<double>>();
        if (v.size() != 3) throw ValidationError("half_extents needs 3 values");
        shape.half_extents = Eigen::Vector3d(v[0], v[1], v[2]);
      } else if (key == "radius") {
        shape.radius = value.get<double>();
      } else if (key == "half_height") {
        shape.half_height = value.get<double>();
      } else {
        throw ValidationError("unknown recipe object key '" + key + "'");
      }
    } catch (const json::exception&) {
      throw ValidationError("recipe object key '" + key + "' has the wrong type");
    }
  }
  if (kind == "box") {
    shape.kind = simscene::PrimitiveShape::Kind::Box;
  } else if (kind == "cylinder") {
    shape.kind = simscene::PrimitiveShape::Kind::Cylinder;
  } else if (kind == "sphere") {
    shape.kind = simscene::PrimitiveShape::Kind::Sphere;
  } else {
    throw ValidationError("recipe object kind must be box, cylinder or sphere");
  }
  return shape;
}

std::vector<simscene::PrimitiveShape> default_object_set() {
  using simscene::PrimitiveShape;
  std::vector<PrimitiveShape> set(6);
  set[0].kind = PrimitiveShape::Kind::Box;
  set[0].half_extents = Eigen::Vector3d(0.015, 0.015, 0.015);
  set[1].kind = PrimitiveShape::Kind::Box;
  set[1].half_extents = Eigen::Vector3d(0.010, 0.020, 0.030);
  set[2].kind = PrimitiveShape::Kind::Cylinder;
  set[2].radius = 0.012;
  set[2].half_height = 0.040;
  set[3].kind = PrimitiveShape::Kind::Cylinder;
  set[3].radius = 0.020;
  set[3].half_height = 0.015;
  set[4].kind = PrimitiveShape::Kind::Sphere;
  set[4].radius = 0.018;
  set[5].kind = PrimitiveShape::Kind::Sphere;
  set[5].radius = 0.012;
  return set;
}

json shape_to_json(const simscene::PrimitiveShape& shape) {
  using Kind = simscene::PrimitiveShape::Kind;
  switch (shape.kind) {
    case Kind::Box:
      return {{"kind", "box"},
              {"half_extents", vec3_json(shape.half_extents)}};
    case Kind::Cylinder:
      return {{"kind", "cylinder"}, {"radius", shape.radius}, {"half_height", shape.half_height}};
    case Kind::Sphere:
    default:
      return {{"kind", "sphere"}, {"radius", shape.radius}};
  }
}

simscene::SceneRecipe resolve_recipe(const SimsceneState& s) {
  simscene::SceneRecipe recipe;
  recipe.object_set = default_object_set();
  recipe.count_min = s.count_min;
  recipe.count_max = s.count_max;
  recipe.workspace_extent = s.extent;
  recipe.surface_density = s.density;
  recipe.max_retries = s.max_retries;
  recipe.seed = s.common.seed;

  if (!s.recipe_path.empty()) {
    json doc = load_config_file(s.recipe_path);
    if (!doc.is_object()) throw ValidationError("recipe must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      try {
        if (key == "objects") {
          if (!value.is_array() || value.empty())
            throw ValidationError("recipe 'objects' must be a non-empty array");
          recipe.object_set.clear();
          for (const json& entry : value) recipe.object_set.push_back(shape_from_json(entry));
        } else if (key == "count_min") {
          if (s.opt_count_min->count() == 0) recipe.count_min = value.get<int>();
        } else if (key == "count_max") {
          if (s.opt_count_max->count() == 0) recipe.count_max = value.get<int>();
        } else if (key == "extent") {
          if (s.opt_extent->count() == 0) recipe.workspace_extent = value.get<double>();
        } else if (key == "density") {
          if (s.opt_density->count() == 0) recipe.surface_density = value.get<double>();
        } else if (key == "max_retries") {
          if (s.opt_retries->count() == 0) recipe.max_retries = value.get<int>();
        } else {
          throw ValidationError("unknown recipe key '" + key + "'");
        }
      } catch (const json::exception&) {
        throw ValidationError("recipe key '" + key + "' has the wrong type");
      }
    }
  }
  return recipe;
}

int run_simscene(SimsceneState& s) {
  apply_config(s.common, s.table);
  if (s.render > s.views) throw ValidationError("--render cannot exceed --views");
  simscene::SceneRecipe recipe = resolve_recipe(s);

  std::error_code ec;
  std::filesystem::create_directories(s.out_dir, ec);
  if (ec) throw IoError("cannot create directory " + s.out_dir + ": " + ec.message());
  const std::filesystem::path dir(s.out_dir);

  simscene::SimScene scene = simscene::generate_scene(recipe);
  io::write_scene(scene.cloud, dir / "scene.fgpc");

  json objects = json::array();
  for (const simscene::PlacedPrimitive& obj : scene.objects) {
    objects.push_back({{"object_id", obj.object_id},
                       {"shape", shape_to_json(obj.shape)},
                       {"position", vec3_json(obj.position)},
                       {"rotation", rotation_json(obj.rotation)}});
  }
  json recipe_doc{{"objects", json::array()},
                  {"count_min", recipe.count_min},
                  {"count_max", recipe.count_max},
                  {"extent", recipe.workspace_extent},
                  {"density", recipe.surface_density},
                  {"max_retries", recipe.max_retries},
                  {"seed", recipe.seed},
                  {"placed", objects}};
  for (const simscene::PrimitiveShape& shape : recipe.object_set)
    recipe_doc["objects"].push_back(shape_to_json(shape));
  write_text_file(dir / "recipe.json", recipe_doc.dump(2) + "\n");

  simscene::ViewpointSet views = simscene::sample_viewpoints(s.view_radius, s.views);
  write_text_file(dir / "viewpoints.json", viewpoints_json(views).dump(2) + "\n");

  Intrinsics k;
  k.fx = s.fx;
  k.fy = s.fy;
  k.cx = std::isnan(s.cx) ? (s.width - 1) / 2.0 : s.cx;
  k.cy = std::isnan(s.cy) ? (s.height - 1) / 2.0 : s.cy;
  for (int i = 0; i < s.render; ++i) {
    DepthImage depth = simscene::render_depth(scene, views.poses[static_cast<std::size_t>(i)], k,
                                              s.width, s.height, s.common.threads);
    char stem[32];
    std::snprintf(stem, sizeof stem, "depth_%03d", i);
    io::write_depth(depth, dir / (std::string(stem) + ".pgm"),
                    dir / (std::string(stem) + ".json"));
  }

  json report{{"out", s.out_dir},
              {"points", scene.cloud.size()},
              {"objects", scene.objects.size()},
              {"views", views.poses.size()},
              {"rendered", s.render},
              {"min_pairwise_angle_deg", views.min_pairwise_angle_deg}};
  std::ostringstream human;
  human << "scene with " << scene.objects.size() << " objects, " << scene.cloud.size()
        << " points, " << views.poses.size() << " viewpoints (" << s.render << " rendered) -> "
        << s.out_dir << "\n";
  emit(s.common, report, human.str());
  return 0;
}

CLI::App* build_simscene(CLI::App& app, std::shared_ptr<SimsceneState> s) {
  CLI::App* cmd = app.add_subcommand("simscene", "synthetic tabletop scene generation");
  cmd->add_option("--out", s->out_dir, "output directory")->required();
  cmd->add_option("--recipe", s->recipe_path, "JSON object catalog and counts");
  s->opt_count_min = bound(cmd, s->table, "--count-min", s->count_min, "min objects");
  s->opt_count_max = bound(cmd, s->table, "--count-max", s->count_max, "max objects");
  s->opt_extent = bound(cmd, s->table, "--extent", s->extent, "table side, meters");
  s->opt_density = bound(cmd, s->table, "--density", s->density, "surface points per m^2");
  s->opt_retries = bound(cmd, s->table, "--max-retries", s->max_retries, "placement retries");
  bound(cmd, s->table, "--views", s->views, "viewpoint count");
  bound(cmd, s->table, "--render", s->render, "depth images to render");
  bound(cmd, s->table, "--view-radius", s->view_radius, "camera sphere radius, meters");
  bound(cmd, s->table, "--width", s->width, "image width, pixels");
  bound(cmd, s->table, "--height", s->height, "image height, pixels");
  bound(cmd, s->table, "--fx", s->fx, "focal length x, pixels");
  bound(cmd, s->table, "--fy", s->fy, "focal length y, pixels");
  bound(cmd, s->table, "--cx", s->cx, "principal point x (default (width-1)/2)");
  bound(cmd, s->table, "--cy", s->cy, "principal point y (default (height-1)/2)");
  add_common(cmd, s->table, s->common);
  return cmd;
}

// ---------------------------------------------------------------------------
// views
// ---------------------------------------------------------------------------

struct ViewsState {
  CommonOpts common;
  ConfigTable table;
  std::string out_path;
  int count = 256;
  double radius = 1.0;
};

int run_views(ViewsState& s) {
  apply_config(s.common, s.table);
  simscene::ViewpointSet set = simscene::sample_viewpoints(s.radius, s.count);
  json manifest = viewpoints_json(set);
  if (s.out_path.empty()) {
    std::cout << manifest.dump(2) << "\n";
  } else {
    write_text_file(s.out_path, manifest.dump(2) + "\n");
    json report{{"count", set.poses.size()},
                {"radius", set.radius},
                {"min_pairwise_angle_deg", set.min_pairwise_angle_deg},
                {"out", s.out_path}};
    std::ostringstream human;
    human << set.poses.size() << " viewpoints, min pairwise angle "
          << set.min_pairwise_angle_deg << " deg -> " << s.out_path << "\n";
    emit(s.common, report, human.str());
  }
  return 0;
}

CLI::App* build_views(CLI::App& app, std::shared_ptr<ViewsState> s) {
  CLI::App* cmd = app.add_subcommand("views", "quarter-sphere camera viewpoints");
  cmd->add_option("--out", s->out_path, "manifest path (stdout when omitted)");
  bound(cmd, s->table, "--count", s->count, "viewpoint count");
  bound(cmd, s->table, "--radius", s->radius, "sphere radius, meters");
  add_common(cmd, s->table, s->common);
  return cmd;
}

// ---------------------------------------------------------------------------
// filter-mask
// ---------------------------------------------------------------------------

struct FilterMaskState {
  CommonOpts common;
  ConfigTable table;
  std::string grasps_path, mask_path, depth_path, meta_path, out_path;
  double tolerance = 0.02;
  std::vector<int> crop;  // u_min v_min u_max v_max
  std::size_t top = 0;    // 0 = keep all
};

int run_filter_mask(FilterMaskState& s) {
  apply_config(s.common, s.table);
  std::vector<GraspPose> grasps = io::read_grasps(s.grasps_path);
  Mask mask = io::read_mask(s.mask_path);
  DepthImage depth = io::read_depth(s.depth_path, s.meta_path);

  if (!s.crop.empty()) {
    if (s.crop.size() != 4)
      throw ValidationError("--crop needs exactly u_min,v_min,u_max,v_max");
    semantic::CropRegion region{s.crop[0], s.crop[1], s.crop[2], s.crop[3]};
    region.validate(depth.width, depth.height);
    mask = semantic::lift_mask(region, mask, depth.width, depth.height);
  }

  std::vector<GraspPose> kept = semantic::filter_by_mask(grasps, mask, depth, s.tolerance);
  if (s.top > 0) kept = semantic::select_best(kept, s.top);
  io::write_grasps(kept, s.out_path);

  json report{{"in", grasps.size()}, {"kept", kept.size()}};
  std::ostringstream human;
  human << "kept " << kept.size() << " of " << grasps.size() << " grasps -> " << s.out_path
        << "\n";
  emit(s.common, report, human.str());
  return 0;
}

CLI::App* build_filter_mask(CLI::App& app, std::shared_ptr<FilterMaskState> s) {
  CLI::App* cmd = app.add_subcommand("filter-mask", "keep grasps on a masked target");
  cmd->add_option("--grasps", s->grasps_path, "input grasps (JSON)")->required();
  cmd->add_option("--mask", s->mask_path, "mask image (.pgm), full or crop frame")->required();
  cmd->add_option("--depth", s->depth_path, "depth image (.pgm)")->required();
  cmd->add_option("--meta", s->meta_path, "intrinsics sidecar (.json)")->required();
  cmd->add_option("--out", s->out_path, "output grasps (JSON)")->required();
  bound(cmd, s->table, "--tolerance", s->tolerance, "depth agreement tolerance, meters");
  CLI::Option* crop = cmd->add_option("--crop", s->crop,
                                      "mask crop region u_min,v_min,u_max,v_max");
  crop->delimiter(',');
  s->table.bind(crop, "crop", s->crop);
  bound(cmd, s->table, "--top", s->top, "keep only the best N after filtering (0 = all)");
  add_common(cmd, s->table, s->common);
  return cmd;
}

// ---------------------------------------------------------------------------
// noise
// ---------------------------------------------------------------------------

struct NoiseState {
  CommonOpts common;
  ConfigTable table;
  std::string depth_path, meta_path, out_path, out_meta;
  double sigma_pixel = 0.001;
  double sigma_shift = 0.005;
};

int run_noise(NoiseState& s) {
  apply_config(s.common, s.table);
  DepthImage depth = io::read_depth(s.depth_path, s.meta_path);
  DepthImage noisy = simscene::apply_depth_noise(depth, s.sigma_pixel, s.sigma_shift,
                                                 s.common.seed);
  const std::filesystem::path meta_out =
      s.out_meta.empty() ? std::filesystem::path(s.out_path).replace_extension(".json")
                         : std::filesystem::path(s.out_meta);
  io::write_depth(noisy, s.out_path, meta_out);

  std::size_t valid = 0;
  for (double d : noisy.depth) valid += d > 0.0;
  json report{{"width", noisy.width},
              {"height", noisy.height},
              {"valid", valid},
              {"sigma_pixel", s.sigma_pixel},
              {"sigma_shift", s.sigma_shift}};
  std::ostringstream human;
  human << "noised " << noisy.width << "x" << noisy.height << " depth -> " << s.out_path << "\n";
  emit(s.common, report, human.str());
  return 0;
}

CLI::App* build_noise(CLI::App& app, std::shared_ptr<NoiseState> s) {
  CLI::App* cmd = app.add_subcommand("noise", "sensor noise on a depth image");
  cmd->add_option("--depth", s->depth_path, "input depth (.pgm)")->required();
  cmd->add_option("--meta", s->meta_path, "input intrinsics sidecar (.json)")->required();
  cmd->add_option("--out", s->out_path, "output depth (.pgm)")->required();
  cmd->add_option("--out-meta", s->out_meta, "output sidecar (default <out>.json)");
  bound(cmd, s->table, "--sigma-pixel", s->sigma_pixel, "per-pixel noise std, meters");
  bound(cmd, s->table, "--sigma-shift", s->sigma_shift, "global shift std, meters");
  add_common(cmd, s->table, s->common);
  return cmd;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"fine-grained grasp generation pipeline"};
  app.require_subcommand(1);

  auto label = std::make_shared<LabelState>();
  auto normals_state = std::make_shared<NormalsState>();
  auto group = std::make_shared<GroupState>();
  auto mra_check = std::make_shared<MraCheckState>();
  auto nms = std::make_shared<NmsState>();
  auto eval_state = std::make_shared<EvalState>();
  auto sim = std::make_shared<SimsceneState>();
  auto views = std::make_shared<ViewsState>();
  auto filter = std::make_shared<FilterMaskState>();
  auto noise = std::make_shared<NoiseState>();

  std::map<const CLI::App*, std::function<int()>> actions;
  actions[build_label(app, label)] = [label] { return run_label(*label); };
  actions[build_normals(app, normals_state)] = [normals_state] {
    return run_normals(*normals_state);
  };
  actions[build_group(app, group)] = [group] { return run_group(*group); };
  actions[build_mra_check(app, mra_check)] = [mra_check] { return run_mra_check(*mra_check); };
  actions[build_nms(app, nms)] = [nms] { return run_nms(*nms); };
  actions[build_eval(app, eval_state)] = [eval_state] { return run_eval(*eval_state); };
  actions[build_simscene(app, sim)] = [sim] { return run_simscene(*sim); };
  actions[build_views(app, views)] = [views] { return run_views(*views); };
  actions[build_filter_mask(app, filter)] = [filter] { return run_filter_mask(*filter); };
  actions[build_noise(app, noise)] = [noise] { return run_noise(*noise); };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n(run with --help for usage)\n";
    return 1;
  }

  try {
    for (const auto& [sub, action] : actions)
      if (sub->parsed()) return action();
    std::cerr << "error: no subcommand given\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace fgrasp::cli
