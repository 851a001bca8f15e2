#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "fgrasp/error.hpp"
#include "fgrasp/eval.hpp"
#include "fgrasp/graspness.hpp"
#include "fgrasp/rng.hpp"
#include "helpers.hpp"

using namespace fgrasp;
using graspness::CandidateGraspGrid;

namespace {

// Candidate-by-candidate oracle built purely from the public grasp tests:
// a candidate counts iff it closes at `mu` and its body touches nothing.
graspness::RawGraspnessResult oracle_raw(const Scene& scene, const CandidateGraspGrid& grid,
                                         const eval::GripperModel& gripper, double mu,
                                         double clearance) {
  graspness::RawGraspnessResult r;
  r.raw.assign(scene.size(), 0.0);
  r.best_view.assign(scene.size(), -1);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (scene.object_ids[i] == 0) continue;
    std::size_t successes = 0, best_count = 0;
    std::int32_t best = -1;
    for (std::size_t v = 0; v < grid.views.size(); ++v) {
      std::size_t view_count = 0;
      for (const double angle : grid.angles)
        for (const double depth : grid.depths) {
          const GraspPose g = graspness::make_candidate(scene.points[i], grid.views[v], angle,
                                                        depth, gripper.max_width);
          if (!eval::collision_check(g, scene, gripper, clearance) &&
              eval::force_closure(g, scene, gripper, mu))
            ++view_count;
        }
      successes += view_count;
      if (view_count > best_count) {
        best_count = view_count;
        best = static_cast<std::int32_t>(v);
      }
    }
    r.raw[i] = static_cast<double>(successes) / static_cast<double>(grid.candidate_count());
    r.best_view[i] = best;
  }
  return r;
}

Scene random_blob(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Scene scene;
  for (std::size_t i = 0; i < n; ++i) {
    scene.points.push_back(Eigen::Vector3d(0.0, 0.0, 0.1) + 0.05 * testutil::random_unit(rng) *
                                                                rng.uniform());
    scene.normals.push_back(testutil::random_unit(rng));
    scene.object_ids.push_back(static_cast<std::uint32_t>(i % 3));  // ids 0..2, 0 = background
  }
  return scene;
}

}  // namespace

TEST_SUITE("graspness") {

TEST_CASE("candidate grid construction and validation") {
  const auto grid = CandidateGraspGrid::standard();
  CHECK(grid.views.size() == 60);
  CHECK(grid.angles.size() == 12);
  CHECK(grid.depths.size() == 4);
  CHECK(grid.candidate_count() == 60 * 12 * 4);
  CHECK(grid.angles.front() == 0.0);
  // Half-turn symmetry of a parallel jaw: angles cover [0, pi).
  CHECK(grid.angles.back() == doctest::Approx(std::numbers::pi * 11.0 / 12.0).epsilon(1e-15));
  for (const auto& v : grid.views) CHECK(std::abs(v.norm() - 1.0) <= 1e-12);

  CandidateGraspGrid bad = grid;
  bad.views.clear();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = grid;
  bad.views[0] *= 2.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = grid;
  bad.depths.push_back(-0.01);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = grid;
  bad.angles.push_back(std::nan(""));
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("candidate poses approach along the view with rotated closing axes") {
  Rng rng(3);
  for (int i = 0; i < 30; ++i) {
    const Eigen::Vector3d view = testutil::random_unit(rng);
    const Eigen::Vector3d point = 0.1 * testutil::random_unit(rng);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const GraspPose base = graspness::make_candidate(point, view, 0.0, 0.02, 0.08);
    const GraspPose turned = graspness::make_candidate(point, view, angle, 0.02, 0.08);
    CHECK((base.center - point).norm() == 0.0);
    CHECK((base.approach_axis() - view).norm() <= 1e-12);
    CHECK((turned.approach_axis() - view).norm() <= 1e-12);
    CHECK((turned.rotation.transpose() * turned.rotation - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    CHECK(turned.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    // Rotating about the approach axis mixes closing and finger axes.
    const Eigen::Vector3d expect =
        std::cos(angle) * base.closing_axis() + std::sin(angle) * base.finger_axis();
    CHECK((turned.closing_axis() - expect).norm() <= 1e-12);
    CHECK(turned.width == 0.08);
    CHECK(turned.depth == 0.02);
  }
}

TEST_CASE("an isolated point earns zero raw graspness") {
  Scene scene;
  scene.points.emplace_back(0.0, 0.0, 0.1);
  scene.normals.emplace_back(0.0, 0.0, 1.0);
  scene.object_ids.push_back(1);
  const auto grid = CandidateGraspGrid::standard(12, 4, {0.01, 0.02});
  const auto result = graspness::compute_raw_graspness(scene, grid, eval::GripperModel{});
  REQUIRE(result.raw.size() == 1);
  CHECK(result.raw[0] == 0.0);
  CHECK(result.best_view[0] == -1);
}

TEST_CASE("background points stay at zero") {
  Scene scene = testutil::plate_scene(0.03, 0.03, 4, /*object_id=*/0);
  const auto grid = CandidateGraspGrid::standard(12, 4, {0.01, 0.02});
  const auto result = graspness::compute_raw_graspness(scene, grid, eval::GripperModel{});
  for (std::size_t i = 0; i < scene.size(); ++i) {
    CHECK(result.raw[i] == 0.0);
    CHECK(result.best_view[i] == -1);
  }
}

TEST_CASE("plate-scene raw graspness matches the candidate-by-candidate oracle") {
  const Scene scene = testutil::plate_scene(0.03, 0.03, 4);
  eval::GripperModel gripper;
  gripper.max_width = 0.08;
  const auto grid = CandidateGraspGrid::standard(20, 6, {0.01, 0.02});

  const auto fast = graspness::compute_raw_graspness(scene, grid, gripper);
  const auto want = oracle_raw(scene, grid, gripper, 0.8, 0.0);
  REQUIRE(fast.raw.size() == scene.size());
  double max_raw = 0.0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    CHECK(fast.raw[i] == want.raw[i]);
    CHECK(fast.best_view[i] == want.best_view[i]);
    max_raw = std::max(max_raw, fast.raw[i]);
  }
  CHECK(max_raw > 0.0);  // a 3 cm slab fits an 8 cm jaw: some candidates close
}

TEST_CASE("random-cloud raw graspness matches the oracle, with and without clearance") {
  const Scene scene = random_blob(120, 77);
  const auto grid = CandidateGraspGrid::standard(8, 3, {0.015, 0.03});
  for (const double clearance : {0.0, 0.002}) {
    graspness::RawGraspnessOptions opts;
    opts.clearance = clearance;
    const auto fast = graspness::compute_raw_graspness(scene, grid, eval::GripperModel{}, opts);
    const auto want = oracle_raw(scene, grid, eval::GripperModel{}, opts.mu, clearance);
    for (std::size_t i = 0; i < scene.size(); ++i) {
      CHECK(fast.raw[i] == want.raw[i]);
      CHECK(fast.best_view[i] == want.best_view[i]);
    }
  }
}

TEST_CASE("raw graspness is independent of the thread count") {
  const Scene scene = testutil::plate_scene(0.03, 0.03, 4);
  const auto grid = CandidateGraspGrid::standard(12, 4, {0.01, 0.02});
  graspness::RawGraspnessOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = graspness::compute_raw_graspness(scene, grid, eval::GripperModel{}, one);
  const auto b = graspness::compute_raw_graspness(scene, grid, eval::GripperModel{}, four);
  CHECK(a.raw == b.raw);
  CHECK(a.best_view == b.best_view);
}

TEST_CASE("raw graspness validates its inputs") {
  Scene scene = testutil::plate_scene(0.03, 0.03, 4);
  const auto grid = CandidateGraspGrid::standard(6, 2, {0.02});
  Scene no_normals = scene;
  no_normals.normals.clear();
  CHECK_THROWS_AS(graspness::compute_raw_graspness(no_normals, grid, eval::GripperModel{}),
                  ValidationError);
  Scene no_ids = scene;
  no_ids.object_ids.clear();
  CHECK_THROWS_AS(graspness::compute_raw_graspness(no_ids, grid, eval::GripperModel{}),
                  ValidationError);
  Scene short_ids = scene;
  short_ids.object_ids.pop_back();
  CHECK_THROWS_AS(graspness::compute_raw_graspness(short_ids, grid, eval::GripperModel{}),
                  ValidationError);
}

TEST_CASE("instance normalization rescales each object to [0, 1]") {
  {
    const std::vector<double> raw{0.2, 0.4};
    const std::vector<std::uint32_t> ids{1, 1};
    const auto out = graspness::normalize_instance(raw, ids);
    CHECK(out == std::vector<double>{0.0, 1.0});
  }
  {
    // Object B is ten times hotter than A; both still span the full range.
    const std::vector<double> raw{1.0, 2.0, 3.0, 10.0, 30.0};
    const std::vector<std::uint32_t> ids{1, 1, 1, 2, 2};
    const auto out = graspness::normalize_instance(raw, ids);
    CHECK(out == std::vector<double>{0.0, 0.5, 1.0, 0.0, 1.0});
  }
  {
    // Degenerate objects: all-equal nonzero keeps "graspable", zero stays 0.
    const std::vector<double> raw{0.7, 0.7, 0.0, 0.0};
    const std::vector<std::uint32_t> ids{1, 1, 2, 2};
    const auto out = graspness::normalize_instance(raw, ids);
    CHECK(out == std::vector<double>{1.0, 1.0, 0.0, 0.0});
  }
  {
    // Background is pinned to zero no matter its raw value.
    const std::vector<double> raw{0.9, 0.2, 0.4};
    const std::vector<std::uint32_t> ids{0, 1, 1};
    const auto out = graspness::normalize_instance(raw, ids);
    CHECK(out == std::vector<double>{0.0, 0.0, 1.0});
  }
  CHECK_THROWS_AS(graspness::normalize_instance(std::vector<double>{1.0},
                                                std::vector<std::uint32_t>{1, 2}),
                  ValidationError);
}

TEST_CASE("scene normalization rescales the whole field") {
  CHECK(graspness::normalize_scene(std::vector<double>{0.0, 0.5, 1.0}) ==
        std::vector<double>{0.0, 0.5, 1.0});
  CHECK(graspness::normalize_scene(std::vector<double>{0.2, 0.6}) ==
        std::vector<double>{0.0, 1.0});
  CHECK(graspness::normalize_scene(std::vector<double>{0.3, 0.3, 0.3}) ==
        std::vector<double>{0.0, 0.0, 0.0});
  CHECK(graspness::normalize_scene(std::vector<double>{}).empty());
}

TEST_CASE("the scene stage is the identity once objects span the unit range") {
  const std::vector<double> raw{0.1, 0.9, 0.4, 3.0, 12.0};
  const std::vector<std::uint32_t> ids{1, 1, 1, 2, 2};
  const auto field = graspness::make_field(raw, ids);
  CHECK(field.instance_norm == field.final);
  CHECK(field.raw == raw);
  CHECK(field.object_ids == ids);
}

TEST_CASE("normalization is invariant to positive affine rescaling") {
  Rng rng(15);
  std::vector<double> raw(200);
  std::vector<std::uint32_t> ids(200);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = rng.uniform(0.0, 1.0);
    ids[i] = static_cast<std::uint32_t>(1 + rng.uniform_index(4));
  }
  std::vector<double> scaled(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) scaled[i] = 3.7 * raw[i] + 0.2;

  const auto a = graspness::make_field(raw, ids);
  const auto b = graspness::make_field(scaled, ids);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(std::abs(a.instance_norm[i] - b.instance_norm[i]) <= 1e-12);
    CHECK(std::abs(a.final[i] - b.final[i]) <= 1e-12);
  }
}

TEST_CASE("normalization preserves order and attains exact endpoints") {
  Rng rng(21);
  std::vector<double> raw(100);
  for (double& v : raw) v = rng.uniform(0.0, 1.0);
  const std::vector<std::uint32_t> ids(raw.size(), 1);
  const auto out = graspness::normalize_instance(raw, ids);
  bool saw_zero = false, saw_one = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    saw_zero |= out[i] == 0.0;
    saw_one |= out[i] == 1.0;
    for (std::size_t j = i + 1; j < raw.size(); ++j) {
      if (raw[i] < raw[j]) CHECK(out[i] < out[j]);
      if (raw[i] == raw[j]) CHECK(out[i] == out[j]);
    }
  }
  CHECK(saw_zero);
  CHECK(saw_one);
}

TEST_CASE("instance normalization protects small objects from hot neighbors") {
  // Object 2 peaks ten times higher than object 1 in raw scores.
  Scene scene;
  std::vector<double> raw;
  std::vector<std::uint32_t> ids;
  for (int i = 0; i < 5; ++i) {
    scene.points.emplace_back(0.01 * i, 0.0, 0.1);
    scene.normals.emplace_back(0.0, 0.0, 1.0);
    raw.push_back(0.01 + 0.01 * i);  // object 1 peaks at 0.05
    ids.push_back(1);
  }
  for (int i = 0; i < 5; ++i) {
    scene.points.emplace_back(0.01 * i, 0.1, 0.1);
    scene.normals.emplace_back(0.0, 0.0, 1.0);
    raw.push_back(0.1 + 0.1 * i);  // object 2 peaks at 0.5
    ids.push_back(2);
  }
  scene.object_ids = ids;

  const auto field = graspness::make_field(raw, ids);
  CHECK(field.final[4] == 1.0);  // both object maxima normalize to exactly 1
  CHECK(field.final[9] == 1.0);
  const auto seeds = graspness::sample_seeds(field.final, scene, 2);
  REQUIRE(seeds.size() == 2);
  CHECK(ids[seeds.indices[0]] != ids[seeds.indices[1]]);  // one seed per object
}

TEST_CASE("seed sampling takes the top-M with ascending-index ties") {
  Scene scene;
  for (int i = 0; i < 3; ++i) {
    scene.points.emplace_back(0.01 * i, 0.0, 0.1);
    scene.normals.emplace_back(0.0, 0.0, 1.0);
  }
  const std::vector<double> g{0.9, 0.1, 0.9};
  const auto two = graspness::sample_seeds(g, scene, 2);
  CHECK(two.indices == std::vector<std::uint32_t>{0, 2});

  const auto all = graspness::sample_seeds(g, scene, 3);
  CHECK(all.indices == std::vector<std::uint32_t>{0, 2, 1});

  CHECK_THROWS_AS(graspness::sample_seeds(g, scene, 4), ValidationError);
  CHECK_THROWS_AS(graspness::sample_seeds(std::vector<double>{0.1}, scene, 1), ValidationError);
}

TEST_CASE("seed sampling matches a sort-based oracle on random fields") {
  Rng rng(33);
  Scene scene;
  std::vector<double> g(300);
  for (std::size_t i = 0; i < g.size(); ++i) {
    scene.points.push_back(0.1 * testutil::random_unit(rng));
    scene.normals.push_back(testutil::random_unit(rng));
    g[i] = rng.uniform(0.0, 1.0);
  }
  const std::size_t m = 64;
  const auto seeds = graspness::sample_seeds(g, scene, m);

  std::vector<std::uint32_t> order(g.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return g[a] != g[b] ? g[a] > g[b] : a < b;
  });
  order.resize(m);
  CHECK(seeds.indices == order);
}

TEST_CASE("seed views use bookkeeping when present and inward normals otherwise") {
  Scene scene;
  scene.points.emplace_back(0.0, 0.0, 0.1);
  scene.points.emplace_back(0.01, 0.0, 0.1);
  scene.normals.emplace_back(0.0, 0.0, 1.0);
  scene.normals.emplace_back(0.0, 2.0, 0.0);  // non-unit: must be normalized
  const std::vector<double> g{1.0, 0.5};
  const auto grid = CandidateGraspGrid::standard(8, 2, {0.02});

  const std::vector<std::int32_t> best_view{5, -1};
  const auto with = graspness::sample_seeds(g, scene, 2, &grid, best_view);
  CHECK((with.views[0] - grid.views[5]).norm() == 0.0);
  CHECK((with.views[1] - Eigen::Vector3d(0.0, -1.0, 0.0)).norm() <= 1e-15);

  const auto without = graspness::sample_seeds(g, scene, 2);
  CHECK((without.views[0] - Eigen::Vector3d(0.0, 0.0, -1.0)).norm() <= 1e-15);

  Scene bare = scene;
  bare.normals.clear();
  CHECK_THROWS_AS(graspness::sample_seeds(g, bare, 2), ValidationError);
}

TEST_CASE("labeled proposals are centered, tightened and re-verified") {
  const Scene scene = testutil::plate_scene(0.03, 0.03, 5);
  const eval::GripperModel gripper;
  const auto grid = CandidateGraspGrid::standard(16, 6, {0.01, 0.02});
  const graspness::ProposalOptions opts;
  const auto grasps = graspness::label_scene_grasps(scene, grid, gripper, opts);
  REQUIRE(!grasps.empty());

  for (const auto& g : grasps) {
    // Score encodes the minimal sweep friction that closes the final pose.
    const double mu_min = 1.1 - g.score;
    const auto it = std::find_if(opts.mu_sweep.begin(), opts.mu_sweep.end(),
                                 [&](double mu) { return std::abs(mu - mu_min) < 1e-12; });
    REQUIRE(it != opts.mu_sweep.end());
    CHECK(eval::force_closure(g, scene, gripper, mu_min));
    if (it != opts.mu_sweep.begin())
      CHECK_FALSE(eval::force_closure(g, scene, gripper, *(it - 1)));  // minimality
    CHECK_FALSE(eval::collision_check(g, scene, gripper, 0.0));
    CHECK(g.width <= gripper.max_width);
    CHECK(g.object_id == 1u);

    const auto geo = eval::evaluate_grasp_geometry(g, scene, gripper, 0.0);
    REQUIRE(geo.has_contacts);
    CHECK(std::abs(geo.y_plus + geo.y_minus) <= 1e-9);  // contacts straddle the center
    CHECK(std::abs(g.width - (geo.y_plus - geo.y_minus) - opts.width_margin) <= 1e-9);
  }
}

TEST_CASE("labeling a filter equals concatenating per-point labels") {
  const Scene scene = testutil::plate_scene(0.03, 0.03, 4);
  const auto grid = CandidateGraspGrid::standard(10, 4, {0.01, 0.02});
  const eval::GripperModel gripper;

  const auto same = [](const GraspPose& a, const GraspPose& b) {
    return (a.center - b.center).norm() == 0.0 && (a.rotation - b.rotation).norm() == 0.0 &&
           a.width == b.width && a.depth == b.depth && a.score == b.score &&
           a.object_id == b.object_id;
  };

  const std::vector<std::uint32_t> filter{3, 7};
  const auto joint = graspness::label_scene_grasps(scene, grid, gripper, {}, filter);
  auto expected = graspness::label_scene_grasps(scene, grid, gripper, {},
                                                std::vector<std::uint32_t>{3});
  const auto second = graspness::label_scene_grasps(scene, grid, gripper, {},
                                                    std::vector<std::uint32_t>{7});
  expected.insert(expected.end(), second.begin(), second.end());
  REQUIRE(joint.size() == expected.size());
  for (std::size_t i = 0; i < joint.size(); ++i) CHECK(same(joint[i], expected[i]));

  CHECK_THROWS_AS(graspness::label_scene_grasps(scene, grid, gripper, {},
                                                std::vector<std::uint32_t>{999}),
                  ValidationError);
}

TEST_CASE("proposal selection keeps the best view per seed") {
  const Scene scene = testutil::plate_scene(0.03, 0.03, 4);
  const auto grid = CandidateGraspGrid::standard(12, 4, {0.01, 0.02});
  const eval::GripperModel gripper;

  const auto raw = graspness::compute_raw_graspness(scene, grid, gripper);
  const auto field = graspness::make_field(raw.raw, scene.object_ids);
  const std::size_t m = 6;
  const auto proposals = graspness::propose_grasps(scene, grid, gripper, field, raw, m);
  CHECK(proposals.size() <= m);
  REQUIRE(!proposals.empty());

  // Reconstruct the expected winner for each seed from per-point labels.
  const auto seeds = graspness::sample_seeds(field.final, scene, m, &grid, raw.best_view);
  std::vector<GraspPose> expected;
  for (const std::uint32_t idx : seeds.indices) {
    const auto local = graspness::label_scene_grasps(scene, grid, gripper, {},
                                                     std::vector<std::uint32_t>{idx});
    if (local.empty()) continue;
    const GraspPose* best = &local.front();
    for (const auto& g : local)
      if (g.score > best->score) best = &g;
    expected.push_back(*best);
  }
  REQUIRE(proposals.size() == expected.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    CHECK((proposals[i].center - expected[i].center).norm() == 0.0);
    CHECK((proposals[i].rotation - expected[i].rotation).norm() == 0.0);
    CHECK(proposals[i].score == expected[i].score);
    CHECK(proposals[i].width == expected[i].width);
  }

  // Bitwise repeatability of the whole proposal path.
  const auto again = graspness::propose_grasps(scene, grid, gripper, field, raw, m);
  REQUIRE(again.size() == proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    CHECK((again[i].center - proposals[i].center).norm() == 0.0);
    CHECK(again[i].score == proposals[i].score);
  }
}

TEST_CASE("proposal options are validated") {
  const Scene scene = testutil::plate_scene(0.03, 0.03, 4);
  const auto grid = CandidateGraspGrid::standard(6, 2, {0.02});
  graspness::ProposalOptions opts;
  opts.mu_sweep.clear();
  CHECK_THROWS_AS(graspness::label_scene_grasps(scene, grid, eval::GripperModel{}, opts),
                  ValidationError);
  opts.mu_sweep = {0.4, 0.4};
  CHECK_THROWS_AS(graspness::label_scene_grasps(scene, grid, eval::GripperModel{}, opts),
                  ValidationError);
  opts.mu_sweep = {-0.1, 0.4};
  CHECK_THROWS_AS(graspness::label_scene_grasps(scene, grid, eval::GripperModel{}, opts),
                  ValidationError);
  opts = {};
  opts.width_margin = -0.01;
  CHECK_THROWS_AS(graspness::label_scene_grasps(scene, grid, eval::GripperModel{}, opts),
                  ValidationError);
}

}  // TEST_SUITE
