#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splatsdf/scene/dataset.hpp"

namespace splatsdf::scene {

struct Texture {
  enum class Pattern { kSolid, kChecker, kStripes, kRings, kNoise };
  Pattern pattern = Pattern::kSolid;
  Vec3<float> color_a{0.8f, 0.8f, 0.8f};
  Vec3<float> color_b{0.2f, 0.2f, 0.2f};
  float scale = 4.f;  // features per scene unit

  Vec3<float> albedo(float u, float v) const;
};

struct SphereSpec {
  Vec3<float> center;
  float radius = 0.5f;
  Texture tex;
};

struct BoxSpec {
  Vec3<float> lo, hi;
  Texture tex;
};

// Flat textured rectangle on a room wall. `wall` indexes -x,+x,-y,+y,-z,+z.
// lo/hi are in the wall's 2D surface coordinates (scene units).
struct PosterSpec {
  int wall = 0;
  Vec2<float> lo, hi;
  Texture tex;
  float frame = 0.03f;  // dark border width
};

struct SceneSpec {
  Vec3<float> room_lo{-2.f, -1.5f, 0.f};
  Vec3<float> room_hi{2.f, 1.5f, 2.5f};
  Vec3<float> wall_color[6] = {
      {0.82f, 0.80f, 0.76f}, {0.78f, 0.82f, 0.84f}, {0.84f, 0.82f, 0.80f},
      {0.80f, 0.84f, 0.78f}, {0.55f, 0.50f, 0.45f}, {0.92f, 0.92f, 0.94f}};
  std::vector<SphereSpec> spheres;
  std::vector<BoxSpec> boxes;
  std::vector<PosterSpec> posters;

  int train_views = 40;
  int eval_views = 5;
  int image_width = 96;
  int image_height = 72;
  float fov_deg = 70.f;

  int sfm_target = 4000;
  float sfm_noise = 0.01f;          // position noise sigma, scene units
  float sfm_texture_power = 1.f;    // density ~ (gradient/ref)^power
  float sfm_gradient_ref = 0.05f;   // local-variation normalization
  float normal_noise_deg = 5.f;     // angular noise on emitted normal priors
  float edge_threshold = 0.3f;

  bool emit_normals = true;
  bool emit_edges = true;
  bool emit_depth = true;
};

SceneSpec parse_scene_spec(const std::string& path);
SceneSpec default_room_spec();
void write_scene_spec(const std::string& path, const SceneSpec& spec);

struct Hit {
  bool valid = false;
  float t = 0;  // distance along unit ray direction
  Vec3<float> position{0, 0, 0};
  Vec3<float> normal{0, 0, 0};  // geometric, oriented toward the ray origin
  Vec3<float> albedo{0, 0, 0};
};

// Analytic nearest-hit trace from inside the room.
Hit trace_scene(const SceneSpec& spec, const Vec3<float>& origin, const Vec3<float>& dir);

// Ray-traced dataset with exact depth/normal ground truth, Sobel edge maps,
// an SfM-like sparse cloud whose density follows local texture variation,
// and the analytic ground-truth mesh. Deterministic for a fixed seed.
Dataset synthesize(const SceneSpec& spec, std::uint64_t seed);

}  // namespace splatsdf::scene
