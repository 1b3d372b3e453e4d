#include "splatsdf/scene/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "splatsdf/core/parallel.hpp"
#include "splatsdf/core/rng.hpp"
#include "splatsdf/scene/edges.hpp"

namespace splatsdf::scene {

namespace {

constexpr float kPi = 3.14159265358979f;

float fract(float x) { return x - std::floor(x); }

// Deterministic value noise on a 2D lattice with bilinear smoothing.
float value_noise(float u, float v) {
  auto hash = [](int ix, int iy) {
    std::uint32_t h = std::uint32_t(ix) * 374761393u + std::uint32_t(iy) * 668265263u;
    h = (h ^ (h >> 13)) * 1274126177u;
    return float(h & 0xFFFFFFu) / float(0xFFFFFFu);
  };
  const int ix = int(std::floor(u)), iy = int(std::floor(v));
  const float fu = u - ix, fv = v - iy;
  const float su = fu * fu * (3 - 2 * fu), sv = fv * fv * (3 - 2 * fv);
  const float a = hash(ix, iy), b = hash(ix + 1, iy), c = hash(ix, iy + 1), d = hash(ix + 1, iy + 1);
  return (a * (1 - su) + b * su) * (1 - sv) + (c * (1 - su) + d * su) * sv;
}

}  // namespace

Vec3<float> Texture::albedo(float u, float v) const {
  switch (pattern) {
    case Pattern::kSolid:
      return color_a;
    case Pattern::kChecker: {
      const int p = (int(std::floor(u * scale)) + int(std::floor(v * scale))) & 1;
      return p ? color_b : color_a;
    }
    case Pattern::kStripes: {
      const int p = int(std::floor(u * scale)) & 1;
      return p ? color_b : color_a;
    }
    case Pattern::kRings: {
      const float r = std::sqrt(u * u + v * v);
      return (int(std::floor(r * scale)) & 1) ? color_b : color_a;
    }
    case Pattern::kNoise: {
      const float n0 = value_noise(u * scale, v * scale);
      const float n1 = value_noise(u * scale * 3.1f + 17.f, v * scale * 3.1f + 9.f);
      const float t = std::clamp(0.65f * n0 + 0.35f * n1, 0.f, 1.f);
      return color_a * (1 - t) + color_b * t;
    }
  }
  return color_a;
}

namespace {

// Wall tangent coordinates: returns (u, v) of a point on the given wall.
Vec2<float> wall_uv(int wall, const Vec3<float>& p) {
  switch (wall) {
    case 0:
    case 1:
      return {p[1], p[2]};
    case 2:
    case 3:
      return {p[0], p[2]};
    default:
      return {p[0], p[1]};
  }
}

Vec3<float> wall_albedo(const SceneSpec& spec, int wall, const Vec3<float>& p) {
  const Vec2<float> uv = wall_uv(wall, p);
  for (const auto& poster : spec.posters) {
    if (poster.wall != wall) continue;
    if (uv[0] < poster.lo[0] || uv[0] > poster.hi[0] || uv[1] < poster.lo[1] ||
        uv[1] > poster.hi[1])
      continue;
    const float du = std::min(uv[0] - poster.lo[0], poster.hi[0] - uv[0]);
    const float dv = std::min(uv[1] - poster.lo[1], poster.hi[1] - uv[1]);
    if (std::min(du, dv) < poster.frame) return {0.08f, 0.08f, 0.10f};
    return poster.tex.albedo(uv[0] - poster.lo[0], uv[1] - poster.lo[1]);
  }
  return spec.wall_color[wall];
}

Vec3<float> sphere_albedo(const SphereSpec& s, const Vec3<float>& p) {
  const Vec3<float> d = (p - s.center).normalized();
  const float u = std::atan2(d[1], d[0]) * s.radius;
  const float v = std::acos(std::clamp(d[2], -1.f, 1.f)) * s.radius;
  return s.tex.albedo(u, v);
}

Vec3<float> box_albedo(const BoxSpec& b, const Vec3<float>& p, int axis) {
  const int u_axis = (axis + 1) % 3, v_axis = (axis + 2) % 3;
  return b.tex.albedo(p[u_axis], p[v_axis]);
}

}  // namespace

Hit trace_scene(const SceneSpec& spec, const Vec3<float>& origin, const Vec3<float>& dir) {
  Hit best;
  best.t = 1e30f;

  // Room interior: exit through the nearest face plane.
  {
    float t_exit = 1e30f;
    int wall = -1;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(dir[a]) < 1e-12f) continue;
      const bool toward_hi = dir[a] > 0;
      const float plane = toward_hi ? spec.room_hi[a] : spec.room_lo[a];
      const float t = (plane - origin[a]) / dir[a];
      if (t > 1e-5f && t < t_exit) {
        t_exit = t;
        wall = 2 * a + (toward_hi ? 1 : 0);
      }
    }
    if (wall >= 0 && t_exit < best.t) {
      best.valid = true;
      best.t = t_exit;
      best.position = origin + t_exit * dir;
      Vec3<float> n = Vec3<float>::Zero();
      n[wall / 2] = (wall % 2) ? -1.f : 1.f;  // inward
      best.normal = n;
      best.albedo = wall_albedo(spec, wall, best.position);
    }
  }

  for (const auto& b : spec.boxes) {
    float t_enter = -1e30f, t_exit = 1e30f;
    int enter_axis = -1;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(dir[a]) < 1e-12f) {
        if (origin[a] < b.lo[a] || origin[a] > b.hi[a]) {
          t_enter = 1e30f;
          break;
        }
        continue;
      }
      float t0 = (b.lo[a] - origin[a]) / dir[a];
      float t1 = (b.hi[a] - origin[a]) / dir[a];
      if (t0 > t1) std::swap(t0, t1);
      if (t0 > t_enter) {
        t_enter = t0;
        enter_axis = a;
      }
      t_exit = std::min(t_exit, t1);
    }
    if (t_enter <= 1e-5f || t_enter > t_exit || t_enter >= best.t) continue;
    best.valid = true;
    best.t = t_enter;
    best.position = origin + t_enter * dir;
    Vec3<float> n = Vec3<float>::Zero();
    n[enter_axis] = dir[enter_axis] > 0 ? -1.f : 1.f;
    best.normal = n;
    best.albedo = box_albedo(b, best.position, enter_axis);
  }

  for (const auto& s : spec.spheres) {
    const Vec3<float> oc = origin - s.center;
    const float bq = oc.dot(dir);
    const float cq = oc.squaredNorm() - s.radius * s.radius;
    const float disc = bq * bq - cq;
    if (disc < 0) continue;
    const float sq = std::sqrt(disc);
    float t = -bq - sq;
    if (t <= 1e-5f) t = -bq + sq;
    if (t <= 1e-5f || t >= best.t) continue;
    best.valid = true;
    best.t = t;
    best.position = origin + t * dir;
    best.normal = (best.position - s.center).normalized();
    best.albedo = sphere_albedo(s, best.position);
  }

  if (best.valid && best.normal.dot(dir) > 0) best.normal = -best.normal;
  return best;
}

namespace {

bool point_in_solid(const SceneSpec& spec, const Vec3<float>& p, float margin) {
  for (int a = 0; a < 3; ++a)
    if (p[a] < spec.room_lo[a] + margin || p[a] > spec.room_hi[a] - margin) return true;
  for (const auto& b : spec.boxes) {
    bool inside = true;
    for (int a = 0; a < 3; ++a)
      if (p[a] < b.lo[a] - margin || p[a] > b.hi[a] + margin) inside = false;
    if (inside) return true;
  }
  for (const auto& s : spec.spheres)
    if ((p - s.center).norm() < s.radius + margin) return true;
  return false;
}

std::vector<Camera<float>> make_trajectory(const SceneSpec& spec, int count, float phase,
                                           float height_bias) {
  const Vec3<float> c = 0.5f * (spec.room_lo + spec.room_hi);
  const Vec3<float> ext = spec.room_hi - spec.room_lo;
  const float a = 0.30f * ext[0], b = 0.28f * ext[1];
  const float focal = 0.5f * float(spec.image_width) / std::tan(0.5f * spec.fov_deg * kPi / 180.f);
  static const float heights[3] = {0.42f, 0.55f, 0.68f};
  static const float pitches[3] = {-0.32f, 0.04f, 0.26f};

  std::vector<Camera<float>> cams;
  for (int i = 0; i < count; ++i) {
    const float theta = 2 * kPi * (float(i) / count) + phase;
    const Vec3<float> outward{std::cos(theta), std::sin(theta), 0.f};
    Vec3<float> eye = c + Vec3<float>{a * outward[0], b * outward[1], 0.f};
    eye[2] = spec.room_lo[2] + (heights[i % 3] + height_bias) * ext[2];

    Vec3<float> target;
    if (i % 7 == 3) {
      target = eye + Vec3<float>{outward[0], outward[1], 0.85f};
    } else if (i % 5 == 4) {
      // look across the room to cover interior objects
      target = c + Vec3<float>{-outward[0] * 0.4f * ext[0], -outward[1] * 0.4f * ext[1],
                               0.45f * ext[2] - (eye[2] - spec.room_lo[2])};
      target[2] += spec.room_lo[2];
    } else {
      const float pitch = pitches[i % 3];
      target = eye + Vec3<float>{outward[0], outward[1], pitch};
    }
    cams.push_back(look_at_camera<float>(eye, target, {0, 0, 1}, focal, spec.image_width,
                                         spec.image_height));
  }
  return cams;
}

struct SurfacePatch {
  // Uniformly samples a point + tangent frame on one scene surface.
  Vec3<float> origin, tu, tv;  // rectangle parameterization
  float area = 0;
  int kind = 0;                // 0 wall, 1 box face, 2 sphere
  int wall = -1;
  const BoxSpec* box = nullptr;
  int box_axis = 0;
  const SphereSpec* sphere = nullptr;
};

std::vector<SurfacePatch> surface_patches(const SceneSpec& spec) {
  std::vector<SurfacePatch> out;
  const Vec3<float>&lo = spec.room_lo, &hi = spec.room_hi;
  for (int wall = 0; wall < 6; ++wall) {
    const int axis = wall / 2;
    const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
    SurfacePatch p;
    p.kind = 0;
    p.wall = wall;
    p.origin = lo;
    p.origin[axis] = (wall % 2) ? hi[axis] : lo[axis];
    p.tu = Vec3<float>::Zero();
    p.tv = Vec3<float>::Zero();
    p.tu[ua] = hi[ua] - lo[ua];
    p.tv[va] = hi[va] - lo[va];
    p.area = p.tu.norm() * p.tv.norm();
    out.push_back(p);
  }
  for (const auto& b : spec.boxes) {
    for (int face = 0; face < 6; ++face) {
      const int axis = face / 2;
      const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
      SurfacePatch p;
      p.kind = 1;
      p.box = &b;
      p.box_axis = axis;
      p.origin = b.lo;
      p.origin[axis] = (face % 2) ? b.hi[axis] : b.lo[axis];
      p.tu = Vec3<float>::Zero();
      p.tv = Vec3<float>::Zero();
      p.tu[ua] = b.hi[ua] - b.lo[ua];
      p.tv[va] = b.hi[va] - b.lo[va];
      p.area = p.tu.norm() * p.tv.norm();
      out.push_back(p);
    }
  }
  for (const auto& s : spec.spheres) {
    SurfacePatch p;
    p.kind = 2;
    p.sphere = &s;
    p.area = 4 * kPi * s.radius * s.radius;
    out.push_back(p);
  }
  return out;
}

struct SurfaceSample {
  Vec3<float> pos, normal, tu, tv;
  Vec3<float> albedo;
  int wall = -1;
};

SurfaceSample sample_patch(const SceneSpec& spec, const SurfacePatch& p, Rng& rng) {
  SurfaceSample s;
  if (p.kind == 2) {
    // uniform on sphere
    const float z = float(rng.uniform(-1.0, 1.0));
    const float phi = float(rng.uniform(0.0, 2.0 * kPi));
    const float rxy = std::sqrt(std::max(0.f, 1.f - z * z));
    const Vec3<float> n{rxy * std::cos(phi), rxy * std::sin(phi), z};
    s.pos = p.sphere->center + p.sphere->radius * n;
    s.normal = n;
    s.tu = n.cross(Vec3<float>{0, 0, 1}).norm() > 1e-3f
               ? n.cross(Vec3<float>{0, 0, 1}).normalized()
               : Vec3<float>{1, 0, 0};
    s.tv = n.cross(s.tu).normalized();
    s.albedo = sphere_albedo(*p.sphere, s.pos);
    return s;
  }
  const float u = float(rng.uniform()), v = float(rng.uniform());
  s.pos = p.origin + u * p.tu + v * p.tv;
  s.tu = p.tu.normalized();
  s.tv = p.tv.normalized();
  if (p.kind == 0) {
    s.wall = p.wall;
    Vec3<float> n = Vec3<float>::Zero();
    n[p.wall / 2] = (p.wall % 2) ? -1.f : 1.f;
    s.normal = n;
    s.albedo = wall_albedo(spec, p.wall, s.pos);
  } else {
    Vec3<float> n = Vec3<float>::Zero();
    // outward face normal
    const int axis = p.box_axis;
    n[axis] = (s.pos[axis] > 0.5f * (p.box->lo[axis] + p.box->hi[axis])) ? 1.f : -1.f;
    s.normal = n;
    s.albedo = box_albedo(*p.box, s.pos, axis);
  }
  return s;
}

Vec3<float> albedo_at(const SceneSpec& spec, const SurfaceSample& s, const SurfacePatch& p,
                      const Vec3<float>& pos) {
  if (p.kind == 2) return sphere_albedo(*p.sphere, pos);
  if (p.kind == 0) return wall_albedo(spec, p.wall, pos);
  return box_albedo(*p.box, pos, p.box_axis);
}

// Local texture variation: mean |luminance delta| over a small tangent disc.
float texture_variation(const SceneSpec& spec, const SurfacePatch& p, const SurfaceSample& s,
                        Rng& rng) {
  const float radius = 0.012f;
  const float base = luminance(s.albedo);
  float acc = 0;
  const int k = 6;
  for (int i = 0; i < k; ++i) {
    const float ang = 2 * kPi * float(i + rng.uniform() * 0.5) / k;
    const float rr = radius * (0.4f + 0.6f * float(rng.uniform()));
    const Vec3<float> q = s.pos + (std::cos(ang) * rr) * s.tu + (std::sin(ang) * rr) * s.tv;
    acc += std::abs(luminance(albedo_at(spec, s, p, q)) - base);
  }
  return acc / k;
}

bool visible_from(const SceneSpec& spec, const Camera<float>& cam, const Vec3<float>& p,
                  const Vec3<float>& n) {
  const Vec3<float> proj = cam.project(p);
  if (proj[2] <= 0.05f) return false;
  if (proj[0] < 0 || proj[0] >= cam.width || proj[1] < 0 || proj[1] >= cam.height) return false;
  const Vec3<float> o = cam.center();
  const Vec3<float> d = (p - o);
  const float dist = d.norm();
  if (n.dot(-d) <= 0) return false;  // back-facing
  const Hit h = trace_scene(spec, o, d / dist);
  return h.valid && std::abs(h.t - dist) < 0.01f;
}

mesh::TriangleMesh ground_truth_mesh(const SceneSpec& spec) {
  mesh::TriangleMesh m;
  auto add_quad = [&](const Vec3<float>& a, const Vec3<float>& b, const Vec3<float>& c,
                      const Vec3<float>& d) {
    const int base = int(m.vertices.size());
    m.vertices.insert(m.vertices.end(), {a, b, c, d});
    m.triangles.push_back({base, base + 1, base + 2});
    m.triangles.push_back({base, base + 2, base + 3});
  };
  auto add_box = [&](const Vec3<float>& lo, const Vec3<float>& hi) {
    Vec3<float> v[8];
    for (int i = 0; i < 8; ++i)
      v[i] = {i & 1 ? hi[0] : lo[0], i & 2 ? hi[1] : lo[1], i & 4 ? hi[2] : lo[2]};
    add_quad(v[0], v[1], v[3], v[2]);  // z = lo
    add_quad(v[4], v[6], v[7], v[5]);  // z = hi
    add_quad(v[0], v[4], v[5], v[1]);  // y = lo
    add_quad(v[2], v[3], v[7], v[6]);  // y = hi
    add_quad(v[0], v[2], v[6], v[4]);  // x = lo
    add_quad(v[1], v[5], v[7], v[3]);  // x = hi
  };
  add_box(spec.room_lo, spec.room_hi);
  for (const auto& b : spec.boxes) add_box(b.lo, b.hi);
  for (const auto& s : spec.spheres) {
    const int stacks = 24, slices = 32;
    const int base = int(m.vertices.size());
    for (int i = 0; i <= stacks; ++i) {
      const float ph = kPi * float(i) / stacks;
      for (int j = 0; j < slices; ++j) {
        const float th = 2 * kPi * float(j) / slices;
        m.vertices.push_back(s.center + s.radius * Vec3<float>{std::sin(ph) * std::cos(th),
                                                               std::sin(ph) * std::sin(th),
                                                               std::cos(ph)});
      }
    }
    for (int i = 0; i < stacks; ++i)
      for (int j = 0; j < slices; ++j) {
        const int j1 = (j + 1) % slices;
        const int a = base + i * slices + j, b2 = base + i * slices + j1;
        const int c = base + (i + 1) * slices + j, d = base + (i + 1) * slices + j1;
        m.triangles.push_back({a, c, b2});
        m.triangles.push_back({b2, c, d});
      }
  }
  return m;
}

}  // namespace

Dataset synthesize(const SceneSpec& spec, std::uint64_t seed) {
  Dataset ds;
  ds.scene_bounds = {spec.room_lo, spec.room_hi};

  std::vector<Camera<float>> train_cams = make_trajectory(spec, spec.train_views, 0.f, 0.f);
  std::vector<Camera<float>> eval_cams =
      make_trajectory(spec, spec.eval_views, kPi / std::max(1, spec.train_views), 0.05f);

  for (const auto& cam : train_cams)
    if (point_in_solid(spec, cam.center(), 0.05f))
      throw std::runtime_error("synthesize: camera inside solid geometry");
  for (const auto& cam : eval_cams)
    if (point_in_solid(spec, cam.center(), 0.05f))
      throw std::runtime_error("synthesize: camera inside solid geometry");

  const int total = int(train_cams.size() + eval_cams.size());
  ds.views.resize(total);

  for (int vi = 0; vi < total; ++vi) {
    View& view = ds.views[vi];
    view.camera = vi < int(train_cams.size()) ? train_cams[vi]
                                              : eval_cams[vi - train_cams.size()];
    view.is_eval = vi >= int(train_cams.size());
    const Camera<float>& cam = view.camera;
    const int w = cam.width, h = cam.height;
    view.image = Image(w, h, 3);
    Image normal_img(w, h, 3);
    Image depth_img(w, h, 1);

    parallel_for_each(h, [&](std::int64_t y) {
      for (int x = 0; x < w; ++x) {
        const auto ray = cam.ray(float(x) + 0.5f, float(y) + 0.5f);
        const Hit hit = trace_scene(spec, ray.origin, ray.dir);
        if (!hit.valid) continue;  // cannot happen inside a closed room
        view.image.set_rgb(x, int(y), hit.albedo);
        depth_img.at(x, int(y), 0) = hit.t * ray.cos_forward;  // camera z
        Vec3<float> n = hit.normal;
        if (spec.normal_noise_deg > 0) {
          Rng prng(seed ^ (0x9E3779B9ull * (vi + 1)) ^ (std::uint64_t(y) * 131071 + x));
          const float ang = float(prng.normal()) * spec.normal_noise_deg * kPi / 180.f;
          Vec3<float> axis_seed{float(prng.normal()), float(prng.normal()), float(prng.normal())};
          Vec3<float> axis = n.cross(axis_seed);
          if (axis.norm() > 1e-6f) {
            axis.normalize();
            n = std::cos(ang) * n + std::sin(ang) * axis.cross(n) +
                (1 - std::cos(ang)) * axis.dot(n) * axis;
            n.normalize();
          }
        }
        normal_img.set_rgb(x, int(y), n);
      }
    });

    if (spec.emit_normals) view.normal = priors::NormalMap::from_image(normal_img);
    if (spec.emit_edges) view.edge = compute_edges(view.image, spec.edge_threshold);
    if (spec.emit_depth) view.gt_depth = std::move(depth_img);
  }

  // SfM-like sparse cloud: texture-dependent acceptance + 2-view visibility.
  {
    Rng rng(seed ^ 0xC0FFEEull);
    const auto patches = surface_patches(spec);
    float total_area = 0;
    for (const auto& p : patches) total_area += p.area;

    const std::int64_t max_attempts = std::int64_t(spec.sfm_target) * 60;
    for (std::int64_t attempt = 0;
         attempt < max_attempts && int(ds.init_points.size()) < spec.sfm_target; ++attempt) {
      // area-weighted patch choice
      float pick = float(rng.uniform()) * total_area;
      const SurfacePatch* patch = &patches.back();
      for (const auto& p : patches) {
        if (pick < p.area) {
          patch = &p;
          break;
        }
        pick -= p.area;
      }
      const SurfaceSample s = sample_patch(spec, *patch, rng);
      const float g = texture_variation(spec, *patch, s, rng);
      const float accept =
          std::min(1.f, std::pow(g / spec.sfm_gradient_ref, spec.sfm_texture_power));
      if (float(rng.uniform()) >= accept) continue;

      int seen = 0;
      for (const auto& cam : train_cams) {
        if (visible_from(spec, cam, s.pos, s.normal) && ++seen >= 2) break;
      }
      if (seen < 2) continue;

      Vec3<float> noisy = s.pos + spec.sfm_noise * Vec3<float>{float(rng.normal()),
                                                               float(rng.normal()),
                                                               float(rng.normal())};
      ds.init_points.positions.push_back(noisy);
      ds.init_points.colors.push_back(s.albedo);
      ds.init_points.normals.push_back(s.normal);
    }
  }

  ds.gt_mesh = ground_truth_mesh(spec);
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Scene spec file format: one directive per line, '#' comments.

namespace {

Texture::Pattern parse_pattern(const std::string& s) {
  if (s == "solid") return Texture::Pattern::kSolid;
  if (s == "checker") return Texture::Pattern::kChecker;
  if (s == "stripes") return Texture::Pattern::kStripes;
  if (s == "rings") return Texture::Pattern::kRings;
  if (s == "noise") return Texture::Pattern::kNoise;
  throw std::runtime_error("scene spec: unknown texture pattern '" + s + "'");
}

const char* pattern_name(Texture::Pattern p) {
  switch (p) {
    case Texture::Pattern::kSolid: return "solid";
    case Texture::Pattern::kChecker: return "checker";
    case Texture::Pattern::kStripes: return "stripes";
    case Texture::Pattern::kRings: return "rings";
    case Texture::Pattern::kNoise: return "noise";
  }
  return "solid";
}

Texture parse_texture(std::istringstream& ls) {
  Texture t;
  std::string pat;
  ls >> pat >> t.scale >> t.color_a[0] >> t.color_a[1] >> t.color_a[2] >> t.color_b[0] >>
      t.color_b[1] >> t.color_b[2];
  t.pattern = parse_pattern(pat);
  return t;
}

int parse_wall(const std::string& s) {
  static const std::map<std::string, int> walls = {{"-x", 0}, {"+x", 1}, {"-y", 2},
                                                   {"+y", 3}, {"-z", 4}, {"+z", 5}};
  auto it = walls.find(s);
  if (it == walls.end()) throw std::runtime_error("scene spec: bad wall '" + s + "'");
  return it->second;
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scene spec: cannot open " + path);
  SceneSpec spec;
  spec.wall_color[0] = {0.82f, 0.80f, 0.76f};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "room") {
      ls >> spec.room_lo[0] >> spec.room_lo[1] >> spec.room_lo[2] >> spec.room_hi[0] >>
          spec.room_hi[1] >> spec.room_hi[2];
    } else if (key == "wall_color") {
      std::string w;
      ls >> w;
      const int wi = parse_wall(w);
      ls >> spec.wall_color[wi][0] >> spec.wall_color[wi][1] >> spec.wall_color[wi][2];
    } else if (key == "sphere") {
      SphereSpec s;
      ls >> s.center[0] >> s.center[1] >> s.center[2] >> s.radius;
      s.tex = parse_texture(ls);
      spec.spheres.push_back(s);
    } else if (key == "box") {
      BoxSpec b;
      ls >> b.lo[0] >> b.lo[1] >> b.lo[2] >> b.hi[0] >> b.hi[1] >> b.hi[2];
      b.tex = parse_texture(ls);
      spec.boxes.push_back(b);
    } else if (key == "poster") {
      PosterSpec p;
      std::string w;
      ls >> w >> p.lo[0] >> p.lo[1] >> p.hi[0] >> p.hi[1];
      p.wall = parse_wall(w);
      p.tex = parse_texture(ls);
      spec.posters.push_back(p);
    } else if (key == "views") {
      ls >> spec.train_views;
    } else if (key == "eval_views") {
      ls >> spec.eval_views;
    } else if (key == "image") {
      ls >> spec.image_width >> spec.image_height;
    } else if (key == "fov_deg") {
      ls >> spec.fov_deg;
    } else if (key == "sfm_points") {
      ls >> spec.sfm_target;
    } else if (key == "sfm_noise") {
      ls >> spec.sfm_noise;
    } else if (key == "sfm_texture_power") {
      ls >> spec.sfm_texture_power;
    } else if (key == "sfm_gradient_ref") {
      ls >> spec.sfm_gradient_ref;
    } else if (key == "normal_noise_deg") {
      ls >> spec.normal_noise_deg;
    } else if (key == "edge_threshold") {
      ls >> spec.edge_threshold;
    } else {
      throw std::runtime_error("scene spec: unknown key '" + key + "'");
    }
    if (!ls) throw std::runtime_error("scene spec: malformed line: " + line);
  }
  return spec;
}

SceneSpec default_room_spec() {
  SceneSpec spec;
  SphereSpec ball;
  ball.center = {0.65f, -0.45f, 0.45f};
  ball.radius = 0.45f;
  ball.tex = {Texture::Pattern::kChecker, {0.85f, 0.25f, 0.2f}, {0.95f, 0.9f, 0.75f}, 7.f};
  spec.spheres.push_back(ball);

  BoxSpec table;
  table.lo = {-1.55f, 0.45f, 0.f};
  table.hi = {-0.75f, 1.10f, 0.72f};
  table.tex = {Texture::Pattern::kStripes, {0.30f, 0.45f, 0.72f}, {0.85f, 0.85f, 0.9f}, 9.f};
  spec.boxes.push_back(table);

  BoxSpec crate;
  crate.lo = {0.85f, 0.80f, 0.f};
  crate.hi = {1.62f, 1.42f, 1.05f};
  crate.tex = {Texture::Pattern::kNoise, {0.55f, 0.35f, 0.2f}, {0.9f, 0.8f, 0.55f}, 14.f};
  spec.boxes.push_back(crate);

  PosterSpec art;
  art.wall = 0;  // -x wall, coords (y, z)
  art.lo = {-0.95f, 0.75f};
  art.hi = {0.35f, 1.85f};
  art.tex = {Texture::Pattern::kNoise, {0.1f, 0.2f, 0.5f}, {0.95f, 0.85f, 0.3f}, 10.f};
  spec.posters.push_back(art);

  PosterSpec grid;
  grid.wall = 3;  // +y wall, coords (x, z)
  grid.lo = {-1.35f, 0.70f};
  grid.hi = {-0.15f, 1.80f};
  grid.tex = {Texture::Pattern::kChecker, {0.12f, 0.12f, 0.14f}, {0.92f, 0.9f, 0.85f}, 6.f};
  spec.posters.push_back(grid);

  // baseboards and crown molding: dark bands anchoring the floor and ceiling
  // planes photometrically on every wall
  for (int wall = 0; wall < 4; ++wall) {
    const float lo0 = wall < 2 ? spec.room_lo[1] : spec.room_lo[0];
    const float hi0 = wall < 2 ? spec.room_hi[1] : spec.room_hi[0];
    PosterSpec base;
    base.wall = wall;
    base.lo = {lo0, spec.room_lo[2]};
    base.hi = {hi0, spec.room_lo[2] + 0.1f};
    base.tex = {Texture::Pattern::kSolid, {0.22f, 0.16f, 0.13f}, {0, 0, 0}, 1.f};
    base.frame = 0.f;
    spec.posters.push_back(base);
    PosterSpec crown;
    crown.wall = wall;
    crown.lo = {lo0, spec.room_hi[2] - 0.08f};
    crown.hi = {hi0, spec.room_hi[2]};
    crown.tex = {Texture::Pattern::kSolid, {0.30f, 0.28f, 0.34f}, {0, 0, 0}, 1.f};
    crown.frame = 0.f;
    spec.posters.push_back(crown);
  }
  return spec;
}

void write_scene_spec(const std::string& path, const SceneSpec& spec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("scene spec: cannot write " + path);
  auto tex = [](const Texture& t) {
    std::ostringstream s;
    s << pattern_name(t.pattern) << ' ' << t.scale << ' ' << t.color_a[0] << ' ' << t.color_a[1]
      << ' ' << t.color_a[2] << ' ' << t.color_b[0] << ' ' << t.color_b[1] << ' ' << t.color_b[2];
    return s.str();
  };
  out << "room " << spec.room_lo[0] << ' ' << spec.room_lo[1] << ' ' << spec.room_lo[2] << ' '
      << spec.room_hi[0] << ' ' << spec.room_hi[1] << ' ' << spec.room_hi[2] << "\n";
  static const char* wall_names[6] = {"-x", "+x", "-y", "+y", "-z", "+z"};
  for (int w = 0; w < 6; ++w)
    out << "wall_color " << wall_names[w] << ' ' << spec.wall_color[w][0] << ' '
        << spec.wall_color[w][1] << ' ' << spec.wall_color[w][2] << "\n";
  for (const auto& s : spec.spheres)
    out << "sphere " << s.center[0] << ' ' << s.center[1] << ' ' << s.center[2] << ' ' << s.radius
        << ' ' << tex(s.tex) << "\n";
  for (const auto& b : spec.boxes)
    out << "box " << b.lo[0] << ' ' << b.lo[1] << ' ' << b.lo[2] << ' ' << b.hi[0] << ' '
        << b.hi[1] << ' ' << b.hi[2] << ' ' << tex(b.tex) << "\n";
  for (const auto& p : spec.posters)
    out << "poster " << wall_names[p.wall] << ' ' << p.lo[0] << ' ' << p.lo[1] << ' ' << p.hi[0]
        << ' ' << p.hi[1] << ' ' << tex(p.tex) << "\n";
  out << "views " << spec.train_views << "\n";
  out << "eval_views " << spec.eval_views << "\n";
  out << "image " << spec.image_width << ' ' << spec.image_height << "\n";
  out << "fov_deg " << spec.fov_deg << "\n";
  out << "sfm_points " << spec.sfm_target << "\n";
  out << "sfm_noise " << spec.sfm_noise << "\n";
  out << "sfm_texture_power " << spec.sfm_texture_power << "\n";
  out << "sfm_gradient_ref " << spec.sfm_gradient_ref << "\n";
  out << "normal_noise_deg " << spec.normal_noise_deg << "\n";
  out << "edge_threshold " << spec.edge_threshold << "\n";
}

}  // namespace splatsdf::scene
