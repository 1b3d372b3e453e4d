#include "splatsdf/scene/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "splatsdf/io/png_io.hpp"

namespace splatsdf::scene {

namespace fs = std::filesystem;

std::vector<int> Dataset::train_view_indices() const {
  std::vector<int> out;
  for (int i = 0; i < int(views.size()); ++i)
    if (!views[i].is_eval) out.push_back(i);
  return out;
}

std::vector<int> Dataset::eval_view_indices() const {
  std::vector<int> out;
  for (int i = 0; i < int(views.size()); ++i)
    if (views[i].is_eval) out.push_back(i);
  return out;
}

void Dataset::validate() const {
  if (views.empty()) throw std::runtime_error("dataset: no views");
  for (size_t i = 0; i < views.size(); ++i) {
    const View& v = views[i];
    if (!v.camera.rotation_orthonormal())
      throw std::runtime_error("dataset: non-orthonormal rotation in camera " + std::to_string(i));
    if (!v.camera.intrinsics_valid())
      throw std::runtime_error("dataset: invalid intrinsics in camera " + std::to_string(i));
    if (v.image.width != v.camera.width || v.image.height != v.camera.height)
      throw std::runtime_error("dataset: image/camera size mismatch in view " + std::to_string(i));
    if (v.normal) {
      for (const auto& n : v.normal->normals) {
        const float l = n.norm();
        if (l > 0.5f && std::abs(l - 1.f) > 1e-3f)
          throw std::runtime_error("dataset: non-unit normal in view " + std::to_string(i));
      }
    }
    if (v.edge) {
      for (float e : v.edge->strength)
        if (e < 0.f || e > 1.f)
          throw std::runtime_error("dataset: edge value outside [0,1] in view " + std::to_string(i));
    }
  }
  if (scene_bounds.extent().minCoeff() <= 0)
    throw std::runtime_error("dataset: degenerate scene bounds");
}

namespace {

constexpr float kDefaultDepthScale = 10.f;  // meters encoded at 16-bit full white

std::string view_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d", i);
  return buf;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream in(root / "manifest.txt");
  if (!in) throw std::runtime_error("dataset: cannot open " + (root / "manifest.txt").string());

  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: empty manifest");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != "splatsdf_manifest" || version != 1)
      throw std::runtime_error("dataset: unrecognized manifest header");
  }

  float depth_scale = kDefaultDepthScale;
  float edge_threshold = 0.3f;
  std::string points_path, mesh_path;
  View cur;
  bool in_camera = false;
  int declared_cameras = -1;

  auto finish_camera = [&] {
    if (!in_camera) return;
    ds.views.push_back(std::move(cur));
    cur = View{};
    in_camera = false;
  };

  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "camera_count") {
      ls >> declared_cameras;
    } else if (key == "bbox") {
      ls >> ds.scene_bounds.lo[0] >> ds.scene_bounds.lo[1] >> ds.scene_bounds.lo[2] >>
          ds.scene_bounds.hi[0] >> ds.scene_bounds.hi[1] >> ds.scene_bounds.hi[2];
    } else if (key == "depth_scale") {
      ls >> depth_scale;
    } else if (key == "edge_threshold") {
      ls >> edge_threshold;
    } else if (key == "points") {
      ls >> points_path;
    } else if (key == "gt_mesh") {
      ls >> mesh_path;
    } else if (key == "camera") {
      finish_camera();
      in_camera = true;
    } else if (key == "intrinsics") {
      ls >> cur.camera.fx >> cur.camera.fy >> cur.camera.cx >> cur.camera.cy;
    } else if (key == "size") {
      ls >> cur.camera.width >> cur.camera.height;
    } else if (key == "rotation") {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) ls >> cur.camera.rot(r, c);
    } else if (key == "translation") {
      ls >> cur.camera.trans[0] >> cur.camera.trans[1] >> cur.camera.trans[2];
    } else if (key == "split") {
      std::string s;
      ls >> s;
      cur.is_eval = (s == "eval");
    } else if (key == "image") {
      std::string p;
      ls >> p;
      if (!fs::exists(root / p)) throw std::runtime_error("dataset: missing image " + p);
      cur.image = io::read_png((root / p).string());
    } else if (key == "normal") {
      std::string p;
      ls >> p;
      if (!fs::exists(root / p)) throw std::runtime_error("dataset: missing normal map " + p);
      cur.normal = priors::NormalMap::from_image(io::decode_normal_map(io::read_png((root / p).string())));
    } else if (key == "edge") {
      std::string p;
      ls >> p;
      if (!fs::exists(root / p)) throw std::runtime_error("dataset: missing edge map " + p);
      cur.edge = priors::EdgeMap::from_strength(io::read_png((root / p).string()), edge_threshold);
    } else if (key == "depth") {
      std::string p;
      ls >> p;
      if (!fs::exists(root / p)) throw std::runtime_error("dataset: missing depth map " + p);
      Image d = io::read_png((root / p).string());
      for (auto& v : d.data) v *= depth_scale;
      cur.gt_depth = std::move(d);
    } else if (key == "end_camera") {
      finish_camera();
    } else {
      throw std::runtime_error("dataset: unknown manifest key '" + key + "'");
    }
    if (!ls && key != "camera" && key != "end_camera")
      throw std::runtime_error("dataset: malformed manifest line: " + line);
  }
  finish_camera();

  if (declared_cameras >= 0 && declared_cameras != int(ds.views.size()))
    throw std::runtime_error("dataset: camera_count mismatch");
  if (!points_path.empty()) ds.init_points = io::read_point_cloud_ply((root / points_path).string());
  if (!mesh_path.empty()) ds.gt_mesh = io::read_mesh_ply((root / mesh_path).string());
  if (ds.scene_bounds.extent().minCoeff() <= 0) {
    // fall back to the init point cloud with a margin
    Vec3<float> lo = Vec3<float>::Constant(1e30f), hi = Vec3<float>::Constant(-1e30f);
    for (const auto& p : ds.init_points.positions) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec3<float> margin = 0.1f * (hi - lo);
    ds.scene_bounds = {lo - margin, hi + margin};
  }
  ds.validate();
  return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  const fs::path root(dir);
  fs::create_directories(root / "images");
  bool any_normal = false, any_edge = false, any_depth = false;
  for (const auto& v : ds.views) {
    any_normal |= v.normal.has_value();
    any_edge |= v.edge.has_value();
    any_depth |= v.gt_depth.has_value();
  }
  if (any_normal) fs::create_directories(root / "normals");
  if (any_edge) fs::create_directories(root / "edges");
  if (any_depth) fs::create_directories(root / "gt_depth");

  std::ofstream out(root / "manifest.txt");
  if (!out) throw std::runtime_error("dataset: cannot write manifest in " + dir);
  out << "splatsdf_manifest 1\n";
  out << "camera_count " << ds.views.size() << "\n";
  out << "bbox " << ds.scene_bounds.lo[0] << ' ' << ds.scene_bounds.lo[1] << ' '
      << ds.scene_bounds.lo[2] << ' ' << ds.scene_bounds.hi[0] << ' ' << ds.scene_bounds.hi[1]
      << ' ' << ds.scene_bounds.hi[2] << "\n";
  out << "depth_scale " << kDefaultDepthScale << "\n";
  out << "points points.ply\n";
  if (ds.gt_mesh) out << "gt_mesh gt_mesh.ply\n";

  for (size_t i = 0; i < ds.views.size(); ++i) {
    const View& v = ds.views[i];
    const std::string name = view_name(int(i));
    out << "camera " << i << "\n";
    out << "size " << v.camera.width << ' ' << v.camera.height << "\n";
    out << "intrinsics " << io::format_f32(v.camera.fx) << ' ' << io::format_f32(v.camera.fy)
        << ' ' << io::format_f32(v.camera.cx) << ' ' << io::format_f32(v.camera.cy) << "\n";
    out << "rotation";
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out << ' ' << io::format_f32(v.camera.rot(r, c));
    out << "\n";
    out << "translation " << io::format_f32(v.camera.trans[0]) << ' '
        << io::format_f32(v.camera.trans[1]) << ' ' << io::format_f32(v.camera.trans[2]) << "\n";
    out << "split " << (v.is_eval ? "eval" : "train") << "\n";

    out << "image images/" << name << ".png\n";
    io::write_png8((root / "images" / (name + ".png")).string(), v.image);
    if (v.normal) {
      out << "normal normals/" << name << ".png\n";
      io::write_png16((root / "normals" / (name + ".png")).string(),
                      io::encode_normal_map(v.normal->to_image()));
    }
    if (v.edge) {
      out << "edge edges/" << name << ".png\n";
      Image e(v.edge->width, v.edge->height, 1);
      e.data = v.edge->strength;
      io::write_png8((root / "edges" / (name + ".png")).string(), e);
    }
    if (v.gt_depth) {
      out << "depth gt_depth/" << name << ".png\n";
      Image d = *v.gt_depth;
      for (auto& x : d.data) x /= kDefaultDepthScale;
      io::write_png16((root / "gt_depth" / (name + ".png")).string(), d);
    }
    out << "end_camera\n";
  }
  io::write_point_cloud_ply((root / "points.ply").string(), ds.init_points);
  if (ds.gt_mesh) io::write_mesh_ply((root / "gt_mesh.ply").string(), *ds.gt_mesh);
}

}  // namespace splatsdf::scene
