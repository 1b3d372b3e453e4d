#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splatsdf/core/image.hpp"
#include "splatsdf/core/types.hpp"
#include "splatsdf/io/ply_io.hpp"
#include "splatsdf/mesh/mesh_types.hpp"
#include "splatsdf/priors/maps.hpp"
#include "splatsdf/scene/camera.hpp"

namespace splatsdf::scene {

struct View {
  Camera<float> camera;
  Image image;                              // RGB in [0,1]
  std::optional<priors::NormalMap> normal;  // world frame
  std::optional<priors::EdgeMap> edge;
  std::optional<Image> gt_depth;            // camera-z, scene units
  bool is_eval = false;
};

struct Dataset {
  std::vector<View> views;
  io::PointCloud init_points;
  std::optional<mesh::TriangleMesh> gt_mesh;
  BoundingBox scene_bounds;

  std::vector<int> train_view_indices() const;
  std::vector<int> eval_view_indices() const;
  void validate() const;  // throws on broken invariants
};

// Directory layout: manifest.txt, images/*.png, optional normals/*.png,
// edges/*.png, gt_depth/*.png, points.ply, optional gt_mesh.ply.
Dataset load_dataset(const std::string& dir);
void save_dataset(const std::string& dir, const Dataset& ds);

}  // namespace splatsdf::scene
