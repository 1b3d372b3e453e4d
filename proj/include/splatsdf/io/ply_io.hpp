#pragma once

#include <map>
#include <string>
#include <vector>

#include "splatsdf/core/types.hpp"
#include "splatsdf/mesh/mesh_types.hpp"

namespace splatsdf::io {

struct PointCloud {
  std::vector<Vec3<float>> positions;
  std::vector<Vec3<float>> colors;   // empty or same size as positions
  std::vector<Vec3<float>> normals;  // empty or same size as positions

  size_t size() const { return positions.size(); }
};

// Parsed ASCII PLY: per element, a column-named table of doubles. Integer
// list properties (faces) are exposed through `lists`.
struct PlyElement {
  std::string name;
  size_t count = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;          // count x columns
  std::vector<std::vector<int>> lists;            // non-empty for list elements
};

struct PlyFile {
  std::vector<PlyElement> elements;
  const PlyElement* find(const std::string& name) const;
};

PlyFile read_ply(const std::string& path);

void write_point_cloud_ply(const std::string& path, const PointCloud& pc);
PointCloud read_point_cloud_ply(const std::string& path);

void write_mesh_ply(const std::string& path, const mesh::TriangleMesh& m);
mesh::TriangleMesh read_mesh_ply(const std::string& path);

// float -> shortest decimal string that round-trips at float32
std::string format_f32(float v);

}  // namespace splatsdf::io
