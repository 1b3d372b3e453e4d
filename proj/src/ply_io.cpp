#include "splatsdf/io/ply_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace splatsdf::io {

std::string format_f32(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", double(v));
  return buf;
}

const PlyElement* PlyFile::find(const std::string& name) const {
  for (const auto& e : elements)
    if (e.name == name) return &e;
  return nullptr;
}

PlyFile read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ply: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply")
    throw std::runtime_error("ply: bad magic in " + path);

  PlyFile ply;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = (fmt == "ascii");
    } else if (tok == "comment") {
      continue;
    } else if (tok == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      ply.elements.push_back(std::move(e));
    } else if (tok == "property") {
      if (ply.elements.empty()) throw std::runtime_error("ply: property before element");
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, vt, name;
        ls >> ct >> vt >> name;
        ply.elements.back().columns.push_back("list:" + name);
      } else {
        std::string name;
        ls >> name;
        ply.elements.back().columns.push_back(name);
      }
    } else if (tok == "end_header") {
      break;
    }
  }
  if (!ascii) throw std::runtime_error("ply: only ascii supported: " + path);

  for (auto& e : ply.elements) {
    const bool is_list = !e.columns.empty() && e.columns[0].rfind("list:", 0) == 0;
    for (size_t i = 0; i < e.count; ++i) {
      if (!std::getline(in, line)) throw std::runtime_error("ply: truncated data in " + path);
      std::istringstream ls(line);
      if (is_list) {
        int n = 0;
        ls >> n;
        std::vector<int> idx(n);
        for (int k = 0; k < n; ++k) ls >> idx[k];
        e.lists.push_back(std::move(idx));
      } else {
        std::vector<double> row(e.columns.size());
        for (auto& v : row) ls >> v;
        if (!ls) throw std::runtime_error("ply: malformed row in " + path);
        e.rows.push_back(std::move(row));
      }
    }
  }
  return ply;
}

void write_point_cloud_ply(const std::string& path, const PointCloud& pc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ply: cannot write " + path);
  const bool colors = !pc.colors.empty();
  const bool normals = !pc.normals.empty();
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << pc.positions.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
  if (colors) out << "property float red\nproperty float green\nproperty float blue\n";
  out << "end_header\n";
  for (size_t i = 0; i < pc.positions.size(); ++i) {
    const auto& p = pc.positions[i];
    out << format_f32(p[0]) << ' ' << format_f32(p[1]) << ' ' << format_f32(p[2]);
    if (normals) {
      const auto& n = pc.normals[i];
      out << ' ' << format_f32(n[0]) << ' ' << format_f32(n[1]) << ' ' << format_f32(n[2]);
    }
    if (colors) {
      const auto& c = pc.colors[i];
      out << ' ' << format_f32(c[0]) << ' ' << format_f32(c[1]) << ' ' << format_f32(c[2]);
    }
    out << '\n';
  }
}

PointCloud read_point_cloud_ply(const std::string& path) {
  const PlyFile ply = read_ply(path);
  const PlyElement* v = ply.find("vertex");
  if (!v) throw std::runtime_error("ply: no vertex element in " + path);
  auto col = [&](const std::string& name) {
    for (size_t i = 0; i < v->columns.size(); ++i)
      if (v->columns[i] == name) return int(i);
    return -1;
  };
  const int xi = col("x"), yi = col("y"), zi = col("z");
  if (xi < 0 || yi < 0 || zi < 0) throw std::runtime_error("ply: missing xyz in " + path);
  const int r = col("red"), g = col("green"), b = col("blue");
  const int nx = col("nx"), ny = col("ny"), nz = col("nz");
  // uchar colors (0..255) from external tools are rescaled
  const bool color_is_byte = [&] {
    if (r < 0) return false;
    for (const auto& row : v->rows)
      if (row[r] > 1.5) return true;
    return false;
  }();

  PointCloud pc;
  pc.positions.reserve(v->count);
  for (const auto& row : v->rows) {
    pc.positions.push_back({float(row[xi]), float(row[yi]), float(row[zi])});
    if (r >= 0 && g >= 0 && b >= 0) {
      Vec3<float> c{float(row[r]), float(row[g]), float(row[b])};
      if (color_is_byte) c /= 255.f;
      pc.colors.push_back(c);
    }
    if (nx >= 0 && ny >= 0 && nz >= 0)
      pc.normals.push_back({float(row[nx]), float(row[ny]), float(row[nz])});
  }
  return pc;
}

void write_mesh_ply(const std::string& path, const mesh::TriangleMesh& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ply: cannot write " + path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << m.vertices.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "element face " << m.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\n";
  out << "end_header\n";
  for (const auto& p : m.vertices)
    out << format_f32(p[0]) << ' ' << format_f32(p[1]) << ' ' << format_f32(p[2]) << '\n';
  for (const auto& t : m.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

mesh::TriangleMesh read_mesh_ply(const std::string& path) {
  const PlyFile ply = read_ply(path);
  const PlyElement* v = ply.find("vertex");
  const PlyElement* f = ply.find("face");
  if (!v) throw std::runtime_error("ply: no vertex element in " + path);
  mesh::TriangleMesh m;
  m.vertices.reserve(v->count);
  for (const auto& row : v->rows)
    m.vertices.push_back({float(row[0]), float(row[1]), float(row[2])});
  if (f) {
    for (const auto& idx : f->lists) {
      // fan-triangulate polygons
      for (size_t k = 2; k < idx.size(); ++k)
        m.triangles.push_back({idx[0], int(idx[k - 1]), int(idx[k])});
    }
  }
  return m;
}

}  // namespace splatsdf::io
