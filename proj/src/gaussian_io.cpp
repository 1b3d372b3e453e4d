#include <fstream>
#include <stdexcept>

#include "splatsdf/gs/gaussian.hpp"
#include "splatsdf/io/ply_io.hpp"

namespace splatsdf::gs {

void save_cloud_ply(const std::string& path, const GaussianCloud<float>& cloud) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cloud: cannot write " + path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  static const char* props[] = {"x",   "y",   "z",   "qw",  "qx",           "qy",  "qz",
                                "ls0", "ls1", "ls2", "opacity_logit", "red", "green", "blue"};
  for (const char* p : props) out << "property float " << p << "\n";
  out << "end_header\n";
  for (const auto& g : cloud.prims) {
    out << io::format_f32(g.mean[0]) << ' ' << io::format_f32(g.mean[1]) << ' '
        << io::format_f32(g.mean[2]);
    for (int i = 0; i < 4; ++i) out << ' ' << io::format_f32(g.quat[i]);
    for (int i = 0; i < 3; ++i) out << ' ' << io::format_f32(g.log_scales[i]);
    out << ' ' << io::format_f32(g.opacity_logit);
    for (int i = 0; i < 3; ++i) out << ' ' << io::format_f32(g.color[i]);
    out << '\n';
  }
}

GaussianCloud<float> load_cloud_ply(const std::string& path) {
  const io::PlyFile ply = io::read_ply(path);
  const io::PlyElement* v = ply.find("vertex");
  if (!v) throw std::runtime_error("cloud: no vertex element in " + path);
  auto col = [&](const std::string& name) {
    for (size_t i = 0; i < v->columns.size(); ++i)
      if (v->columns[i] == name) return int(i);
    throw std::runtime_error("cloud: missing property '" + name + "' in " + path);
  };
  const int xi = col("x"), yi = col("y"), zi = col("z");
  const int qw = col("qw"), qx = col("qx"), qy = col("qy"), qz = col("qz");
  const int l0 = col("ls0"), l1 = col("ls1"), l2 = col("ls2");
  const int ol = col("opacity_logit");
  const int r = col("red"), g = col("green"), b = col("blue");

  GaussianCloud<float> cloud;
  cloud.prims.reserve(v->count);
  for (const auto& row : v->rows) {
    GaussianPrimitive<float> p;
    p.mean = {float(row[xi]), float(row[yi]), float(row[zi])};
    p.quat = {float(row[qw]), float(row[qx]), float(row[qy]), float(row[qz])};
    p.log_scales = {float(row[l0]), float(row[l1]), float(row[l2])};
    p.opacity_logit = float(row[ol]);
    p.color = {float(row[r]), float(row[g]), float(row[b])};
    cloud.prims.push_back(p);
  }
  cloud.sync_accumulators();
  return cloud;
}

}  // namespace splatsdf::gs
