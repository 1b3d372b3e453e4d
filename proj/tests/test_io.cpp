#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "splatsdf/core/rng.hpp"
#include "splatsdf/gs/gaussian.hpp"
#include "splatsdf/io/png_io.hpp"
#include "splatsdf/io/ply_io.hpp"

using namespace splatsdf;
namespace fs = std::filesystem;

namespace {
fs::path tmp_dir() {
  const fs::path p = fs::temp_directory_path() / "splatsdf_io_test";
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("png 8-bit round trip is exact at 8-bit precision") {
  Rng rng(1);
  Image img(17, 13, 3);
  for (auto& v : img.data) v = float(rng.uniform());
  const std::string path = (tmp_dir() / "rt8.png").string();
  io::write_png8(path, img);
  const Image back = io::read_png(path);
  REQUIRE(back.same_shape(img));
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5f / 255.f + 1e-6f);
}

TEST_CASE("png 16-bit round trip") {
  Rng rng(2);
  Image img(9, 21, 1);
  for (auto& v : img.data) v = float(rng.uniform());
  const std::string path = (tmp_dir() / "rt16.png").string();
  io::write_png16(path, img);
  const Image back = io::read_png(path);
  REQUIRE(back.same_shape(img));
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5f / 65535.f + 1e-7f);
}

TEST_CASE("normal map encode/decode keeps unit vectors and invalid markers") {
  Image normals(4, 3, 3);
  Rng rng(3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) {
      Vec3<float> n{float(rng.normal()), float(rng.normal()), float(rng.normal())};
      normals.set_rgb(x, y, n.normalized());
    }
  normals.set_rgb(0, 0, {0, 0, 0});  // invalid marker
  const std::string path = (tmp_dir() / "nrm.png").string();
  io::write_png16(path, io::encode_normal_map(normals));
  const Image decoded = io::decode_normal_map(io::read_png(path));
  CHECK(decoded.rgb(0, 0).norm() == 0.f);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) {
      if (x == 0 && y == 0) continue;
      CHECK((decoded.rgb(x, y) - normals.rgb(x, y)).norm() < 1e-3f);
      CHECK(std::abs(decoded.rgb(x, y).norm() - 1.f) < 1e-3f);
    }
}

TEST_CASE("point cloud ply round trip is float32-lossless") {
  Rng rng(4);
  io::PointCloud pc;
  for (int i = 0; i < 50; ++i) {
    pc.positions.push_back({float(rng.normal()) * 3, float(rng.normal()), float(rng.uniform())});
    pc.colors.push_back({float(rng.uniform()), float(rng.uniform()), float(rng.uniform())});
    pc.normals.push_back(
        Vec3<float>{float(rng.normal()), float(rng.normal()), float(rng.normal())}.normalized());
  }
  const std::string path = (tmp_dir() / "pc.ply").string();
  io::write_point_cloud_ply(path, pc);
  const io::PointCloud back = io::read_point_cloud_ply(path);
  REQUIRE(back.size() == pc.size());
  for (size_t i = 0; i < pc.size(); ++i) {
    CHECK(back.positions[i] == pc.positions[i]);  // bitwise via %.9g
    CHECK(back.colors[i] == pc.colors[i]);
    CHECK(back.normals[i] == pc.normals[i]);
  }
}

TEST_CASE("mesh ply round trip") {
  mesh::TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.25f, 0.25f, 1.5f}};
  m.triangles = {{0, 1, 2}, {0, 1, 3}, {1, 2, 3}};
  const std::string path = (tmp_dir() / "mesh.ply").string();
  io::write_mesh_ply(path, m);
  const mesh::TriangleMesh back = io::read_mesh_ply(path);
  REQUIRE(back.vertices.size() == 4);
  REQUIRE(back.triangles.size() == 3);
  CHECK(back.vertices[3] == m.vertices[3]);
  CHECK(back.triangles[2] == m.triangles[2]);
}

TEST_CASE("gaussian cloud checkpoint round trip is float32-lossless") {
  Rng rng(5);
  gs::GaussianCloud<float> cloud;
  for (int i = 0; i < 30; ++i) {
    gs::GaussianPrimitive<float> g;
    g.mean = {float(rng.normal()), float(rng.normal()), float(rng.normal())};
    g.quat = Vec4<float>{float(rng.normal()), float(rng.normal()), float(rng.normal()),
                         float(rng.normal())}
                 .normalized();
    g.log_scales = {float(rng.uniform(-6, 0)), float(rng.uniform(-6, 0)),
                    float(rng.uniform(-6, 0))};
    g.opacity_logit = float(rng.uniform(-4, 4));
    g.color = {float(rng.uniform()), float(rng.uniform()), float(rng.uniform())};
    cloud.prims.push_back(g);
  }
  const std::string path = (tmp_dir() / "cloud.ply").string();
  gs::save_cloud_ply(path, cloud);
  const auto back = gs::load_cloud_ply(path);
  REQUIRE(back.size() == cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    CHECK(back.prims[i].mean == cloud.prims[i].mean);
    CHECK(back.prims[i].quat == cloud.prims[i].quat);
    CHECK(back.prims[i].log_scales == cloud.prims[i].log_scales);
    CHECK(back.prims[i].opacity_logit == cloud.prims[i].opacity_logit);
    CHECK(back.prims[i].color == cloud.prims[i].color);
  }
}
