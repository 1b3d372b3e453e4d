#include <doctest.h>

#include <chrono>

#include "splatsdf/core/rng.hpp"
#include "splatsdf/mesh/marching_cubes.hpp"
#include "splatsdf/mesh/mesh.hpp"
#include "splatsdf/mesh/metrics.hpp"

using namespace splatsdf;

namespace {

mesh::ScalarField sphere_field(float radius) {
  return [radius](const MatX<float>& pts, VecX<float>& out) {
    for (Index i = 0; i < pts.rows(); ++i) out[i] = pts.row(i).norm() - radius;
  };
}

}  // namespace

TEST_CASE("marching cubes on the analytic sphere") {
  const BoundingBox box{{-1, -1, -1}, {1, 1, 1}};
  const float r = 0.5f;
  const int n = 64;
  const auto t0 = std::chrono::steady_clock::now();
  const mesh::TriangleMesh m = mesh::marching_cubes(sphere_field(r), box, n);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 30.0);
  REQUIRE(!m.empty());

  const float cell = 2.f / n;
  for (const auto& v : m.vertices) CHECK(std::abs(v.norm() - r) < 2 * cell);

  // area close to the analytic sphere area
  CHECK(m.area() == doctest::Approx(4 * 3.14159265 * r * r).epsilon(0.02));

  // triangle indices in range, no degenerate triangles after cleanup
  const mesh::TriangleMesh clean = mesh::cleanup(m);
  for (const auto& t : clean.triangles) {
    for (int k = 0; k < 3; ++k) {
      CHECK(t[k] >= 0);
      CHECK(t[k] < int(clean.vertices.size()));
    }
    const Vec3<float> e1 = clean.vertices[t[1]] - clean.vertices[t[0]];
    const Vec3<float> e2 = clean.vertices[t[2]] - clean.vertices[t[0]];
    CHECK(0.5f * e1.cross(e2).norm() > 0.f);
  }

  // consistent orientation: all triangle normals point outward for a sphere
  int outward = 0;
  for (const auto& t : m.triangles) {
    const Vec3<float> c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.f;
    const Vec3<float> nrm =
        (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
    if (nrm.dot(c) > 0) ++outward;
  }
  CHECK((outward == 0 || outward == int(m.triangles.size())));
}

TEST_CASE("marching cubes: constant field gives an empty mesh") {
  const BoundingBox box{{-1, -1, -1}, {1, 1, 1}};
  const mesh::ScalarField f = [](const MatX<float>& pts, VecX<float>& out) {
    out.setConstant(pts.rows(), 1.f);
  };
  const mesh::TriangleMesh m = mesh::marching_cubes(f, box, 16);
  CHECK(m.empty());
}

TEST_CASE("marching cubes: plane area within 2% of the cross-section") {
  const BoundingBox box{{-1, -1, -1}, {1, 1, 1}};
  const mesh::ScalarField f = [](const MatX<float>& pts, VecX<float>& out) {
    for (Index i = 0; i < pts.rows(); ++i) out[i] = pts(i, 2) + 0.13f;
  };
  const mesh::TriangleMesh m = mesh::marching_cubes(f, box, 32);
  REQUIRE(!m.empty());
  CHECK(m.area() == doctest::Approx(4.0).epsilon(0.02));
  for (const auto& v : m.vertices) CHECK(std::abs(v[2] + 0.13f) < 1e-4f);
}

TEST_CASE("surface sampling") {
  SUBCASE("one triangle: barycentric validity") {
    mesh::TriangleMesh m;
    m.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 3, 0}};
    m.triangles = {{0, 1, 2}};
    const auto pts = mesh::sample_surface(m, 500, 9);
    for (const auto& p : pts) {
      CHECK(p[2] == 0.f);
      CHECK(p[0] >= -1e-6f);
      CHECK(p[1] >= -1e-6f);
      CHECK(p[0] / 2 + p[1] / 3 <= 1.f + 1e-6f);
    }
  }
  SUBCASE("two triangles with 1:9 area split") {
    mesh::TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0},      // area 0.5
                  {5, 0, 0}, {8, 0, 0}, {5, 3, 0}};     // area 4.5
    m.triangles = {{0, 1, 2}, {3, 4, 5}};
    const int n = 20000;
    const auto pts = mesh::sample_surface(m, n, 11);
    int big = 0;
    for (const auto& p : pts)
      if (p[0] >= 4) ++big;
    // binomial: expect 0.9n, sd = sqrt(n*0.9*0.1) ~ 42; allow 5 sd
    CHECK(std::abs(big - int(0.9 * n)) < 5 * std::sqrt(n * 0.09));
  }
  SUBCASE("sphere mesh: mean radius within 1%") {
    const mesh::TriangleMesh m =
        mesh::marching_cubes(sphere_field(0.5f), {{-1, -1, -1}, {1, 1, 1}}, 48);
    const auto pts = mesh::sample_surface(m, 20000, 13);
    double mean_r = 0;
    for (const auto& p : pts) mean_r += p.norm();
    mean_r /= double(pts.size());
    CHECK(mean_r == doctest::Approx(0.5).epsilon(0.01));
  }
  SUBCASE("deterministic per seed; empty mesh errors") {
    mesh::TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    m.triangles = {{0, 1, 2}};
    const auto a = mesh::sample_surface(m, 100, 5);
    const auto b = mesh::sample_surface(m, 100, 5);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    mesh::TriangleMesh empty;
    CHECK_THROWS(mesh::sample_surface(empty, 10, 1));
  }
}

TEST_CASE("geo_metrics closed forms") {
  SUBCASE("identical clouds give (0,0,1,1,1)") {
    Rng rng(17);
    std::vector<Vec3<float>> pts;
    for (int i = 0; i < 500; ++i)
      pts.push_back({float(rng.normal()), float(rng.normal()), float(rng.normal())});
    const auto m = mesh::geo_metrics(pts, pts, 0.05);
    CHECK(m.accuracy == 0.0);
    CHECK(m.completion == 0.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f_score == 1.0);
  }
  SUBCASE("hand-built two-point example") {
    const std::vector<Vec3<float>> pred = {{0, 0, 0}, {1, 0, 0}};
    const std::vector<Vec3<float>> gt = {{0, 0, 0}};
    const auto m = mesh::geo_metrics(pred, gt, 0.5);
    CHECK(m.accuracy == doctest::Approx(0.5));
    CHECK(m.completion == 0.0);
    CHECK(m.precision == 0.5);
    CHECK(m.recall == 1.0);
    CHECK(m.f_score == doctest::Approx(2 * 0.5 * 1.0 / 1.5).epsilon(1e-9));
  }
  SUBCASE("scale covariance of P/R/F") {
    Rng rng(23);
    std::vector<Vec3<float>> pred, gt;
    for (int i = 0; i < 300; ++i) {
      pred.push_back({float(rng.normal()), float(rng.normal()), float(rng.normal())});
      gt.push_back({float(rng.normal()), float(rng.normal()), float(rng.normal())});
    }
    const auto m1 = mesh::geo_metrics(pred, gt, 0.1);
    for (auto& p : pred) p *= 10.f;
    for (auto& p : gt) p *= 10.f;
    const auto m2 = mesh::geo_metrics(pred, gt, 1.0);
    CHECK(m1.precision == doctest::Approx(m2.precision).epsilon(1e-6));
    CHECK(m1.recall == doctest::Approx(m2.recall).epsilon(1e-6));
    CHECK(m1.f_score == doctest::Approx(m2.f_score).epsilon(1e-6));
    CHECK(m2.accuracy == doctest::Approx(10 * m1.accuracy).epsilon(1e-4));
  }
  SUBCASE("swap symmetry") {
    Rng rng(29);
    std::vector<Vec3<float>> a, b;
    for (int i = 0; i < 200; ++i) {
      a.push_back({float(rng.normal()), float(rng.normal()), float(rng.normal())});
      b.push_back({float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)),
                   float(rng.uniform(-2, 2))});
    }
    const auto m1 = mesh::geo_metrics(a, b, 0.3);
    const auto m2 = mesh::geo_metrics(b, a, 0.3);
    CHECK(m1.accuracy == doctest::Approx(m2.completion).epsilon(1e-6));
    CHECK(m1.precision == doctest::Approx(m2.recall).epsilon(1e-6));
    CHECK(m1.f_score == doctest::Approx(m2.f_score).epsilon(1e-6));
  }
}

TEST_CASE("grid nearest neighbors equal brute force") {
  Rng rng(31);
  std::vector<Vec3<float>> q, t;
  for (int i = 0; i < 700; ++i)
    q.push_back({float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3))});
  for (int i = 0; i < 900; ++i)
    t.push_back({float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))});
  const auto fast = mesh::nn_distances(q, t, 0.05f);
  for (size_t i = 0; i < q.size(); ++i) {
    float best = 1e30f;
    for (const auto& p : t) best = std::min(best, (p - q[i]).norm());
    CHECK(fast[i] == doctest::Approx(best).epsilon(1e-6));
  }
}

TEST_CASE("psnr") {
  Image a(16, 12, 3, 0.25f);
  CHECK(mesh::psnr(a, a) == 99.0);

  Image b = a;
  for (auto& v : b.data) v += 0.1f;
  CHECK(mesh::psnr(a, b) == doctest::Approx(20.0).epsilon(1e-4));

  Rng rng(37);
  Image c = a;
  for (auto& v : c.data) v = float(rng.uniform());
  double mse = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - c.data[i];
    mse += d * d;
  }
  mse /= a.data.size();
  CHECK(mesh::psnr(a, c) == doctest::Approx(10 * std::log10(1 / mse)).epsilon(1e-9));
}

TEST_CASE("frustum filter keeps only points seen by some camera") {
  scene::Camera<float> cam;
  cam.fx = cam.fy = 50;
  cam.cx = 25;
  cam.cy = 25;
  cam.width = cam.height = 50;
  const std::vector<Vec3<float>> pts = {{0, 0, 2}, {0, 0, -2}, {5, 0, 2}};
  const auto kept = mesh::frustum_filter(pts, {cam});
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == pts[0]);
}
