#include <doctest.h>

#include "splatsdf/core/rng.hpp"
#include "splatsdf/priors/priors.hpp"

using namespace splatsdf;

namespace {

priors::EdgeMap make_edge_map(int w, int h, int edge_count, float threshold = 0.3f) {
  Image strength(w, h, 1, 0.f);
  Rng rng(17);
  int placed = 0;
  while (placed < edge_count) {
    const int idx = int(rng.uniform_int(size_t(w) * h));
    if (strength.data[idx] > 0) continue;
    strength.data[idx] = 0.5f + 0.5f * float(rng.uniform());
    ++placed;
  }
  return priors::EdgeMap::from_strength(strength, threshold);
}

}  // namespace

TEST_CASE("edge_ray_weight arithmetic") {
  CHECK(priors::edge_ray_weight(make_edge_map(10, 10, 0), 2.f) == 0.f);

  // H=W=100, N_edge=2000, delta=2 -> 0.4
  const priors::EdgeMap e = make_edge_map(100, 100, 2000);
  CHECK(e.edge_count() == 2000);
  CHECK(priors::edge_ray_weight(e, 2.f) == doctest::Approx(0.4).epsilon(1e-6));

  // huge delta clamps to 1
  CHECK(priors::edge_ray_weight(e, 1e6f) == 1.f);
  CHECK_THROWS(priors::edge_ray_weight(e, -1.f));

  // linear below the clamp
  CHECK(priors::edge_ray_weight(e, 1.f) == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(priors::edge_ray_weight(make_edge_map(100, 100, 1000), 2.f) ==
        doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("photometric_weight bounds and monotonicity") {
  CHECK(priors::photometric_weight(0.f) == doctest::Approx(1.0));
  CHECK(priors::photometric_weight(1.f) == doctest::Approx(2.0 / (1.0 + std::exp(-1.0))).epsilon(1e-6));
  CHECK(priors::photometric_weight(1.f) == doctest::Approx(1.4621).epsilon(1e-3));
  CHECK(priors::photometric_weight(40.f) == doctest::Approx(2.0).epsilon(1e-9));
  float prev = 0;
  for (float e = 0.f; e <= 1.f; e += 0.05f) {
    const float w = priors::photometric_weight(e);
    CHECK(w >= 1.f);
    CHECK(w < 2.f);
    CHECK(w >= prev);
    prev = w;
  }
}

TEST_CASE("sample_ray_pixels: exact edge-ray counts") {
  const priors::EdgeMap e = make_edge_map(100, 100, 2000);
  auto count_edge = [&](const std::vector<int>& pix) {
    int n = 0;
    for (int p : pix) n += e.binary[p];
    return n;
  };

  SUBCASE("omega = 0 -> all rays uniform") {
    const priors::EdgeMap none = make_edge_map(64, 64, 0);
    Rng rng(1);
    const auto pix = priors::sample_ray_pixels(none, 500, 2.f, rng);
    CHECK(pix.size() == 500);
  }
  SUBCASE("omega = 1 -> all rays from the edge set") {
    Rng rng(2);
    const auto pix = priors::sample_ray_pixels(e, 400, 100.f, rng);  // clamped to 1
    CHECK(count_edge(pix) == 400);
  }
  SUBCASE("omega = 0.3 with q = 1000 -> exactly 300 edge rays") {
    const priors::EdgeMap e3 = make_edge_map(100, 100, 1500);  // omega = 2*0.15 = 0.3
    Rng rng(3);
    const auto pix = priors::sample_ray_pixels(e3, 1000, 2.f, rng);
    int in_edge = 0;
    for (size_t i = 0; i < 300; ++i) in_edge += e3.binary[pix[i]];
    CHECK(in_edge == 300);  // the first round(omega q) draws come from the edge set
  }
  SUBCASE("deterministic per seed, exact count over many seeds") {
    const priors::EdgeMap e4 = make_edge_map(50, 50, 250);  // omega = 0.2
    const int q = 640;
    const int expect = int(std::lround(priors::edge_ray_weight(e4, 2.f) * q));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const auto pix = priors::sample_ray_pixels(e4, q, 2.f, rng);
      int from_edge = 0;
      for (int i = 0; i < expect; ++i) from_edge += e4.binary[pix[i]];
      CHECK(from_edge == expect);
    }
    Rng ra(7), rb(7);
    CHECK(priors::sample_ray_pixels(e4, q, 2.f, ra) == priors::sample_ray_pixels(e4, q, 2.f, rb));
  }
  SUBCASE("empty edge set with positive omega falls back to uniform") {
    priors::EdgeMap weird = make_edge_map(10, 10, 0);
    weird.edge_pixels.clear();
    Rng rng(4);
    const auto pix = priors::sample_ray_pixels(weird, 100, 5.f, rng);
    CHECK(pix.size() == 100);
  }
}

TEST_CASE("normal_residual") {
  const int w = 8, h = 6;
  priors::NormalMap a, b;
  a.width = b.width = w;
  a.height = b.height = h;
  a.normals.assign(size_t(w) * h, {0, 0, 1});
  b.normals.assign(size_t(w) * h, {0, 0, 1});

  CHECK(priors::normal_residual(a, b) == 0.0);

  // opposite unit vectors differ by 2 in component L1
  for (auto& n : a.normals) n = {0, 0, -1};
  CHECK(priors::normal_residual(a, b) == doctest::Approx(2.0));

  // random maps equal the brute-force per-pixel sum
  Rng rng(5);
  for (auto& n : a.normals)
    n = Vec3<float>{float(rng.normal()), float(rng.normal()), float(rng.normal())}.normalized();
  for (auto& n : b.normals)
    n = Vec3<float>{float(rng.normal()), float(rng.normal()), float(rng.normal())}.normalized();
  b.normals[3] = {0, 0, 0};  // invalid prior pixel is masked out
  double manual = 0;
  int valid = 0;
  for (size_t i = 0; i < a.normals.size(); ++i) {
    if (b.normals[i].squaredNorm() < 0.25f) continue;
    manual += (a.normals[i] - b.normals[i]).cwiseAbs().sum();
    ++valid;
  }
  CHECK(priors::normal_residual(a, b) == doctest::Approx(manual / valid).epsilon(1e-6));

  // zero valid prior pixels -> 0 with a warning
  for (auto& n : b.normals) n = {0, 0, 0};
  CHECK(priors::normal_residual(a, b) == 0.0);
}
