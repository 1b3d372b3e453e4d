#include <doctest.h>

#include "splatsdf/mutual/mutual.hpp"
#include "splatsdf/sdf/field.hpp"

using namespace splatsdf;

namespace {

// exact plane SDF as a single linear layer: f(x) = n.x + b
sdf::SdfMlp<float> plane_field(const Vec3<float>& n, float offset) {
  sdf::SdfMlp<float> mlp;
  mlp.cfg.pe_freqs = 1;
  mlp.cfg.geo_hidden = 4;
  mlp.cfg.geo_layers = 1;
  mlp.cfg.skip_at = -1;
  mlp.cfg.feature_dim = 2;
  mlp.cfg.color_layers = 1;
  mlp.allocate();
  const Vec3<float> u = n.normalized();
  for (int a = 0; a < 3; ++a) mlp.geo_w[0](a, 0) = u[a];
  mlp.geo_b[0](0, 0) = offset;
  return mlp;
}

gs::GaussianPrimitive<float> prim_at(const Vec3<float>& p, float opacity_logit = 0.f) {
  gs::GaussianPrimitive<float> g;
  g.mean = p;
  g.opacity_logit = opacity_logit;
  g.log_scales = Vec3<float>::Constant(-3.f);
  return g;
}

}  // namespace

TEST_CASE("compute_eta closed forms and monotonicity") {
  CHECK(mutual::compute_eta(0.f, 0.7f, 1.f) == 1.f);
  CHECK(mutual::compute_eta(0.1f, 0.1f, 1.f) == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
  CHECK(mutual::compute_eta(0.1f, 0.1f, 1.f) == doctest::Approx(0.3679).epsilon(1e-3));
  // sigma = 0 degenerates to 0
  CHECK(mutual::compute_eta(0.2f, 0.f, 1.f) == 0.f);
  // even in S, monotone in |S| and sigma
  CHECK(mutual::compute_eta(0.05f, 0.9f, 1.f) == mutual::compute_eta(-0.05f, 0.9f, 1.f));
  CHECK(mutual::compute_eta(0.05f, 0.9f, 1.f) > mutual::compute_eta(0.05f, 0.1f, 1.f));
  CHECK(mutual::compute_eta(0.02f, 0.5f, 1.f) > mutual::compute_eta(0.3f, 0.5f, 1.f));
  for (float s : {-0.4f, -0.1f, 0.f, 0.2f, 0.7f})
    CHECK(mutual::compute_eta(s, 0.5f, 1.f) <= 1.f);
  CHECK_THROWS(mutual::compute_eta(0.1f, 0.5f, 0.f));
}

TEST_CASE("guidance grid tiles the box and counts primitives") {
  const auto field = plane_field({0, 0, 1}, 0.f);  // surface at z = 0
  gs::GaussianCloud<float> cloud;
  cloud.prims.push_back(prim_at({0.1f, 0.1f, 0.1f}));
  cloud.prims.push_back(prim_at({0.12f, 0.11f, 0.14f}));
  cloud.prims.push_back(prim_at({-0.7f, -0.7f, -0.7f}));
  cloud.sync_accumulators();
  const BoundingBox box{{-1, -1, -1}, {1, 1, 1}};
  const auto grid = mutual::build_guidance_grid(field, cloud, box, 4);
  CHECK(grid.cell_count() == 64);
  int total = 0;
  for (int c : grid.gauss_count) total += c;
  CHECK(total == 3);
  // SDF at a center one cell above the plane
  const int idx = grid.cell_of({0.1f, 0.1f, 0.75f});
  REQUIRE(idx >= 0);
  CHECK(grid.center_sdf[idx] == doctest::Approx(0.75).epsilon(1e-4));
}

TEST_CASE("global densification fills deficient near-surface cells") {
  const auto field = plane_field({0, 0, 1}, 0.f);
  const BoundingBox box{{-1, -1, -1}, {1, 1, 1}};
  mutual::DistributionThresholds th;
  th.tau_n = 4;
  th.k_neighbors = 5;

  gs::GaussianCloud<float> cloud;
  Rng seed_rng(5);
  // a loose clump near one corner of the surface; most surface cells deficient
  for (int i = 0; i < 12; ++i)
    cloud.prims.push_back(prim_at({0.8f + 0.05f * float(seed_rng.normal()),
                                   0.8f + 0.05f * float(seed_rng.normal()),
                                   0.02f * float(seed_rng.normal())},
                                  float(seed_rng.uniform(-1, 1))));
  cloud.sync_accumulators();

  Rng rng(7);
  const int added = mutual::global_densify(cloud, field, box, 8, th, rng);
  CHECK(added > 0);

  // postcondition: every near-surface cell reaches min(tau_n, prior + K)
  const auto grid = mutual::build_guidance_grid(field, cloud, box, 8);
  const float tau_s = 0.5f * grid.cell_diagonal();
  for (int c = 0; c < grid.cell_count(); ++c) {
    if (std::abs(grid.center_sdf[c]) >= tau_s) continue;
    CHECK(grid.gauss_count[c] >= th.tau_n);  // prior + K >= tau_n here since K > tau_n - 1
  }

  SUBCASE("gate not met leaves the cloud unchanged") {
    gs::GaussianCloud<float> far_cloud;
    for (int i = 0; i < 8; ++i) far_cloud.prims.push_back(prim_at({0.9f, 0.9f, 0.9f}));
    far_cloud.sync_accumulators();
    const auto far_field = plane_field({0, 0, 1}, -10.f);  // surface far outside the box
    Rng r2(1);
    CHECK(mutual::global_densify(far_cloud, far_field, box, 8, th, r2) == 0);
    CHECK(far_cloud.size() == 8);
  }

  SUBCASE("identical neighbors give identical children up to position clamping") {
    gs::GaussianCloud<float> same;
    for (int i = 0; i < 5; ++i) same.prims.push_back(prim_at({0.1f, 0.1f, 0.05f}, 0.3f));
    same.sync_accumulators();
    Rng r3(2);
    mutual::DistributionThresholds th2 = th;
    th2.k_neighbors = 5;
    th2.tau_n = 6;  // the clump's own cell must count as deficient
    const int n_added = mutual::global_densify(same, field, box, 8, th2, r3);
    REQUIRE(n_added > 0);
    for (size_t i = 5; i < same.size(); ++i) {
      CHECK(same.prims[i].opacity_logit == doctest::Approx(0.3f).epsilon(1e-6));
      CHECK((same.prims[i].log_scales - Vec3<float>::Constant(-3.f)).norm() < 1e-5f);
      CHECK(std::abs(same.prims[i].quat.norm() - 1.f) < 1e-6f);
    }
  }

  SUBCASE("empty cloud is a no-op") {
    gs::GaussianCloud<float> empty;
    Rng r4(3);
    CHECK(mutual::global_densify(empty, field, box, 8, th, r4) == 0);
  }
}

TEST_CASE("sdf_density_control: eta gates prune and densify independently") {
  const auto field = plane_field({0, 0, 1}, 0.f);
  mutual::DistributionThresholds th;
  th.tau_p = 0.05f;
  th.tau_d = 0.5f;
  th.lambda_sigma = 1.f;
  th.tau_g = 2e-4f;

  gs::GaussianCloud<float> cloud;
  // far floater (eta << tau_p), near-surface keeper, near-surface with gradient
  cloud.prims.push_back(prim_at({0, 0, 0.9f}, -2.f));      // far and dim: eta ~ 0, pruned
  cloud.prims.push_back(prim_at({0, 0, 0.001f}, 2.f));     // kept
  cloud.prims.push_back(prim_at({0.3f, 0, 0.002f}, 2.f));  // kept + densified
  cloud.sync_accumulators();
  cloud.grad_accum = {10.f, 0.f, 10.f};
  cloud.grad_count = {1, 1, 1};

  Rng rng(1);
  const auto stats = mutual::sdf_density_control(cloud, field, th, 10.f, rng);
  CHECK(stats.pruned == 1);
  CHECK(stats.cloned == 1);  // small scales -> clone path
  CHECK(cloud.size() == 3);  // 3 - 1 + 1

  // postcondition sweep: no survivor is below tau_p
  MatX<float> pts(cloud.size(), 3);
  for (size_t i = 0; i < cloud.size(); ++i) pts.row(i) = cloud.prims[i].mean.transpose();
  const auto ev = sdf::eval_geometry(field, pts, false);
  for (size_t i = 0; i < cloud.size(); ++i)
    CHECK(mutual::compute_eta(ev.sdf[i], cloud.prims[i].opacity(), th.lambda_sigma) >= th.tau_p);

  SUBCASE("eta above tau_d without gradient does nothing") {
    gs::GaussianCloud<float> c2;
    c2.prims.push_back(prim_at({0, 0, 0.001f}, 2.f));
    c2.sync_accumulators();
    c2.grad_accum = {0.f};
    c2.grad_count = {1};
    Rng r(2);
    const auto s2 = mutual::sdf_density_control(c2, field, th, 10.f, r);
    CHECK(s2.pruned == 0);
    CHECK(s2.cloned + s2.split == 0);
    CHECK(c2.size() == 1);
  }
}

TEST_CASE("plane-field prune decisions match the brute-force eta rule on a (d, sigma) grid") {
  const auto field = plane_field({0, 0, 1}, 0.f);
  mutual::DistributionThresholds th;
  th.tau_p = 0.05f;
  th.tau_d = 0.5f;
  th.lambda_sigma = 1.f;
  th.tau_g = 1e9f;  // no densification in this sweep

  const int nd = 50, ns = 50;
  gs::GaussianCloud<float> cloud;
  std::vector<float> dist(nd * ns), sig(nd * ns);
  for (int i = 0; i < nd; ++i)
    for (int j = 0; j < ns; ++j) {
      const float d = 0.001f + 0.5f * float(i) / nd;
      const float sigma = 0.02f + 0.96f * float(j) / ns;
      dist[i * ns + j] = d;
      sig[i * ns + j] = sigma;
      cloud.prims.push_back(prim_at({float(i) * 0.01f, float(j) * 0.01f, d},
                                    logit(sigma)));
    }
  cloud.sync_accumulators();

  Rng rng(3);
  gs::GaussianCloud<float> controlled = cloud;
  const auto stats = mutual::sdf_density_control(controlled, field, th, 10.f, rng);

  int expect_pruned = 0;
  for (int k = 0; k < nd * ns; ++k)
    if (std::exp(-dist[k] * dist[k] / (th.lambda_sigma * sig[k] * sig[k])) < th.tau_p)
      ++expect_pruned;
  CHECK(stats.pruned == expect_pruned);
  CHECK(controlled.size() == cloud.size() - expect_pruned);
}

TEST_CASE("guided_ray_range") {
  // D = 2.0, |S| = 0.1, gamma = 3 -> [1.7, 2.3]
  const auto [lo, hi] = mutual::guided_ray_range(2.0f, 0.1f, 3.f, 0.05f, 10.f);
  CHECK(lo == doctest::Approx(1.7).epsilon(1e-6));
  CHECK(hi == doctest::Approx(2.3).epsilon(1e-6));

  // clamped into the scene range and never empty
  const auto [lo2, hi2] = mutual::guided_ray_range(0.1f, 5.f, 3.f, 0.05f, 10.f);
  CHECK(lo2 == 0.05f);
  CHECK(hi2 == 10.f);
  const auto [lo3, hi3] = mutual::guided_ray_range(2.f, 0.f, 3.f, 0.05f, 10.f);
  CHECK(hi3 > lo3);
  CHECK(lo3 >= 0.05f);
  CHECK(hi3 <= 10.f);

  // uncovered pixel falls back to the full range
  const auto field = plane_field({0, 0, 1}, 0.f);
  const auto rr = mutual::guided_ray_range(field, Vec3<float>{0, 0, -1}, Vec3<float>{0, 0, 1},
                                           1.f, 0.5f, 0.1f, 3.f, 0.05f, 10.f);
  CHECK_FALSE(rr.guided);
  CHECK(rr.t_near == 0.05f);
  CHECK(rr.t_far == 10.f);

  // covered pixel: range centered on the surface point with width 2 gamma |S|
  const auto rr2 = mutual::guided_ray_range(field, Vec3<float>{0, 0, -1}, Vec3<float>{0, 0, 1},
                                            1.f, 0.9f, 0.9f, 3.f, 0.05f, 10.f);
  CHECK(rr2.guided);
  // surface point o + 0.9 v = (0,0,-0.1): |S| = 0.1 -> [0.6, 1.2]
  CHECK(rr2.t_near == doctest::Approx(0.6).epsilon(1e-3));
  CHECK(rr2.t_far == doctest::Approx(1.2).epsilon(1e-3));
}
