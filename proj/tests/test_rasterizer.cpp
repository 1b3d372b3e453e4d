#include <doctest.h>

#include "splatsdf/ad/finite_diff.hpp"
#include "splatsdf/core/rng.hpp"
#include "splatsdf/gs/densify.hpp"
#include "splatsdf/gs/rasterizer.hpp"

using namespace splatsdf;

namespace {

scene::Camera<double> test_camera(int w = 8, int h = 8) {
  scene::Camera<double> cam;
  cam.fx = cam.fy = w;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.width = w;
  cam.height = h;
  return cam;
}

gs::RasterizeOptions<double> smooth_options() {
  gs::RasterizeOptions<double> opts;
  opts.trunc_sigma = 1e3;  // keep the forward smooth for finite differences
  opts.min_alpha = 0;
  opts.stop_transmittance = 0;
  opts.background = {0.15, 0.3, 0.45};
  return opts;
}

// random scene away from the piecewise boundaries (axis ties, facing flips)
gs::GaussianCloud<double> random_cloud(Rng& rng, int n, const scene::Camera<double>& cam,
                                       double spread = 0.45) {
  gs::GaussianCloud<double> cloud;
  while (int(cloud.size()) < n) {
    gs::GaussianPrimitive<double> g;
    const double z = rng.uniform(1.5, 4.0);
    g.mean = {rng.uniform(-spread, spread) * z, rng.uniform(-spread, spread) * z, z};
    Vec4<double> q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    g.quat = q.normalized();
    g.log_scales = {rng.uniform(-2.5, -0.9), rng.uniform(-2.5, -0.9), rng.uniform(-2.5, -0.9)};
    // distinct scales so the shortest-axis choice is stable under perturbation
    std::sort(g.log_scales.data(), g.log_scales.data() + 3);
    if (g.log_scales[1] - g.log_scales[0] < 0.08 || g.log_scales[2] - g.log_scales[1] < 0.08)
      continue;
    g.opacity_logit = rng.uniform(-2.0, 2.3);
    g.color = {rng.uniform(), rng.uniform(), rng.uniform()};
    // keep the facing sign decisive
    const Vec3<double> nrm = gs::primitive_normal(g, cam);
    if (std::abs(nrm.dot((g.mean - cam.center()).normalized())) < 0.05) continue;
    cloud.prims.push_back(g);
  }
  cloud.sync_accumulators();
  return cloud;
}

constexpr int kParamsPerPrim = 14;

VecX<double> pack_cloud(const gs::GaussianCloud<double>& cloud) {
  VecX<double> p(kParamsPerPrim * cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    const auto& g = cloud.prims[i];
    double* q = p.data() + kParamsPerPrim * i;
    for (int a = 0; a < 3; ++a) q[a] = g.mean[a];
    for (int a = 0; a < 4; ++a) q[3 + a] = g.quat[a];
    for (int a = 0; a < 3; ++a) q[7 + a] = g.log_scales[a];
    q[10] = g.opacity_logit;
    for (int a = 0; a < 3; ++a) q[11 + a] = g.color[a];
  }
  return p;
}

void unpack_cloud(const VecX<double>& p, gs::GaussianCloud<double>& cloud) {
  for (size_t i = 0; i < cloud.size(); ++i) {
    auto& g = cloud.prims[i];
    const double* q = p.data() + kParamsPerPrim * i;
    for (int a = 0; a < 3; ++a) g.mean[a] = q[a];
    for (int a = 0; a < 4; ++a) g.quat[a] = q[3 + a];
    for (int a = 0; a < 3; ++a) g.log_scales[a] = q[7 + a];
    g.opacity_logit = q[10];
    for (int a = 0; a < 3; ++a) g.color[a] = q[11 + a];
  }
}

struct LossWeights {
  std::vector<Vec3<double>> wc;
  std::vector<double> wd;
  std::vector<Vec3<double>> wn;
};

LossWeights random_weights(Rng& rng, int w, int h) {
  LossWeights lw;
  for (int i = 0; i < w * h; ++i) {
    lw.wc.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    lw.wd.push_back(rng.uniform(-0.3, 0.3));
    lw.wn.push_back({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)});
  }
  return lw;
}

double weighted_output(const gs::RenderTarget<double>& rt, const LossWeights& lw) {
  double acc = 0;
  for (size_t i = 0; i < rt.color.size(); ++i) {
    acc += lw.wc[i].dot(rt.color[i]);
    acc += lw.wd[i] * rt.depth[i];
    acc += lw.wn[i].dot(rt.normal[i]);
  }
  return acc;
}

// max finite-difference error over every parameter of every primitive
double rasterizer_fd_error(gs::GaussianCloud<double> cloud, const scene::Camera<double>& cam,
                           const gs::RasterizeOptions<double>& opts, const LossWeights& lw) {
  gs::RasterizeCache<double> cache;
  const auto rt = gs::rasterize(cloud, cam, opts, &cache);
  gs::ImageGrads<double> gi;
  gi.color = lw.wc;
  gi.depth = lw.wd;
  gi.normal = lw.wn;
  const auto grads = gs::rasterize_backward(cloud, cam, opts, cache, gi);

  VecX<double> params = pack_cloud(cloud);
  VecX<double> analytic(params.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    double* q = analytic.data() + kParamsPerPrim * i;
    for (int a = 0; a < 3; ++a) q[a] = grads[i].mean[a];
    for (int a = 0; a < 4; ++a) q[3 + a] = grads[i].quat[a];
    for (int a = 0; a < 3; ++a) q[7 + a] = grads[i].log_scales[a];
    q[10] = grads[i].opacity_logit;
    for (int a = 0; a < 3; ++a) q[11 + a] = grads[i].color[a];
  }
  auto f = [&](const VecX<double>& p) {
    gs::GaussianCloud<double> c2 = cloud;
    unpack_cloud(p, c2);
    return weighted_output(gs::rasterize(c2, cam, opts), lw);
  };
  return ad::finite_diff_check(f, params, analytic, 1e-5);
}

}  // namespace

TEST_CASE("eval_gaussian closed forms") {
  gs::GaussianPrimitive<double> g;
  g.mean = {0.3, -0.2, 1.0};
  g.log_scales = {0, 0, 0};  // unit scales -> covariance ~ I
  CHECK(gs::eval_gaussian(g, g.mean) == doctest::Approx(1.0));

  const Vec3<double> x = g.mean + Vec3<double>{1, 0, 0};
  CHECK(gs::eval_gaussian(g, x) == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));

  // random anisotropic case against the direct quadratic form
  Rng rng(31);
  for (int k = 0; k < 20; ++k) {
    gs::GaussianPrimitive<double> h;
    h.mean = {rng.normal(), rng.normal(), rng.normal()};
    h.quat = Vec4<double>{rng.normal(), rng.normal(), rng.normal(), rng.normal()}.normalized();
    h.log_scales = {rng.uniform(-2, 0.5), rng.uniform(-2, 0.5), rng.uniform(-2, 0.5)};
    const Vec3<double> p{rng.normal(), rng.normal(), rng.normal()};
    const Mat3<double> cov = h.covariance();
    const Vec3<double> d = p - h.mean;
    const double direct = std::exp(-0.5 * d.dot(cov.inverse() * d));
    CHECK(gs::eval_gaussian(h, p) == doctest::Approx(direct).epsilon(1e-10));
  }

  gs::GaussianPrimitive<double> degenerate;
  degenerate.log_scales = {-400, -400, -400};
  CHECK_THROWS(gs::eval_gaussian(degenerate, Vec3<double>{0, 0, 0}, 0.0));
}

TEST_CASE("primitive_normal rules") {
  const auto cam = test_camera();  // at origin looking along +z
  gs::GaussianPrimitive<double> g;
  g.mean = {0, 0, 3};
  g.log_scales = {0, 0, std::log(0.01)};
  // shortest axis is z; camera looks along +z so the normal flips to face it
  CHECK((gs::primitive_normal(g, cam) - Vec3<double>{0, 0, -1}).norm() < 1e-12);

  // rotation equivariance up to sign
  Rng rng(5);
  const Vec4<double> q =
      Vec4<double>{rng.normal(), rng.normal(), rng.normal(), rng.normal()}.normalized();
  gs::GaussianPrimitive<double> h = g;
  h.quat = q;
  const Vec3<double> expect = quat_to_rot<double>(q).col(2);
  const Vec3<double> got = gs::primitive_normal(h, cam);
  CHECK(std::min((got - expect).norm(), (got + expect).norm()) < 1e-12);

  // isotropic scales tie-break to axis 0
  gs::GaussianPrimitive<double> iso;
  iso.mean = {0, 0, 3};
  iso.log_scales = {-1, -1, -1};
  const Vec3<double> n = gs::primitive_normal(iso, cam);
  CHECK(std::abs(std::abs(n[0]) - 1.0) < 1e-12);
}

TEST_CASE("single opaque primitive: exact color and depth") {
  auto cam = test_camera();
  gs::GaussianCloud<double> cloud;
  gs::GaussianPrimitive<double> g;
  g.mean = {0, 0, 3};  // projects exactly to the image center = pixel (4,4) corner
  g.log_scales = {-0.2, -0.2, -1.5};
  g.opacity_logit = 40;  // alpha == 1 in double as well as float
  g.color = {1, 0, 0};
  cloud.prims.push_back(g);
  cloud.sync_accumulators();

  // place the projection exactly on the center of pixel (3,3): u = 3.5
  cam.cx = 3.5 - cam.fx * g.mean[0] / g.mean[2] + 0;
  cam.cy = 3.5;
  auto opts = smooth_options();
  const auto rt = gs::rasterize(cloud, cam, opts);
  const size_t px = 3 * 8 + 3;
  CHECK(rt.color[px][0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rt.color[px][1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rt.depth[px] == 3.0);  // exact
  CHECK(rt.alpha[px] == 1.0);
}

TEST_CASE("two-layer alpha compositing against manual arithmetic") {
  auto cam = test_camera();
  auto opts = smooth_options();
  opts.background = {0, 0, 0};

  gs::GaussianCloud<double> cloud;
  gs::GaussianPrimitive<double> red, green;
  red.mean = {-0.0625, -0.0625, 2};  // pixel (3,3) center ray: u=v=3.5 -> x=y=-0.0625*z/2
  red.log_scales = {1.0, 1.0, 1.0};  // huge -> G' ~ 1 across the pixel
  red.opacity_logit = 0;             // alpha 0.5
  red.color = {1, 0, 0};
  green = red;
  green.mean = {-0.09375, -0.09375, 3};
  green.opacity_logit = 40;  // alpha 1
  green.color = {0, 1, 0};
  cloud.prims.push_back(red);
  cloud.prims.push_back(green);
  cloud.sync_accumulators();

  const auto rt = gs::rasterize(cloud, cam, opts);
  const size_t px = 3 * 8 + 3;
  // sigma_red at the pixel center is alpha * G'(center)=0.5*~1
  CHECK(rt.color[px][0] == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(rt.color[px][1] == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(rt.depth[px] == doctest::Approx(0.5 * 2 + 0.5 * 3).epsilon(1e-3));
}

TEST_CASE("storage order invariance") {
  Rng rng(77);
  const auto cam = test_camera();
  const auto opts = smooth_options();
  auto cloud = random_cloud(rng, 8, cam);
  const auto rt1 = gs::rasterize(cloud, cam, opts);

  // rotate the storage order
  std::rotate(cloud.prims.begin(), cloud.prims.begin() + 3, cloud.prims.end());
  const auto rt2 = gs::rasterize(cloud, cam, opts);
  for (size_t i = 0; i < rt1.color.size(); ++i) {
    CHECK((rt1.color[i] - rt2.color[i]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(rt1.depth[i] - rt2.depth[i]) < 1e-12);
  }
}

TEST_CASE("compositing weights telescope: sum w <= 1, transmittance non-increasing") {
  Rng rng(13);
  const auto cam = test_camera(12, 10);
  auto opts = smooth_options();
  for (int rep = 0; rep < 5; ++rep) {
    const auto cloud = random_cloud(rng, 10, cam);
    gs::RasterizeCache<double> cache;
    const auto rt = gs::rasterize(cloud, cam, opts, &cache);
    for (size_t px = 0; px < rt.alpha.size(); ++px) {
      CHECK(rt.alpha[px] >= -1e-12);
      CHECK(rt.alpha[px] <= 1.0 + 1e-6);
      // walk the sorted pair list: T strictly follows the telescoping product
      double t = 1.0, wsum = 0.0;
      for (std::int64_t s = cache.pixel_offset[px]; s < cache.pixel_offset[px + 1]; ++s) {
        const auto p = cache.pixel_pairs[s];
        CHECK(cache.pair_T[p] == doctest::Approx(t).epsilon(1e-12));
        CHECK(cache.pair_T[p] <= t + 1e-12);  // non-increasing
        wsum += cache.pair_sigma[p] * cache.pair_T[p];
        t *= (1.0 - cache.pair_sigma[p]);
      }
      CHECK(wsum <= 1.0 + 1e-6);
      CHECK(wsum == doctest::Approx(rt.alpha[px]).epsilon(1e-9));
    }
  }
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(2024);
  const auto cam = test_camera();
  const auto opts = smooth_options();
  double worst = 0;
  for (int rep = 0; rep < 10; ++rep) {
    const auto cloud = random_cloud(rng, 6, cam);
    const auto lw = random_weights(rng, cam.width, cam.height);
    worst = std::max(worst, rasterizer_fd_error(cloud, cam, opts, lw));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("gradients with normalized normal blending") {
  Rng rng(555);
  const auto cam = test_camera();
  auto opts = smooth_options();
  opts.normalize_normals = true;
  double worst = 0;
  for (int rep = 0; rep < 4; ++rep) {
    const auto cloud = random_cloud(rng, 5, cam);
    const auto lw = random_weights(rng, cam.width, cam.height);
    worst = std::max(worst, rasterizer_fd_error(cloud, cam, opts, lw));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("gradients with the projection-jacobian clamp active") {
  Rng rng(99);
  const auto cam = test_camera();
  auto opts = smooth_options();
  gs::GaussianCloud<double> cloud = random_cloud(rng, 4, cam);
  // push one primitive well past the 1.3x field-of-view clamp
  cloud.prims[0].mean = {1.9, 0.1, 2.0};
  const auto lw = random_weights(rng, cam.width, cam.height);
  CHECK(rasterizer_fd_error(cloud, cam, opts, lw) < 1e-3);
}

TEST_CASE("behind-camera primitives are skipped with a counter") {
  const auto cam = test_camera();
  const auto opts = smooth_options();
  gs::GaussianCloud<double> cloud;
  gs::GaussianPrimitive<double> g;
  g.mean = {0, 0, -2};
  cloud.prims.push_back(g);
  g.mean = {0, 0, 3};
  cloud.prims.push_back(g);
  cloud.sync_accumulators();
  gs::RasterizeCache<double> cache;
  const auto rt = gs::rasterize(cloud, cam, opts, &cache);
  CHECK(cache.skipped == 1);
  CHECK(rt.alpha[8 * 4 + 4] > 0);  // the visible one still renders
}

TEST_CASE("empty cloud renders the background") {
  const auto cam = test_camera();
  auto opts = smooth_options();
  gs::GaussianCloud<double> cloud;
  const auto rt = gs::rasterize(cloud, cam, opts);
  for (const auto& c : rt.color) CHECK((c - opts.background).norm() == 0.0);
  for (double d : rt.depth) CHECK(d == 0.0);
}

TEST_CASE("densify split/clone mechanics") {
  Rng rng(8);
  gs::GaussianCloud<double> cloud;
  gs::GaussianPrimitive<double> small, large;
  small.mean = {0, 0, 2};
  small.log_scales = Vec3<double>::Constant(std::log(0.01));
  large.mean = {1, 0, 2};
  large.log_scales = Vec3<double>::Constant(std::log(0.5));
  cloud.prims = {small, large};
  cloud.sync_accumulators();

  SUBCASE("all gradients zero leaves the cloud unchanged") {
    const auto stats = gs::densify_split_clone(cloud, 1e-4, 0.1, rng);
    CHECK(cloud.size() == 2);
    CHECK(stats.cloned + stats.split == 0);
  }
  SUBCASE("high-gradient large primitive splits with scales / 1.6") {
    cloud.grad_accum = {0.0, 1.0};
    cloud.grad_count = {1, 1};
    const auto stats = gs::densify_split_clone(cloud, 1e-4, 0.1, rng);
    CHECK(stats.split == 1);
    CHECK(cloud.size() == 3);
    CHECK(cloud.prims[1].log_scales[0] ==
          doctest::Approx(std::log(0.5) - std::log(1.6)).epsilon(1e-12));
    CHECK(cloud.prims[2].log_scales[0] ==
          doctest::Approx(std::log(0.5) - std::log(1.6)).epsilon(1e-12));
  }
  SUBCASE("high-gradient small primitive clones identically") {
    cloud.grad_accum = {1.0, 0.0};
    cloud.grad_count = {1, 1};
    const auto stats = gs::densify_split_clone(cloud, 1e-4, 0.1, rng);
    CHECK(stats.cloned == 1);
    REQUIRE(cloud.size() == 3);
    CHECK(cloud.prims[2].mean == cloud.prims[0].mean);
    CHECK(cloud.prims[2].log_scales == cloud.prims[0].log_scales);
  }
}
