#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <cmath>
#include <vector>

#include "splatsdf/core/parallel.hpp"
#include "splatsdf/gs/gaussian.hpp"
#include "splatsdf/scene/camera.hpp"

namespace splatsdf::gs {

template <class S>
struct RasterizeOptions {
  Vec3<S> background = Vec3<S>::Zero();
  S trunc_sigma = S(3);         // 2D footprint cutoff in standard deviations
  S alpha_clamp = S(1);         // per-sample opacity ceiling
  S min_alpha = S(1.0 / 255.0); // contributions below this are dropped
  S stop_transmittance = S(1e-4);
  S blur = S(0.3);              // 2D covariance dilation (EWA low-pass)
  S cov_reg = S(1e-8);
  S near_clip = S(0.05);
  bool normalize_normals = false;  // divide blended normal by accumulated alpha
};

template <class S>
struct RenderTarget {
  int width = 0, height = 0;
  std::vector<Vec3<S>> color;
  std::vector<S> depth;
  std::vector<Vec3<S>> normal;
  std::vector<S> alpha;

  void init(int w, int h, const Vec3<S>& bg) {
    width = w;
    height = h;
    color.assign(size_t(w) * h, bg);
    depth.assign(size_t(w) * h, S(0));
    normal.assign(size_t(w) * h, Vec3<S>::Zero());
    alpha.assign(size_t(w) * h, S(0));
  }
};

// dL/d(render outputs); an empty vector means an all-zero gradient.
template <class S>
struct ImageGrads {
  std::vector<Vec3<S>> color;
  std::vector<S> depth;
  std::vector<Vec3<S>> normal;
};

// Direction of the primitive's shortest axis, flipped toward the camera.
// Ties pick the lowest axis index.
template <class S>
Vec3<S> primitive_normal(const GaussianPrimitive<S>& g, const scene::Camera<S>& cam) {
  const Vec3<S> s = g.scales();
  int axis = 0;
  if (s[1] < s[0]) axis = 1;
  if (s[2] < s[axis]) axis = 2;
  const Mat3<S> r = g.rotation();
  Vec3<S> n = r.col(axis);
  const Vec3<S> view = g.mean - cam.center();
  if (n.dot(view) > 0) n = -n;
  return n;
}

// Forward state kept for the analytic backward pass.
template <class S>
struct RasterizeCache {
  int width = 0, height = 0;

  // per primitive
  std::vector<std::uint8_t> valid;
  std::vector<Vec3<S>> pcam;
  std::vector<Vec2<S>> mean2d;
  std::vector<Vec3<S>> conic;  // (a, b, c) of inverse 2D covariance
  std::vector<Mat2<S>> cov2;
  std::vector<Mat23<S>> t2;    // J * W
  std::vector<Mat3<S>> rot;
  std::vector<S> alpha;
  std::vector<Vec3<S>> normal; // world frame, camera-facing
  std::vector<std::int8_t> normal_axis;
  std::vector<S> normal_sign;
  std::vector<S> txc, tyc;     // clamped tx, ty used in the projection Jacobian
  std::vector<std::uint8_t> tx_clamped, ty_clamped;

  // pairs grouped by primitive
  std::vector<std::int64_t> pair_offset;  // size N+1
  std::vector<std::int32_t> pair_pixel;
  std::vector<std::int32_t> pair_gauss;
  std::vector<S> pair_sigma;
  std::vector<S> pair_T;       // transmittance in front of this pair; 0 = not composited
  std::vector<S> pair_gsigma;  // backward scratch

  // per pixel: sorted pair indices
  std::vector<std::int64_t> pixel_offset;  // size W*H+1
  std::vector<std::int32_t> pixel_pairs;
  std::vector<S> final_T;

  std::int64_t skipped = 0;  // behind camera / non-finite projections

  // reusable scratch (kept across calls to avoid allocation churn)
  struct Scratch {
    std::vector<std::vector<std::int32_t>> wpixel, wgauss;
    std::vector<std::vector<S>> wsigma;
    std::vector<std::int64_t> wbase;
    std::vector<std::uint64_t> keys;
    std::vector<std::int32_t> pixel_count, cursor;
  } scratch;
};

namespace detail {

template <class S>
void project_primitives(const GaussianCloud<S>& cloud, const scene::Camera<S>& cam,
                        const RasterizeOptions<S>& opts, RasterizeCache<S>& c,
                        std::vector<Eigen::Vector4i>& bbox) {
  const size_t n = cloud.size();
  c.width = cam.width;
  c.height = cam.height;
  c.valid.assign(n, 0);
  c.pcam.resize(n);
  c.mean2d.resize(n);
  c.conic.resize(n);
  c.cov2.resize(n);
  c.t2.resize(n);
  c.rot.resize(n);
  c.alpha.resize(n);
  c.normal.resize(n);
  c.normal_axis.resize(n);
  c.normal_sign.resize(n);
  c.txc.resize(n);
  c.tyc.resize(n);
  c.tx_clamped.assign(n, 0);
  c.ty_clamped.assign(n, 0);
  bbox.assign(n, Eigen::Vector4i::Zero());

  const S limx = S(1.3) * (S(0.5) * cam.width / cam.fx);
  const S limy = S(1.3) * (S(0.5) * cam.height / cam.fy);
  std::atomic<std::int64_t> skipped{0};

  parallel_for_each(std::int64_t(n), [&](std::int64_t i) {
    const GaussianPrimitive<S>& g = cloud.prims[i];
    const Vec3<S> pc = cam.to_camera(g.mean);
    if (!(pc[2] > opts.near_clip)) {
      ++skipped;
      return;
    }
    const S tz = pc[2];
    const Vec2<S> m2d{cam.fx * pc[0] / tz + cam.cx, cam.fy * pc[1] / tz + cam.cy};

    // clamped camera-space point for the affine projection Jacobian
    const S rx = pc[0] / tz, ry = pc[1] / tz;
    const bool cxf = rx < -limx || rx > limx;
    const bool cyf = ry < -limy || ry > limy;
    const S txc = cxf ? std::clamp(rx, -limx, limx) * tz : pc[0];
    const S tyc = cyf ? std::clamp(ry, -limy, limy) * tz : pc[1];

    Mat23<S> jac;
    jac << cam.fx / tz, S(0), -cam.fx * txc / (tz * tz),
           S(0), cam.fy / tz, -cam.fy * tyc / (tz * tz);
    const Mat23<S> t2 = jac * cam.rot;

    const Mat3<S> rot = g.rotation();
    const Vec3<S> sc = g.scales();
    const Mat3<S> m3 = rot * sc.asDiagonal();
    const Mat3<S> cov3 = m3 * m3.transpose() + opts.cov_reg * Mat3<S>::Identity();
    Mat2<S> cov2 = t2 * cov3 * t2.transpose();
    cov2(0, 0) += opts.blur;
    cov2(1, 1) += opts.blur;

    const S det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(1, 0);
    if (!(det > S(0)) || !std::isfinite(det) || !m2d.allFinite()) {
      ++skipped;
      return;
    }
    const Vec3<S> conic{cov2(1, 1) / det, -cov2(0, 1) / det, cov2(0, 0) / det};

    // footprint radius from the largest eigenvalue
    const S mid = S(0.5) * (cov2(0, 0) + cov2(1, 1));
    const S lam = mid + std::sqrt(std::max(S(0.01), mid * mid - det));
    S radius = opts.trunc_sigma * std::sqrt(lam);
    radius = std::min(radius, S(2) * S(std::max(cam.width, cam.height)));

    const int x0 = std::max(0, int(std::floor(m2d[0] - radius)));
    const int x1 = std::min(cam.width - 1, int(std::ceil(m2d[0] + radius)));
    const int y0 = std::max(0, int(std::floor(m2d[1] - radius)));
    const int y1 = std::min(cam.height - 1, int(std::ceil(m2d[1] + radius)));
    if (x0 > x1 || y0 > y1) return;  // off-screen, not an error

    // shortest-axis normal
    int axis = 0;
    if (sc[1] < sc[0]) axis = 1;
    if (sc[2] < sc[axis]) axis = 2;
    Vec3<S> nrm = rot.col(axis);
    S sign = S(1);
    if (nrm.dot(g.mean - cam.center()) > 0) {
      sign = S(-1);
      nrm = -nrm;
    }

    c.valid[i] = 1;
    c.pcam[i] = pc;
    c.mean2d[i] = m2d;
    c.conic[i] = conic;
    c.cov2[i] = cov2;
    c.t2[i] = t2;
    c.rot[i] = rot;
    c.alpha[i] = g.opacity();
    c.normal[i] = nrm;
    c.normal_axis[i] = std::int8_t(axis);
    c.normal_sign[i] = sign;
    c.txc[i] = txc;
    c.tyc[i] = tyc;
    c.tx_clamped[i] = cxf;
    c.ty_clamped[i] = cyf;
    bbox[i] = {x0, x1, y0, y1};
  });
  c.skipped = skipped.load();
}

template <class S>
inline S pair_power(const Vec3<S>& conic, const Vec2<S>& d) {
  return conic[0] * d[0] * d[0] + S(2) * conic[1] * d[0] * d[1] + conic[2] * d[1] * d[1];
}

}  // namespace detail

// Differentiable front-to-back compositing of the cloud into color, depth
// (camera z), blended shortest-axis normals, and accumulated opacity.
// Depth ordering is a global per-pixel sort on (camera z, primitive index).
template <class S>
RenderTarget<S> rasterize(const GaussianCloud<S>& cloud, const scene::Camera<S>& cam,
                          const RasterizeOptions<S>& opts, RasterizeCache<S>* cache_out = nullptr) {
#ifdef SPLATSDF_RASTER_TIMING
  using Tclk = std::chrono::steady_clock;
  auto tick = Tclk::now();
  auto lap = [&tick](const char* name) {
    auto now = Tclk::now();
    std::fprintf(stderr, "  [raster] %-10s %7.2f ms\n", name,
                 std::chrono::duration<double, std::milli>(now - tick).count());
    tick = now;
  };
#else
  auto lap = [](const char*) {};
#endif
  RasterizeCache<S> local;
  RasterizeCache<S>& c = cache_out ? *cache_out : local;

  RenderTarget<S> out;
  out.init(cam.width, cam.height, opts.background);
  const size_t n = cloud.size();
  const size_t npix = size_t(cam.width) * cam.height;
  c.final_T.assign(npix, S(1));
  if (n == 0) {
    c.pair_offset.assign(1, 0);
    c.pixel_offset.assign(npix + 1, 0);
    return out;
  }

  std::vector<Eigen::Vector4i> bbox;
  detail::project_primitives(cloud, cam, opts, c, bbox);
  lap("project");

  // single fused pass: workers own contiguous primitive ranges, so
  // concatenating their buffers in worker order keeps pairs grouped by
  // primitive for any worker count
  ThreadPool& pool = ThreadPool::global();
  const int nworkers = pool.workers();
  auto& wpixel = c.scratch.wpixel;
  auto& wgauss = c.scratch.wgauss;
  auto& wsigma = c.scratch.wsigma;
  auto& wbase = c.scratch.wbase;
  wpixel.resize(nworkers);
  wgauss.resize(nworkers);
  wsigma.resize(nworkers);
  wbase.assign(nworkers + 1, 0);
  c.pair_offset.assign(n + 1, 0);
  pool.parallel_for(std::int64_t(n), [&](int worker, std::int64_t gb, std::int64_t ge) {
    auto& pix = wpixel[worker];
    auto& gau = wgauss[worker];
    auto& sig = wsigma[worker];
    pix.clear();
    gau.clear();
    sig.clear();
    const S trunc2 = opts.trunc_sigma * opts.trunc_sigma;
    for (std::int64_t i = gb; i < ge; ++i) {
      if (!c.valid[i]) continue;
      const Vec3<S>& conic = c.conic[i];
      const S mx = c.mean2d[i][0], my = c.mean2d[i][1];
      std::int64_t count = 0;
      for (int y = bbox[i][2]; y <= bbox[i][3]; ++y) {
        // the power term is quadratic along the row; step it incrementally
        const S dy = S(y) + S(0.5) - my;
        S dx = S(bbox[i][0]) + S(0.5) - mx;
        S power = conic[0] * dx * dx + S(2) * conic[1] * dx * dy + conic[2] * dy * dy;
        S dpower = conic[0] * (S(2) * dx + S(1)) + S(2) * conic[1] * dy;
        const S ddpower = S(2) * conic[0];
        for (int x = bbox[i][0]; x <= bbox[i][1]; ++x) {
          const S p = power;
          power += dpower;
          dpower += ddpower;
          if (p > trunc2) continue;
          const S sigma = std::min(opts.alpha_clamp, c.alpha[i] * std::exp(S(-0.5) * p));
          if (sigma < opts.min_alpha) continue;
          pix.push_back(std::int32_t(y * cam.width + x));
          gau.push_back(std::int32_t(i));
          sig.push_back(sigma);
          ++count;
        }
      }
      c.pair_offset[i + 1] = count;
    }
    wbase[worker + 1] = std::int64_t(pix.size());
  });
  lap("pairscan");
  for (size_t i = 0; i < n; ++i) c.pair_offset[i + 1] += c.pair_offset[i];
  for (int w = 0; w < nworkers; ++w) wbase[w + 1] += wbase[w];
  const std::int64_t total_pairs = c.pair_offset[n];

  c.pair_pixel.resize(total_pairs);
  c.pair_gauss.resize(total_pairs);
  c.pair_sigma.resize(total_pairs);
  c.pair_T.assign(total_pairs, S(0));
  pool.parallel_for(nworkers, [&](int, std::int64_t wb, std::int64_t we) {
    for (std::int64_t w = wb; w < we; ++w) {
      if (wpixel[w].empty()) continue;
      std::copy(wpixel[w].begin(), wpixel[w].end(), c.pair_pixel.begin() + wbase[w]);
      std::copy(wgauss[w].begin(), wgauss[w].end(), c.pair_gauss.begin() + wbase[w]);
      std::copy(wsigma[w].begin(), wsigma[w].end(), c.pair_sigma.begin() + wbase[w]);
    }
  });
  lap("gather");

  // bin pairs into per-pixel lists; sort keys pack (depth bits, pair index)
  // so the canonical (camera z, primitive index) order falls out of a plain
  // integer sort (positive float bit patterns are monotone, pair index is
  // monotone in primitive index within a pixel)
  auto& pixel_count = c.scratch.pixel_count;
  pixel_count.assign(npix, 0);
  parallel_for_each(total_pairs, [&](std::int64_t p) {
    std::atomic_ref<std::int32_t>(pixel_count[c.pair_pixel[p]])
        .fetch_add(1, std::memory_order_relaxed);
  });
  c.pixel_offset.assign(npix + 1, 0);
  for (size_t px = 0; px < npix; ++px)
    c.pixel_offset[px + 1] = c.pixel_offset[px] + pixel_count[px];
  auto& keys = c.scratch.keys;
  keys.resize(total_pairs);
  auto& cursor = c.scratch.cursor;
  cursor.assign(npix, 0);
  parallel_for_each(total_pairs, [&](std::int64_t p) {
    const std::int32_t px = c.pair_pixel[p];
    const std::int64_t slot =
        c.pixel_offset[px] +
        std::atomic_ref<std::int32_t>(cursor[px]).fetch_add(1, std::memory_order_relaxed);
    const float z = float(c.pcam[c.pair_gauss[p]][2]);
    std::uint32_t zbits;
    std::memcpy(&zbits, &z, 4);
    keys[slot] = (std::uint64_t(zbits) << 32) | std::uint32_t(p);
  });
  lap("bin");
  parallel_for_each(std::int64_t(npix), [&](std::int64_t px) {
    std::sort(keys.data() + c.pixel_offset[px], keys.data() + c.pixel_offset[px + 1]);
  });
  lap("sort");
  c.pixel_pairs.resize(total_pairs);
  parallel_for_each(total_pairs, [&](std::int64_t s) {
    c.pixel_pairs[s] = std::int32_t(keys[s] & 0xFFFFFFFFu);
  });

  // front-to-back compositing
  parallel_for_each(std::int64_t(npix), [&](std::int64_t px) {
    Vec3<S> color = Vec3<S>::Zero();
    Vec3<S> nrm = Vec3<S>::Zero();
    S depth = S(0), t = S(1);
    for (std::int64_t s = c.pixel_offset[px]; s < c.pixel_offset[px + 1]; ++s) {
      if (t < opts.stop_transmittance) break;
      const std::int32_t p = c.pixel_pairs[s];
      const std::int32_t g = c.pair_gauss[p];
      const S sigma = c.pair_sigma[p];
      c.pair_T[p] = t;
      const S w = sigma * t;
      color += w * cloud.prims[g].color;
      depth += w * c.pcam[g][2];
      nrm += w * c.normal[g];
      t *= (S(1) - sigma);
    }
    c.final_T[px] = t;
    out.color[px] = color + t * opts.background;
    out.depth[px] = depth;
    out.alpha[px] = S(1) - t;
    if (opts.normalize_normals && out.alpha[px] > S(1e-6)) nrm /= out.alpha[px];
    out.normal[px] = nrm;
  });
  lap("composite");
  return out;
}

// Analytic gradients w.r.t. every primitive parameter. `ndc_grad_norm`, when
// given, receives the norm of dL/d(mean2d) in NDC units per primitive (the
// densification signal). Deterministic for any worker count.
template <class S>
std::vector<PrimitiveGrads<S>> rasterize_backward(const GaussianCloud<S>& cloud,
                                                  const scene::Camera<S>& cam,
                                                  const RasterizeOptions<S>& opts,
                                                  RasterizeCache<S>& c, const ImageGrads<S>& gi,
                                                  std::vector<S>* ndc_grad_norm = nullptr) {
  const size_t n = cloud.size();
  const size_t npix = size_t(cam.width) * cam.height;
  std::vector<PrimitiveGrads<S>> grads(n);
  if (ndc_grad_norm) ndc_grad_norm->assign(n, S(0));
  if (n == 0) return grads;

  const bool has_color = !gi.color.empty();
  const bool has_depth = !gi.depth.empty();
  const bool has_normal = !gi.normal.empty();
  c.pair_gsigma.assign(c.pair_pixel.size(), S(0));

  // phase A: per-pixel back-to-front walk producing dL/d(sigma) per pair
  parallel_for_each(std::int64_t(npix), [&](std::int64_t px) {
    const std::int64_t b = c.pixel_offset[px], e = c.pixel_offset[px + 1];
    if (b == e) return;
    Vec3<S> suf_color = c.final_T[px] * opts.background;
    Vec3<S> suf_normal = Vec3<S>::Zero();
    S suf_depth = S(0);
    const Vec3<S> dc = has_color ? gi.color[px] : Vec3<S>::Zero();
    const S dd = has_depth ? gi.depth[px] : S(0);
    const Vec3<S> dn = has_normal ? gi.normal[px] : Vec3<S>::Zero();
    // with normalized normal blending, N = B/A with A the accumulated alpha;
    // both B and A depend on every sigma along the pixel
    S nscale = S(1), dn_dot_n = S(0);
    const S t_end = c.final_T[px];
    if (opts.normalize_normals && has_normal && S(1) - t_end > S(1e-6)) {
      nscale = S(1) / (S(1) - t_end);
      Vec3<S> bsum = Vec3<S>::Zero();
      for (std::int64_t s = b; s < e; ++s) {
        const std::int32_t p = c.pixel_pairs[s];
        if (c.pair_T[p] == S(0)) continue;
        bsum += c.pair_sigma[p] * c.pair_T[p] * c.normal[c.pair_gauss[p]];
      }
      dn_dot_n = dn.dot(nscale * bsum);
    }
    for (std::int64_t s = e - 1; s >= b; --s) {
      const std::int32_t p = c.pixel_pairs[s];
      const S t = c.pair_T[p];
      if (t == S(0)) continue;  // beyond early stop
      const std::int32_t g = c.pair_gauss[p];
      const S sigma = c.pair_sigma[p];
      const S one_m = S(1) - sigma;
      const Vec3<S>& col = cloud.prims[g].color;
      const S z = c.pcam[g][2];
      const Vec3<S>& nr = c.normal[g];
      S gs = S(0);
      if (one_m > S(1e-6)) {
        gs += dc.dot(t * col - suf_color / one_m);
        gs += dd * (t * z - suf_depth / one_m);
        gs += nscale * dn.dot(t * nr - suf_normal / one_m);
        gs -= dn_dot_n * nscale * t_end / one_m;  // d(1/A)/d(sigma) term
      } else {
        gs += dc.dot(t * col) + dd * t * z + nscale * dn.dot(t * nr);
      }
      c.pair_gsigma[p] = gs;
      const S w = sigma * t;
      suf_color += w * col;
      suf_depth += w * z;
      suf_normal += w * nr;
    }
  });

  // phase B: per-primitive accumulation and the chain to parameters
  parallel_for_each(std::int64_t(n), [&](std::int64_t i) {
    if (!c.valid[i]) return;
    PrimitiveGrads<S>& gr = grads[i];
    const GaussianPrimitive<S>& prim = cloud.prims[i];
    const Vec3<S>& conic = c.conic[i];
    const Mat2<S> a_mat = (Mat2<S>() << conic[0], conic[1], conic[1], conic[2]).finished();
    const S alpha = c.alpha[i];

    Vec2<S> g_m2d = Vec2<S>::Zero();
    Mat2<S> g_a = Mat2<S>::Zero();
    S g_alpha = S(0);
    S g_zsum = S(0);
    Vec3<S> g_nrm = Vec3<S>::Zero();

    for (std::int64_t p = c.pair_offset[i]; p < c.pair_offset[i + 1]; ++p) {
      const S t = c.pair_T[p];
      if (t == S(0)) continue;
      const std::int32_t px = c.pair_pixel[p];
      const S sigma = c.pair_sigma[p];
      const S w = sigma * t;
      if (has_color) gr.color += w * gi.color[px];
      if (has_depth) g_zsum += w * gi.depth[px];
      if (has_normal) {
        S ns = S(1);
        if (opts.normalize_normals && S(1) - c.final_T[px] > S(1e-6))
          ns = S(1) / (S(1) - c.final_T[px]);
        g_nrm += ns * w * gi.normal[px];
      }

      const S gs = c.pair_gsigma[p];
      if (gs == S(0)) continue;
      // sigma = min(alpha_clamp, alpha * exp(-power/2)); zero slope when clamped
      const int x = px % cam.width, y = px / cam.width;
      const Vec2<S> d{S(x) + S(0.5) - c.mean2d[i][0], S(y) + S(0.5) - c.mean2d[i][1]};
      const S power = detail::pair_power(conic, d);
      const S gexp = std::exp(S(-0.5) * power);
      if (alpha * gexp >= opts.alpha_clamp) continue;
      g_alpha += gs * gexp;
      const S gp = S(-0.5) * gs * sigma;  // dL/d(power)
      g_a += gp * d * d.transpose();
      g_m2d += S(-2) * gp * (a_mat * d);
    }

    if (ndc_grad_norm)
      (*ndc_grad_norm)[i] = Vec2<S>{g_m2d[0] * S(cam.width) / S(2), g_m2d[1] * S(cam.height) / S(2)}.norm();

    // opacity logit
    gr.opacity_logit = g_alpha * alpha * (S(1) - alpha);

    // conic -> 2D covariance
    const Mat2<S> g_cov2 = -(a_mat * g_a * a_mat);

    // cov2 = T2 cov3 T2^T + blur I
    const Mat23<S>& t2 = c.t2[i];
    const Vec3<S> sc = prim.scales();
    const Mat3<S> m3 = c.rot[i] * sc.asDiagonal();
    const Mat3<S> cov3 = m3 * m3.transpose() + opts.cov_reg * Mat3<S>::Identity();
    const Mat23<S> g_t2 = (g_cov2 + g_cov2.transpose()) * t2 * cov3;
    const Mat3<S> g_cov3 = t2.transpose() * g_cov2 * t2;

    // T2 = J * W -> gradients into the Jacobian entries
    const Eigen::Matrix<S, 3, 2> g_j_t = cam.rot * g_t2.transpose();  // g_J = g_T2 * W^T
    const S gj00 = g_j_t(0, 0), gj02 = g_j_t(2, 0), gj11 = g_j_t(1, 1), gj12 = g_j_t(2, 1);

    const Vec3<S>& pc = c.pcam[i];
    const S tz = pc[2], tz2 = tz * tz;
    Vec3<S> g_pcam = Vec3<S>::Zero();
    // J00 = fx/tz, J02 = -fx*txc/tz^2, J11 = fy/tz, J12 = -fy*tyc/tz^2
    g_pcam[2] += -gj00 * cam.fx / tz2 - gj11 * cam.fy / tz2;
    g_pcam[2] += gj02 * S(2) * cam.fx * c.txc[i] / (tz2 * tz) +
                 gj12 * S(2) * cam.fy * c.tyc[i] / (tz2 * tz);
    if (c.tx_clamped[i])
      g_pcam[2] += -gj02 * cam.fx / tz2 * (c.txc[i] / tz);
    else
      g_pcam[0] += -gj02 * cam.fx / tz2;
    if (c.ty_clamped[i])
      g_pcam[2] += -gj12 * cam.fy / tz2 * (c.tyc[i] / tz);
    else
      g_pcam[1] += -gj12 * cam.fy / tz2;

    // mean2d = (fx*tx/tz + cx, fy*ty/tz + cy)
    g_pcam[0] += g_m2d[0] * cam.fx / tz;
    g_pcam[1] += g_m2d[1] * cam.fy / tz;
    g_pcam[2] += -g_m2d[0] * cam.fx * pc[0] / tz2 - g_m2d[1] * cam.fy * pc[1] / tz2;

    // rendered depth is camera z
    g_pcam[2] += g_zsum;

    gr.mean = cam.rot.transpose() * g_pcam;

    // cov3 = M M^T with M = R diag(s)
    const Mat3<S> g_m3 = (g_cov3 + g_cov3.transpose()) * m3;
    Mat3<S> g_rot = g_m3 * sc.asDiagonal();
    const Vec3<S> g_s = (c.rot[i].transpose() * g_m3).diagonal();
    gr.log_scales = g_s.cwiseProduct(sc);

    // shortest-axis normal: n = sign * R.col(axis)
    g_rot.col(c.normal_axis[i]) += c.normal_sign[i] * g_nrm;

    // rotation -> quaternion (through normalization)
    const Vec4<S> q = prim.quat;
    const S qn = q.norm();
    const Vec4<S> u = q / qn;
    Eigen::Matrix<S, 9, 4> jq;
    quat_to_rot_jacobian<S>(u, jq);
    Eigen::Matrix<S, 9, 1> g_r9;
    g_r9 << g_rot(0, 0), g_rot(0, 1), g_rot(0, 2), g_rot(1, 0), g_rot(1, 1), g_rot(1, 2),
        g_rot(2, 0), g_rot(2, 1), g_rot(2, 2);
    const Vec4<S> g_u = jq.transpose() * g_r9;
    gr.quat = ((Eigen::Matrix<S, 4, 4>::Identity() - u * u.transpose()) / qn) * g_u;
  });

  return grads;
}

}  // namespace splatsdf::gs
