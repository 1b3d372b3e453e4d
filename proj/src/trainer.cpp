#include "splatsdf/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "splatsdf/core/parallel.hpp"
#include "splatsdf/gs/densify.hpp"
#include "splatsdf/mesh/metrics.hpp"
#include "splatsdf/mutual/mutual.hpp"
#include "splatsdf/priors/priors.hpp"
#include "splatsdf/sdf/field.hpp"
#include "splatsdf/sdf/taped.hpp"
#include "splatsdf/train/ssim.hpp"

namespace splatsdf::train {

namespace fs = std::filesystem;

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kPretrain: return "pretrain";
    case Stage::kWarmup: return "warmup";
    case Stage::kMutual: return "mutual";
  }
  return "?";
}

gs::RasterizeOptions<float> raster_options(const TrainConfig& cfg) {
  gs::RasterizeOptions<float> opts;
  opts.background = cfg.background;
  return opts;
}

// ---------------------------------------------------------------------------
// Splat loss

GsLossResult loss_gs(const gs::RenderTarget<float>& rt, const Image& gt,
                     const priors::EdgeMap* edge, const priors::NormalMap* prior,
                     const scene::Camera<float>& cam, const TrainConfig& cfg) {
  const int w = rt.width, h = rt.height;
  if (gt.width != w || gt.height != h)
    throw std::invalid_argument("loss_gs: resolution mismatch");
  const size_t npix = size_t(w) * h;

  GsLossResult out;
  out.image_grads.color.assign(npix, Vec3<float>::Zero());

  // edge-weighted L1 (Eq.-10 style)
  const double color_norm = 1.0 / double(npix * 3);
  double l_c = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t px = size_t(y) * w + x;
      const float wp = (edge && cfg.enable_edge_prior)
                           ? priors::photometric_weight(edge->at(x, y))
                           : 1.f;
      const Vec3<float> d = rt.color[px] - gt.rgb(x, y);
      for (int c = 0; c < 3; ++c) {
        l_c += std::abs(d[c]) * wp * color_norm;
        out.image_grads.color[px][c] +=
            cfg.lambda1 * float(color_norm) * wp * (d[c] > 0 ? 1.f : (d[c] < 0 ? -1.f : 0.f));
      }
    }
  out.l_c = l_c;

  // D-SSIM
  if (cfg.lambda1 < 1.f) {
    Image rendered(w, h, 3);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) rendered.set_rgb(x, y, rt.color[size_t(y) * w + x]);
    Image gssim;
    const double s = ssim_with_grad(rendered, gt, gssim);
    out.l_dssim = 1.0 - s;
    const float wds = 1.f - cfg.lambda1;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const size_t px = size_t(y) * w + x;
        for (int c = 0; c < 3; ++c) out.image_grads.color[px][c] -= wds * gssim.at(x, y, c);
      }
  }

  // normal-prior residual on renormalized blended normals
  if (prior && cfg.enable_normal_prior && cfg.lambda2 > 0.f) {
    out.image_grads.normal.assign(npix, Vec3<float>::Zero());
    std::int64_t valid = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const size_t px = size_t(y) * w + x;
        if (prior->valid(x, y) && rt.normal[px].norm() > 1e-6f) ++valid;
      }
    if (valid > 0) {
      const double nscale = 1.0 / double(valid);
      double l_n = 0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const size_t px = size_t(y) * w + x;
          const Vec3<float>& b = rt.normal[px];
          const float len = b.norm();
          if (!prior->valid(x, y) || len <= 1e-6f) continue;
          const Vec3<float> unit = b / len;
          Vec3<float> cmp_r = unit, cmp_p = prior->at(x, y);
          if (cfg.normal_loss_camera_frame) {
            cmp_r = cam.rot * cmp_r;
            cmp_p = cam.rot * cmp_p;
          }
          Vec3<float> sign;
          for (int c = 0; c < 3; ++c) {
            const float d = cmp_r[c] - cmp_p[c];
            l_n += std::abs(d) * nscale;
            sign[c] = d > 0 ? 1.f : (d < 0 ? -1.f : 0.f);
          }
          Vec3<float> g_unit = float(nscale) * sign;
          if (cfg.normal_loss_camera_frame) g_unit = cam.rot.transpose() * g_unit;
          const Vec3<float> g_b =
              (g_unit - unit * unit.dot(g_unit)) / len;  // normalization jacobian
          out.image_grads.normal[px] = cfg.lambda2 * g_b;
        }
      out.l_normal = l_n;
    }
  }

  out.total = cfg.lambda1 * out.l_c + (1.f - cfg.lambda1) * out.l_dssim +
              cfg.lambda2 * out.l_normal;
  return out;
}

// ---------------------------------------------------------------------------
// Field loss (chunked tapes, merged in fixed order)

namespace {

void zero_like(const sdf::SdfMlp<float>& mlp, sdf::SdfMlp<float>& out) {
  out.cfg = mlp.cfg;
  out.allocate();
  out.log_s = 0;
}

struct SdfChunkResult {
  sdf::SdfMlp<float> grads;
  double sum_c = 0, sum_normal = 0, sum_eik = 0;
};

SdfChunkResult sdf_chunk_loss(const sdf::SdfMlp<float>& mlp, const SdfBatch& batch,
                              const TrainConfig& cfg, std::int64_t row_b, std::int64_t row_e,
                              std::int64_t extra_b, std::int64_t extra_e, double color_scale,
                              double normal_scale, double eik_scale) {
  using Tape = ad::Tape<float>;
  using Var = Tape::Var;
  SdfChunkResult res;
  zero_like(mlp, res.grads);
  const Index rows = row_e - row_b;
  const Index extras = extra_e - extra_b;
  if (rows <= 0 && extras <= 0) return res;

  Tape tape;
  const auto params = sdf::TapedParams<float>::stage(tape, mlp);
  Var loss;
  bool have_loss = false;
  auto add_term = [&](Var v) {
    loss = have_loss ? tape.add(loss, v) : v;
    have_loss = true;
  };

  if (rows > 0) {
    const MatX<float> origins = batch.origins.middleRows(row_b, rows);
    const MatX<float> dirs = batch.dirs.middleRows(row_b, rows);
    const MatX<float> ts = batch.ts.middleRows(row_b, rows);
    sdf::RenderFlags flags;
    flags.exp_transmittance = cfg.exp_transmittance;
    const auto render =
        sdf::taped_render(tape, params, mlp, origins, dirs, ts, cfg.background, flags);

    Var cdiff = tape.abs(
        tape.sub(render.color, tape.constant(batch.gt_colors.middleRows(row_b, rows))));
    if (cfg.edge_weighted_sdf_color) {
      MatX<float> wcol = batch.color_weight.segment(row_b, rows);
      cdiff = tape.colmul(cdiff, tape.constant(wcol));
    }
    Var csum = tape.sum(cdiff);
    add_term(tape.scale(csum, float(color_scale)));
    res.sum_c = tape.value(csum)(0, 0);

    if (cfg.enable_normal_prior && normal_scale > 0) {
      Var nrm = render.normal;
      const MatX<float>& nval = tape.value(nrm);
      MatX<float> mask(rows, 1);
      for (Index r = 0; r < rows; ++r)
        mask(r, 0) =
            (batch.prior_valid[row_b + r] > 0.5f && nval.row(r).norm() > 1e-6f) ? 1.f : 0.f;
      Var len = tape.clamp_min(tape.row_norm(nrm), 1e-6f);
      Var unit = tape.colmul(nrm, tape.div(tape.constant(MatX<float>::Ones(rows, 1)), len));
      if (cfg.normal_loss_camera_frame)
        unit = tape.matmul(unit, tape.constant(MatX<float>(batch.normal_frame_rot.transpose())));
      Var nd =
          tape.abs(tape.sub(unit, tape.constant(batch.prior_normals.middleRows(row_b, rows))));
      Var masked = tape.colmul(nd, tape.constant(mask));
      Var nsum = tape.sum(masked);
      add_term(tape.scale(nsum, float(normal_scale)));
      res.sum_normal = tape.value(nsum)(0, 0);
    }

    Var d = tape.sub(tape.row_norm(render.grad_pts),
                     tape.constant(MatX<float>::Ones(tape.value(render.grad_pts).rows(), 1)));
    Var e = tape.sum(tape.mul(d, d));
    add_term(tape.scale(e, float(cfg.lambda_eik * eik_scale)));
    res.sum_eik = tape.value(e)(0, 0);
  }

  if (extras > 0) {
    const MatX<float> extra_pts = batch.eikonal_points.middleRows(extra_b, extras);
    const auto geo = sdf::taped_geometry(tape, params, mlp, extra_pts);
    Var d = tape.sub(tape.row_norm(geo.grad), tape.constant(MatX<float>::Ones(extras, 1)));
    Var e = tape.sum(tape.mul(d, d));
    add_term(tape.scale(e, float(cfg.lambda_eik * eik_scale)));
    res.sum_eik += tape.value(e)(0, 0);
  }

  tape.backward(loss);
  params.read_grads(tape, res.grads);
  return res;
}

}  // namespace

SdfLossResult loss_sdf(const sdf::SdfMlp<float>& mlp, const SdfBatch& batch,
                       const TrainConfig& cfg) {
  SdfLossResult out;
  zero_like(mlp, out.grads);
  const Index rays = batch.ts.rows();
  const Index samples = rays > 0 ? batch.ts.cols() : 0;
  const Index extras = batch.eikonal_points.rows();
  if (rays == 0 && extras == 0) return out;

  double total_valid = 0;
  for (Index r = 0; r < batch.prior_valid.size(); ++r) total_valid += batch.prior_valid[r];
  const double color_scale = rays > 0 ? 1.0 / double(rays * 3) : 0.0;
  const double normal_scale = total_valid > 0 ? 1.0 / (total_valid * 3.0) : 0.0;
  const double eik_scale = 1.0 / double(std::max<Index>(1, rays * samples + extras));

  ThreadPool& pool = ThreadPool::global();
  const int chunks =
      std::max(1, std::min<int>(pool.workers(), int(std::max<Index>(rays, extras))));
  std::vector<SdfChunkResult> results(chunks);
  pool.parallel_for(chunks, [&](int, std::int64_t cb, std::int64_t ce) {
    for (std::int64_t c = cb; c < ce; ++c) {
      const std::int64_t rb = rays * c / chunks, re = rays * (c + 1) / chunks;
      const std::int64_t eb = extras * c / chunks, ee = extras * (c + 1) / chunks;
      results[c] = sdf_chunk_loss(mlp, batch, cfg, rb, re, eb, ee, color_scale, normal_scale,
                                  eik_scale);
    }
  });

  double sum_c = 0, sum_normal = 0, sum_eik = 0;
  for (const auto& r : results) {
    sum_c += r.sum_c;
    sum_normal += r.sum_normal;
    sum_eik += r.sum_eik;
    for (size_t k = 0; k < out.grads.geo_w.size(); ++k) {
      out.grads.geo_w[k] += r.grads.geo_w[k];
      out.grads.geo_b[k] += r.grads.geo_b[k];
    }
    for (size_t k = 0; k < out.grads.col_w.size(); ++k) {
      out.grads.col_w[k] += r.grads.col_w[k];
      out.grads.col_b[k] += r.grads.col_b[k];
    }
    out.grads.log_s += r.grads.log_s;
  }
  out.l_c = sum_c * color_scale;
  out.l_normal = sum_normal * normal_scale;
  out.l_eik = sum_eik * eik_scale;
  out.total = out.l_c + out.l_normal + cfg.lambda_eik * out.l_eik;
  return out;
}

// ---------------------------------------------------------------------------
// State setup

TrainState init_train_state(const scene::Dataset& ds, const TrainConfig& cfg) {
  TrainState st;
  st.bounds = ds.scene_bounds;
  st.t_far = st.bounds.diagonal();
  Rng master(cfg.seed);
  st.rng_gs = master.fork(1);
  st.rng_sdf = master.fork(2);
  st.rng_control = master.fork(3);

  const auto& pts = ds.init_points;
  if (pts.positions.empty())
    throw std::runtime_error("init_train_state: dataset has no init points");
  st.cloud.prims.reserve(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    gs::GaussianPrimitive<float> g;
    g.mean = pts.positions[i];
    // spacing from a deterministic subsample stands in for knn distance
    float nearest = 0.2f;
    const size_t stride = std::max<size_t>(1, pts.size() / 512);
    float best = 1e30f;
    for (size_t j = 0; j < pts.size(); j += stride) {
      if (j == i) continue;
      best = std::min(best, (pts.positions[j] - g.mean).squaredNorm());
    }
    if (best < 1e29f) nearest = std::clamp(std::sqrt(best), 5e-3f, 0.3f);
    g.log_scales = Vec3<float>::Constant(std::log(nearest));
    g.opacity_logit = logit(0.1f);
    g.color = i < pts.colors.size() ? pts.colors[i] : Vec3<float>::Constant(0.5f);
    st.cloud.prims.push_back(g);
  }
  st.cloud.sync_accumulators();

  st.field.cfg.pe_freqs = cfg.sdf_pe_freqs;
  st.field.cfg.geo_hidden = cfg.sdf_hidden;
  st.field.cfg.color_hidden = cfg.sdf_hidden;
  st.field.cfg.feature_dim = cfg.sdf_feature_dim;
  st.field.norm_center = st.bounds.center();
  st.field.norm_scale = 2.f / st.bounds.extent().maxCoeff();
  st.field.domain_lo = st.bounds.lo;
  st.field.domain_hi = st.bounds.hi;
  // radius relative to the normalized half-diagonal, so the whole camera
  // orbit starts in free space
  const Vec3<float> half_n = 0.5f * st.field.norm_scale * st.bounds.extent();
  const float radius = cfg.sdf_init_radius_factor * half_n.norm();
  Rng init_rng = master.fork(4);
  st.field.geometric_init(radius, cfg.sdf_inside_out, init_rng);
  // sharpness scaled so s * (normalized diagonal) / 100 ~ 1
  st.field.log_s = std::log(100.f / (2.f * half_n.norm()));
  return st;
}

// ---------------------------------------------------------------------------
// Batch assembly

namespace {

void fill_ray(SdfBatch& batch, int row, const scene::Camera<float>::Ray& ray, VecX<float> ts,
              int samples) {
  // pad degenerate ranges up to the fixed sample width, keeping rows sorted
  if (ts.size() < samples) {
    VecX<float> padded(samples);
    padded.head(ts.size()) = ts;
    float last = ts.size() > 0 ? ts[ts.size() - 1] : 0.f;
    for (Index k = ts.size(); k < samples; ++k) {
      last += 1e-4f;
      padded[k] = last;
    }
    ts = std::move(padded);
  }
  batch.origins.row(row) = ray.origin.transpose();
  batch.dirs.row(row) = ray.dir.transpose();
  batch.ts.row(row) = ts.transpose();
}

SdfBatch build_sdf_batch(TrainState& st, const scene::Dataset& ds, int view_idx,
                         const gs::RenderTarget<float>& rt, const TrainConfig& cfg,
                         Stage stage) {
  const scene::View& view = ds.views[view_idx];
  const scene::Camera<float>& cam = view.camera;
  const int q = cfg.rays_per_batch;
  const int samples = cfg.samples_coarse + cfg.samples_fine;

  std::vector<int> pixels;
  if (stage == Stage::kMutual && cfg.enable_edge_prior && view.edge) {
    pixels = priors::sample_ray_pixels(*view.edge, q, cfg.delta_edge, st.rng_sdf);
  } else {
    pixels.reserve(q);
    const size_t npix = size_t(cam.width) * cam.height;
    for (int i = 0; i < q; ++i) pixels.push_back(int(st.rng_sdf.uniform_int(npix)));
  }

  SdfBatch batch;
  batch.origins.resize(q, 3);
  batch.dirs.resize(q, 3);
  batch.ts.resize(q, samples);
  batch.gt_colors.resize(q, 3);
  batch.prior_normals = MatX<float>::Zero(q, 3);
  batch.prior_valid = VecX<float>::Zero(q);
  batch.color_weight = VecX<float>::Ones(q);
  batch.normal_frame_rot = cam.rot;

  std::vector<scene::Camera<float>::Ray> rays(q);
  for (int i = 0; i < q; ++i) {
    const int px = pixels[i] % cam.width, py = pixels[i] / cam.width;
    rays[i] = cam.ray(px + 0.5f, py + 0.5f);
  }

  // guided ranges evaluate the SDF at the rasterized surface points in one batch
  std::vector<float> range_lo(q, cfg.t_near), range_hi(q, st.t_far);
  std::vector<std::uint8_t> guided_used(q, 0);
  if (stage == Stage::kMutual && cfg.enable_mutual) {
    MatX<float> probes(q, 3);
    std::vector<int> probe_of(q, -1);
    std::vector<float> t_surf(q, 0.f);
    int n_probe = 0;
    for (int i = 0; i < q; ++i) {
      const float depth = rt.depth[pixels[i]];
      const float alpha = rt.alpha[pixels[i]];
      if (alpha >= 0.5f && depth > 0 && rays[i].cos_forward > 1e-3f) {
        // compensate the unnormalized blend: partial coverage biases Eq.-6
        // depth short of the surface
        t_surf[i] = depth / alpha / rays[i].cos_forward;
        probes.row(n_probe) = (rays[i].origin + t_surf[i] * rays[i].dir).transpose();
        probe_of[i] = n_probe++;
      }
    }
    if (n_probe > 0) {
      const sdf::GeoEval<float> ev =
          sdf::eval_geometry(st.field, MatX<float>(probes.topRows(n_probe)), false);
      for (int i = 0; i < q; ++i) {
        if (probe_of[i] < 0) continue;
        // floor on the band width keeps a mid-training surface reachable even
        // when the probe lands near a (possibly wrong) zero crossing
        const float spread =
            std::max(std::abs(ev.sdf[probe_of[i]]), cfg.guided_band_floor / cfg.gamma_range);
        const auto range =
            mutual::guided_ray_range(t_surf[i], spread, cfg.gamma_range, cfg.t_near, st.t_far);
        range_lo[i] = range.first;
        range_hi[i] = range.second;
        guided_used[i] = 1;
      }
    }
  }

  for (int i = 0; i < q; ++i) {
    VecX<float> ts;
    if (guided_used[i]) {
      ts = sdf::banded_sample(cfg.samples_coarse, cfg.samples_fine, cfg.t_near, st.t_far,
                              range_lo[i], range_hi[i], st.rng_sdf);
    } else {
      ts = sdf::hierarchical_sample(st.field, rays[i].origin, rays[i].dir, cfg.samples_coarse,
                                    cfg.samples_fine, range_lo[i], range_hi[i], st.rng_sdf);
    }
    fill_ray(batch, i, rays[i], ts, samples);
  }

  for (int i = 0; i < q; ++i) {
    const int px = pixels[i] % cam.width, py = pixels[i] / cam.width;
    batch.gt_colors.row(i) = view.image.rgb(px, py).transpose();
    if (view.normal && cfg.enable_normal_prior && view.normal->valid(px, py)) {
      Vec3<float> n = view.normal->at(px, py);
      if (cfg.normal_loss_camera_frame) n = cam.rot * n;
      batch.prior_normals.row(i) = n.transpose();
      batch.prior_valid[i] = 1.f;
    }
    if (cfg.edge_weighted_sdf_color && view.edge)
      batch.color_weight[i] = priors::photometric_weight(view.edge->at(px, py));
  }

  batch.eikonal_points.resize(cfg.eikonal_uniform_points, 3);
  for (Index i = 0; i < batch.eikonal_points.rows(); ++i)
    for (int a = 0; a < 3; ++a)
      batch.eikonal_points(i, a) =
          st.bounds.lo[a] + float(st.rng_sdf.uniform()) * st.bounds.extent()[a];
  return batch;
}

float lr_mean_at(const TrainConfig& cfg, std::int64_t iter) {
  const double t = double(iter) / double(std::max<std::int64_t>(1, cfg.total_iters()));
  return cfg.lr_mean * float(std::pow(double(cfg.lr_mean_final_factor), t));
}

}  // namespace

// ---------------------------------------------------------------------------
// Iteration

bool train_step(TrainState& st, const scene::Dataset& ds, const TrainConfig& cfg,
                IterationLog* log) {
  const Stage stage = st.stage(cfg);
  const std::vector<int> train_views = ds.train_view_indices();
  const int view_idx = train_views[st.rng_gs.uniform_int(train_views.size())];
  const scene::View& view = ds.views[view_idx];

  const gs::RasterizeOptions<float> opts = raster_options(cfg);
  static thread_local gs::RasterizeCache<float> cache;
  const gs::RenderTarget<float> rt = gs::rasterize(st.cloud, view.camera, opts, &cache);

  const priors::EdgeMap* edge = view.edge ? &*view.edge : nullptr;
  const priors::NormalMap* prior = view.normal ? &*view.normal : nullptr;
  const GsLossResult gl = loss_gs(rt, view.image, edge, prior, view.camera, cfg);
  if (!std::isfinite(gl.total)) return false;

  std::vector<float> ndc_norms;
  const auto grads =
      gs::rasterize_backward(st.cloud, view.camera, opts, cache, gl.image_grads, &ndc_norms);

  st.cloud.sync_accumulators();
  for (size_t i = 0; i < st.cloud.size(); ++i) {
    if (cache.pair_offset[i + 1] > cache.pair_offset[i]) {
      st.cloud.grad_accum[i] += ndc_norms[i];
      st.cloud.grad_count[i] += 1;
    }
  }

  CloudLearningRates lrs;
  lrs.mean = lr_mean_at(cfg, st.iteration);
  lrs.quat = cfg.lr_quat;
  lrs.log_scales = cfg.lr_scales;
  lrs.opacity = cfg.lr_opacity;
  lrs.color = cfg.lr_color;
  st.cloud_adam.apply(st.cloud, grads, lrs);

  SdfLossResult sl;
  if (stage != Stage::kPretrain) {
    const SdfBatch batch = build_sdf_batch(st, ds, view_idx, rt, cfg, stage);
    sl = loss_sdf(st.field, batch, cfg);
    if (!std::isfinite(sl.total)) return false;
    st.field_adam.apply(st.field, sl.grads, cfg.lr_sdf, cfg.lr_sharpness);
  }

  // density control
  gs::CloudReorg reorg;
  reorg.replaced = [&](size_t i) {
    st.cloud_adam.sync(st.cloud.size());
    st.cloud_adam.reset_slot(i);
  };
  reorg.resized = [&](size_t n) { st.cloud_adam.sync(n); };
  reorg.compacted = [&](const std::vector<std::uint8_t>& keep) {
    st.cloud_adam.sync(keep.size());
    st.cloud_adam.compact(keep);
  };

  int pruned = 0, densified = 0, global_added = 0;
  const std::int64_t it1 = st.iteration + 1;  // control runs after the step
  if (stage == Stage::kMutual && cfg.enable_mutual) {
    const std::int64_t mutual_iter =
        it1 - cfg.pretrain_gs_iters - cfg.independent_warmup_iters;
    if (cfg.density_control_every > 0 && mutual_iter > 0 &&
        mutual_iter % cfg.density_control_every == 0) {
      const auto stats =
          mutual::sdf_density_control(st.cloud, st.field, cfg.thresholds,
                                      cfg.split_scale_threshold, st.rng_control,
                                      size_t(cfg.max_gaussians), &reorg);
      pruned = stats.pruned;
      densified = stats.cloned + stats.split;
    }
    if (cfg.global_densify_every > 0 && mutual_iter > 0 &&
        mutual_iter % cfg.global_densify_every == 0) {
      global_added =
          mutual::global_densify(st.cloud, st.field, st.bounds, cfg.grid_resolution,
                                 cfg.thresholds, st.rng_control, size_t(cfg.max_gaussians),
                                 &reorg);
    }
  } else {
    // baseline adaptive density control (pretrain/warmup, and the co-opt
    // stage when mutual guidance is disabled)
    const std::int64_t until = cfg.pretrain_gs_iters + (cfg.co_opt_iters * 3) / 4;
    if (cfg.baseline_densify_every > 0 && it1 >= cfg.baseline_densify_from && it1 <= until &&
        it1 % cfg.baseline_densify_every == 0) {
      const auto stats = gs::densify_split_clone(st.cloud, cfg.thresholds.tau_g,
                                                 cfg.split_scale_threshold, st.rng_control,
                                                 size_t(cfg.max_gaussians), &reorg);
      pruned = gs::prune_by_opacity(st.cloud, cfg.min_opacity, &reorg);
      densified = stats.cloned + stats.split;
    }
  }

  if (log) {
    log->iteration = st.iteration;
    log->stage = stage;
    log->gs_total = gl.total;
    log->gs_c = gl.l_c;
    log->gs_dssim = gl.l_dssim;
    log->gs_normal = gl.l_normal;
    log->sdf_total = sl.total;
    log->sdf_c = sl.l_c;
    log->sdf_normal = sl.l_normal;
    log->sdf_eik = sl.l_eik;
    log->total = gl.total + sl.total;
    log->cloud_size = st.cloud.size();
    log->pruned = pruned;
    log->densified = densified;
    log->global_added = global_added;
  }
  ++st.iteration;
  return true;
}

std::string format_log(const IterationLog& log) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "iter=%lld stage=%s loss=%.6g gs=%.6g gs_c=%.6g gs_dssim=%.6g gs_normal=%.6g "
                "sdf=%.6g sdf_c=%.6g sdf_normal=%.6g sdf_eik=%.6g cloud=%zu pruned=%d "
                "densified=%d global=%d",
                (long long)log.iteration, stage_name(log.stage), log.total, log.gs_total,
                log.gs_c, log.gs_dssim, log.gs_normal, log.sdf_total, log.sdf_c, log.sdf_normal,
                log.sdf_eik, log.cloud_size, log.pruned, log.densified, log.global_added);
  return buf;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

std::string ckpt_name(const char* prefix, std::int64_t iter, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06lld.%s", prefix, (long long)iter, ext);
  return buf;
}

void put_u64(std::FILE* f, std::uint64_t v) { std::fwrite(&v, 8, 1, f); }
std::uint64_t get_u64(std::FILE* f) {
  std::uint64_t v = 0;
  if (std::fread(&v, 8, 1, f) != 1) throw std::runtime_error("optim checkpoint: truncated");
  return v;
}
void put_f32s(std::FILE* f, const float* p, size_t n) { std::fwrite(p, 4, n, f); }
void get_f32s(std::FILE* f, float* p, size_t n) {
  if (std::fread(p, 4, n, f) != n) throw std::runtime_error("optim checkpoint: truncated");
}

void put_mlp_moments(std::FILE* f, const sdf::SdfMlp<float>& m) {
  m.for_each_param([&](const MatX<float>& mat) { put_f32s(f, mat.data(), size_t(mat.size())); });
  put_f32s(f, &m.log_s, 1);
}
void get_mlp_moments(std::FILE* f, sdf::SdfMlp<float>& m) {
  m.for_each_param([&](MatX<float>& mat) { get_f32s(f, mat.data(), size_t(mat.size())); });
  get_f32s(f, &m.log_s, 1);
}

}  // namespace

void save_checkpoint(const std::string& dir, const TrainState& st) {
  fs::create_directories(dir);
  gs::save_cloud_ply((fs::path(dir) / ckpt_name("cloud", st.iteration, "ply")).string(),
                     st.cloud);
  sdf::save_mlp((fs::path(dir) / ckpt_name("sdf", st.iteration, "bin")).string(), st.field);

  const std::string opath = (fs::path(dir) / ckpt_name("optim", st.iteration, "bin")).string();
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(opath.c_str(), "wb"),
                                                    &std::fclose);
  if (!f) throw std::runtime_error("optim checkpoint: cannot write " + opath);
  put_u64(f.get(), 0x4F505442ull);  // "OPTB"
  put_u64(f.get(), 1);              // version
  put_u64(f.get(), std::uint64_t(st.iteration));
  for (const Rng* r : {&st.rng_gs, &st.rng_sdf, &st.rng_control}) {
    put_u64(f.get(), r->seed());
    put_u64(f.get(), r->counter());
  }
  put_u64(f.get(), std::uint64_t(st.cloud_adam.step));
  put_u64(f.get(), st.cloud_adam.m.size());
  for (const auto& mo : st.cloud_adam.m) put_f32s(f.get(), mo.mean.data(), 3), put_f32s(f.get(), mo.quat.data(), 4), put_f32s(f.get(), mo.log_scales.data(), 3), put_f32s(f.get(), &mo.opacity_logit, 1), put_f32s(f.get(), mo.color.data(), 3);
  for (const auto& mo : st.cloud_adam.v) put_f32s(f.get(), mo.mean.data(), 3), put_f32s(f.get(), mo.quat.data(), 4), put_f32s(f.get(), mo.log_scales.data(), 3), put_f32s(f.get(), &mo.opacity_logit, 1), put_f32s(f.get(), mo.color.data(), 3);
  put_u64(f.get(), std::uint64_t(st.cloud.size()));
  put_f32s(f.get(), st.cloud.grad_accum.data(), st.cloud.grad_accum.size());
  std::fwrite(st.cloud.grad_count.data(), 4, st.cloud.grad_count.size(), f.get());
  put_u64(f.get(), std::uint64_t(st.field_adam.step));
  put_u64(f.get(), st.field_adam.initialized ? 1 : 0);
  if (st.field_adam.initialized) {
    put_mlp_moments(f.get(), st.field_adam.m);
    put_mlp_moments(f.get(), st.field_adam.v);
  }
}

TrainState load_checkpoint(const std::string& dir, std::int64_t iteration,
                           const scene::Dataset& ds, const TrainConfig& cfg) {
  TrainState st;
  st.bounds = ds.scene_bounds;
  st.t_far = st.bounds.diagonal();
  st.cloud =
      gs::load_cloud_ply((fs::path(dir) / ckpt_name("cloud", iteration, "ply")).string());
  st.field = sdf::load_mlp((fs::path(dir) / ckpt_name("sdf", iteration, "bin")).string());

  const std::string opath = (fs::path(dir) / ckpt_name("optim", iteration, "bin")).string();
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(opath.c_str(), "rb"),
                                                    &std::fclose);
  if (!f) throw std::runtime_error("optim checkpoint: cannot open " + opath);
  if (get_u64(f.get()) != 0x4F505442ull)
    throw std::runtime_error("optim checkpoint: bad magic in " + opath);
  if (get_u64(f.get()) != 1)
    throw std::runtime_error("optim checkpoint: unsupported version in " + opath);
  st.iteration = std::int64_t(get_u64(f.get()));
  if (st.iteration != iteration)
    throw std::runtime_error("optim checkpoint: iteration mismatch in " + opath);
  for (Rng* r : {&st.rng_gs, &st.rng_sdf, &st.rng_control}) {
    const std::uint64_t seed = get_u64(f.get());
    const std::uint64_t counter = get_u64(f.get());
    r->restore(seed, counter);
  }
  st.cloud_adam.step = std::int64_t(get_u64(f.get()));
  const size_t nm = get_u64(f.get());
  st.cloud_adam.m.resize(nm);
  st.cloud_adam.v.resize(nm);
  for (auto& mo : st.cloud_adam.m) get_f32s(f.get(), mo.mean.data(), 3), get_f32s(f.get(), mo.quat.data(), 4), get_f32s(f.get(), mo.log_scales.data(), 3), get_f32s(f.get(), &mo.opacity_logit, 1), get_f32s(f.get(), mo.color.data(), 3);
  for (auto& mo : st.cloud_adam.v) get_f32s(f.get(), mo.mean.data(), 3), get_f32s(f.get(), mo.quat.data(), 4), get_f32s(f.get(), mo.log_scales.data(), 3), get_f32s(f.get(), &mo.opacity_logit, 1), get_f32s(f.get(), mo.color.data(), 3);
  const size_t nacc = get_u64(f.get());
  st.cloud.grad_accum.resize(nacc);
  st.cloud.grad_count.resize(nacc);
  get_f32s(f.get(), st.cloud.grad_accum.data(), nacc);
  if (std::fread(st.cloud.grad_count.data(), 4, nacc, f.get()) != nacc)
    throw std::runtime_error("optim checkpoint: truncated counts");
  st.field_adam.step = std::int64_t(get_u64(f.get()));
  const bool has_moments = get_u64(f.get()) == 1;
  if (has_moments) {
    st.field_adam.init_like(st.field);
    get_mlp_moments(f.get(), st.field_adam.m);
    get_mlp_moments(f.get(), st.field_adam.v);
  }
  (void)cfg;
  return st;
}

// ---------------------------------------------------------------------------
// Full schedule

TrainState train(const scene::Dataset& ds, const TrainConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  if (cfg.threads > 0) ThreadPool::set_global_workers(cfg.threads);
  fs::create_directories(out_dir);
  std::ofstream log_file(fs::path(out_dir) / "log.txt", std::ios::trunc);
  if (!log_file) throw std::runtime_error("train: cannot write log in " + out_dir);

  TrainState st = init_train_state(ds, cfg);
  std::int64_t last_good = -1;
  const std::int64_t total = cfg.total_iters();
  for (std::int64_t i = 0; i < total; ++i) {
    IterationLog log;
    if (!train_step(st, ds, cfg, &log)) {
      log_file << "iter=" << st.iteration << " DIVERGED (non-finite loss)\n";
      log_file.flush();
      throw std::runtime_error("train: loss diverged at iteration " +
                               std::to_string(st.iteration) +
                               (last_good >= 0 ? "; last checkpoint at iteration " +
                                                     std::to_string(last_good)
                                               : std::string("; no checkpoint written")));
    }
    if (cfg.log_every > 0 && (st.iteration % cfg.log_every == 0 || st.iteration == total))
      log_file << format_log(log) << "\n";
    if (cfg.checkpoint_every > 0 && st.iteration % cfg.checkpoint_every == 0 &&
        st.iteration < total) {
      save_checkpoint(out_dir, st);
      last_good = st.iteration;
    }
  }
  save_checkpoint(out_dir, st);
  log_file.flush();
  return st;
}

double mean_eval_psnr(const gs::GaussianCloud<float>& cloud, const scene::Dataset& ds,
                      const TrainConfig& cfg) {
  const auto eval_views = ds.eval_view_indices();
  if (eval_views.empty()) throw std::runtime_error("mean_eval_psnr: no eval views");
  const gs::RasterizeOptions<float> opts = raster_options(cfg);
  double acc = 0;
  for (int vi : eval_views) {
    const scene::View& view = ds.views[vi];
    const auto rt = gs::rasterize(cloud, view.camera, opts);
    Image img(view.camera.width, view.camera.height, 3);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        img.set_rgb(x, y, rt.color[size_t(y) * img.width + x]);
    acc += mesh::psnr(img.clamped01(), view.image);
  }
  return acc / double(eval_views.size());
}

}  // namespace splatsdf::train
