#pragma once

#include <algorithm>
#include <vector>

#include "splatsdf/sdf/mlp.hpp"

namespace splatsdf::sdf {

// ---------------------------------------------------------------------------
// Plain (untaped) batched evaluation.

template <class S>
struct GeoEval {
  VecX<S> sdf;       // world units
  MatX<S> grad;      // [n,3], world frame (invariant under scene normalization)
  MatX<S> feature;   // [n,F]
};

template <class S>
GeoEval<S> eval_geometry(const SdfMlp<S>& mlp, const MatX<S>& pts_world, bool want_grad) {
  const Index n = pts_world.rows();
  MatX<S> pn(n, 3);
  for (Index i = 0; i < n; ++i)
    pn.row(i) = (mlp.norm_scale * (Vec3<S>(pts_world.row(i).transpose()) - mlp.norm_center))
                    .transpose();

  const MatX<S> pe = positional_encode(pn, mlp.cfg.pe_freqs);
  MatX<S> pe_jac[3];
  if (want_grad)
    for (int a = 0; a < 3; ++a) pe_jac[a] = positional_encode_jac(pn, mlp.cfg.pe_freqs, a);

  MatX<S> h = pe;
  MatX<S> g[3];
  if (want_grad)
    for (int a = 0; a < 3; ++a) g[a] = pe_jac[a];

  const S beta = S(mlp.cfg.softplus_beta);
  for (int l = 0; l < mlp.cfg.geo_layers; ++l) {
    if (l == mlp.cfg.skip_at) {
      MatX<S> hs(n, h.cols() + pe.cols());
      hs << h, pe;
      h = std::move(hs);
      if (want_grad)
        for (int a = 0; a < 3; ++a) {
          MatX<S> gs(n, g[a].cols() + pe_jac[a].cols());
          gs << g[a], pe_jac[a];
          g[a] = std::move(gs);
        }
    }
    MatX<S> z = (h * mlp.geo_w[l]).rowwise() + mlp.geo_b[l].row(0);
    if (want_grad)
      for (int a = 0; a < 3; ++a) g[a] = g[a] * mlp.geo_w[l];
    if (l + 1 < mlp.cfg.geo_layers) {
      const MatX<S> act = (S(1) / (S(1) + (-(z.array() * beta)).exp())).matrix();
      if (want_grad)
        for (int a = 0; a < 3; ++a) g[a] = g[a].cwiseProduct(act);
      h = (z.array().max(S(0)) + ((-(z.array() * beta).abs()).exp().log1p()) / beta).matrix();
    } else {
      h = std::move(z);
    }
  }

  GeoEval<S> out;
  out.sdf = h.col(0) / mlp.norm_scale;
  out.feature = h.rightCols(mlp.cfg.feature_dim);
  if (want_grad) {
    out.grad.resize(n, 3);
    for (int a = 0; a < 3; ++a) out.grad.col(a) = g[a].col(0);
  }
  return out;
}

template <class S>
MatX<S> eval_color(const SdfMlp<S>& mlp, const MatX<S>& pts_world, const MatX<S>& dirs,
                   const MatX<S>& grad, const MatX<S>& feature) {
  const Index n = pts_world.rows();
  MatX<S> pn(n, 3);
  for (Index i = 0; i < n; ++i)
    pn.row(i) = (mlp.norm_scale * (Vec3<S>(pts_world.row(i).transpose()) - mlp.norm_center))
                    .transpose();
  MatX<S> x(n, mlp.cfg.color_in());
  x << pn, dirs, grad, feature;
  for (int l = 0; l < mlp.cfg.color_layers; ++l) {
    MatX<S> z = (x * mlp.col_w[l]).rowwise() + mlp.col_b[l].row(0);
    if (l + 1 < mlp.cfg.color_layers)
      x = z.cwiseMax(S(0));
    else
      x = (S(1) / (S(1) + (-z.array()).exp())).matrix();
  }
  return x;
}

// Convenience single-point SDF query: (world value, world gradient).
template <class S>
std::pair<S, Vec3<S>> query_sdf(const SdfMlp<S>& mlp, const Vec3<S>& x) {
  MatX<S> p(1, 3);
  p.row(0) = x.transpose();
  const GeoEval<S> e = eval_geometry(mlp, p, true);
  return {e.sdf[0], Vec3<S>(e.grad.row(0).transpose())};
}

template <class S>
void SdfMlp<S>::calibrate_init(S radius, bool inside_out, Rng& rng) {
  // the raw spherical init has gradient magnitude k != 1; dividing the sdf
  // output column by k restores a metric start
  const Index n = 256;
  MatX<S> pts(n, 3);
  for (Index i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) pts(i, a) = S(rng.uniform(-0.9, 0.9));
  // temporary identity normalization: calibration happens in normalized units
  const Vec3<S> saved_center = norm_center;
  const S saved_scale = norm_scale;
  norm_center = Vec3<S>::Zero();
  norm_scale = S(1);

  GeoEval<S> eval = eval_geometry(*this, pts, true);
  S k = S(0);
  for (Index i = 0; i < n; ++i) k += eval.grad.row(i).norm();
  k /= S(n);
  if (k > S(1e-3)) {
    geo_w.back().col(0) /= k;
    geo_b.back()(0, 0) /= k;
  }
  // shift the bias so f(0) = +-radius
  MatX<S> origin = MatX<S>::Zero(1, 3);
  eval = eval_geometry(*this, origin, false);
  const S want = inside_out ? radius : -radius;
  geo_b.back()(0, 0) += want - eval.sdf[0];

  norm_center = saved_center;
  norm_scale = saved_scale;
}

// ---------------------------------------------------------------------------
// NeuS opacity and ray compositing.

// Opacity of the section between consecutive SDF samples (Eq.-3 style
// logistic ratio, clamped to [0,1]). Underflowed phi front yields 0.
template <class S>
S neus_alpha(S f_i, S f_next, S sharpness) {
  const S phi_i = sigmoid(sharpness * f_i);
  if (phi_i < S(1e-30)) return S(0);
  const S phi_n = sigmoid(sharpness * f_next);
  return std::min(S(1), std::max((phi_i - phi_n) / phi_i, S(0)));
}

struct RenderFlags {
  bool exp_transmittance = false;  // T_i = exp(-sum alpha_j delta_j) variant
};

// Per-sample state of one rendered ray.
template <class S>
struct RaySampleSet {
  Vec3<S> origin, dir;
  VecX<S> ts;        // strictly increasing
  VecX<S> deltas;    // size = samples; last entry = mean of preceding
  VecX<S> sdf;       // normalized units (what the sharpness acts on)
  MatX<S> colors;    // [samples, 3]
  VecX<S> alpha;     // last entry 0 (no closing section)
  VecX<S> transmittance;
};

// Discrete compositing over per-sample alphas: returns (rgb, depth, sum w).
template <class S>
void composite_ray(const VecX<S>& alpha, const MatX<S>& colors, const VecX<S>& ts,
                   const Vec3<S>& background, Vec3<S>& rgb_out, S& depth_out, S& wsum_out,
                   VecX<S>* transmittance_out = nullptr) {
  const Index n = alpha.size();
  Vec3<S> rgb = Vec3<S>::Zero();
  S depth = S(0), wsum = S(0), t = S(1);
  if (transmittance_out) transmittance_out->resize(n);
  for (Index i = 0; i < n; ++i) {
    if (transmittance_out) (*transmittance_out)[i] = t;
    const S w = t * alpha[i];
    rgb += w * Vec3<S>(colors.row(i).transpose());
    depth += w * ts[i];
    wsum += w;
    t *= (S(1) - alpha[i]);
  }
  rgb += t * background;
  rgb_out = rgb;
  depth_out = depth;
  wsum_out = wsum;
}

// Forward render of one ray at given sample distances; fills a RaySampleSet.
template <class S>
RaySampleSet<S> render_ray(const SdfMlp<S>& mlp, const Vec3<S>& origin, const Vec3<S>& dir,
                           const VecX<S>& ts, const Vec3<S>& background, Vec3<S>& rgb_out,
                           Vec3<S>& normal_out, S& depth_out, S& wsum_out,
                           const RenderFlags& flags = {}) {
  RaySampleSet<S> set;
  set.origin = origin;
  set.dir = dir;
  set.ts = ts;
  const Index n = ts.size();
  if (n == 0) {
    rgb_out = background;
    normal_out = Vec3<S>::Zero();
    depth_out = S(0);
    wsum_out = S(0);
    return set;
  }

  MatX<S> pts(n, 3), dirs(n, 3);
  for (Index i = 0; i < n; ++i) {
    pts.row(i) = (origin + ts[i] * dir).transpose();
    dirs.row(i) = dir.transpose();
  }
  const GeoEval<S> geo = eval_geometry(mlp, pts, true);
  set.colors = eval_color(mlp, pts, dirs, geo.grad, geo.feature);
  set.sdf = geo.sdf * mlp.norm_scale;  // normalized units drive the logistic

  set.deltas.resize(n);
  S dsum = S(0);
  for (Index i = 0; i + 1 < n; ++i) {
    set.deltas[i] = ts[i + 1] - ts[i];
    dsum += set.deltas[i];
  }
  set.deltas[n - 1] = n > 1 ? dsum / S(n - 1) : S(0);

  const S sharp = mlp.sharpness();
  set.alpha = VecX<S>::Zero(n);
  for (Index i = 0; i + 1 < n; ++i) set.alpha[i] = neus_alpha(set.sdf[i], set.sdf[i + 1], sharp);

  if (flags.exp_transmittance) {
    set.transmittance.resize(n);
    S acc = S(0);
    Vec3<S> rgb = Vec3<S>::Zero();
    S depth = S(0), wsum = S(0);
    for (Index i = 0; i < n; ++i) {
      set.transmittance[i] = std::exp(-acc);
      const S w = set.transmittance[i] * set.alpha[i];
      rgb += w * Vec3<S>(set.colors.row(i).transpose());
      depth += w * ts[i];
      wsum += w;
      acc += set.alpha[i] * set.deltas[i];
    }
    rgb += std::exp(-acc) * background;
    rgb_out = rgb;
    depth_out = depth;
    wsum_out = wsum;
  } else {
    composite_ray(set.alpha, set.colors, set.ts, background, rgb_out, depth_out, wsum_out,
                  &set.transmittance);
  }

  // alpha-blended normal from unit SDF gradients
  Vec3<S> nrm = Vec3<S>::Zero();
  for (Index i = 0; i < n; ++i) {
    const S w = set.transmittance[i] * set.alpha[i];
    const Vec3<S> gr = geo.grad.row(i).transpose();
    const S len = gr.norm();
    if (len > S(1e-6)) nrm += w * (gr / len);
  }
  normal_out = nrm;
  return set;
}

// ---------------------------------------------------------------------------
// Hierarchical sampling.

template <class S>
VecX<S> stratified_samples(S lo, S hi, int n, Rng& rng) {
  VecX<S> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo + (S(i) + S(rng.uniform())) / S(n) * (hi - lo);
  return out;
}

// Guided split: the coarse budget covers the full range (free space stays
// supervised) while the fine budget lands inside the guided band.
template <class S>
VecX<S> banded_sample(int n_coarse, int n_fine, S t_near, S t_far, S band_lo, S band_hi,
                      Rng& rng) {
  VecX<S> coarse = stratified_samples(t_near, t_far, n_coarse, rng);
  if (n_fine <= 0) return coarse;
  VecX<S> fine = stratified_samples(std::max(band_lo, t_near), std::min(band_hi, t_far), n_fine,
                                    rng);
  VecX<S> merged(n_coarse + n_fine);
  merged << coarse, fine;
  std::sort(merged.data(), merged.data() + merged.size());
  return merged;
}

// Stratified coarse samples plus inverse-CDF importance samples drawn from
// the coarse weight distribution; merged and sorted.
template <class S>
VecX<S> hierarchical_sample(const SdfMlp<S>& mlp, const Vec3<S>& origin, const Vec3<S>& dir,
                            int n_coarse, int n_fine, S t_near, S t_far, Rng& rng) {
  if (t_far - t_near < S(1e-6)) {
    VecX<S> one(1);
    one[0] = (t_near + t_far) / S(2);
    return one;
  }
  VecX<S> coarse(n_coarse);
  for (int i = 0; i < n_coarse; ++i)
    coarse[i] = t_near + (S(i) + S(rng.uniform())) / S(n_coarse) * (t_far - t_near);

  if (n_fine <= 0) return coarse;

  MatX<S> pts(n_coarse, 3);
  for (int i = 0; i < n_coarse; ++i) pts.row(i) = (origin + coarse[i] * dir).transpose();
  const GeoEval<S> geo = eval_geometry(mlp, pts, false);
  const S sharp = mlp.sharpness();

  // interval weights (piecewise-constant pdf over coarse bins)
  const int bins = n_coarse - 1;
  VecX<S> w(bins);
  S t = S(1);
  for (int i = 0; i < bins; ++i) {
    const S a = neus_alpha(geo.sdf[i] * mlp.norm_scale, geo.sdf[i + 1] * mlp.norm_scale, sharp);
    w[i] = t * a + S(1e-5);
    t *= (S(1) - a);
  }
  const S wsum = w.sum();

  VecX<S> cdf(bins + 1);
  cdf[0] = S(0);
  for (int i = 0; i < bins; ++i) cdf[i + 1] = cdf[i] + w[i] / wsum;
  cdf[bins] = S(1);

  VecX<S> merged(n_coarse + n_fine);
  merged.head(n_coarse) = coarse;
  for (int k = 0; k < n_fine; ++k) {
    const S u = (S(k) + S(rng.uniform())) / S(n_fine);
    int lo = 0, hi = bins;
    while (lo + 1 < hi) {
      const int mid = (lo + hi) / 2;
      (cdf[mid] <= u ? lo : hi) = mid;
    }
    const S seg = cdf[lo + 1] - cdf[lo];
    const S frac = seg > S(1e-12) ? (u - cdf[lo]) / seg : S(0.5);
    merged[n_coarse + k] = coarse[lo] + frac * (coarse[lo + 1] - coarse[lo]);
  }
  std::sort(merged.data(), merged.data() + merged.size());
  return merged;
}

// Mean squared deviation of |grad f| from 1 over a point batch.
template <class S>
S eikonal_loss(const SdfMlp<S>& mlp, const MatX<S>& pts_world) {
  if (pts_world.rows() == 0) throw std::invalid_argument("eikonal_loss: empty batch");
  const GeoEval<S> geo = eval_geometry(mlp, pts_world, true);
  S acc = S(0);
  for (Index i = 0; i < pts_world.rows(); ++i) {
    const S d = geo.grad.row(i).norm() - S(1);
    acc += d * d;
  }
  return acc / S(pts_world.rows());
}

}  // namespace splatsdf::sdf
