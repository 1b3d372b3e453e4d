#pragma once

#include "splatsdf/ad/tape.hpp"
#include "splatsdf/sdf/field.hpp"
#include "splatsdf/sdf/mlp.hpp"

namespace splatsdf::sdf {

// MLP parameters staged onto a tape as differentiable leaves. Gradient
// readback follows the same traversal order as SdfMlp::for_each_param.
template <class S>
struct TapedParams {
  using Var = typename ad::Tape<S>::Var;
  std::vector<Var> geo_w, geo_b, col_w, col_b;
  Var log_s;

  static TapedParams stage(ad::Tape<S>& tape, const SdfMlp<S>& mlp) {
    TapedParams p;
    for (const auto& m : mlp.geo_w) p.geo_w.push_back(tape.input(m));
    for (const auto& m : mlp.geo_b) p.geo_b.push_back(tape.input(m));
    for (const auto& m : mlp.col_w) p.col_w.push_back(tape.input(m));
    for (const auto& m : mlp.col_b) p.col_b.push_back(tape.input(m));
    MatX<S> ls(1, 1);
    ls(0, 0) = mlp.log_s;
    p.log_s = tape.input(ls);
    return p;
  }

  // Writes dLoss/dParam into a same-shaped mirror of the network.
  void read_grads(const ad::Tape<S>& tape, SdfMlp<S>& grads_out) const {
    for (size_t i = 0; i < geo_w.size(); ++i) grads_out.geo_w[i] = tape.gradient(geo_w[i]);
    for (size_t i = 0; i < geo_b.size(); ++i) grads_out.geo_b[i] = tape.gradient(geo_b[i]);
    for (size_t i = 0; i < col_w.size(); ++i) grads_out.col_w[i] = tape.gradient(col_w[i]);
    for (size_t i = 0; i < col_b.size(); ++i) grads_out.col_b[i] = tape.gradient(col_b[i]);
    grads_out.log_s = tape.gradient(log_s)(0, 0);
  }
};

template <class S>
struct TapedGeo {
  using Var = typename ad::Tape<S>::Var;
  Var sdf_n;    // [n,1], normalized units
  Var grad;     // [n,3], world frame
  Var feature;  // [n,F]
};

// Geometry forward with spatial-Jacobian propagation: both f and grad f stay
// differentiable w.r.t. the weights, so eikonal and normal terms backprop.
template <class S>
TapedGeo<S> taped_geometry(ad::Tape<S>& tape, const TapedParams<S>& params,
                           const SdfMlp<S>& mlp, const MatX<S>& pts_world) {
  using Var = typename ad::Tape<S>::Var;
  const Index n = pts_world.rows();
  MatX<S> pn(n, 3);
  for (Index i = 0; i < n; ++i)
    pn.row(i) = (mlp.norm_scale * (Vec3<S>(pts_world.row(i).transpose()) - mlp.norm_center))
                    .transpose();

  const MatX<S> pe_val = positional_encode(pn, mlp.cfg.pe_freqs);
  Var pe = tape.constant(pe_val);
  Var jac[3];
  for (int a = 0; a < 3; ++a)
    jac[a] = tape.constant(positional_encode_jac(pn, mlp.cfg.pe_freqs, a));

  const S beta = S(mlp.cfg.softplus_beta);
  Var h = pe;
  Var g[3] = {jac[0], jac[1], jac[2]};
  for (int l = 0; l < mlp.cfg.geo_layers; ++l) {
    if (l == mlp.cfg.skip_at) {
      h = tape.hcat(h, pe);
      for (int a = 0; a < 3; ++a) g[a] = tape.hcat(g[a], jac[a]);
    }
    Var z = tape.add_row(tape.matmul(h, params.geo_w[l]), params.geo_b[l]);
    for (int a = 0; a < 3; ++a) g[a] = tape.matmul(g[a], params.geo_w[l]);
    if (l + 1 < mlp.cfg.geo_layers) {
      Var act = tape.sigmoid(tape.scale(z, beta));
      h = tape.softplus(z, beta);
      for (int a = 0; a < 3; ++a) g[a] = tape.mul(g[a], act);
    } else {
      h = z;
    }
  }

  TapedGeo<S> out;
  out.sdf_n = tape.slice_cols(h, 0, 1);
  out.feature = tape.slice_cols(h, 1, mlp.cfg.feature_dim);
  out.grad = tape.hcat(tape.hcat(tape.slice_cols(g[0], 0, 1), tape.slice_cols(g[1], 0, 1)),
                       tape.slice_cols(g[2], 0, 1));
  return out;
}

template <class S>
typename ad::Tape<S>::Var taped_color(ad::Tape<S>& tape, const TapedParams<S>& params,
                                      const SdfMlp<S>& mlp, const MatX<S>& pts_world,
                                      const MatX<S>& dirs, const TapedGeo<S>& geo) {
  using Var = typename ad::Tape<S>::Var;
  const Index n = pts_world.rows();
  MatX<S> pn(n, 3);
  for (Index i = 0; i < n; ++i)
    pn.row(i) = (mlp.norm_scale * (Vec3<S>(pts_world.row(i).transpose()) - mlp.norm_center))
                    .transpose();
  MatX<S> pv(n, 6);
  pv << pn, dirs;
  Var x = tape.hcat(tape.hcat(tape.constant(pv), geo.grad), geo.feature);
  for (int l = 0; l < mlp.cfg.color_layers; ++l) {
    Var z = tape.add_row(tape.matmul(x, params.col_w[l]), params.col_b[l]);
    x = (l + 1 < mlp.cfg.color_layers) ? tape.relu(z) : tape.sigmoid(z);
  }
  return x;
}

template <class S>
struct TapedRender {
  using Var = typename ad::Tape<S>::Var;
  Var color;    // [R,3]
  Var normal;   // [R,3], alpha-blended unit gradients
  Var depth;    // [R,1]
  Var wsum;     // [R,1]
  Var grad_pts; // [R*samples,3] raw spatial gradients (eikonal feed)
};

// Full differentiable ray batch: R rays, fixed sample count per ray.
// `ts` is [R, samples] of strictly increasing distances.
template <class S>
TapedRender<S> taped_render(ad::Tape<S>& tape, const TapedParams<S>& params,
                            const SdfMlp<S>& mlp, const MatX<S>& origins, const MatX<S>& dirs,
                            const MatX<S>& ts, const Vec3<S>& background,
                            const RenderFlags& flags = {}) {
  using Var = typename ad::Tape<S>::Var;
  const Index rays = ts.rows(), samples = ts.cols();
  const Index n = rays * samples;

  MatX<S> pts(n, 3), pdirs(n, 3);
  for (Index r = 0; r < rays; ++r)
    for (Index s = 0; s < samples; ++s) {
      pts.row(r * samples + s) = origins.row(r) + ts(r, s) * dirs.row(r);
      pdirs.row(r * samples + s) = dirs.row(r);
    }

  const TapedGeo<S> geo = taped_geometry(tape, params, mlp, pts);
  Var rgb = taped_color(tape, params, mlp, pts, pdirs, geo);

  // logistic opacity over consecutive samples
  Var f = tape.reshape(geo.sdf_n, rays, samples);
  MatX<S> ones_r = MatX<S>::Ones(rays, 1);
  Var s_col = tape.matmul(tape.constant(ones_r), tape.exp(params.log_s));
  Var phi = tape.sigmoid(tape.colmul(f, s_col));
  Var phi_front = tape.slice_cols(phi, 0, samples - 1);
  Var phi_back = tape.slice_cols(phi, 1, samples - 1);
  // underflowed fronts contribute zero opacity
  MatX<S> mask(rays, samples - 1);
  {
    const auto& pv = tape.value(phi_front);
    for (Index r = 0; r < rays; ++r)
      for (Index c = 0; c < samples - 1; ++c) mask(r, c) = pv(r, c) > S(1e-30) ? S(1) : S(0);
  }
  Var ratio = tape.div(phi_back, tape.clamp_min(phi_front, S(1e-30)));
  Var alpha = tape.mul(tape.relu(tape.sub(tape.constant(MatX<S>::Ones(rays, samples - 1)), ratio)),
                       tape.constant(mask));

  Var trans, trans_final;
  if (flags.exp_transmittance) {
    MatX<S> deltas(rays, samples - 1);
    for (Index r = 0; r < rays; ++r)
      for (Index c = 0; c + 1 < samples; ++c) deltas(r, c) = ts(r, c + 1) - ts(r, c);
    Var ad_ = tape.mul(alpha, tape.constant(deltas));
    Var acc = tape.cumsum_exclusive_row(ad_);
    trans = tape.exp(tape.scale(acc, S(-1)));
    trans_final = tape.exp(tape.scale(tape.row_sum(ad_), S(-1)));
  } else {
    Var one_minus = tape.sub(tape.constant(MatX<S>::Ones(rays, samples - 1)), alpha);
    Var ext = tape.hcat(one_minus, tape.constant(MatX<S>::Ones(rays, 1)));
    Var t_ext = tape.cumprod_exclusive_row(ext);
    trans = tape.slice_cols(t_ext, 0, samples - 1);
    // exclusive cumprod at the appended column is the product of all sections
    trans_final = tape.slice_cols(t_ext, samples - 1, 1);
  }
  Var w = tape.mul(trans, alpha);

  // weighted color/depth/normal accumulation
  TapedRender<S> out;
  Var color_cols[3];
  for (int ch = 0; ch < 3; ++ch) {
    Var c_eval = tape.reshape(tape.slice_cols(rgb, ch, 1), rays, samples);
    Var c_used = tape.slice_cols(c_eval, 0, samples - 1);
    Var acc = tape.row_sum(tape.mul(w, c_used));
    color_cols[ch] = tape.add(acc, tape.scale(trans_final, background[ch]));
  }
  out.color = tape.hcat(tape.hcat(color_cols[0], color_cols[1]), color_cols[2]);

  MatX<S> t_used(rays, samples - 1);
  for (Index r = 0; r < rays; ++r)
    for (Index c = 0; c + 1 < samples; ++c) t_used(r, c) = ts(r, c);
  out.depth = tape.row_sum(tape.mul(w, tape.constant(t_used)));
  out.wsum = tape.row_sum(w);

  Var gnorm = tape.clamp_min(tape.row_norm(geo.grad), S(1e-6));
  Var unit = tape.colmul(geo.grad, tape.div(tape.constant(MatX<S>::Ones(n, 1)), gnorm));
  Var normal_cols[3];
  for (int ch = 0; ch < 3; ++ch) {
    Var comp = tape.reshape(tape.slice_cols(unit, ch, 1), rays, samples);
    normal_cols[ch] = tape.row_sum(tape.mul(w, tape.slice_cols(comp, 0, samples - 1)));
  }
  out.normal = tape.hcat(tape.hcat(normal_cols[0], normal_cols[1]), normal_cols[2]);
  out.grad_pts = geo.grad;
  return out;
}

// Taped eikonal penalty over arbitrary points (shares staged parameters, so
// gradients accumulate with the render graph).
template <class S>
typename ad::Tape<S>::Var taped_eikonal(ad::Tape<S>& tape, typename ad::Tape<S>::Var grad_pts) {
  using Var = typename ad::Tape<S>::Var;
  const Index n = tape.value(grad_pts).rows();
  Var d = tape.sub(tape.row_norm(grad_pts), tape.constant(MatX<S>::Ones(n, 1)));
  return tape.mean(tape.mul(d, d));
}

}  // namespace splatsdf::sdf
