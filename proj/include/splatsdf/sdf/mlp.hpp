#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "splatsdf/ad/tape.hpp"
#include "splatsdf/core/rng.hpp"
#include "splatsdf/core/types.hpp"

namespace splatsdf::sdf {

struct MlpConfig {
  int pe_freqs = 6;        // positional encoding octaves
  int geo_hidden = 64;
  int geo_layers = 4;      // weight matrices in the geometry head
  int skip_at = 2;         // encoded input re-concatenated at this layer
  int feature_dim = 64;
  int color_hidden = 64;
  int color_layers = 2;
  float softplus_beta = 100.f;

  int pe_dim() const { return 3 + 3 * 2 * pe_freqs; }
  int color_in() const { return 3 + 3 + 3 + feature_dim; }  // x, v, grad f, feature
};

// Geometry + color MLP weights with the scene-normalization transform and the
// learnable logistic sharpness. Weights are stored as (W [in,out], b [1,out]).
template <class S>
struct SdfMlp {
  MlpConfig cfg;
  std::vector<MatX<S>> geo_w, geo_b;
  std::vector<MatX<S>> col_w, col_b;
  S log_s = S(0);

  // world -> normalized: x_n = norm_scale * (x - norm_center)
  Vec3<S> norm_center = Vec3<S>::Zero();
  S norm_scale = S(1);
  // world-space scene box the field was trained over (extraction domain)
  Vec3<S> domain_lo = Vec3<S>::Zero();
  Vec3<S> domain_hi = Vec3<S>::Zero();

  S sharpness() const { return std::exp(log_s); }

  Vec3<S> normalize_point(const Vec3<S>& x_world) const {
    return norm_scale * (x_world - norm_center);
  }

  // SDF values in normalized units convert to world by 1/norm_scale;
  // spatial gradients are invariant under the uniform scaling.
  S to_world_sdf(S f_normalized) const { return f_normalized / norm_scale; }

  int geo_in_dim(int layer) const {
    if (layer == 0) return cfg.pe_dim();
    if (layer == cfg.skip_at) return cfg.geo_hidden + cfg.pe_dim();
    return cfg.geo_hidden;
  }
  int geo_out_dim(int layer) const {
    return layer == cfg.geo_layers - 1 ? 1 + cfg.feature_dim : cfg.geo_hidden;
  }
  int col_in_dim(int layer) const { return layer == 0 ? cfg.color_in() : cfg.color_hidden; }
  int col_out_dim(int layer) const { return layer == cfg.color_layers - 1 ? 3 : cfg.color_hidden; }

  void allocate() {
    geo_w.resize(cfg.geo_layers);
    geo_b.resize(cfg.geo_layers);
    for (int l = 0; l < cfg.geo_layers; ++l) {
      geo_w[l] = MatX<S>::Zero(geo_in_dim(l), geo_out_dim(l));
      geo_b[l] = MatX<S>::Zero(1, geo_out_dim(l));
    }
    col_w.resize(cfg.color_layers);
    col_b.resize(cfg.color_layers);
    for (int l = 0; l < cfg.color_layers; ++l) {
      col_w[l] = MatX<S>::Zero(col_in_dim(l), col_out_dim(l));
      col_b[l] = MatX<S>::Zero(1, col_out_dim(l));
    }
  }

  // Initializes f to approximate a sphere of the given radius (normalized
  // units). With inside_out, free space lies inside the sphere (f(0) > 0),
  // which matches scenes observed from within. The raw spherical init is
  // rescaled so the gradient magnitude starts near 1 and the zero crossing
  // lands on the requested radius.
  void geometric_init(S radius, bool inside_out, Rng& rng) {
    raw_geometric_init(radius, inside_out, rng);
    calibrate_init(radius, inside_out, rng);
  }

  void raw_geometric_init(S radius, bool inside_out, Rng& rng) {
    allocate();
    const S flip = inside_out ? S(-1) : S(1);
    for (int l = 0; l < cfg.geo_layers; ++l) {
      const int in = geo_in_dim(l), out = geo_out_dim(l);
      if (l == cfg.geo_layers - 1) {
        const S mu = std::sqrt(S(3.141592653589793) / S(in));
        for (Index i = 0; i < in; ++i)
          for (Index j = 0; j < out; ++j)
            geo_w[l](i, j) = j == 0 ? flip * (mu + S(1e-4) * S(rng.normal()))
                                    : S(1e-2) * S(rng.normal());
        geo_b[l](0, 0) = -flip * radius;
      } else {
        const S std = std::sqrt(S(2) / S(out));
        for (Index i = 0; i < in; ++i)
          for (Index j = 0; j < out; ++j) geo_w[l](i, j) = std * S(rng.normal());
        // encoded features beyond raw xyz start at zero so the init is radial
        const int pe_rows_from = 3;
        if (l == 0)
          for (Index i = pe_rows_from; i < in; ++i)
            for (Index j = 0; j < out; ++j) geo_w[l](i, j) = S(0);
        if (l == cfg.skip_at)
          for (Index i = cfg.geo_hidden + pe_rows_from; i < in; ++i)
            for (Index j = 0; j < out; ++j) geo_w[l](i, j) = S(0);
      }
    }
    for (int l = 0; l < cfg.color_layers; ++l) {
      const int in = col_in_dim(l), out = col_out_dim(l);
      const S std = std::sqrt(S(2) / S(in));
      for (Index i = 0; i < in; ++i)
        for (Index j = 0; j < out; ++j) col_w[l](i, j) = std * S(rng.normal());
    }
  }

  // Rescales the sdf output column so |grad f| ~ 1, then shifts the bias so
  // the zero crossing sits at `radius`. Declared in field.hpp (needs eval).
  void calibrate_init(S radius, bool inside_out, Rng& rng);

  size_t param_count() const {
    size_t n = 1;  // log_s
    for (const auto& m : geo_w) n += m.size();
    for (const auto& m : geo_b) n += m.size();
    for (const auto& m : col_w) n += m.size();
    for (const auto& m : col_b) n += m.size();
    return n;
  }

  // Fixed parameter traversal order shared by the optimizer and checkpoints.
  template <class Fn>
  void for_each_param(Fn&& fn) {
    for (auto& m : geo_w) fn(m);
    for (auto& m : geo_b) fn(m);
    for (auto& m : col_w) fn(m);
    for (auto& m : col_b) fn(m);
  }
  template <class Fn>
  void for_each_param(Fn&& fn) const {
    for (const auto& m : geo_w) fn(m);
    for (const auto& m : geo_b) fn(m);
    for (const auto& m : col_w) fn(m);
    for (const auto& m : col_b) fn(m);
  }
};

// Positional encoding [x, sin(2^k pi x), cos(2^k pi x), ...] and its spatial
// Jacobian columns; both are constants w.r.t. the network weights.
template <class S>
MatX<S> positional_encode(const MatX<S>& pts, int freqs) {
  const Index n = pts.rows();
  MatX<S> out(n, 3 + 3 * 2 * freqs);
  out.leftCols(3) = pts;
  Index c = 3;
  for (int k = 0; k < freqs; ++k) {
    const S w = S(std::pow(2.0, k)) * S(3.141592653589793);
    for (int a = 0; a < 3; ++a) {
      out.col(c++) = (pts.col(a) * w).array().sin().matrix();
      out.col(c++) = (pts.col(a) * w).array().cos().matrix();
    }
  }
  return out;
}

// d(encode)/d(x_axis); zero for columns of other axes.
template <class S>
MatX<S> positional_encode_jac(const MatX<S>& pts, int freqs, int axis) {
  const Index n = pts.rows();
  MatX<S> out = MatX<S>::Zero(n, 3 + 3 * 2 * freqs);
  out.col(axis).setOnes();
  Index c = 3;
  for (int k = 0; k < freqs; ++k) {
    const S w = S(std::pow(2.0, k)) * S(3.141592653589793);
    for (int a = 0; a < 3; ++a) {
      if (a == axis) {
        out.col(c) = w * (pts.col(a) * w).array().cos().matrix();
        out.col(c + 1) = -w * (pts.col(a) * w).array().sin().matrix();
      }
      c += 2;
    }
  }
  return out;
}

void save_mlp(const std::string& path, const SdfMlp<float>& mlp);
SdfMlp<float> load_mlp(const std::string& path);

}  // namespace splatsdf::sdf
