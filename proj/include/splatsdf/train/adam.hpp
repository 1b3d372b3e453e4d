#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "splatsdf/gs/gaussian.hpp"
#include "splatsdf/sdf/mlp.hpp"

namespace splatsdf::train {

struct AdamHyper {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

inline void adam_update(float& p, float g, float& m, float& v, float lr, const AdamHyper& h,
                        float bias1, float bias2) {
  if (lr == 0.f) return;  // an lr-0 step must not touch the parameter at all
  m = h.beta1 * m + (1.f - h.beta1) * g;
  v = h.beta2 * v + (1.f - h.beta2) * g * g;
  p -= lr * (m / bias1) / (std::sqrt(v / bias2) + h.eps);
}

struct CloudLearningRates {
  float mean = 0, quat = 0, log_scales = 0, opacity = 0, color = 0;
};

// First/second moments per primitive, kept index-aligned with the cloud
// through every density-control event.
struct CloudAdam {
  std::vector<gs::PrimitiveGrads<float>> m, v;
  std::int64_t step = 0;
  AdamHyper hyper;

  void sync(size_t n) {
    if (m.size() < n) {
      m.resize(n);
      v.resize(n);
    }
  }
  void reset_slot(size_t i) {
    m[i] = gs::PrimitiveGrads<float>{};
    v[i] = gs::PrimitiveGrads<float>{};
  }
  void compact(const std::vector<std::uint8_t>& keep) {
    size_t w = 0;
    for (size_t i = 0; i < keep.size(); ++i) {
      if (!keep[i]) continue;
      m[w] = m[i];
      v[w] = v[i];
      ++w;
    }
    m.resize(w);
    v.resize(w);
  }

  void apply(gs::GaussianCloud<float>& cloud, const std::vector<gs::PrimitiveGrads<float>>& g,
             const CloudLearningRates& lr) {
    sync(cloud.size());
    ++step;
    const float bias1 = 1.f - std::pow(hyper.beta1, float(step));
    const float bias2 = 1.f - std::pow(hyper.beta2, float(step));
    for (size_t i = 0; i < cloud.size(); ++i) {
      auto& prim = cloud.prims[i];
      for (int a = 0; a < 3; ++a) {
        adam_update(prim.mean[a], g[i].mean[a], m[i].mean[a], v[i].mean[a], lr.mean, hyper, bias1,
                    bias2);
        adam_update(prim.log_scales[a], g[i].log_scales[a], m[i].log_scales[a],
                    v[i].log_scales[a], lr.log_scales, hyper, bias1, bias2);
        adam_update(prim.color[a], g[i].color[a], m[i].color[a], v[i].color[a], lr.color, hyper,
                    bias1, bias2);
      }
      for (int a = 0; a < 4; ++a)
        adam_update(prim.quat[a], g[i].quat[a], m[i].quat[a], v[i].quat[a], lr.quat, hyper, bias1,
                    bias2);
      adam_update(prim.opacity_logit, g[i].opacity_logit, m[i].opacity_logit,
                  v[i].opacity_logit, lr.opacity, hyper, bias1, bias2);
      if (lr.quat != 0.f) prim.quat.normalize();
    }
  }
};

// Moments mirroring the field's parameter matrices.
struct MlpAdam {
  sdf::SdfMlp<float> m, v;
  std::int64_t step = 0;
  AdamHyper hyper;
  bool initialized = false;

  void init_like(const sdf::SdfMlp<float>& mlp) {
    m.cfg = mlp.cfg;
    v.cfg = mlp.cfg;
    m.allocate();
    v.allocate();
    m.log_s = 0;
    v.log_s = 0;
    initialized = true;
  }

  void apply(sdf::SdfMlp<float>& mlp, const sdf::SdfMlp<float>& g, float lr_weights,
             float lr_sharpness) {
    if (!initialized) init_like(mlp);
    ++step;
    const float bias1 = 1.f - std::pow(hyper.beta1, float(step));
    const float bias2 = 1.f - std::pow(hyper.beta2, float(step));
    auto update_mats = [&](std::vector<MatX<float>>& p, const std::vector<MatX<float>>& gm,
                           std::vector<MatX<float>>& mm, std::vector<MatX<float>>& vm) {
      for (size_t k = 0; k < p.size(); ++k)
        for (Index i = 0; i < p[k].size(); ++i)
          adam_update(p[k].data()[i], gm[k].data()[i], mm[k].data()[i], vm[k].data()[i],
                      lr_weights, hyper, bias1, bias2);
    };
    update_mats(mlp.geo_w, g.geo_w, m.geo_w, v.geo_w);
    update_mats(mlp.geo_b, g.geo_b, m.geo_b, v.geo_b);
    update_mats(mlp.col_w, g.col_w, m.col_w, v.col_w);
    update_mats(mlp.col_b, g.col_b, m.col_b, v.col_b);
    adam_update(mlp.log_s, g.log_s, m.log_s, v.log_s, lr_sharpness, hyper, bias1, bias2);
  }
};

}  // namespace splatsdf::train
