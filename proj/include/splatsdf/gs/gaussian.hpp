#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "splatsdf/core/types.hpp"

namespace splatsdf::gs {

// Observer for index reorganizations during density control, so per-primitive
// side state (optimizer moments) can stay aligned with the cloud.
struct CloudReorg {
  std::function<void(size_t)> replaced;  // slot re-initialized in place
  std::function<void(size_t)> resized;   // grown to new size (fresh tail slots)
  std::function<void(const std::vector<std::uint8_t>&)> compacted;

  void on_replaced(size_t i) const {
    if (replaced) replaced(i);
  }
  void on_resized(size_t n) const {
    if (resized) resized(n);
  }
  void on_compacted(const std::vector<std::uint8_t>& keep) const {
    if (compacted) compacted(keep);
  }
};

// One anisotropic Gaussian primitive. Covariance = R * diag(exp(ls))^2 * R^T.
template <class S>
struct GaussianPrimitive {
  Vec3<S> mean = Vec3<S>::Zero();
  Vec4<S> quat{1, 0, 0, 0};       // (w, x, y, z), kept unit-normalized
  Vec3<S> log_scales = Vec3<S>::Constant(S(-3));
  S opacity_logit = S(0);
  Vec3<S> color = Vec3<S>::Constant(S(0.5));

  S opacity() const { return sigmoid(opacity_logit); }
  Vec3<S> scales() const { return log_scales.array().exp().matrix(); }
  Mat3<S> rotation() const { return quat_to_rot<S>(quat); }

  Mat3<S> covariance(S reg = S(1e-8)) const {
    const Mat3<S> r = rotation();
    const Vec3<S> s = scales();
    Mat3<S> m = r * s.asDiagonal();
    return m * m.transpose() + reg * Mat3<S>::Identity();
  }
};

// Parameter-space gradients for one primitive.
template <class S>
struct PrimitiveGrads {
  Vec3<S> mean = Vec3<S>::Zero();
  Vec4<S> quat = Vec4<S>::Zero();
  Vec3<S> log_scales = Vec3<S>::Zero();
  S opacity_logit = S(0);
  Vec3<S> color = Vec3<S>::Zero();

  PrimitiveGrads& operator+=(const PrimitiveGrads& o) {
    mean += o.mean;
    quat += o.quat;
    log_scales += o.log_scales;
    opacity_logit += o.opacity_logit;
    color += o.color;
    return *this;
  }
};

template <class S>
struct GaussianCloud {
  std::vector<GaussianPrimitive<S>> prims;

  // view-space positional gradient statistics feeding density control
  std::vector<S> grad_accum;
  std::vector<int> grad_count;

  size_t size() const { return prims.size(); }
  bool empty() const { return prims.empty(); }

  void sync_accumulators() {
    grad_accum.resize(prims.size(), S(0));
    grad_count.resize(prims.size(), 0);
  }

  void reset_accumulators() {
    grad_accum.assign(prims.size(), S(0));
    grad_count.assign(prims.size(), 0);
  }

  S mean_grad(size_t i) const {
    return grad_count[i] > 0 ? grad_accum[i] / S(grad_count[i]) : S(0);
  }
};

// Eq.-1 style density of a single primitive at a world point, in (0, 1].
// Throws if the regularized covariance is numerically singular.
template <class S>
S eval_gaussian(const GaussianPrimitive<S>& g, const Vec3<S>& x, S reg = S(1e-8)) {
  const Mat3<S> cov = g.covariance(reg);
  const S det = cov.determinant();
  if (!(det > S(0)) || !std::isfinite(det))
    throw std::runtime_error("eval_gaussian: singular covariance");
  const Vec3<S> d = x - g.mean;
  const S power = d.dot(cov.inverse() * d);
  return std::exp(S(-0.5) * power);
}

// Checkpoint I/O: ASCII PLY with per-vertex properties
// (x y z qw qx qy qz ls0 ls1 ls2 opacity_logit red green blue), float32-lossless.
void save_cloud_ply(const std::string& path, const GaussianCloud<float>& cloud);
GaussianCloud<float> load_cloud_ply(const std::string& path);

}  // namespace splatsdf::gs
