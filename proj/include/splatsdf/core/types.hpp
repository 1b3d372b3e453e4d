#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <vector>

namespace splatsdf {

using Index = std::int64_t;

template <class S> using Vec2 = Eigen::Matrix<S, 2, 1>;
template <class S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <class S> using Vec4 = Eigen::Matrix<S, 4, 1>;
template <class S> using Mat2 = Eigen::Matrix<S, 2, 2>;
template <class S> using Mat3 = Eigen::Matrix<S, 3, 3>;
template <class S> using Mat23 = Eigen::Matrix<S, 2, 3>;
template <class S> using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S> using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Rotation matrix from a (not necessarily unit) quaternion (w, x, y, z).
template <class S>
Mat3<S> quat_to_rot(const Vec4<S>& q) {
  const Vec4<S> u = q / q.norm();
  const S w = u[0], x = u[1], y = u[2], z = u[3];
  Mat3<S> r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
       2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
       2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

// d(quat_to_rot)/dq for a unit quaternion, as nine 4-vectors (row-major R order).
// Callers composing with non-unit q must also apply the normalization Jacobian.
template <class S>
void quat_to_rot_jacobian(const Vec4<S>& u, Eigen::Matrix<S, 9, 4>& jac) {
  const S w = u[0], x = u[1], y = u[2], z = u[3];
  // Rows: R00,R01,R02,R10,R11,R12,R20,R21,R22. Columns: w,x,y,z.
  jac <<  0,      0,     -4 * y, -4 * z,
         -2 * z,  2 * y,  2 * x, -2 * w,
          2 * y,  2 * z,  2 * w,  2 * x,
          2 * z,  2 * y,  2 * x,  2 * w,
          0,     -4 * x,  0,     -4 * z,
         -2 * x, -2 * w,  2 * z,  2 * y,
         -2 * y,  2 * z, -2 * w,  2 * x,
          2 * x,  2 * w,  2 * z,  2 * y,
          0,     -4 * x, -4 * y,  0;
}

template <class S>
S sigmoid(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

template <class S>
S softplus(S x, S beta = S(1)) {
  const S bx = beta * x;
  // max(x,0) + log1p(exp(-|beta x|)) / beta, stable for large |x|
  return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(bx))) / beta;
}

template <class S>
S logit(S p) {
  return std::log(p / (S(1) - p));
}

struct BoundingBox {
  Vec3<float> lo{0, 0, 0};
  Vec3<float> hi{0, 0, 0};

  Vec3<float> center() const { return 0.5f * (lo + hi); }
  Vec3<float> extent() const { return hi - lo; }
  float diagonal() const { return (hi - lo).norm(); }
  bool contains(const Vec3<float>& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

}  // namespace splatsdf
