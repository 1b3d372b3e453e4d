#pragma once

#include <cmath>

#include "splatsdf/core/types.hpp"

namespace splatsdf::scene {

// Posed pinhole camera. x_cam = rot * x_world + trans; +z looks forward.
// Pixel (ix, iy) has its center at continuous coordinates (ix+0.5, iy+0.5).
template <class S>
struct Camera {
  S fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Mat3<S> rot = Mat3<S>::Identity();
  Vec3<S> trans = Vec3<S>::Zero();

  Vec3<S> center() const { return -(rot.transpose() * trans); }
  Vec3<S> forward() const { return rot.row(2).transpose(); }

  Vec3<S> to_camera(const Vec3<S>& p_world) const { return rot * p_world + trans; }

  // Returns (u, v, z_cam). Caller must check z > 0 before trusting (u, v).
  Vec3<S> project(const Vec3<S>& p_world) const {
    const Vec3<S> pc = to_camera(p_world);
    return {fx * pc[0] / pc[2] + cx, fy * pc[1] / pc[2] + cy, pc[2]};
  }

  struct Ray {
    Vec3<S> origin;
    Vec3<S> dir;        // unit, world frame
    S cos_forward = 1;  // dir . camera forward axis, converts ray t <-> camera z
  };

  // Ray through continuous pixel coordinates (u, v); pass ix+0.5 for pixel centers.
  Ray ray(S u, S v) const {
    Vec3<S> d_cam{(u - cx) / fx, (v - cy) / fy, S(1)};
    Vec3<S> d = rot.transpose() * d_cam;
    d.normalize();
    Ray r;
    r.origin = center();
    r.dir = d;
    r.cos_forward = d.dot(forward());
    return r;
  }

  bool rotation_orthonormal(S eps = S(1e-6)) const {
    return (rot * rot.transpose() - Mat3<S>::Identity()).cwiseAbs().maxCoeff() <= eps &&
           std::abs(rot.determinant() - S(1)) <= S(10) * eps;
  }

  bool intrinsics_valid() const {
    return fx > 0 && fy > 0 && cx > 0 && cx < S(width) && cy > 0 && cy < S(height) &&
           width > 0 && height > 0;
  }

  template <class T>
  Camera<T> cast() const {
    Camera<T> c;
    c.fx = T(fx);
    c.fy = T(fy);
    c.cx = T(cx);
    c.cy = T(cy);
    c.width = width;
    c.height = height;
    c.rot = rot.template cast<T>();
    c.trans = trans.template cast<T>();
    return c;
  }
};

// Camera looking from `eye` toward `target` with up hint (world frame).
template <class S>
Camera<S> look_at_camera(const Vec3<S>& eye, const Vec3<S>& target, const Vec3<S>& up_hint,
                         S focal, int width, int height) {
  Vec3<S> fwd = (target - eye).normalized();
  Vec3<S> right = fwd.cross(up_hint).normalized();
  Vec3<S> down = fwd.cross(right);  // +y points down in image space
  Camera<S> cam;
  cam.rot.row(0) = right.transpose();
  cam.rot.row(1) = down.transpose();
  cam.rot.row(2) = fwd.transpose();
  cam.trans = -(cam.rot * eye);
  cam.fx = cam.fy = focal;
  cam.cx = S(width) / 2;
  cam.cy = S(height) / 2;
  cam.width = width;
  cam.height = height;
  return cam;
}

}  // namespace splatsdf::scene
