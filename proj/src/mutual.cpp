#include "splatsdf/mutual/mutual.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "splatsdf/gs/densify.hpp"
#include "splatsdf/sdf/field.hpp"

namespace splatsdf::mutual {

int GuidanceGrid::cell_of(const Vec3<float>& p) const {
  Eigen::Vector3i c;
  for (int a = 0; a < 3; ++a) {
    const int i = int(std::floor((p[a] - box.lo[a]) / cell_size[a]));
    if (i < 0 || i >= resolution) return -1;
    c[a] = i;
  }
  return (c[2] * resolution + c[1]) * resolution + c[0];
}

Vec3<float> GuidanceGrid::cell_lo(int idx) const {
  const int x = idx % resolution;
  const int y = (idx / resolution) % resolution;
  const int z = idx / (resolution * resolution);
  return box.lo + Vec3<float>{x * cell_size[0], y * cell_size[1], z * cell_size[2]};
}

Vec3<float> GuidanceGrid::cell_center(int idx) const {
  return cell_lo(idx) + 0.5f * cell_size;
}

GuidanceGrid build_guidance_grid(const sdf::SdfMlp<float>& field,
                                 const gs::GaussianCloud<float>& cloud, const BoundingBox& box,
                                 int resolution) {
  if (resolution < 2) throw std::invalid_argument("guidance grid: resolution must be >= 2");
  GuidanceGrid g;
  g.resolution = resolution;
  g.box = box;
  g.cell_size = box.extent() / float(resolution);
  const int cells = g.cell_count();

  MatX<float> centers(cells, 3);
  for (int i = 0; i < cells; ++i) centers.row(i) = g.cell_center(i).transpose();
  const sdf::GeoEval<float> eval = sdf::eval_geometry(field, centers, false);
  g.center_sdf.resize(cells);
  for (int i = 0; i < cells; ++i) g.center_sdf[i] = eval.sdf[i];

  g.gauss_count.assign(cells, 0);
  for (const auto& prim : cloud.prims) {
    const int c = g.cell_of(prim.mean);
    if (c >= 0) ++g.gauss_count[c];
  }
  return g;
}

void DistributionThresholds::validate() const {
  if (!(0.f <= tau_p && tau_p < tau_d && tau_d <= 1.f))
    throw std::invalid_argument("thresholds: need 0 <= tau_p < tau_d <= 1");
  if (k_neighbors < 1) throw std::invalid_argument("thresholds: K must be >= 1");
  if (lambda_sigma <= 0) throw std::invalid_argument("thresholds: lambda_sigma must be > 0");
}

float compute_eta(float sdf_value, float opacity, float lambda_sigma) {
  if (lambda_sigma <= 0) throw std::invalid_argument("compute_eta: lambda_sigma must be > 0");
  if (opacity <= 0.f) return 0.f;
  const float d = sdf_value / opacity;
  return std::exp(-d * d / lambda_sigma);
}

namespace {

// indices of the k nearest primitives to `target` (brute force)
std::vector<int> k_nearest(const gs::GaussianCloud<float>& cloud, const Vec3<float>& target,
                           int k) {
  const int n = int(cloud.size());
  k = std::min(k, n);
  std::vector<std::pair<float, int>> d(n);
  for (int i = 0; i < n; ++i) d[i] = {(cloud.prims[i].mean - target).squaredNorm(), i};
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  std::vector<int> out(k);
  for (int i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

}  // namespace

int global_densify(gs::GaussianCloud<float>& cloud, const sdf::SdfMlp<float>& field,
                   const BoundingBox& box, int grid_resolution,
                   const DistributionThresholds& th_in, Rng& rng, size_t max_primitives,
                   const gs::CloudReorg* reorg) {
  DistributionThresholds th = th_in;
  th.validate();
  if (cloud.empty()) {
    std::cerr << "global_densify: empty cloud, nothing to sample from\n";
    return 0;
  }
  GuidanceGrid grid = build_guidance_grid(field, cloud, box, grid_resolution);
  if (th.tau_s <= 0) th.tau_s = 0.5f * grid.cell_diagonal();

  cloud.sync_accumulators();
  int added = 0;
  const int cells = grid.cell_count();
  for (int c = 0; c < cells; ++c) {
    if (std::abs(grid.center_sdf[c]) >= th.tau_s) continue;
    if (grid.gauss_count[c] >= th.tau_n) continue;
    if (max_primitives && cloud.size() + th.k_neighbors > max_primitives) break;

    const Vec3<float> center = grid.cell_center(c);
    const std::vector<int> nn = k_nearest(cloud, center, th.k_neighbors);
    const int k = int(nn.size());

    // per-attribute mean/std over the neighbors
    Vec3<float> mean_pos = Vec3<float>::Zero(), var_pos = Vec3<float>::Zero();
    Vec4<float> mean_q = Vec4<float>::Zero(), var_q = Vec4<float>::Zero();
    Vec3<float> mean_ls = Vec3<float>::Zero(), var_ls = Vec3<float>::Zero();
    Vec3<float> mean_col = Vec3<float>::Zero(), var_col = Vec3<float>::Zero();
    float mean_ol = 0, var_ol = 0;
    for (int i : nn) {
      const auto& p = cloud.prims[i];
      mean_pos += p.mean;
      mean_q += p.quat;
      mean_ls += p.log_scales;
      mean_col += p.color;
      mean_ol += p.opacity_logit;
    }
    mean_pos /= float(k);
    mean_q /= float(k);
    mean_ls /= float(k);
    mean_col /= float(k);
    mean_ol /= float(k);
    for (int i : nn) {
      const auto& p = cloud.prims[i];
      var_pos += (p.mean - mean_pos).cwiseProduct(p.mean - mean_pos);
      var_q += (p.quat - mean_q).cwiseProduct(p.quat - mean_q);
      var_ls += (p.log_scales - mean_ls).cwiseProduct(p.log_scales - mean_ls);
      var_col += (p.color - mean_col).cwiseProduct(p.color - mean_col);
      var_ol += (p.opacity_logit - mean_ol) * (p.opacity_logit - mean_ol);
    }
    const Vec3<float> std_pos = (var_pos / float(k)).cwiseSqrt();
    const Vec4<float> std_q = (var_q / float(k)).cwiseSqrt();
    const Vec3<float> std_ls = (var_ls / float(k)).cwiseSqrt();
    const Vec3<float> std_col = (var_col / float(k)).cwiseSqrt();
    const float std_ol = std::sqrt(var_ol / float(k));

    const Vec3<float> lo = grid.cell_lo(c), hi = lo + grid.cell_size;
    for (int j = 0; j < th.k_neighbors; ++j) {
      gs::GaussianPrimitive<float> g;
      Vec3<float> pos;
      bool inside = false;
      for (int attempt = 0; attempt < 8 && !inside; ++attempt) {
        pos = mean_pos + std_pos.cwiseProduct(Vec3<float>{float(rng.normal()),
                                                          float(rng.normal()),
                                                          float(rng.normal())});
        inside = (pos.array() >= lo.array()).all() && (pos.array() <= hi.array()).all();
      }
      // clamp strictly inside so the new primitive counts toward this cell
      const Vec3<float> inset = 0.01f * grid.cell_size;
      if (!inside) pos = pos.cwiseMax(lo + inset).cwiseMin(hi - inset);
      g.mean = pos;
      Vec4<float> q = mean_q + std_q.cwiseProduct(Vec4<float>{float(rng.normal()),
                                                              float(rng.normal()),
                                                              float(rng.normal()),
                                                              float(rng.normal())});
      if (q.norm() < 1e-6f) q = {1, 0, 0, 0};
      g.quat = q / q.norm();
      g.log_scales = mean_ls + std_ls.cwiseProduct(Vec3<float>{float(rng.normal()),
                                                               float(rng.normal()),
                                                               float(rng.normal())});
      g.opacity_logit = mean_ol + std_ol * float(rng.normal());
      g.color = (mean_col + std_col.cwiseProduct(Vec3<float>{float(rng.normal()),
                                                             float(rng.normal()),
                                                             float(rng.normal())}))
                    .cwiseMax(0.f)
                    .cwiseMin(1.f);
      cloud.prims.push_back(g);
      ++added;
    }
  }
  cloud.grad_accum.assign(cloud.prims.size(), 0.f);
  cloud.grad_count.assign(cloud.prims.size(), 0);
  if (reorg) reorg->on_resized(cloud.prims.size());
  return added;
}

ControlStats sdf_density_control(gs::GaussianCloud<float>& cloud,
                                 const sdf::SdfMlp<float>& field,
                                 const DistributionThresholds& th, float split_scale_threshold,
                                 Rng& rng, size_t max_primitives,
                                 const gs::CloudReorg* reorg) {
  th.validate();
  ControlStats stats;
  if (cloud.empty()) return stats;
  cloud.sync_accumulators();

  auto eval_eta = [&](const gs::GaussianCloud<float>& cl) {
    MatX<float> pts(cl.size(), 3);
    for (size_t i = 0; i < cl.size(); ++i) pts.row(i) = cl.prims[i].mean.transpose();
    const sdf::GeoEval<float> eval = sdf::eval_geometry(field, pts, false);
    std::vector<float> eta(cl.size());
    for (size_t i = 0; i < cl.size(); ++i)
      eta[i] = compute_eta(eval.sdf[i], cl.prims[i].opacity(), th.lambda_sigma);
    return eta;
  };

  // densify first using the accumulated gradients, with the eta gate
  {
    const std::vector<float> eta = eval_eta(cloud);
    const size_t n = cloud.size();
    std::vector<gs::GaussianPrimitive<float>> born;
    for (size_t i = 0; i < n; ++i) {
      if (max_primitives && n + born.size() >= max_primitives) break;
      if (eta[i] <= th.tau_d) continue;
      if (cloud.mean_grad(i) <= th.tau_g) continue;
      gs::GaussianPrimitive<float>& g = cloud.prims[i];
      const Vec3<float> sc = g.scales();
      if (sc.maxCoeff() > split_scale_threshold) {
        const Mat3<float> rot = g.rotation();
        const Vec3<float> parent_mean = g.mean;
        gs::GaussianPrimitive<float> child = g;
        child.log_scales = g.log_scales.array() - std::log(1.6f);
        for (int kk = 0; kk < 2; ++kk) {
          gs::GaussianPrimitive<float> cc = child;
          Vec3<float> eps{float(rng.normal()), float(rng.normal()), float(rng.normal())};
          cc.mean = parent_mean + rot * sc.cwiseProduct(eps);
          if (kk == 0) {
            g = cc;
            if (reorg) reorg->on_replaced(i);
          } else {
            born.push_back(cc);
          }
        }
        ++stats.split;
      } else {
        born.push_back(g);
        ++stats.cloned;
      }
    }
    cloud.prims.insert(cloud.prims.end(), born.begin(), born.end());
    cloud.grad_accum.assign(cloud.prims.size(), 0.f);
    cloud.grad_count.assign(cloud.prims.size(), 0);
    if (reorg) reorg->on_resized(cloud.prims.size());
  }

  // prune sweep covers freshly inserted primitives too, so the eta >= tau_p
  // postcondition holds for every survivor
  {
    const std::vector<float> eta = eval_eta(cloud);
    std::vector<std::uint8_t> keep(cloud.size(), 1);
    for (size_t i = 0; i < cloud.size(); ++i)
      if (eta[i] < th.tau_p) keep[i] = 0;
    stats.pruned = gs::compact_cloud(cloud, keep, reorg);
  }
  return stats;
}

std::pair<float, float> guided_ray_range(float t_surface, float abs_sdf, float gamma,
                                         float t_min, float t_max) {
  float lo = std::max(t_surface - gamma * abs_sdf, t_min);
  float hi = std::min(t_surface + gamma * abs_sdf, t_max);
  if (lo > hi) std::swap(lo, hi);
  if (hi - lo < 1e-6f) {
    const float mid = std::clamp(0.5f * (lo + hi), t_min, t_max);
    const float half = 0.5e-6f;
    lo = std::max(mid - half, t_min);
    hi = std::min(mid + half, t_max);
  }
  return {lo, hi};
}

RayRange guided_ray_range(const sdf::SdfMlp<float>& field, const Vec3<float>& origin,
                          const Vec3<float>& dir, float cos_forward, float depth_z,
                          float acc_alpha, float gamma, float t_min, float t_max) {
  RayRange out;
  if (acc_alpha < 0.5f || !(depth_z > 0) || cos_forward <= 1e-3f) {
    out.t_near = t_min;
    out.t_far = t_max;
    out.guided = false;
    return out;
  }
  const float t_surf = depth_z / cos_forward;
  const auto [v, g] = sdf::query_sdf(field, Vec3<float>(origin + t_surf * dir));
  (void)g;
  const auto [lo, hi] = guided_ray_range(t_surf, std::abs(v), gamma, t_min, t_max);
  out.t_near = lo;
  out.t_far = hi;
  out.guided = true;
  return out;
}

}  // namespace splatsdf::mutual
