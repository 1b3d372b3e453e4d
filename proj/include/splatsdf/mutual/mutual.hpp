#pragma once

#include <utility>
#include <vector>

#include "splatsdf/core/rng.hpp"
#include "splatsdf/core/types.hpp"
#include "splatsdf/gs/gaussian.hpp"
#include "splatsdf/sdf/mlp.hpp"

namespace splatsdf::mutual {

// Scene-tiling cubic grid holding the SDF value at each cell center and the
// number of Gaussians whose mean falls inside the cell.
struct GuidanceGrid {
  int resolution = 0;
  BoundingBox box;
  Vec3<float> cell_size{0, 0, 0};
  std::vector<float> center_sdf;  // resolution^3, x-fastest
  std::vector<int> gauss_count;

  int cell_of(const Vec3<float>& p) const;
  Vec3<float> cell_center(int idx) const;
  Vec3<float> cell_lo(int idx) const;
  float cell_diagonal() const { return cell_size.norm(); }
  int cell_count() const { return resolution * resolution * resolution; }
};

GuidanceGrid build_guidance_grid(const sdf::SdfMlp<float>& field,
                                 const gs::GaussianCloud<float>& cloud, const BoundingBox& box,
                                 int resolution);

struct DistributionThresholds {
  float tau_s = 0.f;        // near-surface gate; <=0 -> half the cell diagonal
  int tau_n = 4;            // minimum primitives per near-surface cell
  int k_neighbors = 5;
  float tau_p = 0.05f;      // prune when eta below
  float tau_d = 0.5f;       // densify when eta above (and gradient fires)
  float lambda_sigma = 1.f;
  float tau_g = 2e-4f;      // view-space gradient gate, NDC units
  void validate() const;
};

// eta = exp(-S^2 / (lambda * sigma^2)); sigma = 0 degenerates to 0.
float compute_eta(float sdf_value, float opacity, float lambda_sigma);

// Fills SDF-deficient near-surface cells (|S_c| < tau_s, N_g < tau_n) with K
// new primitives sampled per-attribute from the normal distribution of the K
// nearest existing primitives; positions are re-drawn until inside the cell
// (bounded retries, then clamped). Returns the number of added primitives.
int global_densify(gs::GaussianCloud<float>& cloud, const sdf::SdfMlp<float>& field,
                   const BoundingBox& box, int grid_resolution,
                   const DistributionThresholds& th, Rng& rng, size_t max_primitives = 0,
                   const gs::CloudReorg* reorg = nullptr);

struct ControlStats {
  int pruned = 0;
  int cloned = 0;
  int split = 0;
};

// eta-based density control (replaces opacity pruning during co-optimization):
// prune eta < tau_p; split/clone primitives with eta > tau_d whose accumulated
// view-space gradient exceeds tau_g. Gradient accumulators reset afterwards.
ControlStats sdf_density_control(gs::GaussianCloud<float>& cloud,
                                 const sdf::SdfMlp<float>& field,
                                 const DistributionThresholds& th, float split_scale_threshold,
                                 Rng& rng, size_t max_primitives = 0,
                                 const gs::CloudReorg* reorg = nullptr);

// Sampling interval [t_surface - gamma|S|, t_surface + gamma|S|] clamped into
// [t_min, t_max]; never empty.
std::pair<float, float> guided_ray_range(float t_surface, float abs_sdf, float gamma,
                                         float t_min, float t_max);

struct RayRange {
  float t_near = 0, t_far = 0;
  bool guided = false;
};

// Depth-guided range for one pixel ray. Falls back to the full scene range
// when the rasterized coverage is too thin (accumulated alpha below 0.5).
RayRange guided_ray_range(const sdf::SdfMlp<float>& field, const Vec3<float>& origin,
                          const Vec3<float>& dir, float cos_forward, float depth_z,
                          float acc_alpha, float gamma, float t_min, float t_max);

}  // namespace splatsdf::mutual
