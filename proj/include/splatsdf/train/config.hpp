#pragma once

#include <cstdint>
#include <string>

#include "splatsdf/core/types.hpp"
#include "splatsdf/mutual/mutual.hpp"

namespace splatsdf::train {

// Every knob of the pipeline; addressable one-to-one from the key=value
// config file (unknown keys are rejected).
struct TrainConfig {
  // loss mixing
  float lambda1 = 0.8f;        // L1 vs D-SSIM mix in the splat loss
  float lambda2 = 0.1f;        // splat normal weight
  float lambda_eik = 0.1f;     // eikonal weight
  float delta_edge = 2.f;      // edge-importance for ray sampling
  float gamma_range = 3.f;     // guided sampling half-width multiplier
  float guided_band_floor = 0.15f;  // minimum guided half-width, scene units

  // ray batching
  int rays_per_batch = 1024;
  int samples_coarse = 64;
  int samples_fine = 64;
  int eikonal_uniform_points = 128;

  // SDF-guided distribution thresholds
  int grid_resolution = 32;
  mutual::DistributionThresholds thresholds;

  // schedule
  std::int64_t pretrain_gs_iters = 1500;
  std::int64_t co_opt_iters = 8000;
  std::int64_t independent_warmup_iters = 600;
  std::int64_t density_control_every = 100;
  std::int64_t global_densify_every = 1000;
  std::int64_t baseline_densify_every = 100;
  std::int64_t baseline_densify_from = 400;
  float split_scale_threshold = 0.12f;  // scene units; above -> split, below -> clone
  float min_opacity = 0.005f;           // baseline prune threshold
  std::int64_t max_gaussians = 120000;

  // learning rates
  float lr_mean = 4e-4f;
  float lr_mean_final_factor = 0.1f;  // exponential decay target across the run
  float lr_quat = 1e-3f;
  float lr_scales = 5e-3f;
  float lr_opacity = 5e-2f;
  float lr_color = 1e-2f;
  float lr_sdf = 5e-4f;
  float lr_sharpness = 1e-3f;

  // field architecture (desk scale)
  int sdf_pe_freqs = 6;
  int sdf_hidden = 64;
  int sdf_feature_dim = 64;
  float sdf_init_radius_factor = 0.6f;  // x scene half extent
  bool sdf_inside_out = true;           // free space inside the init sphere

  // toggles
  bool enable_mutual = true;
  bool enable_normal_prior = true;
  bool enable_edge_prior = true;
  bool edge_weighted_sdf_color = false;
  bool exp_transmittance = false;
  bool normal_loss_camera_frame = false;

  // plumbing
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = logical cores
  std::int64_t log_every = 25;
  std::int64_t checkpoint_every = 0;  // 0 = final only
  Vec3<float> background{0.f, 0.f, 0.f};
  float t_near = 0.05f;

  std::int64_t total_iters() const { return pretrain_gs_iters + co_opt_iters; }
  void validate() const;  // throws on broken invariants
};

TrainConfig load_config(const std::string& path);
void save_config(const std::string& path, const TrainConfig& cfg);
// Applies one `key = value` assignment; throws on unknown key or bad value.
void apply_config_line(TrainConfig& cfg, const std::string& key, const std::string& value);

}  // namespace splatsdf::train
