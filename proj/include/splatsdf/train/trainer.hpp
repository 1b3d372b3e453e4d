#pragma once

#include <optional>
#include <string>

#include "splatsdf/gs/rasterizer.hpp"
#include "splatsdf/priors/maps.hpp"
#include "splatsdf/scene/dataset.hpp"
#include "splatsdf/sdf/mlp.hpp"
#include "splatsdf/train/adam.hpp"
#include "splatsdf/train/config.hpp"

namespace splatsdf::train {

enum class Stage { kPretrain, kWarmup, kMutual };
const char* stage_name(Stage s);

struct GsLossResult {
  double total = 0, l_c = 0, l_dssim = 0, l_normal = 0;
  gs::ImageGrads<float> image_grads;
};

// Eq.-9-style splat loss: edge-weighted L1 + D-SSIM + normal-prior residual,
// with analytic gradients w.r.t. the rendered images.
GsLossResult loss_gs(const gs::RenderTarget<float>& rt, const Image& gt,
                     const priors::EdgeMap* edge, const priors::NormalMap* prior,
                     const scene::Camera<float>& cam, const TrainConfig& cfg);

struct SdfBatch {
  MatX<float> origins;        // [R,3]
  MatX<float> dirs;           // [R,3]
  MatX<float> ts;             // [R,samples], strictly increasing rows
  MatX<float> gt_colors;      // [R,3]
  MatX<float> prior_normals;  // [R,3], pre-rotated into the comparison frame
  VecX<float> prior_valid;    // 0/1 per ray
  VecX<float> color_weight;   // per-ray photometric weight
  MatX<float> eikonal_points; // [M,3] extra uniform samples
  Mat3<float> normal_frame_rot = Mat3<float>::Identity();  // world->camera of the batch view
};

struct SdfLossResult {
  double total = 0, l_c = 0, l_normal = 0, l_eik = 0;
  sdf::SdfMlp<float> grads;  // same shapes as the network
};

// Eq.-12-style field loss over a ray batch; gradients via the tape. Rays are
// split across workers (one tape each), merged in fixed order.
SdfLossResult loss_sdf(const sdf::SdfMlp<float>& mlp, const SdfBatch& batch,
                       const TrainConfig& cfg);

struct TrainState {
  std::int64_t iteration = 0;
  gs::GaussianCloud<float> cloud;
  sdf::SdfMlp<float> field;
  CloudAdam cloud_adam;
  MlpAdam field_adam;
  Rng rng_gs, rng_sdf, rng_control;
  BoundingBox bounds;
  float t_far = 1;

  Stage stage(const TrainConfig& cfg) const {
    if (iteration < cfg.pretrain_gs_iters) return Stage::kPretrain;
    if (iteration < cfg.pretrain_gs_iters + cfg.independent_warmup_iters) return Stage::kWarmup;
    return Stage::kMutual;
  }
};

TrainState init_train_state(const scene::Dataset& ds, const TrainConfig& cfg);

struct IterationLog {
  std::int64_t iteration = 0;
  Stage stage = Stage::kPretrain;
  double total = 0, gs_total = 0, gs_c = 0, gs_dssim = 0, gs_normal = 0;
  double sdf_total = 0, sdf_c = 0, sdf_normal = 0, sdf_eik = 0;
  size_t cloud_size = 0;
  int pruned = 0, densified = 0, global_added = 0;
};

std::string format_log(const IterationLog& log);

// One optimization iteration; false if the loss went non-finite.
bool train_step(TrainState& st, const scene::Dataset& ds, const TrainConfig& cfg,
                IterationLog* log);

// Full schedule: logs to <out_dir>/log.txt, checkpoints cloud_XXXXXX.ply /
// sdf_XXXXXX.bin / optim_XXXXXX.bin. Throws on divergence after saving the
// last good checkpoint.
TrainState train(const scene::Dataset& ds, const TrainConfig& cfg, const std::string& out_dir);

void save_checkpoint(const std::string& dir, const TrainState& st);
TrainState load_checkpoint(const std::string& dir, std::int64_t iteration,
                           const scene::Dataset& ds, const TrainConfig& cfg);

gs::RasterizeOptions<float> raster_options(const TrainConfig& cfg);

// Mean PSNR of the splat renderer over the held-out views.
double mean_eval_psnr(const gs::GaussianCloud<float>& cloud, const scene::Dataset& ds,
                      const TrainConfig& cfg);

}  // namespace splatsdf::train
