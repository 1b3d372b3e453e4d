#pragma once

#include <vector>

#include "splatsdf/core/rng.hpp"
#include "splatsdf/gs/gaussian.hpp"

namespace splatsdf::gs {

template <class S>
struct DensifyStats {
  int cloned = 0;
  int split = 0;
  int pruned = 0;
};

// Baseline adaptive density control: primitives whose mean view-space
// positional gradient exceeds tau_g are cloned (small) or split in two with
// scales divided by 1.6 (large). Gradient accumulators reset afterwards.
template <class S>
DensifyStats<S> densify_split_clone(GaussianCloud<S>& cloud, S tau_g, S scale_threshold,
                                    Rng& rng, size_t max_primitives = 0,
                                    const CloudReorg* reorg = nullptr) {
  DensifyStats<S> stats;
  cloud.sync_accumulators();
  const size_t n = cloud.size();
  std::vector<GaussianPrimitive<S>> born;
  for (size_t i = 0; i < n; ++i) {
    if (max_primitives && n + born.size() >= max_primitives) break;
    if (cloud.mean_grad(i) <= tau_g) continue;
    GaussianPrimitive<S>& g = cloud.prims[i];
    const Vec3<S> sc = g.scales();
    if (sc.maxCoeff() > scale_threshold) {
      // split: parent is replaced by two samples of its own distribution
      const Mat3<S> rot = g.rotation();
      const Vec3<S> parent_mean = g.mean;
      GaussianPrimitive<S> child = g;
      child.log_scales = g.log_scales.array() - std::log(S(1.6));
      for (int k = 0; k < 2; ++k) {
        GaussianPrimitive<S> c = child;
        Vec3<S> eps{S(rng.normal()), S(rng.normal()), S(rng.normal())};
        c.mean = parent_mean + rot * (sc.cwiseProduct(eps));
        if (k == 0) {
          g = c;  // replace parent in place
          if (reorg) reorg->on_replaced(i);
        } else {
          born.push_back(c);
        }
      }
      ++stats.split;
    } else {
      born.push_back(g);
      ++stats.cloned;
    }
  }
  cloud.prims.insert(cloud.prims.end(), born.begin(), born.end());
  cloud.grad_accum.assign(cloud.prims.size(), S(0));
  cloud.grad_count.assign(cloud.prims.size(), 0);
  if (reorg) reorg->on_resized(cloud.prims.size());
  return stats;
}

// General keep-mask compaction used by the SDF-guided control.
template <class S>
int compact_cloud(GaussianCloud<S>& cloud, const std::vector<std::uint8_t>& keep_mask,
                  const CloudReorg* reorg = nullptr) {
  cloud.sync_accumulators();
  std::vector<GaussianPrimitive<S>> keep;
  std::vector<S> acc;
  std::vector<int> cnt;
  keep.reserve(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    if (!keep_mask[i]) continue;
    keep.push_back(cloud.prims[i]);
    acc.push_back(cloud.grad_accum[i]);
    cnt.push_back(cloud.grad_count[i]);
  }
  const int removed = int(cloud.size() - keep.size());
  cloud.prims = std::move(keep);
  cloud.grad_accum = std::move(acc);
  cloud.grad_count = std::move(cnt);
  if (reorg) reorg->on_compacted(keep_mask);
  return removed;
}

// Baseline opacity pruning (used outside the mutual stage only).
template <class S>
int prune_by_opacity(GaussianCloud<S>& cloud, S min_opacity,
                     const CloudReorg* reorg = nullptr) {
  cloud.sync_accumulators();
  std::vector<std::uint8_t> mask(cloud.size(), 1);
  for (size_t i = 0; i < cloud.size(); ++i)
    if (cloud.prims[i].opacity() < min_opacity) mask[i] = 0;
  return compact_cloud(cloud, mask, reorg);
}

}  // namespace splatsdf::gs
