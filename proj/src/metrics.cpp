#include "splatsdf/mesh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "splatsdf/core/parallel.hpp"

namespace splatsdf::mesh {

namespace {

struct HashGrid {
  float cell = 1;
  Vec3<float> lo{0, 0, 0};
  Eigen::Vector3i dims{1, 1, 1};
  std::vector<std::int32_t> starts;   // per-cell offsets into `items`
  std::vector<std::int32_t> items;
  const std::vector<Vec3<float>>* pts = nullptr;

  Eigen::Vector3i cell_of(const Vec3<float>& p) const {
    Eigen::Vector3i c;
    for (int a = 0; a < 3; ++a)
      c[a] = std::clamp(int(std::floor((p[a] - lo[a]) / cell)), 0, dims[a] - 1);
    return c;
  }
  size_t flat(const Eigen::Vector3i& c) const {
    return (size_t(c[2]) * dims[1] + c[1]) * dims[0] + c[0];
  }

  void build(const std::vector<Vec3<float>>& points, float cell_size) {
    pts = &points;
    cell = cell_size;
    Vec3<float> hi = points[0];
    lo = points[0];
    for (const auto& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    for (int a = 0; a < 3; ++a)
      dims[a] = std::max(1, int(std::floor((hi[a] - lo[a]) / cell)) + 1);
    // cap total cells to keep memory bounded for sparse spreads
    while (size_t(dims[0]) * dims[1] * dims[2] > 64u * 1024 * 1024) {
      cell *= 2;
      for (int a = 0; a < 3; ++a)
        dims[a] = std::max(1, int(std::floor((hi[a] - lo[a]) / cell)) + 1);
    }
    const size_t ncells = size_t(dims[0]) * dims[1] * dims[2];
    std::vector<std::int32_t> count(ncells + 1, 0);
    for (const auto& p : points) ++count[flat(cell_of(p)) + 1];
    for (size_t i = 1; i <= ncells; ++i) count[i] += count[i - 1];
    starts = count;
    items.resize(points.size());
    std::vector<std::int32_t> cursor(ncells, 0);
    for (std::int32_t i = 0; i < std::int32_t(points.size()); ++i) {
      const size_t c = flat(cell_of(points[i]));
      items[starts[c] + cursor[c]++] = i;
    }
  }

  float nearest_dist(const Vec3<float>& q) const {
    const Eigen::Vector3i cq = cell_of(q);
    float best = std::numeric_limits<float>::max();
    const int max_ring = std::max({dims[0], dims[1], dims[2]});
    for (int r = 0; r <= max_ring; ++r) {
      // once a candidate is certified closer than anything in farther rings, stop
      if (best <= cell * float(r - 1)) break;
      const int x0 = cq[0] - r, x1 = cq[0] + r;
      const int y0 = cq[1] - r, y1 = cq[1] + r;
      const int z0 = cq[2] - r, z1 = cq[2] + r;
      for (int z = z0; z <= z1; ++z) {
        if (z < 0 || z >= dims[2]) continue;
        for (int y = y0; y <= y1; ++y) {
          if (y < 0 || y >= dims[1]) continue;
          for (int x = x0; x <= x1; ++x) {
            if (x < 0 || x >= dims[0]) continue;
            // shell only
            if (r > 0 && x != x0 && x != x1 && y != y0 && y != y1 && z != z0 && z != z1)
              continue;
            const size_t c = flat({x, y, z});
            for (std::int32_t k = starts[c]; k < starts[c + 1]; ++k) {
              const float d = ((*pts)[items[k]] - q).norm();
              best = std::min(best, d);
            }
          }
        }
      }
    }
    return best;
  }
};

}  // namespace

std::vector<float> nn_distances(const std::vector<Vec3<float>>& queries,
                                const std::vector<Vec3<float>>& targets, float cell) {
  if (targets.empty() || queries.empty())
    throw std::invalid_argument("nn_distances: empty point set");
  HashGrid grid;
  grid.build(targets, cell);
  std::vector<float> out(queries.size());
  parallel_for_each(std::int64_t(queries.size()),
                    [&](std::int64_t i) { out[i] = grid.nearest_dist(queries[i]); });
  return out;
}

GeoMetrics geo_metrics(const std::vector<Vec3<float>>& pred,
                       const std::vector<Vec3<float>>& gt, double tau) {
  if (pred.empty() || gt.empty()) throw std::invalid_argument("geo_metrics: empty point set");
  GeoMetrics m;
  m.tau = tau;
  const float cell = float(tau);
  const std::vector<float> d_pred = nn_distances(pred, gt, cell);
  const std::vector<float> d_gt = nn_distances(gt, pred, cell);

  double acc = 0, prec = 0;
  for (float d : d_pred) {
    acc += d;
    if (d <= tau) prec += 1;
  }
  double comp = 0, rec = 0;
  for (float d : d_gt) {
    comp += d;
    if (d <= tau) rec += 1;
  }
  m.accuracy = acc / double(d_pred.size());
  m.completion = comp / double(d_gt.size());
  m.precision = prec / double(d_pred.size());
  m.recall = rec / double(d_gt.size());
  m.f_score = (m.precision + m.recall) > 0
                  ? 2 * m.precision * m.recall / (m.precision + m.recall)
                  : 0;
  return m;
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: image shape mismatch");
  double mse = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    mse += d * d;
  }
  mse /= double(a.data.size());
  if (mse <= 0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

}  // namespace splatsdf::mesh
