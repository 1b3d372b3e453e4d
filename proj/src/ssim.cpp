#include "splatsdf/train/ssim.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace splatsdf::train {

namespace {

constexpr int kRadius = 5;  // 11x11 window
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, 11> gaussian_window() {
  std::array<double, 11> w{};
  double sum = 0;
  for (int i = -kRadius; i <= kRadius; ++i) {
    w[i + kRadius] = std::exp(-(i * i) / (2.0 * 1.5 * 1.5));
    sum += w[i + kRadius];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// separable windowed convolution with replicate borders
void conv(const std::vector<double>& src, int w, int h, std::vector<double>& dst) {
  static const std::array<double, 11> win = gaussian_window();
  std::vector<double> tmp(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int k = -kRadius; k <= kRadius; ++k)
        acc += win[k + kRadius] * src[size_t(y) * w + std::clamp(x + k, 0, w - 1)];
      tmp[size_t(y) * w + x] = acc;
    }
  dst.resize(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int k = -kRadius; k <= kRadius; ++k)
        acc += win[k + kRadius] * tmp[size_t(std::clamp(y + k, 0, h - 1)) * w + x];
      dst[size_t(y) * w + x] = acc;
    }
}

// exact adjoint of the replicate-border convolution (scatter form; the border
// clamping makes the operator non-symmetric there)
void conv_adjoint(const std::vector<double>& gy, int w, int h, std::vector<double>& gx) {
  static const std::array<double, 11> win = gaussian_window();
  std::vector<double> gtmp(gy.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double g = gy[size_t(y) * w + x];
      if (g == 0) continue;
      for (int k = -kRadius; k <= kRadius; ++k)
        gtmp[size_t(std::clamp(y + k, 0, h - 1)) * w + x] += win[k + kRadius] * g;
    }
  gx.assign(gy.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double g = gtmp[size_t(y) * w + x];
      if (g == 0) continue;
      for (int k = -kRadius; k <= kRadius; ++k)
        gx[size_t(y) * w + std::clamp(x + k, 0, w - 1)] += win[k + kRadius] * g;
    }
}

struct ChannelSsim {
  double mean = 0;
  std::vector<double> grad;  // w.r.t. channel a, only if wanted
};

ChannelSsim ssim_channel(const std::vector<double>& a, const std::vector<double>& b, int w,
                         int h, bool want_grad) {
  const size_t n = a.size();
  std::vector<double> a2(n), b2(n), ab(n);
  for (size_t i = 0; i < n; ++i) {
    a2[i] = a[i] * a[i];
    b2[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  std::vector<double> mu_a, mu_b, m_a2, m_b2, m_ab;
  conv(a, w, h, mu_a);
  conv(b, w, h, mu_b);
  conv(a2, w, h, m_a2);
  conv(b2, w, h, m_b2);
  conv(ab, w, h, m_ab);

  ChannelSsim out;
  std::vector<double> d_mu(n, 0), d_ma2(n, 0), d_mab(n, 0);
  double total = 0;
  for (size_t i = 0; i < n; ++i) {
    const double va = m_a2[i] - mu_a[i] * mu_a[i];
    const double vb = m_b2[i] - mu_b[i] * mu_b[i];
    const double cov = m_ab[i] - mu_a[i] * mu_b[i];
    const double l_num = 2 * mu_a[i] * mu_b[i] + kC1;
    const double l_den = mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1;
    const double c_num = 2 * cov + kC2;
    const double c_den = va + vb + kC2;
    const double l = l_num / l_den;
    const double cs = c_num / c_den;
    total += l * cs;

    if (want_grad) {
      const double g = 1.0 / double(n);  // d(mean)/d(ssim_i)
      const double dl_dmua = (2 * mu_b[i] * l_den - l_num * 2 * mu_a[i]) / (l_den * l_den);
      const double dcs_dcov = 2.0 / c_den;
      const double dcs_dva = -c_num / (c_den * c_den);
      // s = l*cs; accumulate into the convolution adjoints
      const double gs_l = g * cs;
      const double gs_cs = g * l;
      // va = m_a2 - mu_a^2, cov = m_ab - mu_a*mu_b
      d_mu[i] += gs_l * dl_dmua + gs_cs * (dcs_dva * (-2 * mu_a[i]) + dcs_dcov * (-mu_b[i]));
      d_ma2[i] += gs_cs * dcs_dva;
      d_mab[i] += gs_cs * dcs_dcov;
    }
  }
  out.mean = total / double(n);

  if (want_grad) {
    std::vector<double> ga, ga2, gab;
    conv_adjoint(d_mu, w, h, ga);
    conv_adjoint(d_ma2, w, h, ga2);
    conv_adjoint(d_mab, w, h, gab);
    out.grad.resize(n);
    for (size_t i = 0; i < n; ++i) out.grad[i] = ga[i] + 2 * a[i] * ga2[i] + b[i] * gab[i];
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: image shape mismatch");
  const int w = a.width, h = a.height;
  double acc = 0;
  std::vector<double> ca(size_t(w) * h), cb(size_t(w) * h);
  for (int c = 0; c < a.channels; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        ca[size_t(y) * w + x] = a.at(x, y, c);
        cb[size_t(y) * w + x] = b.at(x, y, c);
      }
    acc += ssim_channel(ca, cb, w, h, false).mean;
  }
  return acc / a.channels;
}

double ssim_with_grad(const Image& a, const Image& b, Image& grad_a) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: image shape mismatch");
  const int w = a.width, h = a.height;
  grad_a = Image(w, h, a.channels);
  double acc = 0;
  std::vector<double> ca(size_t(w) * h), cb(size_t(w) * h);
  for (int c = 0; c < a.channels; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        ca[size_t(y) * w + x] = a.at(x, y, c);
        cb[size_t(y) * w + x] = b.at(x, y, c);
      }
    const ChannelSsim cs = ssim_channel(ca, cb, w, h, true);
    acc += cs.mean;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        grad_a.at(x, y, c) = float(cs.grad[size_t(y) * w + x] / a.channels);
  }
  return acc / a.channels;
}

}  // namespace splatsdf::train
