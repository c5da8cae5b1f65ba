#include "splatmap/losses.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "splatmap/parallel.hpp"

namespace splatmap {

namespace {

constexpr int kWindow = 11;
constexpr int kHalf = kWindow / 2;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWindow>& window_taps() {
  static const std::array<double, kWindow> taps = [] {
    std::array<double, kWindow> t{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kHalf;
      t[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += t[i];
    }
    for (double& v : t) v /= sum;
    return t;
  }();
  return taps;
}

// In-bounds tap sums along one axis; the cropped 2D window normalizer is
// separable as sx[x] * sy[y].
std::vector<double> axis_norms(int extent) {
  const auto& g = window_taps();
  std::vector<double> s(extent, 0.0);
  for (int i = 0; i < extent; ++i)
    for (int k = -kHalf; k <= kHalf; ++k)
      if (i + k >= 0 && i + k < extent) s[i] += g[k + kHalf];
  return s;
}

// Separable zero-padded convolution with the window taps, all channels.
// No normalization; callers fold the cropped-window normalizer themselves.
Image blur_raw(const Image& in) {
  const auto& g = window_taps();
  Image tmp(in.height, in.width, in.channels);
  Image out(in.height, in.width, in.channels);
  parallel_for(0, in.height, [&](std::int64_t y) {
    for (int x = 0; x < in.width; ++x)
      for (int c = 0; c < in.channels; ++c) {
        double acc = 0.0;
        for (int k = -kHalf; k <= kHalf; ++k) {
          const int xx = x + k;
          if (xx >= 0 && xx < in.width) acc += g[k + kHalf] * in.at(y, xx, c);
        }
        tmp.at(y, x, c) = acc;
      }
  });
  parallel_for(0, in.height, [&](std::int64_t y) {
    for (int x = 0; x < in.width; ++x)
      for (int c = 0; c < in.channels; ++c) {
        double acc = 0.0;
        for (int k = -kHalf; k <= kHalf; ++k) {
          const int yy = static_cast<int>(y) + k;
          if (yy >= 0 && yy < in.height) acc += g[k + kHalf] * tmp.at(yy, x, c);
        }
        out.at(y, x, c) = acc;
      }
  });
  return out;
}

Image multiply(const Image& a, const Image& b) {
  Image out(a.height, a.width, a.channels);
  for (std::size_t i = 0; i < a.data.size(); ++i)
    out.data[i] = a.data[i] * b.data[i];
  return out;
}

}  // namespace

SsimResult ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  const int H = a.height, W = a.width, C = a.channels;

  const std::vector<double> sx = axis_norms(W);
  const std::vector<double> sy = axis_norms(H);

  Image mu_a = blur_raw(a);
  Image mu_b = blur_raw(b);
  Image s_aa = blur_raw(multiply(a, a));
  Image s_bb = blur_raw(multiply(b, b));
  Image s_ab = blur_raw(multiply(a, b));

  // Per-window partial derivatives with respect to the windowed raw sums,
  // pre-divided by the window normalizer so the scatter below is a plain
  // (adjoint) convolution.
  Image p_ma(H, W, C), p_saa(H, W, C), p_sab(H, W, C);
  double total = 0.0;
  std::vector<double> row_sums(H, 0.0);
  parallel_for(0, H, [&](std::int64_t y) {
    double rsum = 0.0;
    for (int x = 0; x < W; ++x) {
      const double norm = sx[x] * sy[y];
      const double inv_norm = 1.0 / norm;
      for (int c = 0; c < C; ++c) {
        const double ma = mu_a.at(y, x, c) * inv_norm;
        const double mb = mu_b.at(y, x, c) * inv_norm;
        const double saa = s_aa.at(y, x, c) * inv_norm;
        const double sbb = s_bb.at(y, x, c) * inv_norm;
        const double sab = s_ab.at(y, x, c) * inv_norm;

        const double a1 = 2.0 * ma * mb + kC1;
        const double a2 = 2.0 * (sab - ma * mb) + kC2;
        const double b1 = ma * ma + mb * mb + kC1;
        const double b2 = (saa - ma * ma) + (sbb - mb * mb) + kC2;
        const double num = a1 * a2;
        const double den = b1 * b2;
        const double S = num / den;
        rsum += S;

        // dS/dma, dS/dsaa, dS/dsab in the raw-sum coordinates: divide by
        // the same normalizer once more for the adjoint pass.
        const double dnum_dma = 2.0 * mb * (a2 - a1);
        const double dden_dma = 2.0 * ma * (b2 - b1);
        const double dS_dma = (dnum_dma - S * dden_dma) / den;
        const double dS_dsaa = -num / (den * b2);
        const double dS_dsab = 2.0 * a1 / den;

        p_ma.at(y, x, c) = dS_dma * inv_norm;
        p_saa.at(y, x, c) = dS_dsaa * inv_norm;
        p_sab.at(y, x, c) = dS_dsab * inv_norm;
      }
    }
    row_sums[y] = rsum;
  });
  for (double r : row_sums) total += r;

  const double scale = 1.0 / (static_cast<double>(H) * W * C);

  Image g_ma = blur_raw(p_ma);
  Image g_saa = blur_raw(p_saa);
  Image g_sab = blur_raw(p_sab);

  SsimResult res;
  res.value = total * scale;
  res.grad_a = Image(H, W, C);
  parallel_for(0, H, [&](std::int64_t y) {
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c)
        res.grad_a.at(y, x, c) =
            scale * (g_ma.at(y, x, c) + 2.0 * a.at(y, x, c) * g_saa.at(y, x, c) +
                     b.at(y, x, c) * g_sab.at(y, x, c));
  });
  return res;
}

namespace {

ScalarLoss photometric(const Image& rendered, const Image& gt, double lambda,
                       SsimSign sign, const char* what) {
  require_same_shape(rendered, gt, what);
  const double n = static_cast<double>(rendered.data.size());

  ScalarLoss out;
  out.pixel_grad = Image(rendered.height, rendered.width, rendered.channels);
  double l1 = 0.0;
  for (std::size_t i = 0; i < rendered.data.size(); ++i) {
    const double d = rendered.data[i] - gt.data[i];
    l1 += std::abs(d);
    out.pixel_grad.data[i] =
        (1.0 - lambda) * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / n;
  }
  l1 /= n;

  const SsimResult ss = ssim(rendered, gt);
  const double ssim_term =
      sign == SsimSign::DSsim ? (1.0 - ss.value) : ss.value;
  const double ssim_grad_sign = sign == SsimSign::DSsim ? -1.0 : 1.0;
  out.value = (1.0 - lambda) * l1 + lambda * ssim_term;
  for (std::size_t i = 0; i < out.pixel_grad.data.size(); ++i)
    out.pixel_grad.data[i] += lambda * ssim_grad_sign * ss.grad_a.data[i];
  return out;
}

}  // namespace

ScalarLoss loss_rgb(const Image& rendered, const Image& gt, double lambda_r,
                    SsimSign sign) {
  return photometric(rendered, gt, lambda_r, sign, "loss_rgb");
}

ScalarLoss loss_semantic(const Image& rendered, const Image& gt,
                         double lambda_s, SsimSign sign) {
  return photometric(rendered, gt, lambda_s, sign, "loss_semantic");
}

ScalarLoss loss_depth(const Image& rendered, const Image& gt,
                      const Mask& valid) {
  require_same_shape(rendered, gt, "loss_depth");
  if (rendered.channels != 1)
    throw std::invalid_argument("loss_depth: expects single-channel images");
  if (valid.size() != rendered.pixel_count())
    throw std::invalid_argument("loss_depth: mask size mismatch");

  ScalarLoss out;
  out.pixel_grad = Image(rendered.height, rendered.width, rendered.channels);
  std::size_t n_valid = 0;
  for (std::uint8_t v : valid) n_valid += v ? 1 : 0;
  if (n_valid == 0) return out;   // all-invalid: zero loss, zero gradient

  double sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n_valid);
  for (std::size_t pix = 0; pix < valid.size(); ++pix) {
    if (!valid[pix]) continue;
    const double d = rendered.data[pix] - gt.data[pix];
    sum += std::abs(d);
    out.pixel_grad.data[pix] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) * inv_n;
  }
  out.value = sum * inv_n;
  return out;
}

LossBreakdown loss_total(const ScalarLoss& rgb, int level_rgb,
                         const ScalarLoss& depth, int level_depth,
                         const ScalarLoss& semantic, int level_semantic,
                         double lambda_r, double lambda_s) {
  if (level_rgb != level_depth || level_rgb != level_semantic)
    throw std::invalid_argument(
        "loss_total: component losses come from different pyramid levels");
  LossBreakdown b;
  b.l_rgb = rgb.value;
  b.l_depth = depth.value;
  b.l_semantic = semantic.value;
  b.l_total = b.l_rgb + b.l_depth + b.l_semantic;
  b.lambda_r = lambda_r;
  b.lambda_s = lambda_s;
  b.level = level_rgb;
  return b;
}

}  // namespace splatmap
