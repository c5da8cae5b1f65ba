#pragma once

#include "splatmap/image.hpp"

namespace splatmap {

// How the SSIM term enters the photometric losses. DSsim is the standard
// lambda * (1 - SSIM) convention; PaperLiteral adds +lambda * SSIM instead
// and exists for fidelity experiments only (it rewards dissimilarity under
// minimization).
enum class SsimSign { DSsim, PaperLiteral };

struct SsimResult {
  double value = 0.0;   // mean local SSIM in [-1, 1]
  Image grad_a;         // d value / d a, per pixel
};

// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), C1=0.01^2,
// C2=0.03^2 on unit dynamic range, channel-averaged. Windows are cropped at
// image borders with renormalized weights. The gradient is with respect to
// the first image.
SsimResult ssim(const Image& a, const Image& b);

struct ScalarLoss {
  double value = 0.0;
  Image pixel_grad;
};

// (1 - lambda) * mean|a-b| + lambda * (1 - ssim(a, b)).
ScalarLoss loss_rgb(const Image& rendered, const Image& gt, double lambda_r,
                    SsimSign sign = SsimSign::DSsim);

// Mean |a-b| over valid pixels only; zero loss and gradient when the mask
// is empty.
ScalarLoss loss_depth(const Image& rendered, const Image& gt,
                      const Mask& valid);

// Same form as loss_rgb with lambda_s.
ScalarLoss loss_semantic(const Image& rendered, const Image& gt,
                         double lambda_s, SsimSign sign = SsimSign::DSsim);

struct LossBreakdown {
  double l_rgb = 0.0;
  double l_depth = 0.0;
  double l_semantic = 0.0;
  double l_total = 0.0;
  double lambda_r = 0.0;
  double lambda_s = 0.0;
  int level = 0;
};

// Sums the component losses computed at one pyramid level. The component
// gradients pass through unscaled; only the scalar values combine here.
LossBreakdown loss_total(const ScalarLoss& rgb, int level_rgb,
                         const ScalarLoss& depth, int level_depth,
                         const ScalarLoss& semantic, int level_semantic,
                         double lambda_r, double lambda_s);

}  // namespace splatmap
