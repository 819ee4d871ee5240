#pragma once

#include <span>

namespace splatcull {

/// PSNR reported for identical images.
constexpr double kPsnrCap = 99.0;

struct ImageView {
  std::span<const float> data;  // H x W x channels, row-major
  int width = 0;
  int height = 0;
  int channels = 3;
};

struct QualityPair {
  double psnr = 0.0;
  double ssim = 0.0;
};

/// PSNR over all channels with MAX = 1, capped at kPsnrCap.
double psnr(const ImageView& a, const ImageView& b);

/// Mean SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1, valid region only, averaged over channels.
double ssim(const ImageView& a, const ImageView& b);

QualityPair compute_metrics_pair(const ImageView& a, const ImageView& b);

}  // namespace splatcull
