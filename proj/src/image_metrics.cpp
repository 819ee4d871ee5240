#include "splatcull/image_metrics.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace splatcull {
namespace {

void check_same_shape(const ImageView& a, const ImageView& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw std::invalid_argument("image dimension mismatch");
  }
  const std::size_t expected = static_cast<std::size_t>(a.width) * a.height * a.channels;
  if (a.data.size() != expected || b.data.size() != expected) {
    throw std::invalid_argument("image buffer size does not match dimensions");
  }
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Separable 'valid' filtering of one plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int width, int height,
                                 const std::array<double, kWindow>& w) {
  const int ow = width - kWindow + 1;
  const int oh = height - kWindow + 1;
  std::vector<double> horiz(static_cast<std::size_t>(ow) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += w[k] * plane[static_cast<std::size_t>(y) * width + x + k];
      horiz[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> result(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += w[k] * horiz[static_cast<std::size_t>(y + k) * ow + x];
      result[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return result;
}

}  // namespace

double psnr(const ImageView& a, const ImageView& b) {
  check_same_shape(a, b);
  double sse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.data.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double ssim(const ImageView& a, const ImageView& b) {
  check_same_shape(a, b);
  if (a.width < kWindow || a.height < kWindow) throw std::invalid_argument("ssim: image smaller than window");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const auto w = gaussian_window();
  const std::size_t pixels = static_cast<std::size_t>(a.width) * a.height;

  double total = 0.0;
  for (int ch = 0; ch < a.channels; ++ch) {
    std::vector<double> x(pixels), y(pixels), xx(pixels), yy(pixels), xy(pixels);
    for (std::size_t p = 0; p < pixels; ++p) {
      x[p] = a.data[p * a.channels + ch];
      y[p] = b.data[p * b.channels + ch];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = filter_valid(x, a.width, a.height, w);
    const auto my = filter_valid(y, a.width, a.height, w);
    const auto sxx = filter_valid(xx, a.width, a.height, w);
    const auto syy = filter_valid(yy, a.width, a.height, w);
    const auto sxy = filter_valid(xy, a.width, a.height, w);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / a.channels;
}

QualityPair compute_metrics_pair(const ImageView& a, const ImageView& b) { return {psnr(a, b), ssim(a, b)}; }

}  // namespace splatcull
