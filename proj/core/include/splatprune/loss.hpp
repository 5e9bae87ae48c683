#pragma once

#include <cstdint>

#include "splatprune/image.hpp"
#include "splatprune/scene.hpp"

namespace splatprune {

struct LossConfig {
  double lambda = 0.2;
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  double ssim_c1 = 0.01 * 0.01;
  double ssim_c2 = 0.03 * 0.03;

  void validate() const;
};

/// A scalar loss and its gradient with respect to the rendered image.
struct LossValue {
  double value = 0.0;
  Image grad;
};

LossValue l1_loss(const Image& rendered, const Image& target);

/// (1 - mean SSIM) / 2 with a Gaussian window and reflect padding.
LossValue dssim_loss(const Image& rendered, const Image& target, const LossConfig& cfg = {});

/// (1 - lambda) * L1 + lambda * D-SSIM.
LossValue training_loss(const Image& rendered, const Image& target, const LossConfig& cfg = {});

/// Mean SSIM over all pixels and channels.
double ssim(const Image& a, const Image& b, const LossConfig& cfg = {});

/// -10 log10(MSE) on unit dynamic range; +infinity when the images match.
double psnr(const Image& a, const Image& b);

/// Serialized size of the scene in the splat PLY layout.
std::uint64_t model_size_bytes(const GaussianSet& gaussians);
std::uint64_t model_size_bytes(std::size_t count);

double compression_ratio(double baseline_bytes, double pruned_bytes);

}  // namespace splatprune
