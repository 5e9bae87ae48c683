#include "splatprune/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "splatprune/error.hpp"

namespace splatprune {

double LearningRates::position_at(long step) const {
  if (position_init <= 0.0 || position_final <= 0.0 || position_decay_steps <= 0) {
    return position_init;
  }
  const double t = std::clamp(static_cast<double>(step) / position_decay_steps, 0.0, 1.0);
  return std::exp(std::log(position_init) * (1.0 - t) + std::log(position_final) * t);
}

double LearningRates::for_group(ParamGroup g, long step) const {
  switch (g) {
    case ParamGroup::Position: return position_at(step);
    case ParamGroup::Rotation: return rotation;
    case ParamGroup::Scale: return scale;
    case ParamGroup::Opacity: return opacity;
    case ParamGroup::ShDc: return sh_dc;
    case ParamGroup::ShRest: return sh_rest;
  }
  return 0.0;
}

LearningRates LearningRates::zero() {
  LearningRates lr;
  lr.position_init = lr.position_final = 0.0;
  lr.sh_dc = lr.sh_rest = lr.opacity = lr.scale = lr.rotation = 0.0;
  return lr;
}

AdamOptimizer::AdamOptimizer(std::size_t count, LearningRates lr)
    : lr_(lr),
      first_(count * kParamsPerGaussian, 0.0),
      second_(count * kParamsPerGaussian, 0.0) {}

void AdamOptimizer::step(GaussianSet& scene, const SceneGradients& grads) {
  const std::size_t n = scene.count();
  if (n != count() || grads.values.size() != first_.size()) {
    fail(ErrorKind::InvalidState, "optimizer state is not congruent with the scene");
  }
  ++step_;
  const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
  std::array<double, kParamsPerGaussian> rate{};
  for (int p = 0; p < kParamsPerGaussian; ++p) rate[p] = lr_.for_group(param_group(p), step_ - 1);

  bool rotation_moved = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (int p = 0; p < kParamsPerGaussian; ++p) {
      const std::size_t k = i * kParamsPerGaussian + p;
      const double g = grads.values[k];
      first_[k] = kBeta1 * first_[k] + (1.0 - kBeta1) * g;
      second_[k] = kBeta2 * second_[k] + (1.0 - kBeta2) * g * g;
      if (rate[p] == 0.0) continue;
      const double update = rate[p] * (first_[k] / bias1) / (std::sqrt(second_[k] / bias2) + kEpsilon);
      float& value = scene.param(i, p);
      value = static_cast<float>(static_cast<double>(value) - update);
      if (param_group(p) == ParamGroup::Rotation) rotation_moved = true;
    }
  }
  if (rotation_moved) scene.normalize_rotations();
}

void AdamOptimizer::filter(const KeepMask& keep) {
  first_ = filter_rows(first_, keep, kParamsPerGaussian);
  second_ = filter_rows(second_, keep, kParamsPerGaussian);
}

}  // namespace splatprune
