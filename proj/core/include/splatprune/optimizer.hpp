#pragma once

#include <cstdint>
#include <vector>

#include "splatprune/pruning.hpp"
#include "splatprune/renderer.hpp"
#include "splatprune/scene.hpp"

namespace splatprune {

/// Per-group learning rates. The position rate decays exponentially from
/// `position_init` to `position_final` over `position_decay_steps`.
struct LearningRates {
  double position_init = 1.6e-4;
  double position_final = 1.6e-6;
  long position_decay_steps = 30000;
  double sh_dc = 2.5e-3;
  double sh_rest = 2.5e-3 / 20.0;
  double opacity = 5e-2;
  double scale = 5e-3;
  double rotation = 1e-3;

  double position_at(long step) const;
  double for_group(ParamGroup g, long step) const;

  static LearningRates zero();
};

/// Adam moments for every stored parameter, congruent with the scene.
class AdamOptimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-15;

  AdamOptimizer() = default;
  AdamOptimizer(std::size_t count, LearningRates lr);

  /// Applies one update to `scene` in storage space and renormalizes
  /// quaternions.
  void step(GaussianSet& scene, const SceneGradients& grads);

  /// Drops the moments of pruned Gaussians.
  void filter(const KeepMask& keep);

  std::size_t count() const noexcept { return first_.size() / kParamsPerGaussian; }
  long steps_taken() const noexcept { return step_; }
  const LearningRates& learning_rates() const noexcept { return lr_; }
  void set_learning_rates(const LearningRates& lr) { lr_ = lr; }

  const std::vector<double>& first_moment() const noexcept { return first_; }
  const std::vector<double>& second_moment() const noexcept { return second_; }

 private:
  LearningRates lr_;
  std::vector<double> first_;
  std::vector<double> second_;
  long step_ = 0;
};

}  // namespace splatprune
