#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "splatprune/dataset.hpp"
#include "splatprune/loss.hpp"
#include "splatprune/optimizer.hpp"
#include "splatprune/pruning.hpp"
#include "splatprune/renderer.hpp"

namespace splatprune {

/// Which per-Gaussian gradient feeds the prune score.
enum class GradientSignal {
  Mean2D,         // |dL/d mean2d|, the default
  FullParameter,  // |dL/d theta| over all 59 parameters
};

struct TrainConfig {
  LearningRates lr;
  LossConfig loss;
  RenderConfig render;
  Rgb background{0.0, 0.0, 0.0};
  std::uint64_t seed = 0;
  GradientReduction reduction = GradientReduction::Average;
  GradientSignal signal = GradientSignal::Mean2D;
  /// Decay the position rate over the whole run rather than lr.position_decay_steps.
  bool decay_over_run = true;
};

struct HistoryRecord {
  long iteration = 0;
  double loss = 0.0;
  double psnr = 0.0;  // of the training view used at this iteration
  std::size_t count = 0;
};

void write_history_csv(std::ostream& out, const std::vector<HistoryRecord>& history);

struct StepResult {
  double loss = 0.0;
  double psnr = 0.0;
  std::vector<double> mean2d_norms;
  std::vector<double> full_norms;

  const std::vector<double>& signal(GradientSignal s) const {
    return s == GradientSignal::Mean2D ? mean2d_norms : full_norms;
  }
};

/// Render, loss, backward and one optimizer update. Throws DivergedError
/// (carrying `iteration`) on a non-finite loss.
StepResult finetune_step(GaussianSet& scene, AdamOptimizer& optimizer, const View& view,
                         const TrainConfig& cfg, long iteration);

/// Render + loss + backward without touching parameters.
StepResult evaluate_gradients(const GaussianSet& scene, const View& view, const TrainConfig& cfg);

/// Cycles through views, reshuffling with a seeded RNG at every epoch.
class ViewOrder {
 public:
  ViewOrder(std::size_t views, std::uint64_t seed);
  std::size_t next();

 private:
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_;
};

struct TrainResult {
  GaussianSet scene;
  PruneReport report;
  std::vector<HistoryRecord> history;
};

/// Plain fine-tuning for `iterations` steps (no pruning).
TrainResult run_finetune(GaussianSet scene, const std::vector<View>& views, long iterations,
                         const TrainConfig& cfg);

/// `schedule.steps` rounds of (interval fine-tune steps, prune event), then
/// `schedule.finetune_iters` further steps.
TrainResult run_iterative_prune(GaussianSet scene, const std::vector<View>& views,
                                const PruneSchedule& schedule, const TrainConfig& cfg);

/// Single prune event (scores from one gradient pass over every view, no
/// updates) followed by `finetune_iters` steps.
TrainResult one_shot_prune(GaussianSet scene, const std::vector<View>& views, double gamma,
                           long finetune_iters, PruneCriterion criterion,
                           const TrainConfig& cfg);

struct EvalMetrics {
  double psnr = 0.0;  // mean over views; +inf only if every view matches exactly
  double ssim = 0.0;
  std::size_t views = 0;
};

EvalMetrics evaluate(const GaussianSet& scene, const std::vector<View>& views,
                     const TrainConfig& cfg);

/// One row of the {iterative, one-shot} x {gradient, opacity} grid.
struct AblationRow {
  std::string variant;  // e.g. "iterative-gradient"
  double gamma = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::uint64_t size_bytes = 0;
  std::size_t count = 0;
  double runtime_ms = 0.0;
};

/// Runs the 2x2 grid for every gamma. One-shot runs fine-tune for the same
/// total iteration budget as the iterative runs.
std::vector<AblationRow> run_ablation(const GaussianSet& baseline,
                                      const std::vector<View>& train_views,
                                      const std::vector<View>& test_views,
                                      const std::vector<double>& gammas,
                                      const PruneSchedule& schedule, const TrainConfig& cfg);

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace splatprune
