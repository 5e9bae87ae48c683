#include "splatprune/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>

#include "splatprune/error.hpp"

namespace splatprune {
namespace {

TrainConfig with_run_length(TrainConfig cfg, long total_iterations) {
  if (cfg.decay_over_run) cfg.lr.position_decay_steps = std::max(1L, total_iterations);
  return cfg;
}

void require_views(const std::vector<View>& views) {
  if (views.empty()) fail(ErrorKind::DatasetEmpty, "dataset empty");
}

void require_scene(const GaussianSet& scene) {
  if (scene.empty()) fail(ErrorKind::EmptyScene, "scene has no Gaussians");
}

std::vector<double> activated_opacities(const GaussianSet& scene) {
  std::vector<double> a(scene.count());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = activated_opacity(scene.opacity_logits[i]);
  return a;
}

/// Consumes the accumulated statistics: builds the mask, filters scene and
/// optimizer, resets the stats.
PruneStep prune_event(GaussianSet& scene, AdamOptimizer& optimizer, GradientStats& stats,
                      double gamma_iter, PruneCriterion criterion, GradientReduction reduction,
                      long iteration) {
  const auto opacities = activated_opacities(scene);
  const auto scores = stats.scores(reduction);
  const MaskResult mask = prune_mask(opacities, scores, gamma_iter, criterion);
  const std::size_t kept = mask.kept();
  if (kept == 0) {
    fail(ErrorKind::EmptyScene,
         "prune event at iteration " + std::to_string(iteration) + " would empty the scene");
  }
  PruneStep step;
  step.iteration = iteration;
  step.gamma_iter = gamma_iter;
  step.kept = kept;
  step.removed = scene.count() - kept;
  step.opacity_threshold = mask.opacity_threshold;
  step.gradient_threshold = mask.gradient_threshold;

  scene = apply_mask(scene, mask.keep);
  optimizer.filter(mask.keep);
  stats.reset(scene.count());
  return step;
}

/// Runs `iterations` fine-tune steps, accumulating stats and history.
void train_span(GaussianSet& scene, AdamOptimizer& optimizer, GradientStats& stats,
                const std::vector<View>& views, ViewOrder& order, long iterations,
                long& iteration, const TrainConfig& cfg, std::vector<HistoryRecord>& history) {
  for (long k = 0; k < iterations; ++k) {
    ++iteration;
    const View& view = views[order.next()];
    const StepResult r = finetune_step(scene, optimizer, view, cfg, iteration);
    accumulate_gradient_stats(stats, r.signal(cfg.signal));
    history.push_back({iteration, r.loss, r.psnr, scene.count()});
  }
}

}  // namespace

void write_history_csv(std::ostream& out, const std::vector<HistoryRecord>& history) {
  out << "iteration,loss,psnr,count\n";
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& h : history) {
    out << h.iteration << ',' << h.loss << ',' << h.psnr << ',' << h.count << '\n';
  }
  out.precision(old);
}

StepResult evaluate_gradients(const GaussianSet& scene, const View& view, const TrainConfig& cfg) {
  const RenderOutput out = rasterize(scene, view.camera, cfg.background, cfg.render);
  const LossValue loss = training_loss(out.image, view.image, cfg.loss);
  StepResult r;
  r.loss = loss.value;
  r.psnr = psnr(out.image, view.image);
  SceneGradients grads = rasterize_backward(scene, view.camera, out, loss.grad);
  r.full_norms.resize(grads.count());
  for (std::size_t i = 0; i < grads.count(); ++i) r.full_norms[i] = grads.full_norm(i);
  r.mean2d_norms = std::move(grads.mean2d_norm);
  return r;
}

StepResult finetune_step(GaussianSet& scene, AdamOptimizer& optimizer, const View& view,
                         const TrainConfig& cfg, long iteration) {
  require_scene(scene);
  const RenderOutput out = rasterize(scene, view.camera, cfg.background, cfg.render);
  const LossValue loss = training_loss(out.image, view.image, cfg.loss);
  if (!std::isfinite(loss.value)) throw DivergedError(iteration, loss.value);
  SceneGradients grads = rasterize_backward(scene, view.camera, out, loss.grad);
  optimizer.step(scene, grads);

  StepResult r;
  r.loss = loss.value;
  r.psnr = psnr(out.image, view.image);
  r.full_norms.resize(grads.count());
  for (std::size_t i = 0; i < grads.count(); ++i) r.full_norms[i] = grads.full_norm(i);
  r.mean2d_norms = std::move(grads.mean2d_norm);
  return r;
}

ViewOrder::ViewOrder(std::size_t views, std::uint64_t seed)
    : rng_(seed), order_(views), pos_(views) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

std::size_t ViewOrder::next() {
  if (pos_ >= order_.size()) {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }
  return order_[pos_++];
}

TrainResult run_finetune(GaussianSet scene, const std::vector<View>& views, long iterations,
                         const TrainConfig& base_cfg) {
  require_views(views);
  require_scene(scene);
  const TrainConfig cfg = with_run_length(base_cfg, iterations);
  AdamOptimizer optimizer(scene.count(), cfg.lr);
  GradientStats stats(scene.count());
  ViewOrder order(views.size(), cfg.seed);
  TrainResult result;
  result.report.initial_count = scene.count();
  long iteration = 0;
  train_span(scene, optimizer, stats, views, order, iterations, iteration, cfg, result.history);
  result.report.final_count = scene.count();
  result.scene = std::move(scene);
  return result;
}

TrainResult run_iterative_prune(GaussianSet scene, const std::vector<View>& views,
                                const PruneSchedule& schedule, const TrainConfig& base_cfg) {
  schedule.validate();
  require_views(views);
  require_scene(scene);
  const long total = static_cast<long>(schedule.steps) * schedule.interval + schedule.finetune_iters;
  const TrainConfig cfg = with_run_length(base_cfg, total);
  const double gamma_iter = per_iteration_fraction(schedule.gamma_target, schedule.steps);

  AdamOptimizer optimizer(scene.count(), cfg.lr);
  GradientStats stats(scene.count());
  ViewOrder order(views.size(), cfg.seed);
  TrainResult result;
  result.report.initial_count = scene.count();
  result.report.scheduled_sparsity = schedule.gamma_target;

  long iteration = 0;
  for (int s = 0; s < schedule.steps; ++s) {
    train_span(scene, optimizer, stats, views, order, schedule.interval, iteration, cfg,
               result.history);
    result.report.steps.push_back(prune_event(scene, optimizer, stats, gamma_iter,
                                              schedule.criterion, cfg.reduction, iteration));
  }
  train_span(scene, optimizer, stats, views, order, schedule.finetune_iters, iteration, cfg,
             result.history);
  result.report.final_count = scene.count();
  result.scene = std::move(scene);
  return result;
}

TrainResult one_shot_prune(GaussianSet scene, const std::vector<View>& views, double gamma,
                           long finetune_iters, PruneCriterion criterion,
                           const TrainConfig& base_cfg) {
  require_views(views);
  require_scene(scene);
  if (finetune_iters < 0) fail(ErrorKind::InvalidParameter, "finetune_iters must be >= 0");
  const TrainConfig cfg = with_run_length(base_cfg, finetune_iters);

  GradientStats stats(scene.count());
  for (const View& view : views) {
    const StepResult r = evaluate_gradients(scene, view, cfg);
    accumulate_gradient_stats(stats, r.signal(cfg.signal));
  }
  AdamOptimizer optimizer(scene.count(), cfg.lr);
  TrainResult result;
  result.report.initial_count = scene.count();
  result.report.scheduled_sparsity = gamma;
  result.report.steps.push_back(
      prune_event(scene, optimizer, stats, gamma, criterion, cfg.reduction, 0));

  ViewOrder order(views.size(), cfg.seed);
  long iteration = 0;
  train_span(scene, optimizer, stats, views, order, finetune_iters, iteration, cfg,
             result.history);
  result.report.final_count = scene.count();
  result.scene = std::move(scene);
  return result;
}

EvalMetrics evaluate(const GaussianSet& scene, const std::vector<View>& views,
                     const TrainConfig& cfg) {
  require_views(views);
  EvalMetrics m;
  m.views = views.size();
  for (const View& v : views) {
    const RenderOutput out = rasterize(scene, v.camera, cfg.background, cfg.render);
    m.psnr += psnr(out.image, v.image);
    m.ssim += ssim(out.image, v.image, cfg.loss);
  }
  m.psnr /= static_cast<double>(views.size());
  m.ssim /= static_cast<double>(views.size());
  return m;
}

std::vector<AblationRow> run_ablation(const GaussianSet& baseline,
                                      const std::vector<View>& train_views,
                                      const std::vector<View>& test_views,
                                      const std::vector<double>& gammas,
                                      const PruneSchedule& schedule, const TrainConfig& cfg) {
  std::vector<AblationRow> rows;
  const long budget = static_cast<long>(schedule.steps) * schedule.interval + schedule.finetune_iters;
  for (double gamma : gammas) {
    for (bool iterative : {true, false}) {
      for (PruneCriterion criterion :
           {PruneCriterion::GradientAware, PruneCriterion::OpacityOnly}) {
        const auto start = std::chrono::steady_clock::now();
        TrainResult run;
        if (iterative) {
          PruneSchedule s = schedule;
          s.gamma_target = gamma;
          s.criterion = criterion;
          run = run_iterative_prune(baseline, train_views, s, cfg);
        } else {
          run = one_shot_prune(baseline, train_views, gamma, budget, criterion, cfg);
        }
        const auto stop = std::chrono::steady_clock::now();
        const EvalMetrics m = evaluate(run.scene, test_views, cfg);
        AblationRow row;
        row.variant = std::string(iterative ? "iterative-" : "oneshot-") + to_string(criterion);
        row.gamma = gamma;
        row.psnr = m.psnr;
        row.ssim = m.ssim;
        row.size_bytes = model_size_bytes(run.scene);
        row.count = run.scene.count();
        row.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant,gamma,psnr,ssim,size_bytes,count,runtime_ms\n";
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : rows) {
    out << r.variant << ',' << r.gamma << ',' << r.psnr << ',' << r.ssim << ',' << r.size_bytes
        << ',' << r.count << ',' << std::fixed << std::setprecision(3) << r.runtime_ms
        << std::defaultfloat << std::setprecision(std::numeric_limits<double>::max_digits10)
        << '\n';
  }
  out.precision(old);
}

}  // namespace splatprune
