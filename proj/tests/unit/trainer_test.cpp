#include "doctest.h"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "splatprune/error.hpp"
#include "splatprune/optimizer.hpp"
#include "splatprune/synthetic.hpp"
#include "splatprune/trainer.hpp"
#include "support.hpp"

using namespace splatprune;

namespace {

// Small benchmark so the whole loop stays in the sub-second range.
struct Tiny {
  SyntheticScene syn;
  std::vector<View> train;
  GaussianSet start;
};

const Tiny& tiny() {
  static const Tiny t = [] {
    SyntheticConfig sc;
    sc.seed = 4;
    sc.n_gaussians = 120;
    sc.n_views = 4;
    sc.image_size = 32;
    Tiny out{make_synthetic(sc), {}, {}};
    out.train = select_split(out.syn.views, Split::Train);
    out.start = perturb(out.syn.scene, {}, 11);
    return out;
  }();
  return t;
}

PruneSchedule short_schedule(double gamma, int steps, PruneCriterion c) {
  PruneSchedule s;
  s.gamma_target = gamma;
  s.steps = steps;
  s.interval = 5;
  s.finetune_iters = 10;
  s.criterion = c;
  return s;
}

}  // namespace

TEST_CASE("learning rate schedule") {
  LearningRates lr;
  lr.position_decay_steps = 100;
  CHECK(lr.position_at(0) == doctest::Approx(1.6e-4));
  CHECK(lr.position_at(100) == doctest::Approx(1.6e-6));
  CHECK(lr.position_at(50) == doctest::Approx(1.6e-5));
  CHECK(lr.position_at(500) == doctest::Approx(1.6e-6));
  CHECK(lr.for_group(ParamGroup::ShRest, 0) == doctest::Approx(2.5e-3 / 20));
  CHECK(lr.for_group(ParamGroup::Opacity, 7) == 5e-2);
  CHECK(LearningRates::zero().for_group(ParamGroup::Position, 0) == 0.0);
}

TEST_CASE("first adam step moves each parameter by its learning rate") {
  GaussianSet g = testing::random_scene(2, 1);
  g.normalize_rotations();
  const GaussianSet before = g;
  LearningRates lr;
  AdamOptimizer opt(1, lr);
  SceneGradients grads;
  grads.values.assign(kParamsPerGaussian, 0.0);
  grads.mean2d_norm.assign(1, 0.0);
  grads.at(0, param::kOpacity) = 0.3;
  grads.at(0, param::kShDc + 1) = -2.0;
  opt.step(g, grads);
  CHECK(double(g.opacity_logits[0]) ==
        doctest::Approx(double(before.opacity_logits[0]) - lr.opacity).epsilon(1e-6));
  CHECK(double(g.sh_coeffs[0][1]) ==
        doctest::Approx(double(before.sh_coeffs[0][1]) + lr.sh_dc).epsilon(1e-6));
  CHECK(g.positions[0] == before.positions[0]);
  CHECK(g.rotations[0] == before.rotations[0]);
  CHECK(opt.steps_taken() == 1);

  opt.filter(KeepMask{0});
  CHECK(opt.count() == 0);
  CHECK_THROWS_AS(opt.step(g, grads), Error);
}

TEST_CASE("zero learning rate step leaves the scene untouched") {
  GaussianSet g = tiny().start;
  TrainConfig cfg;
  cfg.lr = LearningRates::zero();
  AdamOptimizer opt(g.count(), cfg.lr);
  const StepResult r = finetune_step(g, opt, tiny().train[0], cfg, 1);
  CHECK(bitwise_equal(g, tiny().start));
  CHECK(r.loss > 0.0);
  CHECK(r.mean2d_norms.size() == g.count());
}

TEST_CASE("matching target gives a no-op update") {
  GaussianSet g = tiny().syn.scene;
  TrainConfig cfg;
  cfg.loss.lambda = 0.0;
  AdamOptimizer opt(g.count(), cfg.lr);
  const StepResult r = finetune_step(g, opt, tiny().syn.views[0], cfg, 1);
  CHECK(r.loss == 0.0);
  CHECK(bitwise_equal(g, tiny().syn.scene));
}

TEST_CASE("loss falls over twenty steps on one gaussian") {
  GaussianSet truth;
  testing::add_gaussian(truth, {0.0f, 0.0f, 3.0f}, float(std::log(0.3)), 0.7, {0.8, 0.3, 0.2});
  const Camera cam = testing::axis_camera(24, 24, 20.0);
  View view{"v", cam, rasterize(truth, cam, {0, 0, 0}).image, false};
  Perturbation p;
  p.position = 0.05;
  p.sh_dc = 0.3;
  p.opacity_logit = 0.5;
  GaussianSet g = perturb(truth, p, 3);
  TrainConfig cfg;
  cfg.lr.position_init = cfg.lr.position_final = 1e-3;
  AdamOptimizer opt(1, cfg.lr);
  double first = 0.0, last = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double loss = finetune_step(g, opt, view, cfg, k).loss;
    if (k == 1) first = loss;
    last = loss;
  }
  CHECK(last < first);
}

TEST_CASE("non-finite loss raises a divergence error") {
  GaussianSet g = tiny().start;
  View bad = tiny().train[0];
  bad.image.data[5] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  AdamOptimizer opt(g.count(), cfg.lr);
  try {
    finetune_step(g, opt, bad, cfg, 17);
    FAIL("expected divergence");
  } catch (const DivergedError& e) {
    CHECK(e.iteration() == 17);
    CHECK(e.kind() == ErrorKind::Diverged);
  }
}

TEST_CASE("view order visits every view once per epoch") {
  ViewOrder order(5, 42);
  for (int epoch = 0; epoch < 4; ++epoch) {
    std::set<std::size_t> seen;
    for (int k = 0; k < 5; ++k) seen.insert(order.next());
    CHECK(seen.size() == 5);
  }
}

TEST_CASE("zero target sparsity keeps every gaussian") {
  const auto r = run_iterative_prune(tiny().start, tiny().train,
                                     short_schedule(0.0, 3, PruneCriterion::GradientAware), {});
  CHECK(r.scene.count() == tiny().start.count());
  CHECK(r.report.final_count == tiny().start.count());
  for (const auto& s : r.report.steps) CHECK(s.removed == 0);
  const auto o = one_shot_prune(tiny().start, tiny().train, 0.0, 10, PruneCriterion::OpacityOnly, {});
  CHECK(o.scene.count() == tiny().start.count());
}

TEST_CASE("iterative run bookkeeping") {
  const auto sched = short_schedule(0.6, 4, PruneCriterion::GradientAware);
  const auto r = run_iterative_prune(tiny().start, tiny().train, sched, {});
  REQUIRE(r.report.steps.size() == 4);
  std::size_t prev = tiny().start.count();
  for (const auto& s : r.report.steps) {
    CHECK(s.kept + s.removed == prev);
    CHECK(s.removed <= static_cast<std::size_t>(std::floor(s.gamma_iter * double(prev))));
    CHECK(s.iteration % sched.interval == 0);
    prev = s.kept;
  }
  CHECK(r.scene.count() == prev);
  CHECK(r.history.size() == std::size_t(4 * 5 + 10));
  for (std::size_t k = 1; k < r.history.size(); ++k) {
    CHECK(r.history[k].iteration == r.history[k - 1].iteration + 1);
    CHECK(r.history[k].count <= r.history[k - 1].count);
  }
  CHECK(r.report.achieved_sparsity() <= r.report.scheduled_sparsity + 1e-12);
}

TEST_CASE("opacity one-shot removes exactly half") {
  const std::size_t n = tiny().start.count();
  const auto r = one_shot_prune(tiny().start, tiny().train, 0.5, 5, PruneCriterion::OpacityOnly, {});
  CHECK(r.report.steps.at(0).removed == n / 2);
  CHECK(r.scene.count() == n - n / 2);

  // A single iterative step prunes the same amount.
  const auto it = run_iterative_prune(tiny().start, tiny().train,
                                      short_schedule(0.5, 1, PruneCriterion::OpacityOnly), {});
  CHECK(it.scene.count() == r.scene.count());
}

TEST_CASE("runs are deterministic and independent of worker count") {
  const auto sched = short_schedule(0.5, 2, PruneCriterion::GradientAware);
  TrainConfig a, b;
  a.render.threads = 1;
  b.render.threads = 3;
  const auto ra = run_iterative_prune(tiny().start, tiny().train, sched, a);
  const auto rb = run_iterative_prune(tiny().start, tiny().train, sched, a);
  const auto rc = run_iterative_prune(tiny().start, tiny().train, sched, b);
  CHECK(bitwise_equal(ra.scene, rb.scene));
  CHECK(bitwise_equal(ra.scene, rc.scene));
  std::ostringstream ha, hc;
  write_history_csv(ha, ra.history);
  write_history_csv(hc, rc.history);
  CHECK(ha.str() == hc.str());
  CHECK(ha.str().rfind("iteration,loss,psnr,count\n", 0) == 0);
}

TEST_CASE("optimizer and stats stay congruent through prune events") {
  GaussianSet g = tiny().start;
  TrainConfig cfg;
  AdamOptimizer opt(g.count(), cfg.lr);
  GradientStats stats(g.count());
  for (int k = 0; k < 3; ++k) {
    const auto r = finetune_step(g, opt, tiny().train[k % tiny().train.size()], cfg, k + 1);
    accumulate_gradient_stats(stats, r.mean2d_norms);
  }
  std::vector<double> alpha(g.count());
  for (std::size_t i = 0; i < g.count(); ++i) alpha[i] = activated_opacity(g.opacity_logits[i]);
  const auto mask = prune_mask(alpha, stats.scores(), 0.3, PruneCriterion::OpacityOnly);
  g = apply_mask(g, mask.keep);
  opt.filter(mask.keep);
  stats.reset(g.count());
  CHECK(opt.count() == g.count());
  CHECK(opt.first_moment().size() == g.count() * kParamsPerGaussian);
  CHECK(stats.size() == g.count());
  CHECK_NOTHROW(finetune_step(g, opt, tiny().train[0], cfg, 4));
}

TEST_CASE("errors for empty inputs") {
  const auto sched = short_schedule(0.5, 1, PruneCriterion::GradientAware);
  try {
    run_iterative_prune(tiny().start, {}, sched, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DatasetEmpty);
  }
  CHECK_THROWS_AS(run_iterative_prune({}, tiny().train, sched, {}), Error);
  CHECK_THROWS_AS(run_finetune({}, tiny().train, 3, {}), Error);
}

TEST_CASE("reinitialized skeleton still trains") {
  // Negative control only: the pipeline must run; recovery is not claimed.
  const auto pruned = one_shot_prune(tiny().start, tiny().train, 0.5, 5,
                                     PruneCriterion::OpacityOnly, {});
  const GaussianSet skeleton = reinitialize_attributes(pruned.scene, 9);
  CHECK(skeleton.count() == pruned.scene.count());
  CHECK(skeleton.positions == pruned.scene.positions);
  const auto r = run_finetune(skeleton, tiny().train, 20, {});
  CHECK(r.scene.count() == skeleton.count());
  CHECK(std::isfinite(r.history.back().loss));
}

TEST_CASE("evaluation and ablation grid") {
  const auto test = select_split(tiny().syn.views, Split::Test);
  const EvalMetrics self = evaluate(tiny().syn.scene, test, {});
  CHECK(std::isinf(self.psnr));
  CHECK(self.ssim == doctest::Approx(1.0));

  auto sched = short_schedule(0.5, 2, PruneCriterion::GradientAware);
  const auto rows = run_ablation(tiny().start, tiny().train, test, {0.5}, sched, {});
  REQUIRE(rows.size() == 4);
  std::set<std::string> names;
  for (const auto& r : rows) names.insert(r.variant);
  CHECK(names == std::set<std::string>{"iterative-gradient", "iterative-opacity",
                                       "oneshot-gradient", "oneshot-opacity"});
  std::ostringstream os;
  write_ablation_csv(os, rows);
  CHECK(os.str().rfind("variant,gamma,psnr,ssim,size_bytes,count,runtime_ms\n", 0) == 0);
}
