#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "splatprune/scene.hpp"

namespace splatprune {

enum class PruneCriterion { GradientAware, OpacityOnly };

const char* to_string(PruneCriterion c);
PruneCriterion parse_criterion(const std::string& s);

struct PruneSchedule {
  double gamma_target = 0.5;
  int steps = 10;
  int interval = 50;
  PruneCriterion criterion = PruneCriterion::GradientAware;
  int finetune_iters = 1000;

  void validate() const;
};

/// One prune event.
struct PruneStep {
  long iteration = 0;
  double gamma_iter = 0.0;
  std::size_t kept = 0;
  std::size_t removed = 0;
  double opacity_threshold = 0.0;
  double gradient_threshold = 0.0;
};

struct PruneReport {
  std::vector<PruneStep> steps;
  std::size_t initial_count = 0;
  std::size_t final_count = 0;
  double scheduled_sparsity = 0.0;

  double achieved_sparsity() const;
};

/// CSV columns: iteration,gamma_iter,kept,removed,opacity_threshold,
/// gradient_threshold,achieved_sparsity (cumulative after the step).
void write_prune_report_csv(std::ostream& out, const PruneReport& report);

/// Per-event removal fraction so that t events compound to gamma_target:
/// 1 - (1 - gamma_target)^(1/t).
double per_iteration_fraction(double gamma_target, int steps);

/// Lower empirical quantile: the element at ascending sorted index
/// floor(fraction * n). fraction 0 yields -infinity (keep everything);
/// an index past the end yields +infinity.
double quantile(std::span<const double> values, double fraction);

using KeepMask = std::vector<std::uint8_t>;

struct MaskResult {
  KeepMask keep;
  double opacity_threshold = 0.0;
  double gradient_threshold = 0.0;
  std::size_t kept() const;
};

/// GradientAware keeps i when opacity_i >= Q_opacity(gamma) or
/// score_i >= Q_score(gamma). OpacityOnly uses the opacity test alone.
MaskResult prune_mask(std::span<const double> opacities, std::span<const double> grad_scores,
                      double gamma_iter, PruneCriterion criterion);

GaussianSet apply_mask(const GaussianSet& gaussians, const KeepMask& keep);

/// Keeps the rows of a per-Gaussian array selected by `keep`, `width`
/// entries per row.
template <typename T>
std::vector<T> filter_rows(const std::vector<T>& values, const KeepMask& keep,
                           std::size_t width = 1);

}  // namespace splatprune

#include "splatprune/detail/filter_rows.ipp"
