#include "splatprune/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "splatprune/error.hpp"

namespace splatprune {

const char* to_string(PruneCriterion c) {
  return c == PruneCriterion::GradientAware ? "gradient" : "opacity";
}

PruneCriterion parse_criterion(const std::string& s) {
  if (s == "gradient" || s == "gradient-aware" || s == "GradientAware") {
    return PruneCriterion::GradientAware;
  }
  if (s == "opacity" || s == "opacity-only" || s == "OpacityOnly") {
    return PruneCriterion::OpacityOnly;
  }
  fail(ErrorKind::InvalidParameter, "unknown prune criterion '" + s + "'");
}

void PruneSchedule::validate() const {
  if (!(gamma_target >= 0.0 && gamma_target < 1.0)) {
    fail(ErrorKind::InvalidParameter, "gamma_target must be in [0,1)");
  }
  if (steps < 1) fail(ErrorKind::InvalidParameter, "steps must be >= 1");
  if (interval < 1) fail(ErrorKind::InvalidParameter, "interval must be >= 1");
  if (finetune_iters < 0) fail(ErrorKind::InvalidParameter, "finetune_iters must be >= 0");
}

double PruneReport::achieved_sparsity() const {
  if (initial_count == 0) return 0.0;
  return 1.0 - static_cast<double>(final_count) / static_cast<double>(initial_count);
}

void write_prune_report_csv(std::ostream& out, const PruneReport& report) {
  out << "iteration,gamma_iter,kept,removed,opacity_threshold,gradient_threshold,"
         "achieved_sparsity\n";
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& s : report.steps) {
    const double achieved =
        report.initial_count
            ? 1.0 - static_cast<double>(s.kept) / static_cast<double>(report.initial_count)
            : 0.0;
    out << s.iteration << ',' << s.gamma_iter << ',' << s.kept << ',' << s.removed << ','
        << s.opacity_threshold << ',' << s.gradient_threshold << ',' << achieved << '\n';
  }
  out.precision(old);
}

double per_iteration_fraction(double gamma_target, int steps) {
  if (!(gamma_target >= 0.0 && gamma_target < 1.0)) {
    fail(ErrorKind::InvalidParameter, "gamma_target must be in [0,1)");
  }
  if (steps < 1) fail(ErrorKind::InvalidParameter, "steps must be >= 1");
  if (steps == 1) return gamma_target;
  return -std::expm1(std::log1p(-gamma_target) / steps);
}

double quantile(std::span<const double> values, double fraction) {
  if (values.empty()) fail(ErrorKind::InvalidParameter, "quantile of an empty sequence");
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    fail(ErrorKind::InvalidParameter, "quantile fraction must be in [0,1]");
  }
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidParameter, "quantile input not finite");
  }
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(values.size())));
  if (fraction == 0.0) return -std::numeric_limits<double>::infinity();
  if (k >= values.size()) return std::numeric_limits<double>::infinity();
  std::vector<double> sorted(values.begin(), values.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  return sorted[k];
}

std::size_t MaskResult::kept() const {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
}

MaskResult prune_mask(std::span<const double> opacities, std::span<const double> grad_scores,
                      double gamma_iter, PruneCriterion criterion) {
  if (opacities.size() != grad_scores.size()) {
    fail(ErrorKind::InvalidParameter, "opacity and gradient score lengths differ");
  }
  if (!(gamma_iter >= 0.0 && gamma_iter < 1.0)) {
    fail(ErrorKind::InvalidParameter, "gamma_iter must be in [0,1)");
  }
  MaskResult r;
  r.keep.assign(opacities.size(), 1);
  if (opacities.empty()) return r;
  r.opacity_threshold = quantile(opacities, gamma_iter);
  r.gradient_threshold = criterion == PruneCriterion::GradientAware
                             ? quantile(grad_scores, gamma_iter)
                             : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < opacities.size(); ++i) {
    const bool by_opacity = opacities[i] >= r.opacity_threshold;
    const bool by_gradient =
        criterion == PruneCriterion::GradientAware && grad_scores[i] >= r.gradient_threshold;
    r.keep[i] = (by_opacity || by_gradient) ? 1 : 0;
  }
  return r;
}

GaussianSet apply_mask(const GaussianSet& gaussians, const KeepMask& keep) {
  if (keep.size() != gaussians.count()) {
    fail(ErrorKind::InvalidParameter, "mask length does not match Gaussian count");
  }
  GaussianSet out;
  out.reserve(static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{1})));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) out.push_row(gaussians, i);
  }
  return out;
}

}  // namespace splatprune
