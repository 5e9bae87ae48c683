#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "splatprune/error.hpp"
#include "splatprune/pruning.hpp"
#include "support.hpp"

using namespace splatprune;

namespace {

// Brute force: v_i survives fraction f when it is >= the element at sorted
// index floor(f*n), i.e. when at least floor(f*n)+1 values are <= v_i.
std::vector<bool> survives_quantile(const std::vector<double>& v, double f) {
  const std::size_t n = v.size();
  const std::size_t cut = static_cast<std::size_t>(std::floor(f * double(n)));
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t at_most = 0;
    for (std::size_t j = 0; j < n; ++j) at_most += v[j] <= v[i];
    out[i] = at_most > cut;
  }
  return out;
}

}  // namespace

TEST_CASE("per iteration fraction examples") {
  CHECK(per_iteration_fraction(0.5, 1) == doctest::Approx(0.5).epsilon(1e-15));
  for (int t = 1; t <= 20; ++t) CHECK(per_iteration_fraction(0.0, t) == 0.0);
  CHECK(std::abs(per_iteration_fraction(0.75, 10) - 0.129449) <= 1e-6);
  CHECK(per_iteration_fraction(0.75, 10) == doctest::Approx(1.0 - std::pow(0.25, 0.1)));

  CHECK_THROWS_AS(per_iteration_fraction(1.0, 3), Error);
  CHECK_THROWS_AS(per_iteration_fraction(-0.1, 3), Error);
  CHECK_THROWS_AS(per_iteration_fraction(0.5, 0), Error);
}

TEST_CASE("schedule compounds to the target") {
  for (int k = 0; k <= 9; ++k) {
    const double target = k / 10.0;
    for (int t = 1; t <= 20; ++t) {
      const double g = per_iteration_fraction(target, t);
      CHECK(std::abs(std::pow(1.0 - g, t) - (1.0 - target)) <= 1e-12);
      if (t > 1) CHECK(g <= per_iteration_fraction(target, t - 1));
      if (k > 0) CHECK(g > per_iteration_fraction((k - 1) / 10.0, t));
    }
  }
}

TEST_CASE("quantile examples") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(quantile(v, 0.5) == 3.0);
  CHECK(quantile(v, 0.0) == -std::numeric_limits<double>::infinity());
  CHECK(quantile(std::vector<double>{4, 1, 3, 2}, 0.25) == 2.0);
  const std::vector<double> same(7, 0.4);
  for (double f : {0.1, 0.5, 0.9}) CHECK(quantile(same, f) == 0.4);
  CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.5), Error);
}

TEST_CASE("prune mask examples") {
  const std::vector<double> a{0.1, 0.2, 0.3, 0.4}, g{4, 3, 2, 1};
  const auto ga = prune_mask(a, g, 0.5, PruneCriterion::GradientAware);
  CHECK(ga.keep == KeepMask{1, 1, 1, 1});
  const auto op = prune_mask(a, g, 0.5, PruneCriterion::OpacityOnly);
  CHECK(op.keep == KeepMask{0, 0, 1, 1});
  CHECK(op.kept() == 2);
  CHECK(prune_mask(a, g, 0.0, PruneCriterion::GradientAware).kept() == 4);
  CHECK(prune_mask(a, g, 0.0, PruneCriterion::OpacityOnly).kept() == 4);

  const std::vector<double> equal(5, 0.3);
  CHECK(prune_mask(equal, equal, 0.6, PruneCriterion::GradientAware).kept() == 5);
  CHECK(prune_mask(equal, equal, 0.6, PruneCriterion::OpacityOnly).kept() == 5);

  const std::vector<double> short_g{1, 2};
  CHECK_THROWS_AS(prune_mask(a, short_g, 0.5, PruneCriterion::GradientAware), Error);
  CHECK_THROWS_AS(prune_mask(a, g, 1.0, PruneCriterion::GradientAware), Error);
}

TEST_CASE("prune mask agrees with brute force") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> size(1, 1000);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> coarse(0, 9);
    for (int trial = 0; trial < 4; ++trial) {
      const std::size_t n = trial == 0 ? 1000 : size(rng);
      const bool ties = trial % 2 == 1;
      std::vector<double> a(n), g(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = ties ? coarse(rng) / 10.0 : u(rng);
        g[i] = ties ? coarse(rng) * 1e-3 : u(rng) * 1e-2;
      }
      const double gamma = u(rng) * 0.95;
      const auto sa = survives_quantile(a, gamma), sg = survives_quantile(g, gamma);
      const auto ga = prune_mask(a, g, gamma, PruneCriterion::GradientAware);
      const auto op = prune_mask(a, g, gamma, PruneCriterion::OpacityOnly);
      bool agree = true, superset = true;
      for (std::size_t i = 0; i < n; ++i) {
        agree &= bool(ga.keep[i]) == (sa[i] || sg[i]);
        agree &= bool(op.keep[i]) == bool(sa[i]);
        superset &= !op.keep[i] || ga.keep[i];
      }
      CHECK(agree);
      CHECK(superset);
      const std::size_t cut = static_cast<std::size_t>(std::floor(gamma * double(n)));
      CHECK(n - ga.kept() <= cut);
      if (!ties) CHECK(n - op.kept() == cut);
    }
  }
}

TEST_CASE("apply mask") {
  const GaussianSet g = testing::random_scene(3, 6);
  CHECK(bitwise_equal(apply_mask(g, KeepMask(6, 1)), g));
  CHECK(apply_mask(g, KeepMask(6, 0)).count() == 0);

  const GaussianSet alt = apply_mask(g, KeepMask{1, 0, 1, 0, 1, 0});
  REQUIRE(alt.count() == 3);
  for (std::size_t k = 0; k < 3; ++k)
    for (int p = 0; p < kParamsPerGaussian; ++p) {
      const float want = g.param(2 * k, p), got = alt.param(k, p);
      CHECK(std::memcmp(&want, &got, sizeof(float)) == 0);
    }
  CHECK_THROWS_AS(apply_mask(g, KeepMask(5, 1)), Error);

  const std::vector<int> rows{1, 2, 3, 4, 5, 6};
  CHECK(filter_rows(rows, KeepMask{1, 0, 1}, 2) == std::vector<int>{1, 2, 5, 6});
}

TEST_CASE("criterion names and schedule validation") {
  CHECK(parse_criterion("gradient") == PruneCriterion::GradientAware);
  CHECK(parse_criterion("opacity") == PruneCriterion::OpacityOnly);
  CHECK(std::string(to_string(PruneCriterion::OpacityOnly)) == "opacity");
  CHECK_THROWS_AS(parse_criterion("magnitude"), Error);

  PruneSchedule s;
  CHECK_NOTHROW(s.validate());
  s.gamma_target = 1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.steps = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.interval = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.finetune_iters = -1;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("prune report csv") {
  PruneReport r;
  r.initial_count = 10;
  r.steps.push_back({50, 0.2, 8, 2, 0.3, 0.01});
  r.steps.push_back({100, 0.2, 7, 1, 0.35, 0.02});
  r.final_count = 7;
  CHECK(r.achieved_sparsity() == doctest::Approx(0.3));
  std::ostringstream os;
  write_prune_report_csv(os, r);
  const std::string csv = os.str();
  CHECK(csv.rfind("iteration,gamma_iter,kept,removed,opacity_threshold,gradient_threshold,"
                  "achieved_sparsity\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("\n100,0.2") != std::string::npos);
}
