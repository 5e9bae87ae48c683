#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "splatprune/dataset.hpp"
#include "splatprune/error.hpp"
#include "splatprune/loss.hpp"
#include "splatprune/ply.hpp"
#include "splatprune/run_config.hpp"
#include "splatprune/synthetic.hpp"
#include "splatprune/trainer.hpp"

namespace fs = std::filesystem;
using namespace splatprune;

namespace {

constexpr double kMiB = 1024.0 * 1024.0;

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot write '" + path + "'");
  return f;
}

std::string fmt_db(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

Rgb parse_rgb(const std::string& s) {
  std::map<std::string, std::string> kv{{"background", s}};
  RunConfig tmp;
  apply_key_values(tmp, kv);
  return tmp.train.background;
}

/// Test views when the manifest has any, otherwise every view.
std::vector<View> eval_views(const std::string& manifest) {
  const DatasetManifest m = read_manifest(manifest);
  const bool has_test = std::any_of(m.entries.begin(), m.entries.end(),
                                    [](const ManifestEntry& e) { return e.test; });
  return load_dataset(manifest, has_test ? Split::Test : Split::All);
}

/// Metrics against on-disk targets: renders are rounded to 8 bits first, as
/// if saved next to the ground-truth PPMs.
EvalMetrics evaluate_saved(const GaussianSet& g, const std::vector<View>& views,
                           const TrainConfig& cfg) {
  EvalMetrics m;
  m.views = views.size();
  for (const View& v : views) {
    const Image img = quantize_8bit(rasterize(g, v.camera, cfg.background, cfg.render).image);
    m.psnr += psnr(img, v.image);
    m.ssim += ssim(img, v.image, cfg.loss);
  }
  m.psnr /= double(views.size());
  m.ssim /= double(views.size());
  return m;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> opacities(const GaussianSet& g) {
  std::vector<double> a(g.count());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = activated_opacity(g.opacity_logits[i]);
  return a;
}

// Schedule/training flags shared by trim and ablate. Explicit flags win over
// --config, which wins over --preset.
struct TrainFlags {
  std::string config;
  std::string preset;
  double gamma_target = 0;
  int steps = 0;
  int interval = 0;
  int finetune_iters = 0;
  std::string criterion;
  std::uint64_t seed = 0;
  double lambda = 0;
  int threads = 0;
  std::string reduction;
  std::string signal;
  std::string background;

  void add(CLI::App* app, bool with_criterion) {
    app->add_option("--config", config, "key = value run configuration file")
        ->check(CLI::ExistingFile);
    app->add_option("--preset", preset, "schedule preset: desk (default) or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--gamma-target", gamma_target, "total sparsity goal in [0,1)")
        ->check(CLI::Range(0.0, 0.999999));
    app->add_option("--steps", steps, "prune events")->check(CLI::PositiveNumber);
    app->add_option("--interval", interval, "iterations between prune events")
        ->check(CLI::PositiveNumber);
    app->add_option("--finetune-iters", finetune_iters, "iterations after the last prune")
        ->check(CLI::NonNegativeNumber);
    if (with_criterion) {
      app->add_option("--criterion", criterion, "gradient or opacity")
          ->check(CLI::IsMember({"gradient", "opacity"}));
    }
    app->add_option("--seed", seed, "view-order seed");
    app->add_option("--lambda", lambda, "D-SSIM weight")->check(CLI::Range(0.0, 1.0));
    app->add_option("--threads", threads, "render workers (0 = all cores)")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--reduction", reduction, "gradient score: average or sum")
        ->check(CLI::IsMember({"average", "sum"}));
    app->add_option("--signal", signal, "gradient signal: mean2d or full")
        ->check(CLI::IsMember({"mean2d", "full"}));
    app->add_option("--background", background, "r,g,b in [0,1]");
  }

  RunConfig resolve(const CLI::App* app) const {
    RunConfig cfg;
    std::map<std::string, std::string> kv;
    if (!config.empty()) {
      std::ifstream f(config);
      kv = parse_key_values(f);
    }
    if (!preset.empty()) kv["preset"] = preset;
    // Flags are forwarded as their raw text so the config parser is the only
    // place values are interpreted.
    static const std::pair<const char*, const char*> kFlagKeys[] = {
        {"--gamma-target", "gamma_target"}, {"--steps", "steps"},
        {"--interval", "interval"},         {"--finetune-iters", "finetune_iters"},
        {"--criterion", "criterion"},       {"--seed", "seed"},
        {"--lambda", "lambda"},             {"--threads", "threads"},
        {"--reduction", "reduction"},       {"--signal", "signal"},
        {"--background", "background"}};
    for (const auto& [flag, key] : kFlagKeys) {
      const CLI::Option* opt = app->get_option_no_throw(flag);
      if (opt != nullptr && opt->count() > 0) kv[key] = opt->as<std::string>();
    }
    apply_key_values(cfg, kv);
    cfg.schedule.validate();
    cfg.train.loss.validate();
    return cfg;
  }
};

// ---------------------------------------------------------------- synth

struct SynthCmd {
  std::string out;
  SyntheticConfig sc;
  bool baseline = false;
  long baseline_iters = 1000;
  std::uint64_t perturb_seed = 99;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("synth", "generate a seeded synthetic scene and views");
    app->add_option("--out", out, "output directory")->required();
    app->add_option("--seed", sc.seed, "scene seed");
    app->add_option("--gaussians", sc.n_gaussians, "Gaussian count")->check(CLI::PositiveNumber);
    app->add_option("--views", sc.n_views, "camera count")->check(CLI::Range(2, 100000));
    app->add_option("--size", sc.image_size, "image side in pixels")->check(CLI::PositiveNumber);
    app->add_flag("--baseline", baseline,
                  "also write baseline.ply: a perturbed copy fine-tuned on the train views");
    app->add_option("--baseline-iters", baseline_iters, "fine-tune iterations for --baseline")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--perturb-seed", perturb_seed, "seed of the perturbation");
    app->callback([this] { run(); });
  }

  void run() {
    const SyntheticScene s = make_synthetic(sc);
    save_synthetic(s, out);
    std::cout << "wrote " << s.scene.count() << " Gaussians and " << s.views.size()
              << " views to " << out << "\n";
    if (!baseline) return;
    TrainConfig cfg;
    cfg.seed = sc.seed;
    const auto train = select_split(s.views, Split::Train);
    const auto tuned = run_finetune(perturb(s.scene, {}, perturb_seed), train, baseline_iters, cfg);
    write_ply(tuned.scene, fs::path(out) / "baseline.ply");
    const auto test = select_split(s.views, Split::Test);
    std::cout << "baseline.ply: test PSNR " << fmt_db(evaluate(tuned.scene, test, cfg).psnr)
              << " dB after " << baseline_iters << " iterations\n";
  }
};

// ---------------------------------------------------------------- trim

struct TrimCmd {
  std::string scene, manifest, output, report, history;
  TrainFlags flags;
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("trim", "iteratively prune and fine-tune a scene");
    app->add_option("--scene", scene, "input PLY")->check(CLI::ExistingFile);
    app->add_option("--manifest", manifest, "dataset manifest")->check(CLI::ExistingFile);
    app->add_option("--output", output, "pruned PLY to write");
    app->add_option("--report", report,
                    "prune report CSV: iteration,gamma_iter,kept,removed,opacity_threshold,"
                    "gradient_threshold,achieved_sparsity");
    app->add_option("--history", history, "history CSV: iteration,loss,psnr,count");
    flags.add(app, true);
    app->callback([this] { run(); });
  }

  void run() {
    RunConfig cfg = flags.resolve(app);
    if (!scene.empty()) cfg.scene_path = scene;
    if (!manifest.empty()) cfg.manifest_path = manifest;
    if (!output.empty()) cfg.output_path = output;
    if (!report.empty()) cfg.report_csv = report;
    if (!history.empty()) cfg.history_csv = history;
    if (cfg.scene_path.empty() || cfg.manifest_path.empty() || cfg.output_path.empty()) {
      fail(ErrorKind::InvalidParameter, "trim needs --scene, --manifest and --output");
    }
    const GaussianSet input = read_ply(cfg.scene_path);
    const auto train = load_dataset(cfg.manifest_path, Split::Train);
    const auto result = run_iterative_prune(input, train, cfg.schedule, cfg.train);

    write_ply(result.scene, cfg.output_path);
    if (!cfg.report_csv.empty()) {
      auto f = open_out(cfg.report_csv);
      write_prune_report_csv(f, result.report);
    }
    if (!cfg.history_csv.empty()) {
      auto f = open_out(cfg.history_csv);
      write_history_csv(f, result.history);
    }
    const auto m = evaluate_saved(result.scene, eval_views(cfg.manifest_path), cfg.train);
    const double before = double(model_size_bytes(input)), after = double(model_size_bytes(result.scene));
    std::cout << "count " << input.count() << " -> " << result.scene.count() << " (achieved sparsity "
              << std::setprecision(4) << result.report.achieved_sparsity() << ", scheduled "
              << cfg.schedule.gamma_target << ")\n"
              << "size " << std::fixed << std::setprecision(3) << after / kMiB << " MB, ratio "
              << std::setprecision(2) << compression_ratio(before, after) << "x\n"
              << "test PSNR " << fmt_db(m.psnr) << " dB, SSIM " << std::setprecision(4) << m.ssim
              << "\n";
  }
};

// ---------------------------------------------------------------- render

struct RenderCmd {
  std::string scene, manifest, out, background = "0,0,0";
  int view = -1;
  bool all_test = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("render", "render views of a scene to PPM");
    app->add_option("--scene", scene, "input PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--manifest", manifest, "dataset manifest (cameras)")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--out", out, "output directory")->required();
    auto* v = app->add_option("--view", view, "manifest index to render")->check(CLI::NonNegativeNumber);
    auto* t = app->add_flag("--all-test", all_test, "render every test view");
    v->excludes(t);
    app->add_option("--background", background, "r,g,b in [0,1]");
    app->callback([this] { run(); });
  }

  void run() {
    if (view < 0 && !all_test) fail(ErrorKind::InvalidParameter, "render needs --view or --all-test");
    const Rgb bg = parse_rgb(background);
    const DatasetManifest m = read_manifest(manifest);
    std::vector<std::size_t> picks;
    if (all_test) {
      for (std::size_t k = 0; k < m.entries.size(); ++k)
        if (m.entries[k].test) picks.push_back(k);
    } else {
      if (static_cast<std::size_t>(view) >= m.entries.size()) {
        fail(ErrorKind::InvalidParameter, "view index " + std::to_string(view) + " out of range (" +
                                              std::to_string(m.entries.size()) + " views)");
      }
      picks.push_back(static_cast<std::size_t>(view));
    }
    const GaussianSet g = read_ply(scene);
    fs::create_directories(out);
    for (std::size_t k : picks) {
      char name[32];
      std::snprintf(name, sizeof name, "render_%03zu.ppm", k);
      write_ppm(rasterize(g, m.entries[k].camera(), bg).image, fs::path(out) / name);
      std::cout << (fs::path(out) / name).string() << "\n";
    }
  }
};

// ---------------------------------------------------------------- eval

struct EvalCmd {
  std::vector<std::string> scenes;
  std::string baseline, manifest, csv, background = "0,0,0";

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("eval", "score scenes on the test views");
    app->add_option("--scene", scenes, "PLY to score (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--baseline", baseline, "reference PLY for the compression ratio")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
    app->add_option("--csv", csv, "CSV: scene,count,psnr,ssim,size_mb,compression");
    app->add_option("--background", background, "r,g,b in [0,1]");
    app->callback([this] { run(); });
  }

  void run() {
    TrainConfig cfg;
    cfg.background = parse_rgb(background);
    const auto views = eval_views(manifest);
    const double base = double(model_size_bytes(read_ply(baseline)));
    std::ostringstream table;
    table << "scene,count,psnr,ssim,size_mb,compression\n";
    for (const auto& path : scenes) {
      const GaussianSet g = read_ply(path);
      const auto m = evaluate_saved(g, views, cfg);
      const double size = double(model_size_bytes(g));
      table << path << ',' << g.count() << ',' << fmt_db(m.psnr) << ',' << std::fixed
            << std::setprecision(6) << m.ssim << ',' << size / kMiB << ',' << std::setprecision(4)
            << compression_ratio(base, size) << std::defaultfloat << '\n';
    }
    std::cout << table.str();
    if (!csv.empty()) open_out(csv) << table.str();
  }
};

// ---------------------------------------------------------------- stats

struct StatsCmd {
  std::vector<std::string> scenes;
  std::string csv;
  static constexpr int kBins = 50;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("stats", "activated-opacity histogram of one or two scenes");
    app->add_option("--scene", scenes, "PLY file (give one or two)")
        ->required()
        ->expected(1, 2)
        ->check(CLI::ExistingFile);
    app->add_option("--csv", csv, "histogram CSV: bin_lo,bin_hi,<one column per scene>");
    app->callback([this] { run(); });
  }

  void run() {
    std::vector<std::vector<long>> counts;
    std::vector<std::string> labels;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      const auto a = opacities(read_ply(scenes[s]));
      std::vector<long> h(kBins, 0);
      for (double v : a) ++h[std::clamp(static_cast<int>(v * kBins), 0, kBins - 1)];
      counts.push_back(h);
      labels.push_back(scenes.size() == 2 ? (s == 0 ? "before" : "after") : "opacity");
      double mean = 0.0;
      for (double v : a) mean += v;
      mean = a.empty() ? 0.0 : mean / double(a.size());
      std::cout << labels.back() << ": " << scenes[s] << " count " << a.size() << " median "
                << std::setprecision(6) << median(a) << " mean " << mean << "\n";
    }
    if (csv.empty()) return;
    auto f = open_out(csv);
    f << "bin_lo,bin_hi";
    for (const auto& l : labels) f << ',' << l;
    f << '\n';
    for (int b = 0; b < kBins; ++b) {
      f << double(b) / kBins << ',' << double(b + 1) / kBins;
      for (const auto& h : counts) f << ',' << h[b];
      f << '\n';
    }
  }
};

// ---------------------------------------------------------------- ablate

struct AblateCmd {
  std::string scene, manifest, csv;
  std::vector<double> gammas{0.5};
  TrainFlags flags;
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("ablate",
                              "iterative vs one-shot x gradient vs opacity over a gamma sweep");
    app->add_option("--scene", scene, "baseline PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
    app->add_option("--gammas", gammas, "target sparsities")
        ->delimiter(',')
        ->check(CLI::Range(0.0, 0.999999));
    app->add_option("--csv", csv,
                    "CSV: variant,gamma,psnr,ssim,size_bytes,count,runtime_ms")
        ->required();
    flags.add(app, false);
    app->callback([this] { run(); });
  }

  void run() {
    const RunConfig cfg = flags.resolve(app);
    const GaussianSet base = read_ply(scene);
    const auto train = load_dataset(manifest, Split::Train);
    const auto rows = run_ablation(base, train, eval_views(manifest), gammas, cfg.schedule, cfg.train);
    auto f = open_out(csv);
    write_ablation_csv(f, rows);
    write_ablation_csv(std::cout, rows);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App root{"splatprune: gradient-aware pruning of Gaussian splat scenes"};
  root.require_subcommand(1);
  SynthCmd synth;
  TrimCmd trim;
  RenderCmd render;
  EvalCmd eval;
  StatsCmd stats;
  AblateCmd ablate;
  synth.add(root);
  trim.add(root);
  render.add(root);
  eval.add(root);
  stats.add(root);
  ablate.add(root);

  try {
    root.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return root.exit(e);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
