#include "splatprune/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "splatprune/error.hpp"

namespace splatprune {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::InvalidParameter, "config key '" + key + "': '" + v + "' is not a number");
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long l = std::stol(v, &used);
    if (used == v.size()) return l;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::InvalidParameter, "config key '" + key + "': '" + v + "' is not an integer");
}

Rgb to_rgb(const std::string& key, const std::string& v) {
  std::stringstream ss(v);
  Rgb c{};
  std::string part;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(ss, part, ',')) fail(ErrorKind::InvalidParameter, "config key '" + key + "' needs r,g,b");
    c[i] = to_double(key, trim(part));
  }
  return c;
}

}  // namespace

Preset parse_preset(const std::string& s) {
  if (s == "desk") return Preset::Desk;
  if (s == "paper") return Preset::Paper;
  fail(ErrorKind::InvalidParameter, "unknown preset '" + s + "' (expected desk or paper)");
}

PruneSchedule preset_schedule(Preset preset) {
  PruneSchedule s;
  s.steps = 10;
  s.gamma_target = 0.5;
  if (preset == Preset::Paper) {
    s.interval = 500;
    s.finetune_iters = 10000;
  } else {
    s.interval = 50;
    s.finetune_iters = 1000;
  }
  return s;
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::InvalidParameter, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_key_values(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
  if (auto it = kv.find("preset"); it != kv.end()) {
    const PruneSchedule p = preset_schedule(parse_preset(it->second));
    cfg.schedule.interval = p.interval;
    cfg.schedule.steps = p.steps;
    cfg.schedule.finetune_iters = p.finetune_iters;
  }
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"preset", [](const std::string&, const std::string&) {}},
      {"gamma_target", [&](auto& k, auto& v) { cfg.schedule.gamma_target = to_double(k, v); }},
      {"steps", [&](auto& k, auto& v) { cfg.schedule.steps = static_cast<int>(to_long(k, v)); }},
      {"interval", [&](auto& k, auto& v) { cfg.schedule.interval = static_cast<int>(to_long(k, v)); }},
      {"finetune_iters", [&](auto& k, auto& v) { cfg.schedule.finetune_iters = static_cast<int>(to_long(k, v)); }},
      {"criterion", [&](auto&, auto& v) { cfg.schedule.criterion = parse_criterion(v); }},
      {"seed", [&](auto& k, auto& v) { cfg.train.seed = static_cast<std::uint64_t>(to_long(k, v)); }},
      {"lambda", [&](auto& k, auto& v) { cfg.train.loss.lambda = to_double(k, v); }},
      {"lr_position_init", [&](auto& k, auto& v) { cfg.train.lr.position_init = to_double(k, v); }},
      {"lr_position_final", [&](auto& k, auto& v) { cfg.train.lr.position_final = to_double(k, v); }},
      {"lr_sh_dc", [&](auto& k, auto& v) { cfg.train.lr.sh_dc = to_double(k, v); }},
      {"lr_sh_rest", [&](auto& k, auto& v) { cfg.train.lr.sh_rest = to_double(k, v); }},
      {"lr_opacity", [&](auto& k, auto& v) { cfg.train.lr.opacity = to_double(k, v); }},
      {"lr_scale", [&](auto& k, auto& v) { cfg.train.lr.scale = to_double(k, v); }},
      {"lr_rotation", [&](auto& k, auto& v) { cfg.train.lr.rotation = to_double(k, v); }},
      {"reduction", [&](auto& k, auto& v) {
         if (v == "average") cfg.train.reduction = GradientReduction::Average;
         else if (v == "sum") cfg.train.reduction = GradientReduction::Sum;
         else fail(ErrorKind::InvalidParameter, "config key '" + k + "' must be average or sum");
       }},
      {"signal", [&](auto& k, auto& v) {
         if (v == "mean2d") cfg.train.signal = GradientSignal::Mean2D;
         else if (v == "full") cfg.train.signal = GradientSignal::FullParameter;
         else fail(ErrorKind::InvalidParameter, "config key '" + k + "' must be mean2d or full");
       }},
      {"background", [&](auto& k, auto& v) { cfg.train.background = to_rgb(k, v); }},
      {"threads", [&](auto& k, auto& v) { cfg.train.render.threads = static_cast<int>(to_long(k, v)); }},
      {"scene", [&](auto&, auto& v) { cfg.scene_path = v; }},
      {"manifest", [&](auto&, auto& v) { cfg.manifest_path = v; }},
      {"output", [&](auto&, auto& v) { cfg.output_path = v; }},
      {"report_csv", [&](auto&, auto& v) { cfg.report_csv = v; }},
      {"history_csv", [&](auto&, auto& v) { cfg.history_csv = v; }},
  };
  for (const auto& [key, value] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) fail(ErrorKind::InvalidParameter, "unknown config key '" + key + "'");
    it->second(key, value);
  }
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot open config '" + path.string() + "'");
  RunConfig cfg;
  apply_key_values(cfg, parse_key_values(f));
  return cfg;
}

}  // namespace splatprune
