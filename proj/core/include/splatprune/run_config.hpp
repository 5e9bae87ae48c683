#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "splatprune/pruning.hpp"
#include "splatprune/trainer.hpp"

namespace splatprune {

enum class Preset { Desk, Paper };

Preset parse_preset(const std::string& s);

/// desk: interval 50, 10 steps, 1000 fine-tune iterations.
/// paper: interval 500, 10 steps, 10000 fine-tune iterations.
PruneSchedule preset_schedule(Preset preset);

/// Everything a prune run needs. Populated from a flat key-value file
/// (`key = value`, `#` comments) and/or command-line flags.
struct RunConfig {
  PruneSchedule schedule = preset_schedule(Preset::Desk);
  TrainConfig train;
  std::string scene_path;
  std::string manifest_path;
  std::string output_path;
  std::string report_csv;
  std::string history_csv;
};

std::map<std::string, std::string> parse_key_values(std::istream& in);

/// Applies recognised keys; a `preset` key is applied before all others.
/// Unknown keys raise InvalidParameter.
void apply_key_values(RunConfig& cfg, const std::map<std::string, std::string>& kv);

RunConfig read_run_config(const std::filesystem::path& path);

}  // namespace splatprune
