// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "c4sim/c4d.hpp"
#include "c4sim/simengine.hpp"

namespace c4sim {

// Raw sectioned key/value document, before semantic checks. [job] and
// [fault] sections repeat; everything else appears at most once.
struct RawSection {
  std::string name;
  int line = 0;
  std::vector<std::tuple<std::string, std::string, int>> entries;  // key, value, line
};

struct RawConfig {
  std::vector<RawSection> sections;
};

RawConfig parse_config_text(const std::string& text);

// Override syntax: section.key=value, with repeated sections addressed by
// index: job.0.compute_s=0.02, fault.1.time_s=3.
void apply_override(RawConfig& cfg, const std::string& assignment);

// A scenario config builds either a simulator run or a downtime
// Monte-Carlo calibration, never both.
struct ScenarioConfig {
  std::optional<Scenario> sim;
  std::optional<c4d::DowntimeModelParams> downtime;
  uint64_t seed = 1;  // [run] seed; drives Monte-Carlo trials too
};

ScenarioConfig build_scenario(const RawConfig& cfg);

ScenarioConfig load_config_file(const std::string& path,
                                const std::vector<std::string>& overrides);

// Built-in presets (bonded_balance, eight_jobs_1to1, eight_jobs_2to1,
// linkfail_lb, downtime_jun, downtime_dec).
const std::vector<std::string>& preset_names();
std::optional<std::string> preset_text(const std::string& name);

// Resolves a --config argument: an existing file path, or a preset name.
ScenarioConfig load_config(const std::string& path_or_preset,
                           const std::vector<std::string>& overrides);

}  // namespace c4sim
