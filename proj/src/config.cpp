// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include "c4sim/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "c4sim/text.hpp"

namespace c4sim {

namespace {

const std::set<std::string> kSectionNames = {"topology", "job",      "fault",
                                             "policies", "run",      "downtime"};

const std::set<std::string> kTopologyKeys = {
    "nodes", "leaves", "spines", "nodes_per_leaf_pair", "port_gbps",
    "uplink_gbps", "gpus_per_node", "nics_per_node"};
const std::set<std::string> kJobKeys = {
    "name",       "nodes",          "ranks_per_node",  "channels",
    "qps_per_channel", "collective_mib", "collective_bytes", "chunk_mib",
    "chunk_bytes", "queue_capacity", "compute_s",       "iterations",
    "checkpoint_interval_iters"};
const std::set<std::string> kFaultKeys = {"time_s", "kind",  "link", "factor", "job",
                                          "rank",   "src_rank", "dst_rank", "node",
                                          "nic",    "side"};
const std::set<std::string> kPolicyKeys = {
    "c4p",  "dynamic_lb", "c4d",         "k_mad",       "rho",
    "rel_floor", "hang_timeout_iters", "isolation_s", "reinit_s"};
const std::set<std::string> kRunKeys = {"seed",         "duration_s", "sample_interval_s",
                                        "trace",        "backup_nodes"};
const std::set<std::string> kDowntimeKeys = {
    "incident_rate_per_month", "checkpoint_interval_h", "detection_h",
    "diagnosis_h",             "reinit_h",              "month_h",
    "trials"};

const std::set<std::string>& keys_for(const std::string& section) {
  if (section == "topology") return kTopologyKeys;
  if (section == "job") return kJobKeys;
  if (section == "fault") return kFaultKeys;
  if (section == "policies") return kPolicyKeys;
  if (section == "run") return kRunKeys;
  return kDowntimeKeys;
}

bool parse_bool(std::string_view v, const std::string& what) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ValidationError("bad flag for " + what + ": '" + std::string(v) + "'");
}

std::vector<int> parse_int_list(std::string_view v, const std::string& what) {
  std::vector<int> out;
  for (auto part : split_fields(v, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    auto dots = part.find("..");
    if (dots != std::string_view::npos) {
      const int lo = parse_int(part.substr(0, dots), what);
      const int hi = parse_int(part.substr(dots + 2), what);
      for (int i = lo; i <= hi; ++i) out.push_back(i);
    } else {
      out.push_back(parse_int(part, what));
    }
  }
  return out;
}

class SectionView {
 public:
  SectionView(const RawSection& s, const std::string& prefix) : s_(s), prefix_(prefix) {}

  std::optional<std::string> get(const std::string& key) const {
    std::optional<std::string> out;
    for (const auto& [k, v, line] : s_.entries)
      if (k == key) out = v;
    return out;
  }
  double number(const std::string& key, double def) const {
    auto v = get(key);
    return v ? parse_double(*v, prefix_ + "." + key) : def;
  }
  int integer(const std::string& key, int def) const {
    auto v = get(key);
    return v ? parse_int(*v, prefix_ + "." + key) : def;
  }
  int64_t integer64(const std::string& key, int64_t def) const {
    auto v = get(key);
    return v ? parse_i64(*v, prefix_ + "." + key) : def;
  }
  bool flag(const std::string& key, bool def) const {
    auto v = get(key);
    return v ? parse_bool(*v, prefix_ + "." + key) : def;
  }

 private:
  const RawSection& s_;
  std::string prefix_;
};

}  // namespace

RawConfig parse_config_text(const std::string& text) {
  RawConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  RawSection* current = nullptr;
  while (std::getline(is, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#' || t.front() == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ValidationError("config line " + std::to_string(line_no) +
                              ": unterminated section header");
      std::string name(trim(t.substr(1, t.size() - 2)));
      if (!kSectionNames.count(name))
        throw ValidationError("config line " + std::to_string(line_no) +
                              ": unknown section [" + name + "]");
      cfg.sections.push_back({name, line_no, {}});
      current = &cfg.sections.back();
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": expected key = value");
    if (!current)
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": key outside any section");
    std::string key(trim(t.substr(0, eq)));
    std::string value(trim(t.substr(eq + 1)));
    if (!keys_for(current->name).count(key))
      throw ValidationError("config line " + std::to_string(line_no) + ": unknown key '" +
                            key + "' in section [" + current->name + "]");
    current->entries.emplace_back(key, value, line_no);
  }
  return cfg;
}

void apply_override(RawConfig& cfg, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ValidationError("--set needs section.key=value: '" + assignment + "'");
  std::string path = assignment.substr(0, eq);
  std::string value(trim(assignment.substr(eq + 1)));
  auto parts = split_fields(path, '.');
  std::string section(trim(parts[0]));
  int index = 0;
  std::string key;
  if (parts.size() == 2) {
    key = std::string(trim(parts[1]));
  } else if (parts.size() == 3) {
    index = parse_int(trim(parts[1]), "--set index");
    key = std::string(trim(parts[2]));
  } else {
    throw ValidationError("--set needs section.key or section.N.key: '" + assignment + "'");
  }
  if (!kSectionNames.count(section))
    throw ValidationError("--set: unknown section '" + section + "'");
  if (!keys_for(section).count(key))
    throw ValidationError("--set: unknown key '" + key + "' in [" + section + "]");

  int seen = 0;
  for (RawSection& s : cfg.sections) {
    if (s.name != section) continue;
    if (seen++ == index) {
      for (auto& [k, v, line] : s.entries)
        if (k == key) {
          v = value;
          return;
        }
      s.entries.emplace_back(key, value, 0);
      return;
    }
  }
  // Section absent: create it (singletons only).
  if (section == "job" || section == "fault")
    throw ValidationError("--set: no [" + section + "] with index " + std::to_string(index));
  cfg.sections.push_back({section, 0, {{key, value, 0}}});
}

namespace {

FaultEvent build_fault(const SectionView& v, const Scenario& sc, const RawSection& raw) {
  FaultEvent f;
  f.time_s = v.number("time_s", 0.0);
  auto kind = v.get("kind");
  if (!kind)
    throw ValidationError("config line " + std::to_string(raw.line) +
                          ": [fault] needs kind");
  const std::string k = *kind;
  if (k == "link_down") f.kind = FaultKind::link_down;
  else if (k == "link_up") f.kind = FaultKind::link_up;
  else if (k == "link_degraded") f.kind = FaultKind::link_degraded;
  else if (k == "slow_connection") f.kind = FaultKind::slow_connection;
  else if (k == "slow_compute") f.kind = FaultKind::slow_compute;
  else if (k == "nic_degraded") f.kind = FaultKind::nic_degraded;
  else if (k == "rank_crash") f.kind = FaultKind::rank_crash;
  else if (k == "comm_hang") f.kind = FaultKind::comm_hang;
  else if (k == "noncomm_hang") f.kind = FaultKind::noncomm_hang;
  else
    throw ValidationError("config line " + std::to_string(raw.line) +
                          ": unknown fault kind '" + k + "'");
  f.factor = v.number("factor", 1.0);
  f.job = v.integer("job", -1);
  f.rank = v.integer("rank", -1);
  f.src_rank = v.integer("src_rank", -1);
  f.dst_rank = v.integer("dst_rank", -1);
  f.node = v.integer("node", -1);
  f.nic = v.integer("nic", -1);
  f.side = v.integer("side", -1);

  if (auto link = v.get("link")) {
    // "uplink:<leaf>:<spine>" | "host:<node>:<nic>:<side>" | numeric id
    auto parts = split_fields(*link, ':');
    const FatTreeParams& tp = sc.topology;
    if (parts.size() == 3 && parts[0] == "uplink") {
      const int leaf = parse_int(parts[1], "fault.link leaf");
      const int spine = parse_int(parts[2], "fault.link spine");
      f.link = tp.node_count * tp.nics_per_node * 2 + leaf * tp.spine_count + spine;
    } else if (parts.size() == 4 && parts[0] == "host") {
      const int node = parse_int(parts[1], "fault.link node");
      const int nic = parse_int(parts[2], "fault.link nic");
      const int side = parse_int(parts[3], "fault.link side");
      f.link = (node * tp.nics_per_node + nic) * 2 + side;
    } else if (parts.size() == 1) {
      f.link = parse_int(parts[0], "fault.link");
    } else {
      throw ValidationError("config line " + std::to_string(raw.line) +
                            ": bad link reference '" + *link + "'");
    }
  }
  return f;
}

}  // namespace

ScenarioConfig build_scenario(const RawConfig& cfg) {
  ScenarioConfig out;

  const RawSection* downtime = nullptr;
  for (const RawSection& s : cfg.sections)
    if (s.name == "downtime") downtime = &s;

  if (downtime) {
    SectionView v(*downtime, "downtime");
    c4d::DowntimeModelParams p;
    p.incident_rate_per_month = v.number("incident_rate_per_month", 40.0);
    p.checkpoint_interval_h = v.number("checkpoint_interval_h", 2.71);
    p.detection_mean_h = v.number("detection_h", 0.6138);
    p.diagnosis_mean_h = v.number("diagnosis_h", 3.537);
    p.reinit_mean_h = v.number("reinit_h", 0.108);
    p.month_h = v.number("month_h", 720.0);
    p.trials = v.integer("trials", 1000);
    out.downtime = p;
  }

  bool has_sim_sections = false;
  for (const RawSection& s : cfg.sections)
    if (s.name != "downtime" && s.name != "run") has_sim_sections = true;
  if (downtime && has_sim_sections)
    throw ValidationError("config: [downtime] cannot be combined with simulator sections");

  Scenario sc;
  int jobs_seen = 0;
  for (const RawSection& s : cfg.sections) {
    SectionView v(s, s.name);
    if (s.name == "topology") {
      sc.topology.node_count = v.integer("nodes", sc.topology.node_count);
      sc.topology.leaf_count = v.integer("leaves", sc.topology.leaf_count);
      sc.topology.spine_count = v.integer("spines", sc.topology.spine_count);
      sc.topology.nodes_per_leaf_pair =
          v.integer("nodes_per_leaf_pair", sc.topology.nodes_per_leaf_pair);
      sc.topology.capacity_gbps = v.number("port_gbps", sc.topology.capacity_gbps);
      if (v.get("uplink_gbps")) sc.topology.uplink_gbps = v.number("uplink_gbps", 0.0);
      sc.topology.gpus_per_node = v.integer("gpus_per_node", sc.topology.gpus_per_node);
      sc.topology.nics_per_node = v.integer("nics_per_node", sc.topology.nics_per_node);
    } else if (s.name == "job") {
      JobSpec j;
      j.job_id = jobs_seen++;
      j.name = v.get("name").value_or("job" + std::to_string(j.job_id));
      if (auto nodes = v.get("nodes")) j.nodes = parse_int_list(*nodes, "job.nodes");
      j.ranks_per_node = v.integer("ranks_per_node", 8);
      j.channels = v.integer("channels", 1);
      j.qps_per_channel = v.integer("qps_per_channel", 2);
      j.collective_bytes = v.integer64("collective_bytes", 0);
      if (j.collective_bytes == 0)
        j.collective_bytes = v.integer64("collective_mib", 256) << 20;
      j.chunk_bytes = v.integer64("chunk_bytes", 0);
      if (j.chunk_bytes == 0) j.chunk_bytes = v.integer64("chunk_mib", 4) << 20;
      j.queue_capacity = v.integer("queue_capacity", 8);
      j.compute_s = v.number("compute_s", 0.01);
      j.iterations = v.integer("iterations", 3);
      j.checkpoint_interval_iters = v.integer("checkpoint_interval_iters", 0);
      sc.jobs.push_back(std::move(j));
    } else if (s.name == "policies") {
      sc.policies.c4p = v.flag("c4p", sc.policies.c4p);
      sc.policies.dynamic_lb = v.flag("dynamic_lb", sc.policies.dynamic_lb);
      sc.policies.c4d = v.flag("c4d", sc.policies.c4d);
      sc.policies.detector.k_mad = v.number("k_mad", sc.policies.detector.k_mad);
      sc.policies.detector.rho = v.number("rho", sc.policies.detector.rho);
      sc.policies.detector.rel_floor =
          v.number("rel_floor", sc.policies.detector.rel_floor);
      sc.policies.detector.hang_timeout_iters =
          v.number("hang_timeout_iters", sc.policies.detector.hang_timeout_iters);
      sc.policies.isolation_s = v.number("isolation_s", sc.policies.isolation_s);
      sc.policies.reinit_s = v.number("reinit_s", sc.policies.reinit_s);
    } else if (s.name == "run") {
      sc.seed = static_cast<uint64_t>(v.integer64("seed", 1));
      sc.duration_s = v.number("duration_s", sc.duration_s);
      sc.sample_interval_s = v.number("sample_interval_s", sc.sample_interval_s);
      sc.emit_trace = v.flag("trace", sc.emit_trace);
      if (auto b = v.get("backup_nodes"))
        sc.backup_nodes = parse_int_list(*b, "run.backup_nodes");
    }
  }
  for (const RawSection& s : cfg.sections) {
    if (s.name != "fault") continue;
    SectionView v(s, "fault");
    sc.faults.push_back(build_fault(v, sc, s));
  }
  std::stable_sort(sc.faults.begin(), sc.faults.end(),
                   [](const FaultEvent& a, const FaultEvent& b) { return a.time_s < b.time_s; });

  out.seed = sc.seed;
  if (downtime) {
    out.sim.reset();
    return out;
  }
  if (sc.jobs.empty() && !downtime)
    throw ValidationError("config: no [job] section and no [downtime] section");
  validate_scenario(sc);
  out.sim = std::move(sc);
  return out;
}

ScenarioConfig load_config_file(const std::string& path,
                                const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config file: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  RawConfig raw = parse_config_text(buf.str());
  for (const std::string& o : overrides) apply_override(raw, o);
  return build_scenario(raw);
}

ScenarioConfig load_config(const std::string& path_or_preset,
                           const std::vector<std::string>& overrides) {
  std::ifstream probe(path_or_preset);
  if (probe.good()) return load_config_file(path_or_preset, overrides);
  if (auto text = preset_text(path_or_preset)) {
    RawConfig raw = parse_config_text(*text);
    for (const std::string& o : overrides) apply_override(raw, o);
    return build_scenario(raw);
  }
  throw ValidationError("config '" + path_or_preset +
                        "' is neither a readable file nor a preset (presets: " +
                        [] {
                          std::string s;
                          for (const auto& n : preset_names()) s += n + " ";
                          return s;
                        }() +
                        ")");
}

}  // namespace c4sim
