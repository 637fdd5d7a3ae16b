// SPDX-License-Identifier: Apache-2.0
#include "axllm/json_io.hpp"

#include <set>

#include "axllm/error.hpp"

namespace axllm {

namespace {

// Reads the members of one JSON object; finish() rejects whatever was not read.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InvalidArgument(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw InvalidArgument(path_ + ": missing '" + key + "'");
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out, bool required = false) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      if (required) throw InvalidArgument(path_ + ": missing '" + key + "'");
      return;
    }
    const Json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) bad_type(key, "a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned()) bad_type(key, "a non-negative integer");
      if (v.get<std::uint64_t>() > std::uint64_t(std::numeric_limits<T>::max())) {
        bad_type(key, "a smaller integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) bad_type(key, "a number");
    } else {
      if (!v.is_string()) bad_type(key, "a string");
    }
    out = v.get<T>();
  }

  void expect_schema(const char* schema) {
    std::string s;
    get("schema", s);
    if (has("schema") && s != schema) {
      throw InvalidArgument(path_ + ": schema '" + s + "' is not '" + schema + "'");
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw InvalidArgument(path_ + ": unknown key '" + key + "'");
    }
  }

  const std::string& path() const { return path_; }

 private:
  [[noreturn]] void bad_type(const std::string& key, const char* what) const {
    throw InvalidArgument(path_ + "." + key + ": expected " + std::string(what));
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const Json& array_child(ObjectReader& r, const std::string& key) {
  const Json& a = r.child(key);
  if (!a.is_array()) throw InvalidArgument(r.path() + "." + key + ": expected an array");
  return a;
}

std::string to_string(RcSliceMapping m) {
  return m == RcSliceMapping::Modulo ? "modulo" : "contiguous";
}

RcSliceMapping parse_mapping(const std::string& s, const std::string& where) {
  if (s == "contiguous") return RcSliceMapping::Contiguous;
  if (s == "modulo") return RcSliceMapping::Modulo;
  throw InvalidArgument(where + ": unknown RC slice mapping '" + s + "'");
}

}  // namespace

Json to_json(const DistributionSpec& d) {
  Json j;
  j["kind"] = to_string(d.kind);
  if (d.kind == DistributionSpec::Kind::File) {
    j["path"] = d.path;
  } else {
    j["spread"] = d.spread;
  }
  if (d.seed) j["seed"] = *d.seed;
  return j;
}

DistributionSpec distribution_from_json(const Json& j, const std::string& where) {
  ObjectReader r(j, where);
  DistributionSpec d;
  std::string kind;
  r.get("kind", kind, true);
  d.kind = parse_distribution_kind(kind);
  r.get("spread", d.spread);
  r.get("path", d.path);
  if (r.has("seed")) {
    std::uint64_t s = 0;
    r.get("seed", s);
    d.seed = s;
  }
  r.finish();
  d.validate();
  return d;
}

Json to_json(const WorkloadSpec& w) {
  Json j;
  j["schema"] = kWorkloadSchema;
  j["name"] = w.name;
  j["tokens"] = w.tokens;
  j["seed"] = w.seed;
  j["layer_overhead_cycles"] = w.layer_overhead_cycles;
  j["input"] = to_json(w.input);
  Json layers = Json::array();
  for (const auto& l : w.layers) {
    Json lj;
    lj["name"] = l.name;
    Json ms = Json::array();
    for (const auto& m : l.matrices) {
      ms.push_back({{"name", m.name}, {"rows", m.rows}, {"cols", m.cols},
                    {"source", to_json(m.source)}});
    }
    lj["matrices"] = std::move(ms);
    if (!l.lora.empty()) {
      Json ls = Json::array();
      for (const auto& a : l.lora) {
        ls.push_back({{"target", a.target}, {"rank", a.rank}, {"a", to_json(a.a)},
                      {"b", to_json(a.b)}});
      }
      lj["lora"] = std::move(ls);
    }
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

WorkloadSpec workload_from_json(const Json& j) {
  ObjectReader r(j, "workload");
  r.expect_schema(kWorkloadSchema);
  WorkloadSpec w;
  r.get("name", w.name);
  r.get("tokens", w.tokens);
  r.get("seed", w.seed);
  r.get("layer_overhead_cycles", w.layer_overhead_cycles);
  if (r.has("input")) w.input = distribution_from_json(r.child("input"), "workload.input");
  const Json& layers = array_child(r, "layers");
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const std::string lp = "workload.layers[" + std::to_string(li) + "]";
    ObjectReader lr(layers[li], lp);
    LayerSpec layer;
    layer.name = "layer" + std::to_string(li);
    lr.get("name", layer.name);
    const Json& ms = array_child(lr, "matrices");
    for (std::size_t mi = 0; mi < ms.size(); ++mi) {
      const std::string mp = lp + ".matrices[" + std::to_string(mi) + "]";
      ObjectReader mr(ms[mi], mp);
      MatrixSpec m;
      mr.get("name", m.name, true);
      mr.get("rows", m.rows, true);
      mr.get("cols", m.cols, true);
      m.source = distribution_from_json(mr.child("source"), mp + ".source");
      mr.finish();
      layer.matrices.push_back(std::move(m));
    }
    if (lr.has("lora")) {
      const Json& ls = array_child(lr, "lora");
      for (std::size_t ai = 0; ai < ls.size(); ++ai) {
        const std::string ap = lp + ".lora[" + std::to_string(ai) + "]";
        ObjectReader ar(ls[ai], ap);
        LoraSpec a;
        ar.get("target", a.target, true);
        ar.get("rank", a.rank, true);
        a.a = distribution_from_json(ar.child("a"), ap + ".a");
        a.b = distribution_from_json(ar.child("b"), ap + ".b");
        ar.finish();
        layer.lora.push_back(std::move(a));
      }
    }
    lr.finish();
    w.layers.push_back(std::move(layer));
  }
  r.finish();
  w.validate();
  return w;
}

Json to_json(const AcceleratorConfig& c) {
  Json j;
  j["schema"] = kConfigSchema;
  j["lanes"] = c.lanes;
  j["tile_cols"] = c.tile.tile_cols;
  j["slices"] = {{"num_slices", c.slices.num_slices},
                 {"slice_size", c.slices.slice_size},
                 {"queue_depth", c.slices.queue_depth},
                 {"rc_slices", c.slices.rc_slices},
                 {"mapping", to_string(c.slices.mapping)},
                 {"skip_blocked_heads", c.slices.skip_blocked_heads}};
  j["timing"] = {{"mult_latency", c.timing.mult_latency},
                 {"mult_initiation_interval", c.timing.mult_initiation_interval},
                 {"buffer_access_latency", c.timing.buffer_access_latency},
                 {"out_queue_depth", c.timing.out_queue_depth},
                 {"mult_queue_depth", c.timing.mult_queue_depth},
                 {"baseline_initiation_interval", c.timing.baseline_initiation_interval},
                 {"baseline_multipliers", c.timing.baseline_multipliers}};
  j["adder_tree"] = {{"stage_latency", c.adder_tree_stage_latency},
                     {"columns_per_cycle", c.adder_tree_columns_per_cycle}};
  j["energy"] = {{"e_mult", c.energy.e_mult},
                 {"e_rc_access", c.energy.e_rc_access},
                 {"e_buffer_access", c.energy.e_buffer_access},
                 {"e_add", c.energy.e_add},
                 {"e_queue", c.energy.e_queue}};
  return j;
}

AcceleratorConfig config_from_json(const Json& j) {
  ObjectReader r(j, "config");
  r.expect_schema(kConfigSchema);
  AcceleratorConfig c;
  r.get("lanes", c.lanes);
  r.get("tile_cols", c.tile.tile_cols);
  if (r.has("slices")) {
    ObjectReader s(r.child("slices"), "config.slices");
    s.get("num_slices", c.slices.num_slices);
    s.get("slice_size", c.slices.slice_size);
    s.get("queue_depth", c.slices.queue_depth);
    s.get("rc_slices", c.slices.rc_slices);
    std::string mapping = to_string(c.slices.mapping);
    s.get("mapping", mapping);
    c.slices.mapping = parse_mapping(mapping, "config.slices.mapping");
    s.get("skip_blocked_heads", c.slices.skip_blocked_heads);
    s.finish();
  }
  if (r.has("timing")) {
    ObjectReader t(r.child("timing"), "config.timing");
    t.get("mult_latency", c.timing.mult_latency);
    t.get("mult_initiation_interval", c.timing.mult_initiation_interval);
    t.get("buffer_access_latency", c.timing.buffer_access_latency);
    t.get("out_queue_depth", c.timing.out_queue_depth);
    t.get("mult_queue_depth", c.timing.mult_queue_depth);
    t.get("baseline_initiation_interval", c.timing.baseline_initiation_interval);
    t.get("baseline_multipliers", c.timing.baseline_multipliers);
    t.finish();
  }
  if (r.has("adder_tree")) {
    ObjectReader a(r.child("adder_tree"), "config.adder_tree");
    a.get("stage_latency", c.adder_tree_stage_latency);
    a.get("columns_per_cycle", c.adder_tree_columns_per_cycle);
    a.finish();
  }
  if (r.has("energy")) {
    ObjectReader e(r.child("energy"), "config.energy");
    e.get("e_mult", c.energy.e_mult);
    e.get("e_rc_access", c.energy.e_rc_access);
    e.get("e_buffer_access", c.energy.e_buffer_access);
    e.get("e_add", c.energy.e_add);
    e.get("e_queue", c.energy.e_queue);
    e.finish();
  }
  r.finish();
  c.validate();
  return c;
}

Json to_json(const ReuseStats& s) {
  Json j;
  j["multiplications"] = s.multiplications;
  j["reuses"] = s.reuses;
  j["reuse_rate"] = s.processed() ? reuse_rate(s) : 0.0;
  std::uint64_t passes = 0, uniques = 0;
  for (std::size_t u = 0; u < s.unique_histogram.size(); ++u) {
    passes += s.unique_histogram[u];
    uniques += u * s.unique_histogram[u];
  }
  j["row_passes"] = passes;
  j["mean_unique_per_row_pass"] = passes ? double(uniques) / double(passes) : 0.0;
  return j;
}

Json to_json(const EventCounters& e) {
  return {{"mults", e.mults},
          {"rc_accesses", e.rc_accesses},
          {"buffer_accesses", e.buffer_accesses},
          {"adds", e.adds},
          {"queue_transfers", e.queue_transfers}};
}

namespace {

Json timing_json(const PassTiming& t) {
  return {{"cycles", t.cycles},
          {"waves", t.waves},
          {"lane_runs", t.lane_runs},
          {"mults_issued", t.mults_issued},
          {"reuses_issued", t.reuses_issued},
          {"hazard_stall_cycles", t.hazard_stall_cycles},
          {"hazard_events", t.hazard_events},
          {"mult_wait_cycles", t.mult_wait_cycles},
          {"rc_slice_cycles", t.rc_slice_cycles},
          {"rc_collision_events", t.rc_collision_events},
          {"routed_requests", t.routed_requests},
          {"peak_rc_queue", t.peak_rc_queue},
          {"peak_mult_queue", t.peak_mult_queue},
          {"peak_out_queue", t.peak_out_queue}};
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[std::size_t(i)] = digits[v & 0xf];
  return s;
}

}  // namespace

Json to_json(const RunReport& r) {
  Json j;
  j["schema"] = kReportSchema;
  j["machine"] = r.machine;
  j["seed"] = r.workload.seed;
  j["total_cycles"] = r.total_cycles;
  j["baseline_cycles"] = r.baseline_cycles;
  j["speedup"] = r.speedup;
  j["reuse"] = to_json(r.reuse);
  j["stall_fraction"] = r.stall_fraction;
  j["collision_rate"] = r.collision_rate;
  j["events"] = to_json(r.events);
  j["baseline_events"] = to_json(r.baseline_events);
  j["energy"] = r.energy;
  j["energy_baseline"] = r.energy_baseline;
  j["flow_control_violations"] = r.flow_control_violations;
  j["verified"] = r.verified;
  Json ms = Json::array();
  for (const auto& m : r.matrices) {
    Json mj;
    mj["layer"] = m.layer;
    mj["name"] = m.name;
    mj["rows"] = m.rows;
    mj["cols"] = m.cols;
    mj["row_passes"] = m.row_passes;
    mj["col_tiles"] = m.col_tiles;
    mj["cycles"] = m.cycles;
    mj["baseline_cycles"] = m.baseline_cycles;
    mj["reuse"] = to_json(m.reuse);
    mj["timing"] = timing_json(m.timing);
    mj["output_checksum"] = hex64(m.output_checksum);
    if (m.lora_rank > 0) {
      mj["lora"] = {{"rank", m.lora_rank},
                    {"separate_cycles", m.separate_cycles},
                    {"overlap_rate", m.overlap_rate}};
    }
    ms.push_back(std::move(mj));
  }
  j["matrices"] = std::move(ms);
  j["config"] = to_json(r.config);
  j["workload"] = to_json(r.workload);
  return j;
}

Json to_json(const Comparison& c) {
  return {{"speedup", c.speedup},
          {"axllm_cycles", c.axllm_cycles},
          {"baseline_cycles", c.baseline_cycles},
          {"energy_ratio", c.energy_ratio},
          {"energy_reduction", c.energy_reduction},
          {"reuse_rate", c.reuse_rate},
          {"stall_fraction", c.stall_fraction},
          {"collision_rate", c.collision_rate}};
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(what + ": " + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace axllm
