// SPDX-License-Identifier: Apache-2.0
#include "axllm/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "axllm/accelerator.hpp"
#include "axllm/error.hpp"
#include "axllm/json_io.hpp"
#include "axllm/matrix_io.hpp"
#include "axllm/workload.hpp"

namespace axllm {

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct MachineFlags {
  std::string config_path;
  std::optional<std::uint32_t> lanes, slices, queue_depth, mult_latency, mult_ii, baseline_ii;
  std::optional<std::size_t> tile_cols;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "accelerator config (JSON)");
    app->add_option("--lanes", lanes, "lanes L");
    app->add_option("--slices", slices, "slices P per lane buffer");
    app->add_option("--slice-queue-depth", queue_depth, "depth S of each RC-slice queue");
    app->add_option("--tile-cols", tile_cols, "columns per tile");
    app->add_option("--mult-latency", mult_latency, "multiplier latency in cycles");
    app->add_option("--mult-ii", mult_ii, "multiplier initiation interval");
    app->add_option("--baseline-ii", baseline_ii, "baseline multiplier initiation interval");
  }

  AcceleratorConfig build() const {
    AcceleratorConfig c;
    if (!config_path.empty()) c = config_from_json(parse_json(read_text(config_path), config_path));
    if (lanes) c.lanes = *lanes;
    if (slices) c.slices.num_slices = *slices;
    if (queue_depth) c.slices.queue_depth = *queue_depth;
    if (tile_cols) c.tile.tile_cols = *tile_cols;
    if (mult_latency) c.timing.mult_latency = *mult_latency;
    if (mult_ii) c.timing.mult_initiation_interval = *mult_ii;
    if (baseline_ii) c.timing.baseline_initiation_interval = *baseline_ii;
    if (slices || tile_cols) {
      // The lane buffer follows the tile: P slices of ceil(tile / P) entries.
      const auto p = std::max<std::uint32_t>(1, c.slices.num_slices);
      c.slices.slice_size = std::uint32_t((c.tile.tile_cols + p - 1) / p);
    }
    c.validate();
    return c;
  }
};

struct WorkloadFlags {
  std::string workload_path, preset, matrix_path, dist = "gaussian";
  std::optional<double> spread;
  std::optional<std::size_t> rows, cols, layers;
  std::size_t rank = 0;
  std::optional<std::uint64_t> tokens, seed;

  void attach(CLI::App* app, bool with_rank) {
    app->add_option("--workload", workload_path, "workload description (JSON)");
    app->add_option("--preset", preset, "shape preset, e.g. distilbert-proxy or square-768");
    app->add_option("--matrix", matrix_path, "single AXLM weight file");
    app->add_option("--rows", rows, "rows of a single synthetic matrix");
    app->add_option("--cols", cols, "columns of a single synthetic matrix");
    app->add_option("--layers", layers, "override the preset's layer count");
    app->add_option("--dist", dist, "uniform, gaussian or laplace");
    app->add_option("--spread", spread, "distribution spread in quantization steps");
    app->add_option("--tokens", tokens, "input vectors per matrix");
    app->add_option("--seed", seed, "base seed");
    if (with_rank) app->add_option("--rank", rank, "LoRA rank (0: none)");
  }

  DistributionSpec distribution() const {
    DistributionSpec d;
    d.kind = parse_distribution_kind(dist);
    if (d.kind == DistributionSpec::Kind::File) {
      throw InvalidArgument("--dist file: pass the weights with --matrix");
    }
    if (spread) {
      d.spread = *spread;
    } else if (d.kind != DistributionSpec::Kind::Gaussian) {
      // Full range for uniform; Laplace gets the tuned Gaussian's standard deviation.
      d.spread = d.kind == DistributionSpec::Kind::Uniform ? 127.5
                                                           : kTunedGaussianSpread / std::sqrt(2.0);
    }
    d.validate();
    return d;
  }

  WorkloadSpec build() const {
    const int sources = int(!workload_path.empty()) + int(!preset.empty()) +
                        int(!matrix_path.empty()) + int(rows.has_value() || cols.has_value());
    if (sources > 1) {
      throw InvalidArgument("give one of --workload, --preset, --matrix or --rows/--cols");
    }
    WorkloadSpec w;
    if (!workload_path.empty()) {
      w = workload_from_json(parse_json(read_text(workload_path), workload_path));
      if (tokens) w.tokens = *tokens;
      if (seed) w.seed = *seed;
    } else if (!matrix_path.empty()) {
      const auto m = read_matrix(matrix_path);
      DistributionSpec src;
      src.kind = DistributionSpec::Kind::File;
      src.path = matrix_path;
      w.name = "matrix";
      w.layers.push_back({"layer0", {{"w", m.rows, m.cols, src}}, {}});
      if (rank > 0) w.layers[0].lora.push_back({"w", rank, distribution(), distribution()});
      w.tokens = tokens.value_or(1);
      w.seed = seed.value_or(1);
    } else if (rows || cols) {
      if (!rows || !cols) throw InvalidArgument("--rows and --cols go together");
      w.name = "synthetic";
      w.layers.push_back({"layer0", {{"w", *rows, *cols, distribution()}}, {}});
      if (rank > 0) w.layers[0].lora.push_back({"w", rank, distribution(), distribution()});
      w.tokens = tokens.value_or(1);
      w.seed = seed.value_or(1);
    } else {
      w = preset_workload(preset.empty() ? "square-768" : preset, distribution(),
                          tokens.value_or(1), seed.value_or(1), layers, rank);
    }
    if (layers && preset.empty()) throw InvalidArgument("--layers only applies to presets");
    w.validate();
    return w;
  }
};

struct Common {
  std::string out;
  unsigned threads = 0;
  bool no_verify = false;

  void attach(CLI::App* app) {
    app->add_option("--out", out, "output file (default: standard output)");
    app->add_option("--threads", threads, "simulation threads (0: all cores)");
    app->add_flag("--no-verify", no_verify, "skip the oracle checks");
  }
  RunOptions options() const { return {threads, !no_verify}; }
};

void emit(const Common& c, const std::string& text, const std::string& summary,
          std::ostream& out) {
  if (c.out.empty()) {
    out << text;
  } else {
    write_text_atomic(c.out, text);
    out << summary;
  }
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string run_summary(const RunReport& r) {
  std::ostringstream os;
  os << r.machine << ": " << r.total_cycles << " cycles, reuse " << fixed(r.reuse_rate)
     << ", stall " << fixed(r.stall_fraction) << ", speedup " << fixed(r.speedup) << "\n";
  return os.str();
}

int cmd_gen(const WorkloadFlags& wf, const std::string& out, std::ostream& os) {
  if (!wf.rows || !wf.cols) throw InvalidArgument("gen needs --rows and --cols");
  if (out.empty()) throw InvalidArgument("gen needs --out");
  auto d = wf.distribution();
  const auto m = gen_weights(d, *wf.rows, *wf.cols, wf.seed.value_or(1));
  write_matrix(out, m);
  os << "wrote " << out << " (" << m.rows << "x" << m.cols << ", " << to_string(d.kind)
     << " spread " << d.spread << ")\n";
  return 0;
}

int cmd_reuse_rate(const WorkloadFlags& wf, const MachineFlags& mf, bool full_row,
                   const Common& c, std::ostream& os) {
  const auto spec = wf.build();
  const auto cfg = mf.build();
  const auto wl = materialize(spec);
  Json j;
  j["schema"] = "axllm-reuse/1";
  j["tile_cols"] = full_row ? Json("full-row") : Json(cfg.tile.tile_cols);
  ReuseStats total;
  Json ms = Json::array();
  std::ostringstream summary;
  std::size_t k = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    for (std::size_t mi = 0; mi < spec.layers[li].matrices.size(); ++mi, ++k) {
      const auto& m = wl.matrices[k];
      const auto w = m.lora_a ? combine_lora(m.weights, *m.lora_a) : m.weights;
      TileConfig tile = cfg.tile;
      if (full_row) tile.tile_cols = w.cols;
      // The counters depend on the weights only; token 0 stands in for x.
      const auto x = workload_input(spec, li, mi, 0, w.rows);
      const auto r = reuse_mvm(x, w, tile);
      total += r.stats;
      Json mj{{"layer", m.layer}, {"name", m.name}, {"rows", w.rows}, {"cols", w.cols},
              {"reuse", to_json(r.stats)}};
      ms.push_back(std::move(mj));
      summary << m.layer << "." << m.name << " " << w.rows << "x" << w.cols << " reuse "
              << fixed(reuse_rate(r.stats)) << "\n";
    }
  }
  j["matrices"] = std::move(ms);
  j["aggregate"] = to_json(total);
  j["workload"] = to_json(spec);
  summary << "aggregate reuse " << fixed(reuse_rate(total)) << "\n";
  if (c.out.empty()) {
    os << summary.str();
  } else {
    write_text_atomic(c.out, dump(j));
    os << summary.str();
  }
  return 0;
}

int cmd_run(const WorkloadFlags& wf, const MachineFlags& mf, const Common& c, std::ostream& os) {
  const auto r = run_axllm(materialize(wf.build()), mf.build(), c.options());
  emit(c, dump(to_json(r)), run_summary(r), os);
  return 0;
}

Json compare_json(const RunReport& a, const RunReport& b) {
  Json j;
  j["schema"] = "axllm-compare/1";
  j["comparison"] = to_json(compare_reports(a, b));
  j["axllm"] = to_json(a);
  j["baseline"] = to_json(b);
  return j;
}

int cmd_compare(const WorkloadFlags& wf, const MachineFlags& mf, const Common& c,
                std::ostream& os) {
  const auto wl = materialize(wf.build());
  const auto cfg = mf.build();
  const auto a = run_axllm(wl, cfg, c.options());
  const auto b = run_baseline(wl, cfg, c.options());
  const auto cmp = compare_reports(a, b);
  std::ostringstream s;
  s << "speedup " << fixed(cmp.speedup) << " (" << cmp.axllm_cycles << " vs "
    << cmp.baseline_cycles << " cycles), energy ratio " << fixed(cmp.energy_ratio)
    << ", reuse " << fixed(cmp.reuse_rate) << ", stall " << fixed(cmp.stall_fraction) << "\n";
  emit(c, dump(compare_json(a, b)), s.str(), os);
  return 0;
}

int cmd_lora(WorkloadFlags wf, const MachineFlags& mf, const Common& c, std::ostream& os) {
  if (wf.rank == 0) wf.rank = 8;
  const auto spec = wf.build();
  const auto cfg = mf.build();
  const auto wl = materialize(spec);
  const auto run = run_axllm(wl, cfg, c.options());

  Json j;
  j["schema"] = "axllm-lora/1";
  Json ms = Json::array();
  std::uint64_t fused = 0, separate = 0, baseline = 0, union_violations = 0;
  double overlap_sum = 0.0;
  std::size_t n = 0, k = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    for (std::size_t mi = 0; mi < spec.layers[li].matrices.size(); ++mi, ++k) {
      const auto& m = wl.matrices[k];
      if (!m.lora_a) continue;
      const auto& mr = run.matrices[k];
      // Sharing needs W and A in one tile, so the multiply counts use full rows.
      const auto x = workload_input(spec, li, mi, 0, m.weights.rows);
      const auto combined = combine_lora(m.weights, *m.lora_a);
      const auto mw = reuse_mvm(x, m.weights, {m.weights.cols}).stats.multiplications;
      const auto ma = reuse_mvm(x, *m.lora_a, {m.lora_a->cols}).stats.multiplications;
      const auto mf_ = reuse_mvm(x, combined, {combined.cols}).stats.multiplications;
      if (mf_ > mw + ma) ++union_violations;
      fused += mr.cycles;
      separate += mr.separate_cycles;
      baseline += mr.baseline_cycles;
      overlap_sum += mr.overlap_rate;
      ++n;
      ms.push_back({{"layer", m.layer},
                    {"name", m.name},
                    {"rank", mr.lora_rank},
                    {"overlap_rate", mr.overlap_rate},
                    {"full_row_mults_fused", mf_},
                    {"full_row_mults_w", mw},
                    {"full_row_mults_a", ma},
                    {"cycles_fused", mr.cycles},
                    {"cycles_separate", mr.separate_cycles},
                    {"baseline_cycles", mr.baseline_cycles}});
    }
  }
  if (n == 0) throw InvalidArgument("lora: the workload has no adaptors");
  j["matrices"] = std::move(ms);
  j["mean_overlap_rate"] = overlap_sum / double(n);
  j["speedup_vs_baseline"] = double(baseline) / double(fused);
  j["fused_vs_separate"] = double(separate) / double(fused);
  j["union_bound_violations"] = union_violations;
  j["report"] = to_json(run);
  std::ostringstream s;
  s << "overlap " << fixed(overlap_sum / double(n)) << ", speedup vs baseline "
    << fixed(double(baseline) / double(fused)) << ", fused vs separate "
    << fixed(double(separate) / double(fused)) << "\n";
  emit(c, dump(j), s.str(), os);
  return union_violations == 0 ? 0 : 2;
}

struct SweepFlags {
  std::vector<std::uint32_t> slices{4}, depths{4};
  std::vector<std::size_t> tiles{256};
  std::vector<std::string> dists{"gaussian"};
  std::vector<double> spreads;

  void attach(CLI::App* app) {
    app->add_option("--slices", slices, "slice counts P")->delimiter(',');
    app->add_option("--slice-queue-depth", depths, "queue depths S")->delimiter(',');
    app->add_option("--tile-cols", tiles, "tile widths")->delimiter(',');
    app->add_option("--dist", dists, "distributions")->delimiter(',');
    app->add_option("--spread", spreads, "spreads in quantization steps")->delimiter(',');
  }
};

int cmd_sweep(const SweepFlags& sf, WorkloadFlags wf, MachineFlags mf, const Common& c,
              std::ostream& os) {
  std::ostringstream csv;
  csv << "slices,queue_depth,tile_cols,dist,spread,speedup,reuse_rate,stall_fraction,"
         "collision_rate,energy_ratio,axllm_cycles,baseline_cycles\n";
  const std::vector<std::optional<double>> spreads =
      sf.spreads.empty() ? std::vector<std::optional<double>>{std::nullopt}
                         : std::vector<std::optional<double>>(sf.spreads.begin(), sf.spreads.end());
  std::size_t points = 0;
  for (const auto& dist : sf.dists) {
    for (const auto& spread : spreads) {
      wf.dist = dist;
      wf.spread = spread;
      const auto spec = wf.build();
      const auto wl = materialize(spec);
      const double shown = wf.distribution().spread;
      for (auto p : sf.slices) {
        for (auto s : sf.depths) {
          for (auto t : sf.tiles) {
            mf.slices = p;
            mf.queue_depth = s;
            mf.tile_cols = t;
            const auto cfg = mf.build();
            const auto a = run_axllm(wl, cfg, c.options());
            const auto b = run_baseline(wl, cfg, c.options());
            const auto cmp = compare_reports(a, b);
            csv << p << "," << s << "," << t << "," << dist << "," << shown << ","
                << fixed(cmp.speedup, 6) << "," << fixed(cmp.reuse_rate, 6) << ","
                << fixed(cmp.stall_fraction, 6) << "," << fixed(cmp.collision_rate, 6) << ","
                << fixed(cmp.energy_ratio, 6) << "," << cmp.axllm_cycles << ","
                << cmp.baseline_cycles << "\n";
            ++points;
          }
        }
      }
    }
  }
  emit(c, csv.str(), std::to_string(points) + " sweep points\n", os);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"axllm: computation-reuse accelerator simulator"};
  app.require_subcommand(1);

  WorkloadFlags gen_wf;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "write a synthetic AXLM weight file");
  gen->add_option("--rows", gen_wf.rows)->required();
  gen->add_option("--cols", gen_wf.cols)->required();
  gen->add_option("--dist", gen_wf.dist, "uniform, gaussian or laplace");
  gen->add_option("--spread", gen_wf.spread, "spread in quantization steps");
  gen->add_option("--seed", gen_wf.seed);
  gen->add_option("--out", gen_out)->required();

  WorkloadFlags rr_wf, run_wf, cmp_wf, lora_wf, sw_wf;
  MachineFlags rr_mf, run_mf, cmp_mf, lora_mf, sw_mf;
  Common rr_c, run_c, cmp_c, lora_c, sw_c;
  bool full_row = false;

  auto* rr = app.add_subcommand("reuse-rate", "functional pass, reuse statistics per matrix");
  rr_wf.attach(rr, true);
  rr_mf.attach(rr);
  rr_c.attach(rr);
  rr->add_flag("--full-row", full_row, "one tile per row");

  auto* run = app.add_subcommand("run", "timing simulation, writes a run report");
  run_wf.attach(run, true);
  run_mf.attach(run);
  run_c.attach(run);

  auto* cmp = app.add_subcommand("compare", "axllm against the multiplier-only baseline");
  cmp_wf.attach(cmp, true);
  cmp_mf.attach(cmp);
  cmp_c.attach(cmp);

  auto* lora = app.add_subcommand("lora", "fused [W | A] then B against separate passes");
  lora_wf.attach(lora, true);
  lora_mf.attach(lora);
  lora_c.attach(lora);

  SweepFlags sf;
  auto* sweep = app.add_subcommand("sweep", "cartesian sweep, one CSV row per point");
  sf.attach(sweep);
  sweep->add_option("--workload", sw_wf.workload_path);
  sweep->add_option("--preset", sw_wf.preset);
  sweep->add_option("--rows", sw_wf.rows);
  sweep->add_option("--cols", sw_wf.cols);
  sweep->add_option("--layers", sw_wf.layers);
  sweep->add_option("--tokens", sw_wf.tokens);
  sweep->add_option("--seed", sw_wf.seed);
  sweep->add_option("--config", sw_mf.config_path);
  sweep->add_option("--lanes", sw_mf.lanes);
  sweep->add_option("--mult-latency", sw_mf.mult_latency);
  sweep->add_option("--mult-ii", sw_mf.mult_ii);
  sweep->add_option("--baseline-ii", sw_mf.baseline_ii);
  sw_c.attach(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen(gen_wf, gen_out, out);
    if (*rr) return cmd_reuse_rate(rr_wf, rr_mf, full_row, rr_c, out);
    if (*run) return cmd_run(run_wf, run_mf, run_c, out);
    if (*cmp) return cmd_compare(cmp_wf, cmp_mf, cmp_c, out);
    if (*lora) return cmd_lora(lora_wf, lora_mf, lora_c, out);
    if (*sweep) return cmd_sweep(sf, sw_wf, sw_mf, sw_c, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const SimulationError& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace axllm
