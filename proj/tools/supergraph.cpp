#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "supergraph/fixtures.hpp"
#include "supergraph/image.hpp"
#include "supergraph/pipeline.hpp"
#include "supergraph/selfcheck.hpp"
#include "supergraph/serialize.hpp"

namespace fs = std::filesystem;
using namespace supergraph;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int classify_error(const std::exception& e) {
  const std::string what = e.what();
  if (what.rfind("cannot write", 0) == 0 || what.find("truncated") != std::string::npos ||
      what.find("malformed") != std::string::npos ||
      what.find("unsupported maxval") != std::string::npos)
    return kExitIo;
  return kExitConfig;
}

double millis_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

long peak_rss_bytes() {
  std::ifstream in("/proc/self/status");
  std::string key;
  long kb = 0;
  while (in >> key) {
    if (key == "VmHWM:") {
      in >> kb;
      break;
    }
    in.ignore(4096, '\n');
  }
  return kb * 1024;
}

void add_config_options(CLI::App* cmd, PipelineConfig& cfg, std::string& grid_arg,
                        std::string& targets_arg) {
  cmd->add_option("--input,-i", cfg.input, "input PPM/PGM image");
  cmd->add_option("--grid", grid_arg, "superpixel grid as WxH (default 128x128)");
  cmd->add_option("--iterations", cfg.iterations, "clustering rounds");
  cmd->add_option("--pos-scale", cfg.pos_scale, "positional feature scale (0 = auto)");
  cmd->add_option("--lambda-compact", cfg.lambda_compact, "compactness weight in reports");
  cmd->add_option("--temperature", cfg.temperature, "association softmax temperature");
  cmd->add_option("--targets", targets_arg, "coarsening targets, e.g. 256,64 (empty = none)");
  cmd->add_option("--alpha", cfg.alpha, "difference term weight in [0,1]");
  cmd->add_option("--gamma", cfg.gamma, "convolution layers per scale");
  cmd->add_option("--hidden", cfg.hidden_dim, "embedding width");
  cmd->add_flag("--root-global-mean", cfg.root_global_mean,
                "concatenate the global appearance mean onto the fusion root input");
  cmd->add_option("--seed", cfg.seed, "deterministic seed");
  cmd->add_option("--out", cfg.out_dir, "output directory");
}

constexpr const char* kNotGiven = "\x01";

void apply_string_args(PipelineConfig& cfg, const std::string& grid_arg,
                       const std::string& targets_arg) {
  if (grid_arg != kNotGiven && !grid_arg.empty()) {
    const auto x = grid_arg.find('x');
    if (x == std::string::npos)
      throw std::invalid_argument("--grid expects WxH, got '" + grid_arg + "'");
    cfg.grid_w = std::stoi(grid_arg.substr(0, x));
    cfg.grid_h = std::stoi(grid_arg.substr(x + 1));
  }
  if (targets_arg != kNotGiven) {
    cfg.targets.clear();
    std::string tok;
    std::istringstream in(targets_arg);
    while (std::getline(in, tok, ','))
      if (!tok.empty()) cfg.targets.push_back(std::stoi(tok));
  }
}

void ensure_out_dir(const PipelineConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw std::runtime_error("cannot write " + cfg.out_dir + ": " + ec.message());
}

std::string out_path(const PipelineConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out_dir) / name).string();
}

void write_segment_outputs(const SegmentStage& seg, const PipelineConfig& cfg) {
  write_pgm16(seg.sp.labels, seg.sp.width, seg.sp.height, out_path(cfg, "labels.pgm"));
  write_segment_json(seg.sp, cfg, seg.clus.trace, out_path(cfg, "segment.json"));
  write_losses_csv(seg.clus.trace, out_path(cfg, "losses.csv"));
  check_segment_json(out_path(cfg, "segment.json"));
}

void write_hierarchy_outputs(const SegmentStage& seg, const HierarchyStage& hs,
                             const PipelineConfig& cfg) {
  write_hierarchy_json(hs.hier, out_path(cfg, "hierarchy.json"));
  check_hierarchy_json(out_path(cfg, "hierarchy.json"));
  for (int k = 0; k < hs.hier.K(); ++k) {
    const std::vector<int> labels = scale_pixel_labels(seg, hs, k);
    const Image img = render_labels(labels, seg.sp.width, seg.sp.height, cfg.seed);
    write_ppm(img, out_path(cfg, "scale_" + std::to_string(k + 1) + ".ppm"));
  }
}

void write_embed_outputs(const EmbedStage& es, const PipelineConfig& cfg, bool announce_fusion) {
  write_embeddings_csv(es.embeddings, out_path(cfg, "embeddings.csv"));
  save_stack_weights(es.stack, out_path(cfg, "weights.bin"));
  if (es.fused) {
    write_fusion_json(es.root_h, es.branch_h, es.leaf_h, out_path(cfg, "fusion.json"));
    check_fusion_json(out_path(cfg, "fusion.json"));
  } else if (announce_fusion) {
    std::cout << "fusion skipped: needs exactly 2 hierarchy scales, got "
              << es.embeddings.size() << "\n";
  }
}

int cmd_verify(const CheckOptions& opts) {
  const auto results = run_selfchecks(opts);
  std::size_t width = 0;
  for (const auto& r : results) width = std::max(width, (r.suite + ": " + r.name).size());
  bool all = true;
  for (const auto& r : results) {
    const std::string label = r.suite + ": " + r.name;
    std::printf("%-5s %-*s %s\n", r.pass ? "PASS" : "FAIL", static_cast<int>(width),
                label.c_str(), r.detail.c_str());
    all = all && r.pass;
  }
  std::printf("%zu/%zu suites passed\n",
              static_cast<std::size_t>(std::count_if(results.begin(), results.end(),
                                                     [](const auto& r) { return r.pass; })),
              results.size());
  return all ? kExitOk : kExitVerifyFailure;
}

int cmd_bench(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  std::string csv = "stage,nodes,edges,millis,bytes\n";
  char line[160];
  auto row = [&](const std::string& stage, std::int64_t nodes, std::int64_t edges, double ms,
                 std::int64_t bytes) {
    std::snprintf(line, sizeof line, "%s,%lld,%lld,%.3f,%lld\n", stage.c_str(),
                  static_cast<long long>(nodes), static_cast<long long>(edges), ms,
                  static_cast<long long>(bytes));
    csv += line;
  };

  auto t0 = std::chrono::steady_clock::now();
  const SegmentStage seg = run_segment(cfg);
  const double seg_ms = millis_since(t0);
  const std::int64_t pixels = static_cast<std::int64_t>(seg.fm.width) * seg.fm.height;
  row("pixels", pixels, 0, 0, pixels * 3);
  row("segment", seg.sp.n_superpixels, 0, seg_ms,
      pixels * 2 + static_cast<std::int64_t>(seg.sp.centers_u.size() + seg.sp.centers_r.size()) *
                       static_cast<std::int64_t>(sizeof(Scalar)));

  t0 = std::chrono::steady_clock::now();
  const HierarchyStage hs = run_hierarchy(seg, cfg);
  row("hierarchy", hs.rag.n, static_cast<std::int64_t>(hs.rag.adj.nnz() / 2), millis_since(t0),
      static_cast<std::int64_t>(hs.rag.adj.nnz() * sizeof(AdjEntry)));
  for (int k = 0; k < hs.hier.K(); ++k) {
    const SpGraph& s = hs.hier.scales[k];
    row("scale_" + std::to_string(k + 1), s.n, static_cast<std::int64_t>(s.adj.nnz() / 2), 0,
        static_cast<std::int64_t>((s.feats.size() + s.centroids.size()) * sizeof(Scalar) +
                                  s.adj.nnz() * sizeof(AdjEntry)));
  }

  t0 = std::chrono::steady_clock::now();
  const EmbedStage es = run_embed(seg, hs, cfg);
  std::int64_t embed_bytes = 0, embed_nodes = 0;
  for (const Mat& m : es.embeddings) {
    embed_bytes += static_cast<std::int64_t>(m.size() * sizeof(Scalar));
    embed_nodes += m.rows();
  }
  row("cdgc", embed_nodes, 0, millis_since(t0), embed_bytes);
  if (es.fused)
    row("fusion", 1 + es.branch_h.rows() + es.leaf_h.rows(), 0, 0,
        static_cast<std::int64_t>(
            (es.root_h.size() + es.branch_h.size() + es.leaf_h.size()) * sizeof(Scalar)));
  row("peak_rss", 0, 0, 0, peak_rss_bytes());

  std::ofstream out(out_path(cfg, "bench.csv"), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path(cfg, "bench.csv"));
  out << csv;
  std::cout << csv;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiscale superpixel graph pipeline"};
  app.require_subcommand(1);

  // --config seeds the defaults; explicit flags override it.
  PipelineConfig cfg;
  for (int a = 1; a + 1 < argc; ++a)
    if (std::string(argv[a]) == "--config") {
      try {
        cfg = load_config(argv[a + 1]);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
      }
    }
  std::string config_path, weights_path, inject;
  std::string grid_arg = kNotGiven, targets_arg = kNotGiven;

  CLI::App* sub_segment = app.add_subcommand("segment", "superpixel clustering outputs");
  CLI::App* sub_hier = app.add_subcommand("hierarchy", "multiscale graph construction outputs");
  CLI::App* sub_embed = app.add_subcommand("embed", "graph embeddings and fused features");
  CLI::App* sub_pipeline = app.add_subcommand("pipeline", "all stages into one directory");
  CLI::App* sub_verify = app.add_subcommand("verify", "run the property suites");
  CLI::App* sub_bench = app.add_subcommand("bench", "stage timings and sizes");

  for (CLI::App* cmd : {sub_segment, sub_hier, sub_embed, sub_pipeline, sub_bench}) {
    add_config_options(cmd, cfg, grid_arg, targets_arg);
    cmd->add_option("--config", config_path, "JSON config file (flags override it)");
  }
  sub_embed->add_option("--weights", weights_path, "load layer weights instead of seeding");
  sub_verify
      ->add_option("--inject", inject,
                   "verification hook: cdgc-sign-flip | forget-gate")
      ->check(CLI::IsMember({"cdgc-sign-flip", "forget-gate"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sub_verify->parsed()) {
      CheckOptions opts;
      opts.inject_cdgc_sign_flip = inject == "cdgc-sign-flip";
      opts.inject_forget_gate_fault = inject == "forget-gate";
      return cmd_verify(opts);
    }

    apply_string_args(cfg, grid_arg, targets_arg);
    validate_config(cfg);
    if (cfg.input.empty()) throw std::invalid_argument("config: --input is required");

    if (sub_bench->parsed()) return cmd_bench(cfg);

    ensure_out_dir(cfg);
    const SegmentStage seg = run_segment(cfg);
    write_segment_outputs(seg, cfg);
    if (sub_segment->parsed()) return kExitOk;

    const HierarchyStage hs = run_hierarchy(seg, cfg);
    write_hierarchy_outputs(seg, hs, cfg);
    if (sub_hier->parsed()) return kExitOk;

    const EmbedStage es = run_embed(seg, hs, cfg, weights_path);
    write_embed_outputs(es, cfg, true);
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify_error(e);
  }
}
