#include "supergraph/serialize.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace supergraph {

using json = nlohmann::ordered_json;

namespace {

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json row_to_json(const Mat& m, Index r) {
  json a = json::array();
  for (Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

json mat_to_json(const Mat& m) {
  json a = json::array();
  for (Index r = 0; r < m.rows(); ++r) a.push_back(row_to_json(m, r));
  return a;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path);
}

json config_json(const PipelineConfig& cfg) {
  json j;
  j["input"] = cfg.input;
  j["grid_w"] = cfg.grid_w;
  j["grid_h"] = cfg.grid_h;
  j["iterations"] = cfg.iterations;
  j["pos_scale"] = cfg.pos_scale;
  j["lambda_compact"] = cfg.lambda_compact;
  j["temperature"] = cfg.temperature;
  j["targets"] = cfg.targets;
  j["alpha"] = cfg.alpha;
  j["gamma"] = cfg.gamma;
  j["hidden_dim"] = cfg.hidden_dim;
  j["root_global_mean"] = cfg.root_global_mean;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  return j;
}

}  // namespace

std::string config_to_json(const PipelineConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

PipelineConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  PipelineConfig cfg;
  if (j.contains("input")) cfg.input = j["input"].get<std::string>();
  if (j.contains("grid_w")) cfg.grid_w = j["grid_w"].get<int>();
  if (j.contains("grid_h")) cfg.grid_h = j["grid_h"].get<int>();
  if (j.contains("iterations")) cfg.iterations = j["iterations"].get<int>();
  if (j.contains("pos_scale")) cfg.pos_scale = j["pos_scale"].get<Scalar>();
  if (j.contains("lambda_compact")) cfg.lambda_compact = j["lambda_compact"].get<Scalar>();
  if (j.contains("temperature")) cfg.temperature = j["temperature"].get<Scalar>();
  if (j.contains("targets")) cfg.targets = j["targets"].get<std::vector<int>>();
  if (j.contains("alpha")) cfg.alpha = j["alpha"].get<Scalar>();
  if (j.contains("gamma")) cfg.gamma = j["gamma"].get<int>();
  if (j.contains("hidden_dim")) cfg.hidden_dim = j["hidden_dim"].get<int>();
  if (j.contains("root_global_mean")) cfg.root_global_mean = j["root_global_mean"].get<bool>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json(text);
}

void validate_config(const PipelineConfig& cfg) {
  if (cfg.grid_w < 1 || cfg.grid_h < 1) throw std::invalid_argument("config: grid dims must be >= 1");
  if (cfg.iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
  if (!(cfg.temperature > 0)) throw std::invalid_argument("config: temperature must be > 0");
  if (cfg.lambda_compact < 0) throw std::invalid_argument("config: lambda_compact must be >= 0");
  if (!(cfg.alpha >= 0 && cfg.alpha <= 1))
    throw std::invalid_argument("config: alpha must lie in [0, 1]");
  if (cfg.gamma < 1) throw std::invalid_argument("config: gamma must be >= 1");
  if (cfg.hidden_dim < 1) throw std::invalid_argument("config: hidden_dim must be >= 1");
  for (std::size_t k = 0; k < cfg.targets.size(); ++k) {
    if (cfg.targets[k] < 1) throw std::invalid_argument("config: targets must be >= 1");
    if (k > 0 && cfg.targets[k] >= cfg.targets[k - 1])
      throw std::invalid_argument("config: targets must be strictly decreasing");
  }
}

void write_segment_json(const SuperpixelMap& sp, const PipelineConfig& cfg,
                        const std::vector<LossPoint>& trace, const std::string& path) {
  json j;
  j["n_superpixels"] = sp.n_superpixels;
  j["centers_u"] = mat_to_json(sp.centers_u);
  j["centers_r"] = mat_to_json(sp.centers_r);
  j["sizes"] = sp.sizes;
  j["config"] = config_json(cfg);
  json tr = json::array();
  for (const LossPoint& p : trace) tr.push_back({p.rec, p.compact});
  j["loss_trace"] = tr;
  write_text(path, j.dump(2) + "\n");
}

void write_losses_csv(const std::vector<LossPoint>& trace, const std::string& path) {
  std::string out = "iter,loss_rec,loss_compact\n";
  char line[128];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", i, trace[i].rec, trace[i].compact);
    out += line;
  }
  write_text(path, out);
}

void write_hierarchy_json(const ScaleHierarchy& hier, const std::string& path) {
  json j;
  json scales = json::array();
  for (const SpGraph& g : hier.scales) {
    json s;
    s["n"] = g.n;
    json nodes = json::array();
    for (int v = 0; v < g.n; ++v) {
      json node;
      node["id"] = v;
      node["feat"] = row_to_json(g.feats, v);
      node["centroid"] = row_to_json(g.centroids, v);
      node["size"] = g.sizes[v];
      nodes.push_back(node);
    }
    s["nodes"] = nodes;
    json edges = json::array();
    for (const AdjEntry& e : g.adj.entries())
      if (e.i < e.j) edges.push_back({e.i, e.j, e.w});
    s["edges"] = edges;
    scales.push_back(s);
  }
  j["scales"] = scales;
  json steps = json::array();
  for (const MergeStep& st : hier.record.steps) steps.push_back({st.i, st.j, st.w, st.step});
  j["merge_steps"] = steps;
  j["parent_maps"] = hier.record.parent_maps;
  write_text(path, j.dump(2) + "\n");
}

void write_embeddings_csv(const std::vector<Mat>& per_scale, const std::string& path) {
  std::string out = "node,scale,values\n";
  char buf[64];
  for (std::size_t k = 0; k < per_scale.size(); ++k) {
    const Mat& m = per_scale[k];
    for (Index v = 0; v < m.rows(); ++v) {
      out += std::to_string(v) + "," + std::to_string(k + 1);
      for (Index c = 0; c < m.cols(); ++c) {
        std::snprintf(buf, sizeof buf, ",%.17g", m(v, c));
        out += buf;
      }
      out += "\n";
    }
  }
  write_text(path, out);
}

void write_fusion_json(const Vec& root, const Mat& branches, const Mat& leaves,
                       const std::string& path) {
  json j;
  j["root"] = vec_to_json(root);
  j["branches"] = mat_to_json(branches);
  j["leaves"] = mat_to_json(leaves);
  write_text(path, j.dump(2) + "\n");
}

namespace {

void append_mat(std::string& blob, const Mat& m) {
  blob.append(reinterpret_cast<const char*>(m.data()), sizeof(Scalar) * m.size());
}

void read_mat(std::ifstream& in, Mat& m, const std::string& path) {
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(Scalar) * m.size()));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(Scalar) * m.size()))
    throw std::runtime_error("truncated weight blob " + path);
}

}  // namespace

void save_stack_weights(const MdgcnStack& stack, const std::string& path) {
  json header;
  header["dims"] = std::vector<std::int64_t>(stack.dims.begin(), stack.dims.end());
  header["alpha"] = stack.alpha;
  header["gamma"] = stack.gamma;
  header["seed"] = stack.seed;
  header["scales"] = stack.scale_layers.size();
  std::string blob = header.dump() + "\n";
  for (const auto& layers : stack.scale_layers)
    for (const CdgcLayer& layer : layers) {
      append_mat(blob, layer.w_d0);
      append_mat(blob, layer.w_d1);
      append_mat(blob, layer.w_d2);
    }
  write_text(path, blob);
}

void load_stack_weights(MdgcnStack& stack, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weights " + path);
  std::string line;
  std::getline(in, line);
  const json header = json::parse(line);
  if (header["gamma"].get<int>() != stack.gamma ||
      header["scales"].get<std::size_t>() != stack.scale_layers.size() ||
      header["dims"].get<std::vector<std::int64_t>>() !=
          std::vector<std::int64_t>(stack.dims.begin(), stack.dims.end()))
    throw std::runtime_error("weight blob " + path + " does not match the configured stack");
  stack.alpha = header["alpha"].get<Scalar>();
  stack.seed = header["seed"].get<std::uint64_t>();
  for (auto& layers : stack.scale_layers)
    for (CdgcLayer& layer : layers) {
      read_mat(in, layer.w_d0, path);
      read_mat(in, layer.w_d1, path);
      read_mat(in, layer.w_d2, path);
      layer.alpha = stack.alpha;
    }
}

namespace {

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

void require(bool ok, const std::string& what, const std::string& path) {
  if (!ok) throw std::runtime_error("schema violation in " + path + ": " + what);
}

}  // namespace

void check_segment_json(const std::string& path) {
  const json j = parse_file(path);
  require(j.contains("n_superpixels") && j["n_superpixels"].is_number_integer(),
          "n_superpixels", path);
  for (const char* key : {"centers_u", "centers_r", "sizes", "loss_trace"})
    require(j.contains(key) && j[key].is_array(), key, path);
  require(j.contains("config") && j["config"].is_object(), "config", path);
  const auto n = j["n_superpixels"].get<std::size_t>();
  require(j["centers_u"].size() == n && j["centers_r"].size() == n && j["sizes"].size() == n,
          "per-superpixel array lengths", path);
}

void check_hierarchy_json(const std::string& path) {
  const json j = parse_file(path);
  require(j.contains("scales") && j["scales"].is_array() && !j["scales"].empty(), "scales", path);
  for (const json& s : j["scales"]) {
    require(s.contains("n") && s.contains("nodes") && s.contains("edges"), "scale keys", path);
    require(s["nodes"].size() == s["n"].get<std::size_t>(), "node count", path);
    for (const json& node : s["nodes"])
      require(node.contains("id") && node.contains("feat") && node.contains("centroid") &&
                  node.contains("size"),
              "node keys", path);
    for (const json& e : s["edges"]) require(e.is_array() && e.size() == 3, "edge triplet", path);
  }
  require(j.contains("merge_steps") && j["merge_steps"].is_array(), "merge_steps", path);
}

void check_fusion_json(const std::string& path) {
  const json j = parse_file(path);
  for (const char* key : {"root", "branches", "leaves"})
    require(j.contains(key) && j[key].is_array(), key, path);
  require(!j["root"].empty(), "root vector", path);
}

}  // namespace supergraph
