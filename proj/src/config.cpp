#include "lgc/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace lgc {

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  return render_config(*this) == render_config(other);
}

namespace {

struct Parser {
  std::map<std::string, std::string> pairs;
  std::vector<std::string> errors;
  std::vector<std::string> consumed;

  void fail(const std::string& key, const std::string& what) {
    errors.push_back(key + ": " + what);
  }

  bool has(const std::string& key) {
    return pairs.count(key) != 0;
  }

  std::string take(const std::string& key) {
    consumed.push_back(key);
    return pairs.at(key);
  }

  void read_string(const std::string& key, std::string& out) {
    if (has(key)) out = take(key);
  }

  void read_bool(const std::string& key, bool& out) {
    if (!has(key)) return;
    const std::string v = take(key);
    if (v == "true") {
      out = true;
    } else if (v == "false") {
      out = false;
    } else {
      fail(key, "expected true or false, got '" + v + "'");
    }
  }

  template <typename T>
  void read_number(const std::string& key, T& out) {
    if (!has(key)) return;
    const std::string v = take(key);
    std::istringstream in(v);
    T value{};
    in >> value;
    if (!in || !in.eof()) {
      fail(key, "expected a number, got '" + v + "'");
      return;
    }
    out = value;
  }

  void read_int_list(const std::string& key, std::vector<int>& out) {
    if (!has(key)) return;
    const std::string v = take(key);
    std::vector<int> values;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
      std::istringstream one(item);
      int value = 0;
      one >> value;
      if (!one || !one.eof()) {
        fail(key, "expected a comma-separated integer list, got '" + v + "'");
        return;
      }
      values.push_back(value);
    }
    out = std::move(values);
  }

  void reject_unknown() {
    for (const auto& [key, value] : pairs) {
      bool known = false;
      for (const auto& k : consumed) {
        if (k == key) {
          known = true;
          break;
        }
      }
      if (!known) fail(key, "unknown key");
    }
  }
};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

const char* pattern_name(Topology::Pattern p) {
  return p == Topology::Pattern::kRing ? "ring" : "ps";
}

const char* wire_name(WirePrecision w) {
  return w == WirePrecision::kFloat64 ? "f64" : "f32";
}

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  Parser p;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      p.errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      p.errors.push_back("line " + std::to_string(line_no) + ": empty key");
      continue;
    }
    if (p.pairs.count(key)) {
      p.errors.push_back(key + ": duplicate key");
      continue;
    }
    p.pairs[key] = value;
  }

  ExperimentConfig cfg;
  TrainConfig& t = cfg.train;

  p.read_number("topology.nodes", t.topology.num_workers);
  if (p.has("topology.pattern")) {
    const std::string v = p.take("topology.pattern");
    if (v == "ps") {
      t.topology.pattern = Topology::Pattern::kParameterServer;
    } else if (v == "ring") {
      t.topology.pattern = Topology::Pattern::kRing;
    } else {
      p.fail("topology.pattern", "expected ps or ring, got '" + v + "'");
    }
  }
  p.read_number("topology.master_id", t.topology.master_id);
  p.read_int_list("topology.ring_order", t.topology.ring_order);

  if (p.has("compressor")) {
    const std::string v = p.take("compressor");
    if (v == "none") {
      t.compressor = CompressorKind::kNone;
    } else if (v == "sparse_gd") {
      t.compressor = CompressorKind::kSparseGd;
    } else if (v == "dgc") {
      t.compressor = CompressorKind::kDgcLike;
    } else if (v == "lgc") {
      t.compressor = CompressorKind::kLgc;
    } else {
      p.fail("compressor", "expected none, sparse_gd, dgc or lgc, got '" + v + "'");
    }
  }

  p.read_number("alpha", t.alpha_percent);
  p.read_number("inner_ratio", t.inner_ratio_percent);
  p.read_number("mc_momentum", t.mc_momentum);
  p.read_number("ramp_start", t.ramp_start_percent);
  p.read_number("seed", t.seed);
  p.read_number("lr", t.lr);
  p.read_number("momentum", t.momentum);
  p.read_number("lambda1", t.lambda1);
  p.read_number("lambda2", t.lambda2);
  p.read_number("ae_lr", t.ae_lr);
  p.read_number("phases.phase1", t.phases.phase1_iters);
  p.read_number("phases.phase2", t.phases.phase2_iters);
  p.read_number("phases.total", t.phases.total_iters);
  p.read_number("ps.common_sender", t.ps_common_sender);
  p.read_number("rar.ae_trainer", t.rar_ae_trainer);

  if (p.has("wire")) {
    const std::string v = p.take("wire");
    if (v == "f32") {
      t.wire = WirePrecision::kFloat32;
    } else if (v == "f64") {
      t.wire = WirePrecision::kFloat64;
    } else {
      p.fail("wire", "expected f32 or f64, got '" + v + "'");
    }
  }

  p.read_int_list("model.channels", t.model.conv_channels);
  p.read_number("model.classes", t.model.classes);
  p.read_number("data.samples", t.train_samples);
  p.read_number("data.eval_samples", t.eval_samples);
  p.read_number("data.noise", t.data_noise);
  p.read_number("data.batch", t.batch_size);
  p.read_number("eval_every", t.eval_every);
  p.read_bool("dump.capture", t.capture_grad_dump);
  p.read_number("dump.stride", t.dump_stride);
  p.read_bool("check_sync", t.check_sync);

  p.read_string("out_dir", cfg.out_dir);
  p.read_number("infoplane.bits", cfg.infoplane_bits);
  p.read_number("infoplane.node_a", cfg.infoplane_node_a);
  p.read_number("infoplane.node_b", cfg.infoplane_node_b);

  p.reject_unknown();

  // module-level validation on top of the syntax pass
  auto train_errors = t.validate();
  p.errors.insert(p.errors.end(), train_errors.begin(), train_errors.end());
  if (cfg.infoplane_bits < 1 || cfg.infoplane_bits > 32) {
    p.fail("infoplane.bits", "must be in [1, 32]");
  }
  if (!p.errors.empty()) {
    throw ConfigError(p.errors);
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config file not found: " + path);
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

std::string render_config(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  std::ostringstream out;
  out << "topology.nodes = " << t.topology.num_workers << '\n';
  out << "topology.pattern = " << pattern_name(t.topology.pattern) << '\n';
  if (t.topology.master_id >= 0) out << "topology.master_id = " << t.topology.master_id << '\n';
  if (!t.topology.ring_order.empty()) {
    out << "topology.ring_order = ";
    for (std::size_t n = 0; n < t.topology.ring_order.size(); ++n) {
      if (n) out << ',';
      out << t.topology.ring_order[n];
    }
    out << '\n';
  }
  out << "compressor = " << compressor_name(t.compressor) << '\n';
  out << "alpha = " << fmt_double(t.alpha_percent) << '\n';
  out << "inner_ratio = " << fmt_double(t.inner_ratio_percent) << '\n';
  out << "mc_momentum = " << fmt_double(t.mc_momentum) << '\n';
  out << "ramp_start = " << fmt_double(t.ramp_start_percent) << '\n';
  out << "seed = " << t.seed << '\n';
  out << "lr = " << fmt_double(t.lr) << '\n';
  out << "momentum = " << fmt_double(t.momentum) << '\n';
  out << "lambda1 = " << fmt_double(t.lambda1) << '\n';
  out << "lambda2 = " << fmt_double(t.lambda2) << '\n';
  out << "ae_lr = " << fmt_double(t.ae_lr) << '\n';
  out << "phases.phase1 = " << t.phases.phase1_iters << '\n';
  out << "phases.phase2 = " << t.phases.phase2_iters << '\n';
  out << "phases.total = " << t.phases.total_iters << '\n';
  out << "wire = " << wire_name(t.wire) << '\n';
  out << "ps.common_sender = " << t.ps_common_sender << '\n';
  out << "rar.ae_trainer = " << t.rar_ae_trainer << '\n';
  out << "model.channels = ";
  for (std::size_t n = 0; n < t.model.conv_channels.size(); ++n) {
    if (n) out << ',';
    out << t.model.conv_channels[n];
  }
  out << '\n';
  out << "model.classes = " << t.model.classes << '\n';
  out << "data.samples = " << t.train_samples << '\n';
  out << "data.eval_samples = " << t.eval_samples << '\n';
  out << "data.noise = " << fmt_double(t.data_noise) << '\n';
  out << "data.batch = " << t.batch_size << '\n';
  out << "eval_every = " << t.eval_every << '\n';
  out << "dump.capture = " << (t.capture_grad_dump ? "true" : "false") << '\n';
  out << "dump.stride = " << t.dump_stride << '\n';
  out << "check_sync = " << (t.check_sync ? "true" : "false") << '\n';
  out << "out_dir = " << cfg.out_dir << '\n';
  out << "infoplane.bits = " << cfg.infoplane_bits << '\n';
  out << "infoplane.node_a = " << cfg.infoplane_node_a << '\n';
  out << "infoplane.node_b = " << cfg.infoplane_node_b << '\n';
  return out.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot open " + tmp + " for writing");
    }
    out << contents;
    out.flush();
    if (!out) {
      throw Error("write failed for " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error("rename failed: " + tmp + " -> " + path);
  }
}

}  // namespace lgc
