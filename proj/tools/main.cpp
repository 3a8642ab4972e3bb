#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lgc/config.hpp"
#include "lgc/gradient_dump.hpp"
#include "lgc/infoplane.hpp"

namespace {

using namespace lgc;

std::string csv_of_metrics(const MetricsSeries& m) {
  std::ostringstream out;
  m.write_csv(out);
  return out.str();
}

std::string csv_of_ledger(const RateLedger& ledger) {
  std::ostringstream out;
  ledger.write_csv(out);
  return out.str();
}

void apply_overrides(ExperimentConfig& cfg, const std::string& pattern,
                     const std::string& compressor, int nodes, std::int64_t seed,
                     const std::string& out_dir) {
  if (!pattern.empty()) {
    cfg.train.topology.pattern =
        pattern == "ring" ? Topology::Pattern::kRing : Topology::Pattern::kParameterServer;
  }
  if (!compressor.empty()) {
    if (compressor == "none") cfg.train.compressor = CompressorKind::kNone;
    if (compressor == "sparse_gd") cfg.train.compressor = CompressorKind::kSparseGd;
    if (compressor == "dgc") cfg.train.compressor = CompressorKind::kDgcLike;
    if (compressor == "lgc") cfg.train.compressor = CompressorKind::kLgc;
  }
  if (nodes > 0) cfg.train.topology.num_workers = nodes;
  if (seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
}

int cmd_train(const ExperimentConfig& cfg) {
  const auto violations = cfg.train.validate();
  if (!violations.empty()) {
    throw ConfigError(violations);
  }
  std::filesystem::create_directories(cfg.out_dir);

  ExperimentResult result = run_experiment(cfg.train);

  write_file_atomic(cfg.out_dir + "/metrics.csv", csv_of_metrics(result.metrics));
  write_file_atomic(cfg.out_dir + "/ledger.csv", csv_of_ledger(result.ledger));
  write_file_atomic(cfg.out_dir + "/config_resolved.txt", render_config(cfg));
  if (cfg.train.capture_grad_dump) {
    std::ostringstream dump;
    write_gradient_dump(dump, result.dump);
    write_file_atomic(cfg.out_dir + "/gradients.lgcd", dump.str());
  }

  const int K = cfg.train.topology.num_workers;
  std::printf("final_eval_accuracy %.4f\n", result.final_eval_accuracy);
  std::printf("total_transferred_MB %.6f\n",
              static_cast<double>(result.ledger.total_bytes()) / 1e6);
  if (cfg.train.compressor == CompressorKind::kNone) {
    for (int k = 0; k < K; ++k) std::printf("node %d CR 1.0x\n", k);
  } else {
    const RateLedger baseline = dense_baseline_ledger(cfg.train);
    for (int k = 0; k < K; ++k) {
      const double cr = compression_ratio(result.ledger, baseline, k);
      const bool common_sender =
          cfg.train.compressor == CompressorKind::kLgc &&
          cfg.train.topology.pattern == Topology::Pattern::kParameterServer &&
          k == cfg.train.ps_common_sender;
      std::printf("node %d CR %.1fx%s\n", k, cr,
                  common_sender ? " (common sender)" : "");
    }
  }
  std::printf("outputs written to %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_infoplane(const ExperimentConfig& cfg, const std::string& dump_path) {
  std::filesystem::create_directories(cfg.out_dir);
  GradientDump dump;
  if (!dump_path.empty()) {
    std::ifstream in(dump_path, std::ios::binary);
    if (!in) {
      std::fprintf(stderr, "error: cannot open dump %s\n", dump_path.c_str());
      return 1;
    }
    dump = read_gradient_dump(in);
  } else {
    TrainConfig train = cfg.train;
    train.capture_grad_dump = true;
    ExperimentResult result = run_experiment(train);
    dump = std::move(result.dump);
    if (dump.records.empty()) {
      throw FormatError("gradient dump: no iterations");
    }
  }
  const auto series =
      dump_pair_series(dump, static_cast<std::uint16_t>(cfg.infoplane_node_a),
                       static_cast<std::uint16_t>(cfg.infoplane_node_b));
  const InfoSummary summary = layer_summary(series, cfg.infoplane_bits);
  std::ostringstream csv;
  write_infoplane_csv(csv, summary);
  write_file_atomic(cfg.out_dir + "/infoplane.csv", csv.str());
  for (const auto& layer : summary.per_layer) {
    std::printf("layer %d mean_H %.4f mean_MI %.4f MI/H %.4f\n", layer.layer, layer.h_marginal,
                layer.mi, layer.mi_over_h);
  }
  std::printf("outputs written to %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_bench_codec(int mu, int rounds) {
  using clock = std::chrono::steady_clock;
  Rng rng(7);
  auto ae = make_autoencoder(AeVariant::kRingAllreduce, mu, 1, rng);
  auto ps = make_autoencoder(AeVariant::kParameterServer, mu, 1, rng);
  std::vector<double> grad(mu);
  for (double& v : grad) v = rng.normal(0, 0.1);

  auto timeit = [&](const char* name, auto&& fn) {
    const auto start = clock::now();
    for (int r = 0; r < rounds; ++r) fn();
    const auto stop = clock::now();
    const double us =
        std::chrono::duration_cast<std::chrono::microseconds>(stop - start).count() /
        static_cast<double>(rounds);
    std::printf("%-22s %10.1f us/op\n", name, us);
  };

  timeit("encode_common", [&] { encode_common(ae, grad); });
  const ChannelSignal code = encode_common(ae, grad);
  timeit("decode_rar", [&] { decode_rar(ae, code); });
  const SparseSelection innovation = topk_select(grad, 10.0);
  const ChannelSignal ps_code = encode_common(ps, grad);
  timeit("decode_ps", [&] { decode_ps(ps, ps_code, innovation, 0); });

  CompressedPayload payload;
  payload.kind = PayloadKind::kTopk;
  std::uint32_t idx = 0;
  for (int n = 0; n < mu; ++n) {
    idx += 1 + static_cast<std::uint32_t>(rng.index(900));
    payload.indices.push_back(idx);
    payload.values.push_back(static_cast<float>(rng.normal(0, 1)));
  }
  std::vector<std::uint8_t> bytes;
  timeit("pack_payload", [&] { bytes = pack_payload(payload); });
  timeit("unpack_payload", [&] { unpack_payload({bytes.data(), bytes.size()}); });

  // round-trip checks while we are at it
  int failures = 0;
  for (int r = 0; r < 100; ++r) {
    CompressedPayload p;
    p.kind = static_cast<PayloadKind>(rng.index(4));
    p.iteration = static_cast<std::uint32_t>(r);
    const std::size_t count = rng.index(300);
    std::uint32_t at = 0;
    for (std::size_t n = 0; n < count; ++n) {
      at += 1 + static_cast<std::uint32_t>(rng.index(50));
      p.indices.push_back(at);
      p.values.push_back(static_cast<float>(rng.normal(0, 1)));
    }
    const auto packed = pack_payload(p);
    const auto back = unpack_payload({packed.data(), packed.size()});
    if (back.values != p.values || back.indices != p.indices) ++failures;
  }
  std::printf("payload round-trips: %s\n", failures == 0 ? "all ok" : "FAILED");
  return failures == 0 ? 0 : 1;
}

int cmd_selfcheck() {
  int failed = 0;
  auto report = [&](const char* name, bool ok) {
    std::printf("%s %s\n", ok ? "PASS" : "FAIL", name);
    if (!ok) ++failed;
  };

  {
    Rng rng(3);
    SeqNet net;
    net.add(make_conv_layer(2, 3, 3, 2, 1, false, rng), true);
    net.add(make_conv_layer(3, 1, 1, 1, 0, false, rng), false);
    ChannelSignal x(2, 16);
    for (double& v : x.data) v = rng.normal(0, 1);
    MseLoss loss{ChannelSignal(1, net.out_length(16)), 1.0};
    for (double& v : loss.target.data) v = rng.normal(0, 1);
    report("gradient check (conv net)", finite_diff_check(net, x, loss, 1e-5) <= 1e-4);
  }
  {
    Rng rng(5);
    bool ok = true;
    for (int round = 0; round < 200 && ok; ++round) {
      std::vector<double> v(1 + rng.index(500));
      for (double& x : v) x = std::round(rng.normal(0, 3));
      auto sel = topk_select(v, 25.0);
      std::vector<bool> chosen(v.size(), false);
      for (auto i : sel.indices) chosen[i] = true;
      for (std::size_t i = 0; i < v.size() && ok; ++i) {
        if (!chosen[i] && std::abs(v[i]) > sel.threshold) ok = false;
      }
    }
    report("top-k selection", ok);
  }
  {
    Rng rng(7);
    bool ok = true;
    for (int K = 1; K <= 8 && ok; ++K) {
      std::vector<std::vector<double>> per_node(K, std::vector<double>(257));
      for (auto& v : per_node) {
        for (double& x : v) x = rng.normal(0, 1);
      }
      RateLedger ledger;
      SimTransport transport(&ledger);
      Topology topo;
      topo.num_workers = K;
      auto out = ring_allreduce(per_node, topo, transport, 0, PayloadKind::kDense);
      for (std::size_t i = 0; i < 257 && ok; ++i) {
        double mean = 0.0, scale = 0.0;
        for (int k = 0; k < K; ++k) {
          mean += per_node[k][i];
          scale = std::max(scale, std::abs(per_node[k][i]));
        }
        mean /= K;
        if (std::abs(out[0][i] - mean) > 1e-6 * std::max(scale, 1.0)) ok = false;
      }
    }
    report("ring allreduce", ok);
  }
  {
    Rng rng(9);
    bool ok = true;
    GradientVector grad;
    grad.values.resize(100);
    grad.layer_offsets = {{0, 0, 100}};
    auto residual = ResidualState::zeros(100, ResidualMode::kPlain);
    for (int step = 0; step < 50 && ok; ++step) {
      for (double& v : grad.values) v = rng.normal(0, 1);
      auto before = residual.accumulated;
      auto result = error_feedback_step(residual, grad, 10.0);
      auto dense = result.per_layer[0].densify();
      for (std::size_t i = 0; i < 100 && ok; ++i) {
        if (dense[i] + residual.accumulated[i] != before[i] + grad.values[i]) ok = false;
      }
    }
    report("error-feedback conservation", ok);
  }

  std::printf("%s\n", failed == 0 ? "selfcheck ok" : "selfcheck FAILED");
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned-gradient-compression training simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, pattern, compressor, dump_path;
  std::int64_t seed = -1;
  int nodes = 0;

  app.add_option("--config", config_path, "experiment config file");
  app.add_option("--seed", seed, "override the experiment seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--pattern", pattern, "override: ps or ring")
      ->check(CLI::IsMember({"ps", "ring", ""}));
  app.add_option("--compressor", compressor, "override: none, sparse_gd, dgc, lgc")
      ->check(CLI::IsMember({"none", "sparse_gd", "dgc", "lgc", ""}));
  app.add_option("--nodes", nodes, "override the worker count");

  auto* train = app.add_subcommand("train", "run one experiment, write metrics and ledger");
  auto* infoplane =
      app.add_subcommand("infoplane", "entropy/MI analysis of a two-node gradient stream");
  infoplane->add_option("--dump", dump_path, "gradient dump file (else runs the config)");
  int bench_mu = 256, bench_rounds = 50;
  auto* bench = app.add_subcommand("bench-codec", "codec micro-benchmarks and round-trips");
  bench->add_option("--mu", bench_mu, "autoencoder input length");
  bench->add_option("--rounds", bench_rounds, "timing rounds");
  auto* selfcheck = app.add_subcommand("selfcheck", "gradient checks and protocol properties");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = parse_config_file(config_path);
    }
    apply_overrides(cfg, pattern, compressor, nodes, seed, out_dir);

    if (train->parsed()) return cmd_train(cfg);
    if (infoplane->parsed()) return cmd_infoplane(cfg, dump_path);
    if (bench->parsed()) return cmd_bench_codec(bench_mu, bench_rounds);
    if (selfcheck->parsed()) return cmd_selfcheck();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
