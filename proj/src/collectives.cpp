#include "lgc/collectives.hpp"

#include <cstring>

#include "lgc/errors.hpp"

namespace lgc {

namespace {

std::vector<std::uint8_t> encode_values(std::span<const double> values, WirePrecision wire) {
  std::vector<std::uint8_t> bytes;
  if (wire == WirePrecision::kFloat32) {
    bytes.resize(values.size() * 4);
    for (std::size_t n = 0; n < values.size(); ++n) {
      const float f = static_cast<float>(values[n]);
      std::memcpy(bytes.data() + n * 4, &f, 4);
    }
  } else {
    bytes.resize(values.size() * 8);
    std::memcpy(bytes.data(), values.data(), bytes.size());
  }
  return bytes;
}

std::vector<double> decode_values(std::span<const std::uint8_t> bytes, WirePrecision wire) {
  std::vector<double> values;
  if (wire == WirePrecision::kFloat32) {
    values.resize(bytes.size() / 4);
    for (std::size_t n = 0; n < values.size(); ++n) {
      float f;
      std::memcpy(&f, bytes.data() + n * 4, 4);
      values[n] = static_cast<double>(f);
    }
  } else {
    values.resize(bytes.size() / 8);
    std::memcpy(values.data(), bytes.data(), bytes.size());
  }
  return values;
}

struct ChunkSplit {
  std::vector<std::size_t> start;
  std::vector<std::size_t> length;
};

ChunkSplit split_chunks(std::size_t n, int K) {
  ChunkSplit s;
  const std::size_t base = n / static_cast<std::size_t>(K);
  for (int c = 0; c < K; ++c) {
    s.start.push_back(base * c);
    s.length.push_back(c == K - 1 ? n - base * c : base);
  }
  return s;
}

}  // namespace

std::vector<std::vector<double>> ring_allreduce(
    const std::vector<std::vector<double>>& per_node, const Topology& topology,
    SimTransport& transport, std::uint32_t iteration, PayloadKind kind, WirePrecision wire) {
  const int K = topology.num_workers;
  if (static_cast<int>(per_node.size()) != K) {
    throw ShapeError("ring_allreduce: need one vector per worker");
  }
  const std::size_t n = per_node.front().size();
  for (const auto& v : per_node) {
    if (v.size() != n) throw ShapeError("ring_allreduce: vector length mismatch");
  }
  std::vector<std::vector<double>> working = per_node;
  if (K == 1) return working;

  const std::vector<int> ring = topology.ring();
  // position of each worker in the ring
  std::vector<int> pos(K);
  for (int p = 0; p < K; ++p) pos[ring[p]] = p;
  const ChunkSplit chunks = split_chunks(n, K);

  auto chunk_span = [&](std::vector<double>& v, int c) {
    return std::span<double>(v.data() + chunks.start[c], chunks.length[c]);
  };

  // reduce-scatter: after K-1 steps, the worker at ring position p owns the
  // fully reduced chunk (p+1) mod K
  for (int step = 0; step < K - 1; ++step) {
    // capture sends first so each step is simultaneous
    for (int p = 0; p < K; ++p) {
      const int sender = ring[p];
      const int receiver = ring[(p + 1) % K];
      const int c = ((p - step) % K + K) % K;
      auto s = chunk_span(working[sender], c);
      transport.send(iteration, sender, receiver, kind,
                     encode_values({s.data(), s.size()}, wire), /*tag=*/c);
    }
    for (int p = 0; p < K; ++p) {
      const int receiver = ring[p];
      const int sender = ring[(p - 1 + K) % K];
      const int c = ((p - 1 - step) % K + K) % K;
      const auto incoming = decode_values(transport.recv(receiver, sender, c), wire);
      auto s = chunk_span(working[receiver], c);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] += incoming[i];
    }
  }

  // each owner divides its chunk by K and publishes the wire-rounded values
  for (int p = 0; p < K; ++p) {
    const int owner = ring[p];
    const int c = (p + 1) % K;
    auto s = chunk_span(working[owner], c);
    for (double& v : s) {
      v /= static_cast<double>(K);
      if (wire == WirePrecision::kFloat32) v = static_cast<double>(static_cast<float>(v));
    }
  }

  // allgather the reduced chunks around the ring
  for (int step = 0; step < K - 1; ++step) {
    for (int p = 0; p < K; ++p) {
      const int sender = ring[p];
      const int receiver = ring[(p + 1) % K];
      const int c = ((p + 1 - step) % K + K) % K;
      auto s = chunk_span(working[sender], c);
      transport.send(iteration, sender, receiver, kind,
                     encode_values({s.data(), s.size()}, wire), /*tag=*/c);
    }
    for (int p = 0; p < K; ++p) {
      const int receiver = ring[p];
      const int sender = ring[(p - 1 + K) % K];
      const int c = ((p - step) % K + K) % K;
      const auto incoming = decode_values(transport.recv(receiver, sender, c), wire);
      auto s = chunk_span(working[receiver], c);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = incoming[i];
    }
  }
  return working;
}

std::vector<std::vector<std::vector<std::uint8_t>>> ring_allgather(
    const std::vector<std::vector<std::uint8_t>>& per_node, const Topology& topology,
    SimTransport& transport, std::uint32_t iteration, PayloadKind kind) {
  const int K = topology.num_workers;
  if (static_cast<int>(per_node.size()) != K) {
    throw ShapeError("ring_allgather: need one blob per worker");
  }
  std::vector<std::vector<std::vector<std::uint8_t>>> gathered(K);
  for (int w = 0; w < K; ++w) {
    gathered[w].resize(K);
    gathered[w][w] = per_node[w];
  }
  if (K == 1) return gathered;

  const std::vector<int> ring = topology.ring();
  for (int step = 0; step < K - 1; ++step) {
    for (int p = 0; p < K; ++p) {
      const int sender = ring[p];
      const int origin = ring[((p - step) % K + K) % K];
      transport.send(iteration, sender, ring[(p + 1) % K], kind, gathered[sender][origin],
                     /*tag=*/origin);
    }
    for (int p = 0; p < K; ++p) {
      const int receiver = ring[p];
      const int sender = ring[(p - 1 + K) % K];
      const int origin = ring[((p - 1 - step) % K + K) % K];
      gathered[receiver][origin] = transport.recv(receiver, sender, origin);
    }
  }
  return gathered;
}

std::vector<std::vector<std::uint8_t>> ring_broadcast(std::vector<std::uint8_t> blob, int root,
                                                      const Topology& topology,
                                                      SimTransport& transport,
                                                      std::uint32_t iteration,
                                                      PayloadKind kind) {
  const int K = topology.num_workers;
  std::vector<std::vector<std::uint8_t>> received(K);
  const std::vector<int> ring = topology.ring();
  int root_pos = 0;
  for (int p = 0; p < K; ++p) {
    if (ring[p] == root) root_pos = p;
  }
  received[root] = std::move(blob);
  for (int hop = 0; hop < K - 1; ++hop) {
    const int sender = ring[(root_pos + hop) % K];
    const int receiver = ring[(root_pos + hop + 1) % K];
    transport.send(iteration, sender, receiver, kind, received[sender]);
    received[receiver] = transport.recv(receiver, sender);
  }
  return received;
}

PsRoundResult ps_round(const std::vector<std::vector<CompressedPayload>>& worker_payloads,
                       const PsReducer& reducer, const Topology& topology,
                       SimTransport& transport, std::uint32_t iteration) {
  const int K = topology.num_workers;
  if (static_cast<int>(worker_payloads.size()) != K) {
    throw ShapeError("ps_round: need one payload list per worker");
  }
  const int master = topology.master();

  // uplink
  for (int w = 0; w < K; ++w) {
    for (const auto& p : worker_payloads[w]) {
      if (p.iteration != iteration) {
        throw ProtocolError("ps_round: payload iteration mismatch");
      }
      transport.send(iteration, w, master, p.kind, pack_payload(p), /*tag=*/0);
    }
  }
  std::vector<std::vector<CompressedPayload>> at_master(K);
  for (int w = 0; w < K; ++w) {
    at_master[w].reserve(worker_payloads[w].size());
    for (std::size_t n = 0; n < worker_payloads[w].size(); ++n) {
      const auto bytes = transport.recv(master, w, /*tag=*/0);
      at_master[w].push_back(unpack_payload({bytes.data(), bytes.size()}));
    }
  }

  PsRoundResult result;
  result.broadcast = reducer(at_master);
  result.received.resize(K);

  // downlink
  for (const auto& p : result.broadcast) {
    const auto bytes = pack_payload(p);
    for (int w = 0; w < K; ++w) {
      transport.send(iteration, master, w, p.kind, bytes, /*tag=*/1);
    }
  }
  for (int w = 0; w < K; ++w) {
    for (std::size_t n = 0; n < result.broadcast.size(); ++n) {
      const auto bytes = transport.recv(w, master, /*tag=*/1);
      result.received[w].push_back(unpack_payload({bytes.data(), bytes.size()}));
    }
  }
  return result;
}

PsReducer dense_mean_reducer() {
  return [](const std::vector<std::vector<CompressedPayload>>& per_worker) {
    if (per_worker.empty() || per_worker.front().empty()) {
      throw ProtocolError("dense mean: no payloads");
    }
    const std::size_t n = per_worker.front().front().values.size();
    std::vector<double> sum(n, 0.0);
    for (const auto& payloads : per_worker) {
      if (payloads.size() != 1 || payloads.front().kind != PayloadKind::kDense ||
          payloads.front().values.size() != n) {
        throw ProtocolError("dense mean: expected one DENSE payload per worker");
      }
      for (std::size_t i = 0; i < n; ++i) {
        sum[i] += static_cast<double>(payloads.front().values[i]);
      }
    }
    CompressedPayload out;
    out.kind = PayloadKind::kDense;
    out.iteration = per_worker.front().front().iteration;
    out.node_id = static_cast<std::uint16_t>(0xffff);  // master
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.values[i] = static_cast<float>(sum[i] / static_cast<double>(per_worker.size()));
    }
    return std::vector<CompressedPayload>{out};
  };
}

}  // namespace lgc
