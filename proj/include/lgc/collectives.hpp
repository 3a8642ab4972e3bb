#pragma once

#include <functional>

#include "lgc/transport.hpp"

namespace lgc {

enum class WirePrecision { kFloat32, kFloat64 };

/// Ring allreduce (reduce-scatter then allgather) over equal-length
/// vectors, one per worker. Chunks are contiguous; the last chunk absorbs
/// the remainder. Values cross the wire at the configured precision;
/// exactly 2(K-1) sends per node are ledgered. Every node ends with the
/// elementwise mean (bit-identical across nodes).
std::vector<std::vector<double>> ring_allreduce(
    const std::vector<std::vector<double>>& per_node, const Topology& topology,
    SimTransport& transport, std::uint32_t iteration, PayloadKind kind,
    WirePrecision wire = WirePrecision::kFloat32);

/// Ring allgather of opaque blobs: every node ends with all K blobs
/// (indexed by worker id). Each node forwards K-1 blobs.
std::vector<std::vector<std::vector<std::uint8_t>>> ring_allgather(
    const std::vector<std::vector<std::uint8_t>>& per_node, const Topology& topology,
    SimTransport& transport, std::uint32_t iteration, PayloadKind kind);

/// Pipeline broadcast around the ring from `root`; K-1 hops total.
/// Returns the blob as received by each node (root keeps its own).
std::vector<std::vector<std::uint8_t>> ring_broadcast(std::vector<std::uint8_t> blob, int root,
                                                      const Topology& topology,
                                                      SimTransport& transport,
                                                      std::uint32_t iteration,
                                                      PayloadKind kind);

/// Reduction callback for one parameter-server round: per-worker payload
/// lists in, broadcast payload list out.
using PsReducer = std::function<std::vector<CompressedPayload>(
    const std::vector<std::vector<CompressedPayload>>&)>;

struct PsRoundResult {
  std::vector<CompressedPayload> broadcast;   // what the master sent
  std::vector<std::vector<CompressedPayload>> received;  // as unpacked per worker
};

/// One synchronous PS round: uplink every worker's payloads, reduce at the
/// master, broadcast the result. All payloads must carry `iteration`.
/// Uplink and downlink bytes land in the ledger with their payload kinds.
PsRoundResult ps_round(const std::vector<std::vector<CompressedPayload>>& worker_payloads,
                       const PsReducer& reducer, const Topology& topology,
                       SimTransport& transport, std::uint32_t iteration);

/// Standard reducer: elementwise mean of one DENSE payload per worker.
PsReducer dense_mean_reducer();

}  // namespace lgc
