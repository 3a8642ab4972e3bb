#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "lgc/wire.hpp"

namespace lgc {

/// Star or ring layout. Workers are 0..num_workers-1; in the
/// parameter-server pattern the master is a separate id (num_workers by
/// default). ring_order is a permutation of worker ids.
struct Topology {
  enum class Pattern { kParameterServer, kRing };

  int num_workers = 1;
  Pattern pattern = Pattern::kRing;
  int master_id = -1;  // PS only; defaults to num_workers
  std::vector<int> ring_order;  // RING only; defaults to identity

  void validate() const;
  int master() const { return master_id < 0 ? num_workers : master_id; }
  std::vector<int> ring() const;
};

struct LedgerEntry {
  std::uint32_t iteration = 0;
  int sender = 0;
  int receiver = 0;
  PayloadKind kind = PayloadKind::kDense;
  std::uint64_t bytes = 0;
};

/// Per-(iteration, sender, receiver, kind) byte counts for every transfer.
/// Every transport send appends exactly one entry.
class RateLedger {
 public:
  void record(std::uint32_t iteration, int sender, int receiver, PayloadKind kind,
              std::uint64_t bytes);

  const std::vector<LedgerEntry>& entries() const { return entries_; }

  std::uint64_t total_bytes() const { return total_; }
  std::uint64_t sent_by(int node) const;
  std::uint64_t received_by(int node) const;

  /// Bytes sent by `node` with iteration in [first, last].
  std::uint64_t sent_by_in(int node, std::uint32_t first, std::uint32_t last) const;

  std::vector<std::uint32_t> iterations() const;  // sorted, unique

  /// CSV with columns iteration,sender,receiver,kind,bytes.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<LedgerEntry> entries_;
  std::uint64_t total_ = 0;
};

/// Per-node uplink ratio baseline/compressed over the iterations both
/// ledgers cover. Both must cover the same iteration set; zero compressed
/// bytes is an error.
double compression_ratio(const RateLedger& ledger, const RateLedger& baseline, int node);

/// Same ratio restricted to iterations [first, last].
double compression_ratio_window(const RateLedger& ledger, const RateLedger& baseline, int node,
                                std::uint32_t first, std::uint32_t last);

}  // namespace lgc
