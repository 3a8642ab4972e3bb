#include "lgc/ledger.hpp"

#include <algorithm>

#include "lgc/errors.hpp"

namespace lgc {

void Topology::validate() const {
  std::vector<std::string> bad;
  if (num_workers < 1) {
    bad.push_back("topology.nodes must be >= 1");
  }
  if (!ring_order.empty()) {
    std::vector<int> sorted = ring_order;
    std::sort(sorted.begin(), sorted.end());
    bool ok = static_cast<int>(sorted.size()) == num_workers;
    for (int n = 0; ok && n < num_workers; ++n) ok = sorted[n] == n;
    if (!ok) bad.push_back("topology.ring_order must be a permutation of worker ids");
  }
  if (pattern == Pattern::kParameterServer && master_id >= 0 && master_id < num_workers) {
    bad.push_back("topology.master_id must not collide with a worker id");
  }
  if (!bad.empty()) throw ConfigError(bad);
}

std::vector<int> Topology::ring() const {
  if (!ring_order.empty()) return ring_order;
  std::vector<int> order(num_workers);
  for (int n = 0; n < num_workers; ++n) order[n] = n;
  return order;
}

void RateLedger::record(std::uint32_t iteration, int sender, int receiver, PayloadKind kind,
                        std::uint64_t bytes) {
  entries_.push_back({iteration, sender, receiver, kind, bytes});
  total_ += bytes;
}

std::uint64_t RateLedger::sent_by(int node) const {
  std::uint64_t sum = 0;
  for (const auto& e : entries_) {
    if (e.sender == node) sum += e.bytes;
  }
  return sum;
}

std::uint64_t RateLedger::received_by(int node) const {
  std::uint64_t sum = 0;
  for (const auto& e : entries_) {
    if (e.receiver == node) sum += e.bytes;
  }
  return sum;
}

std::uint64_t RateLedger::sent_by_in(int node, std::uint32_t first, std::uint32_t last) const {
  std::uint64_t sum = 0;
  for (const auto& e : entries_) {
    if (e.sender == node && e.iteration >= first && e.iteration <= last) sum += e.bytes;
  }
  return sum;
}

std::vector<std::uint32_t> RateLedger::iterations() const {
  std::vector<std::uint32_t> its;
  its.reserve(entries_.size());
  for (const auto& e : entries_) its.push_back(e.iteration);
  std::sort(its.begin(), its.end());
  its.erase(std::unique(its.begin(), its.end()), its.end());
  return its;
}

void RateLedger::write_csv(std::ostream& out) const {
  out << "iteration,sender,receiver,kind,bytes\n";
  for (const auto& e : entries_) {
    out << e.iteration << ',' << e.sender << ',' << e.receiver << ','
        << payload_kind_name(e.kind) << ',' << e.bytes << '\n';
  }
}

namespace {

double ratio_over(const RateLedger& ledger, const RateLedger& baseline, int node,
                  std::uint32_t first, std::uint32_t last) {
  const std::uint64_t compressed = ledger.sent_by_in(node, first, last);
  const std::uint64_t dense = baseline.sent_by_in(node, first, last);
  if (compressed == 0) {
    throw ProtocolError("compression_ratio: zero compressed bytes for node " +
                        std::to_string(node));
  }
  return static_cast<double>(dense) / static_cast<double>(compressed);
}

}  // namespace

double compression_ratio(const RateLedger& ledger, const RateLedger& baseline, int node) {
  if (ledger.iterations() != baseline.iterations()) {
    throw ProtocolError("compression_ratio: ledgers cover different iteration sets");
  }
  return ratio_over(ledger, baseline, node, 0, UINT32_MAX);
}

double compression_ratio_window(const RateLedger& ledger, const RateLedger& baseline, int node,
                                std::uint32_t first, std::uint32_t last) {
  return ratio_over(ledger, baseline, node, first, last);
}

}  // namespace lgc
