#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <tuple>
#include <vector>

#include "lgc/ledger.hpp"

namespace lgc {

/// Deterministic in-process message queue with a logical clock. Delivery
/// is exactly-once, FIFO per (sender, receiver, tag). Every send is
/// ledgered. Single-threaded stepping is the only mode used by tests.
class SimTransport {
 public:
  explicit SimTransport(RateLedger* ledger) : ledger_(ledger) {}

  void send(std::uint32_t iteration, int sender, int receiver, PayloadKind kind,
            std::vector<std::uint8_t> bytes, int tag = 0);

  /// Pops the oldest message for (sender -> receiver, tag); throws
  /// ProtocolError when none is queued.
  std::vector<std::uint8_t> recv(int receiver, int sender, int tag = 0);

  bool pending(int receiver, int sender, int tag = 0) const;
  std::uint64_t logical_clock() const { return clock_; }

 private:
  RateLedger* ledger_;
  std::uint64_t clock_ = 0;
  std::map<std::tuple<int, int, int>, std::deque<std::vector<std::uint8_t>>> queues_;
};

/// Optional loopback TCP mode: the same payload bytes as length-prefixed
/// (u32 LE) frames over a 127.0.0.1 socket pair.
class TcpLoopback {
 public:
  TcpLoopback();   // listens on an ephemeral loopback port
  ~TcpLoopback();

  TcpLoopback(const TcpLoopback&) = delete;
  TcpLoopback& operator=(const TcpLoopback&) = delete;

  std::uint16_t port() const { return port_; }

  /// Blocking connect/accept pair; call connect_client from one thread and
  /// accept_server from another (or interleave for loopback buffers).
  void connect_client();
  void accept_server();

  void client_send(std::span<const std::uint8_t> frame);
  void server_send(std::span<const std::uint8_t> frame);
  std::vector<std::uint8_t> client_recv();
  std::vector<std::uint8_t> server_recv();

 private:
  int listen_fd_ = -1;
  int client_fd_ = -1;
  int server_fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace lgc
