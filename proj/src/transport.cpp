#include "lgc/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <string>

#include "lgc/errors.hpp"

namespace lgc {

void SimTransport::send(std::uint32_t iteration, int sender, int receiver, PayloadKind kind,
                        std::vector<std::uint8_t> bytes, int tag) {
  if (ledger_) {
    ledger_->record(iteration, sender, receiver, kind, bytes.size());
  }
  ++clock_;
  queues_[{sender, receiver, tag}].push_back(std::move(bytes));
}

std::vector<std::uint8_t> SimTransport::recv(int receiver, int sender, int tag) {
  auto it = queues_.find({sender, receiver, tag});
  if (it == queues_.end() || it->second.empty()) {
    throw ProtocolError("recv with no pending message from " + std::to_string(sender) +
                        " to " + std::to_string(receiver));
  }
  std::vector<std::uint8_t> bytes = std::move(it->second.front());
  it->second.pop_front();
  return bytes;
}

bool SimTransport::pending(int receiver, int sender, int tag) const {
  auto it = queues_.find({sender, receiver, tag});
  return it != queues_.end() && !it->second.empty();
}

namespace {

void send_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, 0);
    if (n <= 0) throw ProtocolError("tcp send failed");
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

void recv_all(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n <= 0) throw ProtocolError("tcp recv failed or peer closed");
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

void send_frame(int fd, std::span<const std::uint8_t> frame) {
  std::uint8_t header[4];
  const std::uint32_t len = static_cast<std::uint32_t>(frame.size());
  header[0] = static_cast<std::uint8_t>(len & 0xff);
  header[1] = static_cast<std::uint8_t>((len >> 8) & 0xff);
  header[2] = static_cast<std::uint8_t>((len >> 16) & 0xff);
  header[3] = static_cast<std::uint8_t>((len >> 24) & 0xff);
  send_all(fd, header, 4);
  send_all(fd, frame.data(), frame.size());
}

std::vector<std::uint8_t> recv_frame(int fd) {
  std::uint8_t header[4];
  recv_all(fd, header, 4);
  const std::uint32_t len = static_cast<std::uint32_t>(header[0]) |
                            (static_cast<std::uint32_t>(header[1]) << 8) |
                            (static_cast<std::uint32_t>(header[2]) << 16) |
                            (static_cast<std::uint32_t>(header[3]) << 24);
  std::vector<std::uint8_t> frame(len);
  recv_all(fd, frame.data(), len);
  return frame;
}

}  // namespace

TcpLoopback::TcpLoopback() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw ProtocolError("tcp socket creation failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw ProtocolError("tcp bind failed");
  }
  if (::listen(listen_fd_, 1) != 0) throw ProtocolError("tcp listen failed");
  socklen_t len = sizeof(addr);
  if (::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw ProtocolError("tcp getsockname failed");
  }
  port_ = ntohs(addr.sin_port);
}

TcpLoopback::~TcpLoopback() {
  for (int fd : {client_fd_, server_fd_, listen_fd_}) {
    if (fd >= 0) ::close(fd);
  }
}

void TcpLoopback::connect_client() {
  client_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (client_fd_ < 0) throw ProtocolError("tcp socket creation failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port_);
  if (::connect(client_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw ProtocolError("tcp connect failed");
  }
}

void TcpLoopback::accept_server() {
  server_fd_ = ::accept(listen_fd_, nullptr, nullptr);
  if (server_fd_ < 0) throw ProtocolError("tcp accept failed");
}

void TcpLoopback::client_send(std::span<const std::uint8_t> frame) {
  send_frame(client_fd_, frame);
}
void TcpLoopback::server_send(std::span<const std::uint8_t> frame) {
  send_frame(server_fd_, frame);
}
std::vector<std::uint8_t> TcpLoopback::client_recv() { return recv_frame(client_fd_); }
std::vector<std::uint8_t> TcpLoopback::server_recv() { return recv_frame(server_fd_); }

}  // namespace lgc
