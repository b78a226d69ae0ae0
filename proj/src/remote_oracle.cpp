#include "dawn/remote_oracle.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace dawn {

namespace {

[[noreturn]] void io_fail(const std::string& what) {
  throw OracleError(OracleErrc::unavailable, what + ": " + std::strerror(errno));
}

}  // namespace

LineChannel::LineChannel(int read_fd, int write_fd, int timeout_ms)
    : read_fd_(read_fd), write_fd_(write_fd), timeout_ms_(timeout_ms) {}

LineChannel::~LineChannel() {
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
}

void LineChannel::send_line(const std::string& line) {
  std::string data = line;
  data += '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK) n = ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_fail("send failed");
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineChannel::recv_line() {
  while (true) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    pollfd pfd{read_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, timeout_ms_);
    if (ready < 0) {
      if (errno == EINTR) continue;
      io_fail("poll failed");
    }
    if (ready == 0) throw OracleError(OracleErrc::unavailable, "timed out waiting for the oracle");
    char chunk[65536];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_fail("read failed");
    }
    if (n == 0) {
      if (buffer_.empty()) return std::nullopt;
      std::string line = std::move(buffer_);
      buffer_.clear();
      return line;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

namespace {

std::pair<std::string, std::string> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    throw std::invalid_argument("address must be host:port, got '" + address + "'");
  }
  return {address.substr(0, colon), address.substr(colon + 1)};
}

}  // namespace

std::unique_ptr<LineChannel> tcp_connect(const std::string& address, int timeout_ms) {
  const auto [host, port] = split_address(address);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw OracleError(OracleErrc::unavailable, "cannot resolve " + address + ": " + ::gai_strerror(rc));
  }
  std::string last_error = "no address";
  for (auto* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      return std::make_unique<LineChannel>(fd, fd, timeout_ms);
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw OracleError(OracleErrc::unavailable, "cannot connect to " + address + ": " + last_error);
}

std::pair<std::unique_ptr<LineChannel>, std::unique_ptr<LineChannel>> channel_pair(int timeout_ms) {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) io_fail("socketpair failed");
  return {std::make_unique<LineChannel>(fds[0], fds[0], timeout_ms),
          std::make_unique<LineChannel>(fds[1], fds[1], timeout_ms)};
}

TcpListener::TcpListener(const std::string& host, int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) io_fail("socket failed");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw std::invalid_argument("listen host must be an IPv4 address, got '" + host + "'");
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 8) != 0) {
    const int err = errno;
    ::close(fd_);
    errno = err;
    io_fail("cannot listen on " + host + ":" + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { ::close(fd_); }

std::unique_ptr<LineChannel> TcpListener::accept(int timeout_ms) {
  pollfd pfd{fd_, POLLIN, 0};
  const int ready = ::poll(&pfd, 1, timeout_ms);
  if (ready <= 0) throw OracleError(OracleErrc::unavailable, "no client connected");
  const int c = ::accept(fd_, nullptr, nullptr);
  if (c < 0) io_fail("accept failed");
  return std::make_unique<LineChannel>(c, c, timeout_ms);
}

StepPrediction remote_query(LineChannel& channel, std::uint64_t id, const DecodeState& state, std::uint64_t seed,
                            std::size_t vocab_size) {
  if (state.complete()) throw OracleError(OracleErrc::precondition, "state has no masked slot");
  channel.send_line(wire::encode(wire::make_request(id, state, seed)));
  const auto line = channel.recv_line();
  if (!line) throw OracleError(OracleErrc::unavailable, "oracle closed the connection");
  const auto rec = wire::decode(*line);
  if (const auto* err = std::get_if<wire::ErrorRecord>(&rec)) {
    throw OracleError(OracleErrc::protocol, "oracle error on field '" + err->field + "': " + err->message);
  }
  const auto* resp = std::get_if<wire::Response>(&rec);
  if (!resp) throw OracleError(OracleErrc::protocol, "expected a response record");
  if (resp->id != id) {
    throw OracleError(OracleErrc::id_mismatch,
                      "response id " + std::to_string(resp->id) + " for request " + std::to_string(id));
  }
  auto pred = wire::to_prediction(*resp, state);
  validate_prediction(pred, state, vocab_size);
  return pred;
}

RemoteOracle::RemoteOracle(std::unique_ptr<LineChannel> channel, std::vector<TokenId> prompt,
                           std::size_t gen_length, std::size_t attn_layers, std::string session)
    : channel_(std::move(channel)), prompt_(std::move(prompt)) {
  wire::Hello hello{session, prompt_.size(), gen_length, attn_layers, std::nullopt};
  channel_->send_line(wire::encode(hello));
  const auto line = channel_->recv_line();
  if (!line) throw OracleError(OracleErrc::unavailable, "oracle closed the connection during handshake");
  const auto rec = wire::decode(*line);
  if (const auto* err = std::get_if<wire::ErrorRecord>(&rec)) {
    throw OracleError(OracleErrc::protocol, "handshake rejected on field '" + err->field + "': " + err->message);
  }
  const auto* reply = std::get_if<wire::Hello>(&rec);
  if (!reply || !reply->vocab_size) throw OracleError(OracleErrc::protocol, "field 'vocab_size': missing in hello");
  if (reply->prompt_len != hello.prompt_len || reply->gen_len != hello.gen_len) {
    throw OracleError(OracleErrc::dimension_mismatch, "server hello disagrees on geometry");
  }
  vocab_size_ = *reply->vocab_size;
}

StepPrediction RemoteOracle::query(const DecodeState& state, std::uint64_t seed) {
  if (broken_) throw OracleError(OracleErrc::unavailable, "session aborted by an earlier protocol error");
  try {
    return remote_query(*channel_, next_id_++, state, seed, vocab_size_);
  } catch (const OracleError&) {
    broken_ = true;
    throw;
  }
}

StubResponder toy_responder(ToyGrammar grammar) {
  grammar.validate();
  return [g = std::move(grammar)](const wire::Request& req) {
    const auto state = wire::state_from_request(req);
    if (state.prompt_length() != g.prompt_length || state.gen_length() != g.gen_length) {
      return wire::encode(wire::ErrorRecord{req.id, "tokens", "length does not match the served grammar"});
    }
    for (Position p = 0; p < state.total_length(); ++p) {
      if (!state.is_masked(p) && state.token_at(p).value >= g.vocab_size()) {
        return wire::encode(wire::ErrorRecord{req.id, "tokens", "token outside vocabulary"});
      }
    }
    return wire::encode(wire::make_response(req.id, toy_predict(state, g, req.seed)));
  };
}

void serve_stub(LineChannel& channel, const StubResponder& respond, std::size_t vocab_size) {
  while (auto line = channel.recv_line()) {
    if (line->empty()) continue;
    wire::Record rec;
    try {
      rec = wire::decode(*line);
    } catch (const OracleError& e) {
      channel.send_line(wire::encode(wire::ErrorRecord{std::nullopt, "record", e.what()}));
      continue;
    }
    if (auto* hello = std::get_if<wire::Hello>(&rec)) {
      hello->vocab_size = vocab_size;
      channel.send_line(wire::encode(*hello));
    } else if (const auto* req = std::get_if<wire::Request>(&rec)) {
      try {
        channel.send_line(respond(*req));
      } catch (const OracleError& e) {
        channel.send_line(wire::encode(wire::ErrorRecord{req->id, "tokens", e.what()}));
      }
    } else {
      channel.send_line(wire::encode(wire::ErrorRecord{std::nullopt, "type", "expected hello or request"}));
    }
  }
}

}  // namespace dawn
