#pragma once

/**
 * Client side of the oracle protocol plus a loopback stub server.
 *
 * A LineChannel is a blocking, newline-framed byte stream over a pair of
 * file descriptors (a TCP socket, a socketpair, or pipes to a child's
 * standard streams). One request is in flight per channel.
 */

#include "dawn/core.hpp"
#include "dawn/toy_oracle.hpp"
#include "dawn/wire.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace dawn {

class LineChannel {
 public:
  /// Takes ownership of the descriptors; read_fd == write_fd is allowed.
  LineChannel(int read_fd, int write_fd, int timeout_ms = 30000);
  ~LineChannel();
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  void send_line(const std::string& line);
  /// nullopt on orderly EOF; throws OracleError(unavailable) on I/O failure or timeout.
  std::optional<std::string> recv_line();

 private:
  int read_fd_;
  int write_fd_;
  int timeout_ms_;
  std::string buffer_;
};

/// "host:port". Throws OracleError(unavailable) when nothing is listening.
std::unique_ptr<LineChannel> tcp_connect(const std::string& address, int timeout_ms = 30000);

/// Connected pair for in-process tests.
std::pair<std::unique_ptr<LineChannel>, std::unique_ptr<LineChannel>> channel_pair(int timeout_ms = 30000);

class TcpListener {
 public:
  /// Port 0 picks an ephemeral port.
  explicit TcpListener(const std::string& host = "127.0.0.1", int port = 0);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int port() const { return port_; }
  std::unique_ptr<LineChannel> accept(int timeout_ms = 30000);

 private:
  int fd_;
  int port_;
};

class RemoteOracle : public ModelOracle {
 public:
  /// Sends the hello record and waits for the server's reply, which carries vocab_size.
  RemoteOracle(std::unique_ptr<LineChannel> channel, std::vector<TokenId> prompt, std::size_t gen_length,
               std::size_t attn_layers, std::string session = "dawn");

  std::vector<TokenId> prompt() const override { return prompt_; }
  std::size_t vocab_size() const override { return vocab_size_; }

  /// Any protocol failure aborts the session: later queries throw OracleError(unavailable).
  StepPrediction query(const DecodeState& state, std::uint64_t seed) override;

 private:
  std::unique_ptr<LineChannel> channel_;
  std::vector<TokenId> prompt_;
  std::size_t vocab_size_ = 0;
  std::uint64_t next_id_ = 1;
  bool broken_ = false;
};

/// Shape, id and validator path of one round trip, without any transport.
StepPrediction remote_query(LineChannel& channel, std::uint64_t id, const DecodeState& state, std::uint64_t seed,
                            std::size_t vocab_size);

/**
 * Loopback server. The responder maps a decoded request to the raw reply line
 * so tests can inject faults; toy_responder() serves toy predictions.
 * Malformed input gets an error record and the loop keeps serving.
 */
using StubResponder = std::function<std::string(const wire::Request&)>;
StubResponder toy_responder(ToyGrammar grammar);
void serve_stub(LineChannel& channel, const StubResponder& respond, std::size_t vocab_size);

}  // namespace dawn
