#pragma once

#include <cstdint>
#include <memory>

#include <boost/asio/io_context.hpp>

#include "bowlsim/live_session.hpp"

namespace bowlsim::server {

/// WebSocket front end of one LiveSession. Runs entirely on the given
/// io_context; frames are text, one JSON message each.
class WsServer {
 public:
  /// Binds to 127.0.0.1:port (port 0 picks a free one) and starts accepting.
  WsServer(boost::asio::io_context& io, LiveSession& session, std::uint16_t port, bool any_address = false);
  ~WsServer();

  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;

  [[nodiscard]] std::uint16_t port() const;

  /// Stops accepting and closes every connection.
  void stop();

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

/// Blocking `serve`: real-time session plus server until SIGINT/SIGTERM.
int run_server(const SessionConfig& config, std::uint16_t port);

}  // namespace bowlsim::server
