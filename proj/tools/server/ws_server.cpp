#include "ws_server.hpp"

#include <csignal>
#include <deque>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace bowlsim::server {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, LiveSession& session, LiveSession::ClientId id)
      : ws_(std::move(socket)), session_(session), id_(id) {}

  void run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    session_.disconnect(id_);
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<Connection> weak = shared_from_this();
    auto executor = ws_.get_executor();
    auto sink = [weak, executor](const std::string& message) {
      net::post(executor, [weak, message] {
        if (auto self = weak.lock()) self->enqueue(message);
      });
    };
    if (!session_.connect(id_, sink)) {
      // The session_full error is already queued; close once it is written.
      // The sink holds only a weak reference, so stay alive until then.
      close_after_flush_ = true;
      net::post(executor, [self = shared_from_this()] {});
      return;
    }
    read();
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      close();
      return;
    }
    if (ws_.got_text()) {
      session_.handle(id_, beast::buffers_to_string(buffer_.data()));
    } else {
      enqueue(encode_error("malformed", "binary frames are not accepted"));
    }
    buffer_.consume(buffer_.size());
    read();
  }

  void enqueue(std::string message) {
    if (closed_) return;
    queue_.push_back(std::move(message));
    if (!writing_) write_next();
  }

  void write_next() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_write(ec); });
  }

  void on_write(beast::error_code ec) {
    writing_ = false;
    if (ec) {
      close();
      return;
    }
    queue_.pop_front();
    if (!queue_.empty()) {
      write_next();
    } else if (close_after_flush_) {
      ws_.async_close(websocket::close_code::try_again_later,
                      [self = shared_from_this()](beast::error_code) { self->closed_ = true; });
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  LiveSession& session_;
  LiveSession::ClientId id_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool writing_ = false;
  bool close_after_flush_ = false;
  bool closed_ = false;
};

}  // namespace

struct WsServer::Impl : std::enable_shared_from_this<WsServer::Impl> {
  Impl(net::io_context& io, LiveSession& session) : io(io), acceptor(io), session(session) {}

  void accept() {
    acceptor.async_accept(net::make_strand(io), [self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      auto conn = std::make_shared<Connection>(std::move(socket), self->session, ++self->next_id);
      self->connections.push_back(conn);
      conn->run();
      self->accept();
    });
  }

  net::io_context& io;
  tcp::acceptor acceptor;
  LiveSession& session;
  LiveSession::ClientId next_id = 0;
  std::vector<std::weak_ptr<Connection>> connections;
};

WsServer::WsServer(net::io_context& io, LiveSession& session, std::uint16_t port, bool any_address)
    : impl_(std::make_shared<Impl>(io, session)) {
  const tcp::endpoint endpoint(any_address ? net::ip::address_v4::any() : net::ip::address_v4::loopback(), port);
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen();
  impl_->accept();
}

WsServer::~WsServer() { stop(); }

std::uint16_t WsServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void WsServer::stop() {
  net::post(impl_->io, [impl = impl_] {
    beast::error_code ec;
    impl->acceptor.close(ec);
    for (auto& weak : impl->connections)
      if (auto c = weak.lock()) c->close();
    impl->connections.clear();
  });
}

int run_server(const SessionConfig& config, std::uint16_t port) {
  net::io_context io;
  LiveSession session(config);
  WsServer server(io, session, port, true);
  net::signal_set signals(io, SIGINT, SIGTERM);
  signals.async_wait([&](beast::error_code, int) {
    server.stop();
    net::post(io, [&] { io.stop(); });
  });
  std::cout << "bowlsim: serving session on port " << server.port() << " (ws://<host>:" << server.port()
            << "/), snapshot rate " << config.server.snapshot_rate << " Hz" << std::endl;
  session.start_realtime();
  io.run();
  session.stop_realtime();
  return 0;
}

}  // namespace bowlsim::server
