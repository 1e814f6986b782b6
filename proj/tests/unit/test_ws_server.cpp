#include <filesystem>
#include <string>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ws_server.hpp"

namespace bowlsim {
namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

class Client {
 public:
  explicit Client(std::uint16_t port) : ws_(io_) {
    tcp::resolver resolver(io_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
  }
  void send(const std::string& text) {
    ws_.text(true);
    ws_.write(net::buffer(text));
  }
  json receive() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return json::parse(beast::buffers_to_string(buffer.data()));
  }
  // Reads until the server closes; returns the close error.
  beast::error_code drain() {
    beast::flat_buffer buffer;
    beast::error_code ec;
    while (!ec) ws_.read(buffer, ec);
    return ec;
  }

 private:
  net::io_context io_;
  websocket::stream<tcp::socket> ws_;
};

// Server on its own thread; torn down even when an assertion bails out.
struct Running {
  Running(LiveSession& session) : srv(io, session, 0), runner([this] { io.run(); }) {}
  ~Running() {
    srv.stop();
    net::post(io, [this] { io.stop(); });
    runner.join();
  }
  net::io_context io;
  server::WsServer srv;
  std::thread runner;
};

TEST(WsServer, JoinErrorsAndCapacity) {
  SessionConfig config;
  config.server.log_dir = (std::filesystem::temp_directory_path() / "bowlsim_ws_test").string();
  LiveSession session(config);
  Running running(session);
  server::WsServer& srv = running.srv;

  {
    Client player(srv.port());
    player.send(R"({"v":1,"type":"join","subject":"W1"})");
    const json welcome = player.receive();
    EXPECT_EQ(welcome["type"], "welcome");
    EXPECT_EQ(welcome["subject"], "W1");

    player.send("garbage");
    EXPECT_EQ(player.receive()["code"], "malformed");

    Client intruder(srv.port());
    const json rejected = intruder.receive();
    EXPECT_EQ(rejected["code"], "session_full");
    EXPECT_EQ(intruder.drain(), websocket::error::closed);

    player.send(R"({"v":1,"type":"start_trial"})");
    const json snap = player.receive();
    EXPECT_EQ(snap["type"], "snapshot");
    EXPECT_TRUE(snap["running"].get<bool>());
    EXPECT_TRUE(session.trial_running());
  }

  // The player went away mid-trial.
  for (int i = 0; i < 200 && session.trial_running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  EXPECT_FALSE(session.trial_running());
  ASSERT_TRUE(session.last_log().has_value());
  EXPECT_EQ(session.last_log()->invalid_reason, "client disconnected");

  Client next(srv.port());
  next.send(R"({"v":1,"type":"join"})");
  EXPECT_EQ(next.receive()["next_trial"], 2);
  std::filesystem::remove_all(config.server.log_dir);
}

}  // namespace
}  // namespace bowlsim
