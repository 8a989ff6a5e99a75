#pragma once

// HTTP + WebSocket front of the workflow service (Boost.Beast, one port).
// Requests go to Api; /ws upgrades become push subscribers. Clients never
// send anything meaningful over /ws: frames they send are read and dropped.

#include <chrono>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "cesium/service/api.hpp"
#include "cesium/service/push.hpp"

namespace cesium::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 0;  ///< 0 picks a free port
  std::size_t workers = 2;
  std::size_t io_threads = 2;
  fs::path root = "cesium-data";
};

namespace detail {

class WsSession : public std::enable_shared_from_this<WsSession>, public PushHub::Subscriber {
 public:
  WsSession(tcp::socket&& socket, PushHub& hub) : ws_(std::move(socket)), hub_(hub) {}
  ~WsSession() override { hub_.unsubscribe(this); }

  /// Subscribes before the handshake completes, so a client whose
  /// handshake succeeded sees every later job completion.
  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    hub_.subscribe(shared_from_this());
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

  void deliver(std::shared_ptr<const std::string> frame) override {
    net::post(ws_.get_executor(), [self = shared_from_this(), frame = std::move(frame)] {
      self->queue_.push_back(frame);
      if (self->open_ && self->queue_.size() == 1) self->write_next();
    });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return hub_.unsubscribe(this);
    open_ = true;
    do_read();
    if (!queue_.empty()) write_next();
  }

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->open_ = false;
        self->hub_.unsubscribe(self.get());
        return;
      }
      self->buffer_.consume(self->buffer_.size());
      self->do_read();
    });
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->open_ = false;
        self->hub_.unsubscribe(self.get());
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write_next();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  PushHub& hub_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool open_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Api& api, PushHub& hub) : stream_(std::move(socket)), api_(api), hub_(hub) {}

  void run() { net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this())); }

 private:
  void do_read() {
    parser_.emplace();
    parser_->body_limit(std::uint64_t{1} << 30);
    stream_.expires_after(std::chrono::seconds(120));
    http::async_read(stream_, buffer_, *parser_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    http::request<http::string_body> req = parser_->release();

    if (websocket::is_upgrade(req) && req.target() == "/ws") {
      stream_.expires_never();
      std::make_shared<WsSession>(stream_.release_socket(), hub_)->run(std::move(req));
      return;
    }

    Request r;
    r.method = std::string(req.method_string());
    r.target = std::string(req.target());
    r.content_type = std::string(req[http::field::content_type]);
    r.body = std::move(req.body());
    const Response out = api_.handle(r);

    auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(out.status), req.version());
    res->set(http::field::server, "cesium");
    res->set(http::field::content_type, out.content_type);
    res->keep_alive(req.keep_alive());
    res->body() = out.body;
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (res->need_eof()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  Api& api_;
  PushHub& hub_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
};

class Listener : public std::enable_shared_from_this<Listener> {
 public:
  Listener(net::io_context& ioc, tcp::endpoint endpoint, Api& api, PushHub& hub)
      : ioc_(ioc), acceptor_(net::make_strand(ioc)), api_(api), hub_(hub) {
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen(net::socket_base::max_listen_connections);
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void run() { do_accept(); }

  void close() {
    net::post(acceptor_.get_executor(), [self = shared_from_this()] {
      beast::error_code ec;
      self->acceptor_.close(ec);
    });
  }

 private:
  void do_accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [self = shared_from_this()](beast::error_code ec, tcp::socket s) {
      if (ec == net::error::operation_aborted) return;
      if (!ec) std::make_shared<HttpSession>(std::move(s), self->api_, self->hub_)->run();
      self->do_accept();
    });
  }

  net::io_context& ioc_;
  tcp::acceptor acceptor_;
  Api& api_;
  PushHub& hub_;
};

}  // namespace detail

/// Runs the service on background threads from construction until stop().
class Server {
 public:
  explicit Server(ServerOptions opt)
      : api_(opt.root, opt.workers, [this](const Job& job) { hub_.publish(job_complete_message(job)); }),
        ioc_(static_cast<int>(std::max<std::size_t>(1, opt.io_threads))) {
    try {
      listener_ = std::make_shared<detail::Listener>(
          ioc_, tcp::endpoint(net::ip::make_address(opt.address), opt.port), api_, hub_);
    } catch (const boost::system::system_error& e) {
      throw IoError("cannot listen on " + opt.address + ":" + std::to_string(opt.port) + ": " + e.what());
    }
    listener_->run();
    for (std::size_t i = 0; i < std::max<std::size_t>(1, opt.io_threads); ++i)
      threads_.emplace_back([this] { ioc_.run(); });
  }

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const { return listener_->port(); }
  Api& api() { return api_; }
  PushHub& hub() { return hub_; }

  /// Finishes queued jobs, then closes every connection.
  void stop() {
    if (stopped_) return;
    stopped_ = true;
    listener_->close();
    api_.shutdown();
    ioc_.stop();
    threads_.clear();
  }

  /// Blocks until SIGINT or SIGTERM.
  void wait_for_signal() {
    net::io_context sig_ioc;
    net::signal_set signals(sig_ioc, SIGINT, SIGTERM);
    signals.async_wait([](beast::error_code, int) {});
    sig_ioc.run();
  }

 private:
  PushHub hub_;
  Api api_;
  net::io_context ioc_;
  std::shared_ptr<detail::Listener> listener_;
  std::vector<std::jthread> threads_;
  bool stopped_ = false;
};

}  // namespace cesium::service
