#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "psyseg/session.hpp"

namespace httplib {
class Server;
}

namespace psyseg::server {

class SessionHost;

/// HTTP front end for one or more sessions, addressed by id.
class Service {
 public:
  explicit Service(std::filesystem::path static_dir = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Takes ownership of an opened session under `id`.
  void add_session(const std::string& id, session::Session s);

  /// Binds and serves until stop(); throws std::runtime_error if the port is busy.
  void listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it; serve with run().
  int bind_any(const std::string& host);
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  void routes();
  SessionHost* find(const std::string& id);

  std::unique_ptr<httplib::Server> http_;
  std::map<std::string, std::unique_ptr<SessionHost>> sessions_;
};

}  // namespace psyseg::server
