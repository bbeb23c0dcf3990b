#include <cstdlib>
#include <iostream>

#include <httplib.h>

#include "crowdval/http_server.hpp"

int main() {
  try {
    crowdval::ServiceConfig cfg = crowdval::config_from_env();
    if (!cfg.data_dir) cfg.data_dir = "data";
    const char* listen = std::getenv("CROWDVAL_LISTEN");
    auto [host, port] = crowdval::parse_listen_address(listen ? listen : "");

    crowdval::Service service(cfg);
    httplib::Server server;
    crowdval::mount(server, service);
    std::cerr << "listening on " << host << ":" << port << ", data in " << cfg.data_dir->string() << "\n";
    if (!server.listen(host, port)) {
      std::cerr << "cannot listen on " << host << ":" << port << "\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
