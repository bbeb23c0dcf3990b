#pragma once

#include <string>

#include "crowdval/service.hpp"

namespace httplib {
class Server;
}

namespace crowdval {

// Installs catch-all GET/POST/PATCH handlers that forward to
// Service::handle. The bearer token comes from the Authorization header.
void mount(httplib::Server& server, Service& service);

// "host:port"; port defaults to 8080 and host to 127.0.0.1.
std::pair<std::string, int> parse_listen_address(const std::string& text);

}  // namespace crowdval
