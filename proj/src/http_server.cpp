#include "crowdval/http_server.hpp"

#include <httplib.h>

namespace crowdval {

namespace {

Request to_request(const httplib::Request& req) {
  Request out;
  out.method = req.method;
  out.path = req.path;
  for (const auto& [k, v] : req.params) out.query.emplace(k, v);
  out.body = req.body;
  std::string auth = req.get_header_value("Authorization");
  const std::string prefix = "Bearer ";
  if (auth.rfind(prefix, 0) == 0) out.token = auth.substr(prefix.size());
  return out;
}

}  // namespace

void mount(httplib::Server& server, Service& service) {
  auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    Response r = service.handle(to_request(req));
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(".*", handler);
  server.Post(".*", handler);
  server.Patch(".*", handler);
}

std::pair<std::string, int> parse_listen_address(const std::string& text) {
  std::string host = "127.0.0.1";
  int port = 8080;
  if (text.empty()) return {host, port};
  auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    host = text;
  } else {
    if (colon > 0) host = text.substr(0, colon);
    try {
      port = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadRequest, "bad listen address '" + text + "'");
    }
  }
  return {host, port};
}

}  // namespace crowdval
