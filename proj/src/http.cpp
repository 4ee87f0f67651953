#include "daca/http.hpp"

#include <httplib.h>

#include "daca/error.hpp"

namespace daca {

Url parse_url(const std::string& url) {
  Url u;
  const auto sep = url.find("://");
  if (sep == std::string::npos) throw ConfigError("not an absolute URL: " + url);
  u.scheme = url.substr(0, sep);
  if (u.scheme != "http" && u.scheme != "https") throw ConfigError("unsupported URL scheme: " + url);
  const auto host_begin = sep + 3;
  const auto path_begin = url.find('/', host_begin);
  std::string authority = url.substr(host_begin, path_begin == std::string::npos ? std::string::npos
                                                                                  : path_begin - host_begin);
  u.path = path_begin == std::string::npos ? "/" : url.substr(path_begin);
  u.port = u.scheme == "https" ? 443 : 80;
  if (const auto colon = authority.rfind(':'); colon != std::string::npos && authority.find(']') == std::string::npos) {
    try {
      u.port = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad port in URL: " + url);
    }
    authority.erase(colon);
  }
  if (authority.empty()) throw ConfigError("URL has no host: " + url);
  u.host = authority;
  return u;
}

HttpResponse http_post_json(const std::string& url, const std::string& body, const HttpHeaders& headers,
                            std::chrono::milliseconds timeout) {
  const Url u = parse_url(url);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  auto post = [&](auto& cli) {
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    return cli.Post(u.path, h, body, "application/json");
  };
  auto res = [&]() -> httplib::Result {
    if (u.scheme == "https") {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
      httplib::SSLClient cli(u.host, u.port);
      return post(cli);
#else
      throw ConfigError("https is not supported by this build");
#endif
    }
    httplib::Client cli(u.host, u.port);
    return post(cli);
  }();
  if (!res) throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

}  // namespace daca
