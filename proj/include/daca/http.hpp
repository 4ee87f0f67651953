#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace daca {

struct Url {
  std::string scheme;  // http or https
  std::string host;
  int port = 0;
  std::string path;  // includes query, starts with '/'
};

// Throws ConfigError for anything that is not an absolute http(s) URL.
Url parse_url(const std::string& url);

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// POSTs a JSON body. Throws TransportError when no response was received.
HttpResponse http_post_json(const std::string& url, const std::string& body, const HttpHeaders& headers,
                            std::chrono::milliseconds timeout);

}  // namespace daca
