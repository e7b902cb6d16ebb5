#pragma once

// Thin JSON-over-HTTP client used by the remote embedding and chat providers.

#include <chrono>
#include <string>

#include <httplib.h>
#include <json.hpp>

// <resolv.h> (via httplib) defines _res as a macro, which breaks Eigen's
// product kernels when they are included afterwards.
#ifdef _res
#undef _res
#endif

#include "sdm/error.hpp"

namespace sdm {

struct HttpEndpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // path prefix without trailing slash, may be empty
};

/// Splits "http://host:8080/prefix/" into origin and path prefix.
inline HttpEndpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("endpoint must include a scheme: '" + url + "'");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw InvalidArgument("unsupported endpoint scheme '" + scheme + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw InvalidArgument("https endpoints need a TLS-enabled build");
#endif
  const auto path_start = url.find('/', scheme_end + 3);
  HttpEndpoint ep;
  ep.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    ep.base_path = url.substr(path_start);
    while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  }
  if (ep.origin.size() <= scheme_end + 3) throw InvalidArgument("endpoint has no host: '" + url + "'");
  return ep;
}

/// POSTs a JSON body and returns the parsed JSON response. Transport
/// failures, non-2xx statuses and non-JSON bodies raise ProviderError.
inline nlohmann::json post_json(const HttpEndpoint& ep, const std::string& path, const nlohmann::json& body,
                                const std::string& api_key, double timeout_s) {
  httplib::Client client(ep.origin);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto res = client.Post(ep.base_path + path, headers, body.dump(), "application/json");
  if (!res) throw ProviderError("request to " + ep.origin + ep.base_path + path + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw ProviderError("provider returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw ProviderError("provider returned a non-JSON body");
  }
}

}  // namespace sdm
