#include "fidelity/http_util.hpp"

#include <cstdlib>

#include "fidelity/errors.hpp"

#include <httplib.h>

namespace fidelity {

std::string http_post_json(const std::string& api_base, const std::string& path,
                           const std::string& api_key, const std::string& json_body,
                           int timeout_seconds) {
  if (std::getenv("FIDELITY_FORBID_NETWORK"))
    throw ProviderError(0, "network I/O disabled by FIDELITY_FORBID_NETWORK");

  // "https://host[:port][/prefix]" -> client target + path prefix
  std::string base = api_base;
  std::string prefix;
  std::size_t scheme = base.find("://");
  std::size_t slash = base.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash != std::string::npos) {
    prefix = base.substr(slash);
    base = base.substr(0, slash);
  }
  if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  httplib::Client client(base);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);

  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  auto result = client.Post(prefix + path, headers, json_body, "application/json");
  if (!result) {
    httplib::Error err = result.error();
    if (err == httplib::Error::ConnectionTimeout)
      throw Timeout("connection to " + base + " timed out");
    throw ProviderError(0, std::string(httplib::to_string(err)) + " (" + base + ")");
  }
  if (result->status < 200 || result->status >= 300)
    throw ProviderError(result->status, result->body.substr(0, 200));
  return result->body;
}

}  // namespace fidelity
