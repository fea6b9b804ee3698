#pragma once

#include <string>

namespace fidelity {

// POST a JSON body to api_base + path with bearer auth and return the
// response body. Throws ProviderError(status, body excerpt) on non-2xx or
// transport failure and Timeout on timeouts. Refuses to touch the network
// when FIDELITY_FORBID_NETWORK is set.
std::string http_post_json(const std::string& api_base, const std::string& path,
                           const std::string& api_key, const std::string& json_body,
                           int timeout_seconds = 120);

}  // namespace fidelity
