#pragma once

// Shared HTTP plumbing for the ingest clients: URL splitting, per-host
// concurrency caps, and retrying GETs.

#include <map>
#include <string>

#include "canopyscan/ingest/ingest.hpp"

namespace canopyscan::ingest::detail {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

Url split_url(const std::string& url);

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// GET with retries on transport errors, 429 and 5xx. 401/403 -> AuthError
/// immediately; other 4xx -> ServiceError. Returns only 2xx responses.
HttpResponse get_with_retry(const std::string& url, const std::multimap<std::string, std::string>& query,
                            const std::string& bearer_token, const HttpOptions& options);

std::string excerpt(const std::string& body, std::size_t max_len = 200);

}  // namespace canopyscan::ingest::detail
