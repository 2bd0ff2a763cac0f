#include "http.hpp"

#include <condition_variable>
#include <memory>
#include <mutex>
#include <thread>

#include "canopyscan/common/errors.hpp"
#include "httplib.h"

namespace canopyscan::ingest::detail {

namespace {

// Counting gate per origin; the limit is taken from the first client that
// touches the host.
class HostGate {
 public:
  explicit HostGate(int limit) : free_(limit) {}
  void acquire() {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lock(m_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  int free_;
};

HostGate& gate_for(const std::string& origin, int limit) {
  static std::mutex m;
  static std::map<std::string, std::unique_ptr<HostGate>> gates;
  std::lock_guard lock(m);
  auto& g = gates[origin];
  if (!g) g = std::make_unique<HostGate>(std::max(1, limit));
  return *g;
}

struct GateHold {
  HostGate& gate;
  explicit GateHold(HostGate& g) : gate(g) { gate.acquire(); }
  ~GateHold() { gate.release(); }
};

}  // namespace

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL without scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Url u;
  u.origin = url.substr(0, path_start);
  u.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (u.origin.size() <= scheme_end + 3) throw ConfigError("URL without host: " + url);
  return u;
}

std::string excerpt(const std::string& body, std::size_t max_len) {
  if (body.size() <= max_len) return body;
  return body.substr(0, max_len) + "...";
}

HttpResponse get_with_retry(const std::string& url, const std::multimap<std::string, std::string>& query,
                            const std::string& bearer_token, const HttpOptions& options) {
  const Url u = split_url(url);
  httplib::Client client(u.origin);
  const auto ms = options.timeout.count();
  client.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
  client.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
  client.set_write_timeout(ms / 1000, (ms % 1000) * 1000);
  client.set_follow_location(true);
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
  httplib::Params params(query.begin(), query.end());

  HostGate& gate = gate_for(u.origin, options.per_host_limit);
  std::string last_failure;
  auto delay = options.backoff_base;
  for (int attempt = 1; attempt <= std::max(1, options.max_attempts); ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Result res;
    {
      GateHold hold(gate);
      res = client.Get(u.path, params, headers);
    }
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    const int status = res->status;
    if (status == 401 || status == 403)
      throw AuthError("HTTP " + std::to_string(status) + " from " + u.origin + u.path);
    if (status >= 200 && status < 300) return {status, res->body};
    if (status == 429 || status >= 500) {
      last_failure = "HTTP " + std::to_string(status) + ": " + excerpt(res->body);
      continue;
    }
    throw ServiceError("HTTP " + std::to_string(status) + " from " + u.origin + u.path + ": " + excerpt(res->body));
  }
  const std::string msg = "giving up on " + u.origin + u.path + " after " + std::to_string(options.max_attempts) +
                          " attempts (" + last_failure + ")";
  if (last_failure.rfind("transport", 0) == 0) throw TransportError(msg);
  throw ServiceError(msg);
}

}  // namespace canopyscan::ingest::detail
