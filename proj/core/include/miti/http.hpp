#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace miti {

struct HttpRequest {
    std::string url;  // absolute: scheme://host[:port]/path
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    std::chrono::seconds timeout{60};
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Connection-level failure (DNS, refused, timeout). HTTP statuses are not errors here.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// cpp-httplib backed transport; supports http:// and https://.
std::shared_ptr<HttpTransport> make_default_transport();

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
};

/// 429 and 5xx are worth retrying; other 4xx are the caller's fault.
bool is_transient_status(int status) noexcept;

/// POSTs JSON with retries and exponential backoff. Exhausted connection
/// failures raise Error{BackendUnreachable}; a non-2xx final response raises
/// HttpStatusError. `what` labels retry log lines.
HttpResponse post_with_retries(HttpTransport& transport, const HttpRequest& request, const RetryPolicy& policy,
                               std::string_view what);

/// `endpoint` + `path` without doubling the slash.
std::string join_url(std::string_view endpoint, std::string_view path);

}  // namespace miti
