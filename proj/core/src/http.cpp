#include <httplib.h>

#include <thread>

#include "miti/error.hpp"
#include "miti/http.hpp"
#include "miti/util.hpp"

namespace miti {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidConfig, "URL lacks scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const HttpRequest& request) override {
        const auto [origin, path] = split_url(request.url);
        httplib::Client client(origin);
        client.set_connection_timeout(request.timeout);
        client.set_read_timeout(request.timeout);
        client.set_write_timeout(request.timeout);
        httplib::Headers headers;
        std::string content_type = "application/json";
        for (const auto& [k, v] : request.headers) {
            if (to_lower(k) == "content-type") {
                content_type = v;
            } else {
                headers.emplace(k, v);
            }
        }
        auto res = client.Post(path, headers, request.body, content_type);
        if (!res) throw TransportError(origin + ": " + httplib::to_string(res.error()));
        return {res->status, res->body};
    }
};

}  // namespace

std::shared_ptr<HttpTransport> make_default_transport() { return std::make_shared<HttplibTransport>(); }

bool is_transient_status(int status) noexcept { return status == 408 || status == 429 || status >= 500; }

std::string join_url(std::string_view endpoint, std::string_view path) {
    std::string out(endpoint);
    while (!out.empty() && out.back() == '/') out.pop_back();
    if (!path.starts_with('/')) out.push_back('/');
    out += path;
    return out;
}

HttpResponse post_with_retries(HttpTransport& transport, const HttpRequest& request, const RetryPolicy& policy,
                               std::string_view what) {
    auto backoff = policy.initial_backoff;
    const int attempts = std::max(0, policy.max_retries) + 1;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        try {
            auto res = transport.post(request);
            if (res.status >= 200 && res.status < 300) return res;
            if (!is_transient_status(res.status) || attempt == attempts) {
                throw HttpStatusError(res.status, res.body.substr(0, 200));
            }
            last_error = "HTTP " + std::to_string(res.status);
        } catch (const TransportError& e) {
            last_error = e.what();
            if (attempt == attempts) break;
        }
        log::warn("http.retry", {{"target", std::string(what)},
                                 {"attempt", attempt},
                                 {"max_attempts", attempts},
                                 {"error", last_error},
                                 {"backoff_ms", backoff.count()}});
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * policy.multiplier));
    }
    throw Error(ErrorCode::BackendUnreachable,
                std::string(what) + " unreachable after " + std::to_string(attempts) + " attempts: " + last_error);
}

}  // namespace miti
