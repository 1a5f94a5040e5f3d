#include "ddtsr/remote_llm.hpp"

#include <chrono>
#include <cstddef>

#include <httplib.h>
#include <json.hpp>

#include "ddtsr/errors.hpp"

namespace ddtsr {

namespace {

struct TimedToken {
    std::string text;
    Ms elapsed_ms = 0;
};

std::string describe(const Endpoint& ep) {
    return ep.host + ":" + std::to_string(ep.port) + ep.path;
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

// One streaming POST; tokens come back stamped with receipt time relative to
// the moment the request went out.
std::vector<TimedToken> stream_tokens(const Endpoint& endpoint, int timeout_ms,
                                      const std::string& prompt) {
    httplib::Client client(endpoint.host, endpoint.port);
    client.set_connection_timeout(std::chrono::milliseconds(timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(timeout_ms));

    std::vector<TimedToken> tokens;
    std::string carry;
    std::size_t line_no = 0;
    std::string protocol_failure;
    const auto started = std::chrono::steady_clock::now();

    const auto consume_line = [&](const std::string& line) {
        ++line_no;
        if (blank(line)) return true; // tolerate keep-alive blank lines
        const auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.is_object() || !j.contains("token") ||
            !j.at("token").is_string()) {
            protocol_failure = "line " + std::to_string(line_no) +
                               R"( is not a {"token": <string>} object: )" + line;
            return false;
        }
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();
        tokens.push_back(TimedToken{j.at("token").get<std::string>(), Ms{elapsed}});
        return true;
    };

    httplib::Request req;
    req.method = "POST";
    req.path = endpoint.path;
    req.set_header("Content-Type", "application/json");
    req.body = nlohmann::ordered_json{{"prompt", prompt}, {"stream", true}}.dump();
    // Receiver must not throw across the library; failures are staged and
    // re-raised after send() returns (returning false cancels the read).
    req.content_receiver = [&](const char* data, std::size_t len, std::uint64_t,
                               std::uint64_t) {
        carry.append(data, len);
        std::size_t pos;
        while ((pos = carry.find('\n')) != std::string::npos) {
            const std::string line = carry.substr(0, pos);
            carry.erase(0, pos + 1);
            if (!consume_line(line)) return false;
        }
        return true;
    };

    const httplib::Result res = client.send(req);

    if (protocol_failure.empty() && res && res->status == 200 && !carry.empty())
        consume_line(carry); // reply may omit the final newline
    if (!protocol_failure.empty())
        throw ProtocolError("remote endpoint " + describe(endpoint) + ": " + protocol_failure);
    if (!res)
        throw RemoteError("remote endpoint " + describe(endpoint) + ": " +
                          httplib::to_string(res.error()));
    if (res->status != 200)
        throw RemoteError("remote endpoint " + describe(endpoint) + ": HTTP status " +
                          std::to_string(res->status));
    return tokens;
}

} // namespace

Endpoint parse_endpoint(const std::string& url) {
    const std::string scheme = "http://";
    if (url.compare(0, scheme.size(), scheme) != 0)
        throw ConfigError("endpoint must start with http://, got: " + url);
    const std::string rest = url.substr(scheme.size());

    const std::size_t slash = rest.find('/');
    const std::string authority = rest.substr(0, slash);
    const std::size_t colon = authority.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == authority.size())
        throw ConfigError("endpoint needs host:port, got: " + url);

    Endpoint ep;
    ep.host = authority.substr(0, colon);
    try {
        std::size_t used = 0;
        ep.port = std::stoi(authority.substr(colon + 1), &used);
        if (used != authority.size() - colon - 1) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw ConfigError("endpoint port is not a number: " + url);
    }
    if (ep.port <= 0 || ep.port > 65535)
        throw ConfigError("endpoint port out of range: " + url);
    if (slash != std::string::npos && slash + 1 != rest.size()) ep.path = rest.substr(slash);
    return ep;
}

RemoteLargeModel::RemoteLargeModel(Endpoint endpoint, int timeout_ms)
    : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {
    if (endpoint_.host.empty() || endpoint_.port <= 0)
        throw ConfigError("remote model needs a host and port");
    if (timeout_ms_ <= 0) throw ConfigError("remote model timeout must be positive");
}

std::vector<ResponseToken> RemoteLargeModel::generate(const std::string& transcript,
                                                      Ms t0_ms) {
    std::vector<ResponseToken> out;
    for (const TimedToken& t : stream_tokens(endpoint_, timeout_ms_, transcript))
        out.push_back(ResponseToken{t.text, t0_ms + t.elapsed_ms});
    return out;
}

std::unique_ptr<LargeModel> remote_large_model(const std::string& url, int timeout_ms) {
    return std::make_unique<RemoteLargeModel>(parse_endpoint(url), timeout_ms);
}

std::string remote_completion(const Endpoint& endpoint, const std::string& prompt,
                              int timeout_ms) {
    std::string out;
    for (const TimedToken& t : stream_tokens(endpoint, timeout_ms, prompt)) out += t.text;
    return out;
}

miner::AnnotatorFn remote_annotator(const std::string& url, int timeout_ms) {
    const Endpoint ep = parse_endpoint(url);
    return [ep, timeout_ms](const std::string& prompt) {
        return remote_completion(ep, prompt, timeout_ms);
    };
}

} // namespace ddtsr
