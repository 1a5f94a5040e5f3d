#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ddtsr/components.hpp"
#include "ddtsr/miner.hpp"

namespace ddtsr {

/// Where a remote model lives: plain-HTTP host, port, and request path.
struct Endpoint {
    std::string host;
    int port = 0;
    std::string path = "/generate";
};

/// Parse "http://host:port[/path]". The port is required (there is no useful
/// default for a local model server); the path defaults to /generate.
Endpoint parse_endpoint(const std::string& url);

/// Large model served over HTTP. Each generate() call issues one
///   POST <path> with body {"prompt": <transcript>, "stream": true}
/// and reads a newline-delimited JSON reply, one {"token": <text>} object per
/// line. Every token is stamped t0 plus the wall-clock milliseconds elapsed
/// since the request went out, so arrival times land on the session clock in
/// real-time runs. Connection failures and timeouts raise RemoteError; a
/// reachable server that breaks the line format raises ProtocolError naming
/// the offending line.
class RemoteLargeModel final : public LargeModel {
public:
    explicit RemoteLargeModel(Endpoint endpoint, int timeout_ms = 10000);

    std::vector<ResponseToken> generate(const std::string& transcript, Ms t0_ms) override;
    std::string_view name() const override { return "remote"; }

private:
    Endpoint endpoint_;
    int timeout_ms_;
};

/// Convenience factory straight from a URL string.
std::unique_ptr<LargeModel> remote_large_model(const std::string& url, int timeout_ms = 10000);

/// Blocking one-shot completion against the same wire format: streams the
/// reply and concatenates the token texts verbatim (no separators added).
std::string remote_completion(const Endpoint& endpoint, const std::string& prompt,
                              int timeout_ms = 10000);

/// Adapter for the mining pipeline: an annotator that sends each prompt to
/// the endpoint and hands back the concatenated completion.
miner::AnnotatorFn remote_annotator(const std::string& url, int timeout_ms = 10000);

} // namespace ddtsr
