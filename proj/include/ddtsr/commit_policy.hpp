#pragma once

// Entropy-gated early-emission policy. On each streaming transcript update
// the small model proposes its top-m connective candidates; the policy turns
// their mean token entropies into a confidence score and fires the commit
// signal the first time confidence strictly exceeds the threshold. A session
// commits at most once, and never re-evaluates a step after committing.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddtsr/config.hpp"
#include "ddtsr/tokens.hpp"

namespace ddtsr {

/// One streaming transcript update. Step indices within a session start at 1
/// and strictly increase; exactly the last hypothesis has is_final == true.
struct PartialHypothesis {
    int step = 0;
    std::string text;
    std::int64_t audio_offset_ms = 0; // audio consumed when this text decoded
    bool is_final = false;
};

/// Small model duties: rank connective candidates for a transcript prefix
/// and (for the frozen-baseline role) produce a short standalone response.
class SmallModel {
public:
    virtual ~SmallModel() = default;
    virtual std::vector<ConnectiveCandidate> top_candidates(const std::string& transcript,
                                                            int m) const = 0;
    virtual std::vector<std::string> short_response(const std::string& transcript) const = 0;
};

struct PolicyConfig {
    double tau = 0.45;  // commit when conf > tau, strictly
    double h_max = 2.0; // per-candidate mean-entropy ceiling, nats
    int m = 5;          // candidate list size

    static PolicyConfig from_config(const KeyValueConfig& cfg);
    void validate() const; // throws ValidationError
};

/// Outcome of evaluating one hypothesis.
struct CommitDecision {
    int step = 0;
    std::vector<ConnectiveCandidate> candidates;
    double conf = 0.0;
    bool sig = false;
    std::optional<ConnectiveCandidate> chosen; // set iff sig
};

/// Evaluate one hypothesis: query the model, score confidence, gate.
/// An empty candidate list yields sig == false with conf == 0 — never an
/// exception, because "the model has nothing to offer" is a normal outcome.
CommitDecision evaluate_step(const SmallModel& model,
                             const PartialHypothesis& hyp,
                             const PolicyConfig& cfg);

/// First step whose decision fired, or nullopt when none did.
/// Decisions must arrive in strictly increasing step order.
std::optional<int> commit_point(std::span<const CommitDecision> decisions);

/// Deterministic pick among candidates: lowest mean entropy wins; ties break
/// to the higher model score, then to lexicographically smaller token
/// sequence. Throws ValidationError on an empty list.
ConnectiveCandidate select_connective(std::span<const ConnectiveCandidate> candidates);

} // namespace ddtsr
