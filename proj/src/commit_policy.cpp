#include "ddtsr/commit_policy.hpp"

#include <cmath>

#include "ddtsr/core_math.hpp"

namespace ddtsr {

PolicyConfig PolicyConfig::from_config(const KeyValueConfig& cfg) {
    PolicyConfig p;
    p.tau = cfg.get_double("policy.tau", p.tau);
    p.h_max = cfg.get_double("policy.h_max", p.h_max);
    p.m = static_cast<int>(cfg.get_int("policy.m", p.m));
    p.validate();
    return p;
}

void PolicyConfig::validate() const {
    if (!std::isfinite(tau) || tau < 0.0 || tau > 1.0)
        throw ValidationError("policy.tau must lie in [0, 1]");
    if (!std::isfinite(h_max) || h_max <= 0.0)
        throw ValidationError("policy.h_max must be positive");
    if (m < 1)
        throw ValidationError("policy.m must be at least 1");
}

CommitDecision evaluate_step(const SmallModel& model,
                             const PartialHypothesis& hyp,
                             const PolicyConfig& cfg) {
    cfg.validate();
    CommitDecision d;
    d.step = hyp.step;
    d.candidates = model.top_candidates(hyp.text, cfg.m);
    if (d.candidates.empty())
        return d; // conf 0, sig false
    d.conf = confidence(d.candidates, cfg.h_max);
    d.sig = d.conf > cfg.tau; // strict: conf == tau does not fire
    if (d.sig)
        d.chosen = select_connective(d.candidates);
    return d;
}

std::optional<int> commit_point(std::span<const CommitDecision> decisions) {
    int prev = 0;
    bool first = true;
    std::optional<int> hit;
    for (const auto& d : decisions) {
        if (!first && d.step <= prev)
            throw ValidationError("commit_point: step " + std::to_string(d.step) +
                                  " does not follow step " + std::to_string(prev));
        first = false;
        prev = d.step;
        if (!hit && d.sig)
            hit = d.step;
        // keep scanning: later steps still get order-validated
    }
    return hit;
}

ConnectiveCandidate select_connective(std::span<const ConnectiveCandidate> candidates) {
    if (candidates.empty())
        throw ValidationError("select_connective: empty candidate list");
    const ConnectiveCandidate* best = nullptr;
    double best_h = 0.0;
    for (const auto& cand : candidates) {
        double h = mean_connective_entropy(cand);
        if (!best) {
            best = &cand;
            best_h = h;
            continue;
        }
        if (h < best_h) {
            best = &cand;
            best_h = h;
        } else if (h == best_h) {
            if (cand.model_score > best->model_score ||
                (cand.model_score == best->model_score && cand.tokens < best->tokens)) {
                best = &cand;
            }
        }
    }
    return *best;
}

} // namespace ddtsr
