#include "ddtsr/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ddtsr {

double entropy(const TokenDistribution& dist) {
    dist.validate();
    double h = 0.0;
    for (double p : dist.probs) {
        if (p > 0.0)
            h -= p * std::log(p); // 0 * ln 0 taken as 0
    }
    return h;
}

double mean_connective_entropy(const ConnectiveCandidate& candidate) {
    candidate.validate();
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < candidate.dists.size(); ++i) {
        if (candidate.is_marker[i])
            continue;
        sum += entropy(candidate.dists[i]);
        ++n;
    }
    if (n == 0)
        throw ValidationError("candidate has no non-marker token to score");
    return sum / static_cast<double>(n);
}

double confidence_from_entropies(std::span<const double> mean_entropies, double h_max) {
    if (mean_entropies.empty())
        throw ValidationError("confidence needs at least one candidate");
    if (!(h_max > 0.0))
        throw ValidationError("confidence ceiling h_max must be positive");
    double sum = 0.0;
    for (double h : mean_entropies) {
        if (!std::isfinite(h) || h < 0.0)
            throw ValidationError("mean candidate entropy must be finite and non-negative");
        sum += h;
    }
    double conf = 1.0 - sum / (static_cast<double>(mean_entropies.size()) * h_max);
    return std::clamp(conf, 0.0, 1.0);
}

double confidence(std::span<const ConnectiveCandidate> candidates, double h_max) {
    if (candidates.empty())
        throw ValidationError("confidence needs at least one candidate");
    std::vector<double> hs;
    hs.reserve(candidates.size());
    for (const auto& cand : candidates)
        hs.push_back(mean_connective_entropy(cand));
    return confidence_from_entropies(hs, h_max);
}

double sequence_nll(const ProbabilityOracle& oracle,
                    std::span<const std::string> context,
                    std::span<const std::string> target) {
    std::vector<std::string> ctx(context.begin(), context.end());
    ctx.reserve(context.size() + target.size());
    double nll = 0.0;
    for (const auto& tok : target) {
        TokenDistribution dist = oracle.next_token(ctx);
        dist.validate();
        double p = dist.prob_of(tok); // throws UnknownTokenError when absent
        nll -= std::log(p);           // p == 0 yields +inf, which propagates
        ctx.push_back(tok);
    }
    return nll;
}

double perplexity(const ProbabilityOracle& oracle,
                  std::span<const std::string> u,
                  std::span<const std::string> c,
                  std::span<const std::string> target) {
    if (target.empty())
        throw ValidationError("perplexity target must be non-empty");
    std::vector<std::string> ctx(u.begin(), u.end());
    ctx.insert(ctx.end(), c.begin(), c.end());
    double nll = sequence_nll(oracle, ctx, target);
    return std::exp(nll / static_cast<double>(target.size()));
}

double style_consistency_loss(const ProbabilityOracle& f_small,
                              std::span<const std::string> u,
                              std::span<const std::string> c,
                              std::span<const std::string> r_long) {
    std::vector<std::string> ctx(u.begin(), u.end());
    ctx.insert(ctx.end(), c.begin(), c.end());
    return sequence_nll(f_small, ctx, r_long);
}

namespace {

// Perplexity of the pair (c, r) given u: the target is the concatenation
// c ⊕ r, so the normalizer is |c| + |r|.
double pair_perplexity(const ProbabilityOracle& oracle,
                       std::span<const std::string> u,
                       std::span<const std::string> c,
                       std::span<const std::string> r) {
    std::vector<std::string> target(c.begin(), c.end());
    target.insert(target.end(), r.begin(), r.end());
    if (target.empty())
        throw ValidationError("pair perplexity needs a non-empty connective or response");
    double nll = sequence_nll(oracle, u, target);
    return std::exp(nll / static_cast<double>(target.size()));
}

} // namespace

double coherence_loss(const ProbabilityOracle& f_small,
                      const ProbabilityOracle& f_small_base,
                      std::span<const std::string> u,
                      std::span<const std::string> c,
                      std::span<const std::string> r_long,
                      std::span<const std::string> r_short) {
    if (r_long.empty() || r_short.empty())
        throw ValidationError("coherence loss needs non-empty responses on both sides");
    double gap = pair_perplexity(f_small, u, c, r_long) -
                 pair_perplexity(f_small_base, u, c, r_short);
    return gap * gap;
}

double prior_regularization_loss(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw ValidationError("KL divergence needs aligned distributions");
    if (p.empty())
        throw ValidationError("KL divergence over an empty candidate set");
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i]) || !std::isfinite(q[i]) || p[i] < 0.0 || q[i] < 0.0)
            throw ValidationError("KL divergence inputs must be finite and non-negative");
        sp += p[i];
        sq += q[i];
    }
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
        throw ValidationError("KL divergence inputs must each sum to 1");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0)
            continue; // 0 * ln(0/q) taken as 0
        if (q[i] == 0.0)
            throw ValidationError("KL divergence support violation: p > 0 where q == 0");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

std::vector<double> connective_distribution(const ProbabilityOracle& oracle,
                                            std::span<const std::string> u,
                                            std::span<const std::vector<std::string>> candidates) {
    if (candidates.empty())
        throw ValidationError("connective distribution over an empty candidate set");
    std::vector<double> mass;
    mass.reserve(candidates.size());
    double total = 0.0;
    for (const auto& cand : candidates) {
        if (cand.empty())
            throw ValidationError("connective distribution: empty candidate token sequence");
        std::vector<std::string> ctx(u.begin(), u.end());
        double prod = 1.0;
        for (const auto& tok : cand) {
            TokenDistribution dist = oracle.next_token(ctx);
            dist.validate();
            prod *= dist.prob_of(tok);
            ctx.push_back(tok);
        }
        mass.push_back(prod);
        total += prod;
    }
    if (total <= 0.0)
        throw ValidationError("every candidate connective has probability zero under the oracle");
    for (double& m : mass)
        m /= total;
    return mass;
}

double total_loss(double style, double coherence, double prior, const LossWeights& w) {
    for (double v : {style, coherence, prior, w.style, w.coherence, w.prior}) {
        if (!std::isfinite(v))
            throw ValidationError("total loss requires finite components and weights");
    }
    return w.style * style + w.coherence * coherence + w.prior * prior;
}

CurriculumPlan curriculum_plan(std::span<const DialogueSample> samples,
                               std::span<const int> epochs,
                               StageOrder order) {
    if (epochs.empty())
        throw ValidationError("curriculum needs at least one stage");
    for (int e : epochs) {
        if (e <= 0)
            throw ValidationError("curriculum epoch counts must be positive");
    }
    const std::size_t stage_count = epochs.size();
    if (samples.size() < stage_count)
        throw ValidationError("curriculum needs at least as many samples as stages");

    struct Key {
        int chunks;
        std::string id;
    };
    std::vector<Key> keys;
    keys.reserve(samples.size());
    for (const auto& s : samples) {
        if (!s.chunk_count)
            throw ValidationError("curriculum sample " + s.id + " has no chunk_count");
        keys.push_back({*s.chunk_count, s.id});
    }
    // Quantile partition of the empirical chunk-count distribution: sort by
    // (chunk_count, id) and cut at floor(j * n / stage_count).
    std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
        if (a.chunks != b.chunks)
            return a.chunks < b.chunks;
        return a.id < b.id;
    });

    const std::size_t n = keys.size();
    std::vector<CurriculumStage> stages(stage_count);
    for (std::size_t j = 0; j < stage_count; ++j) {
        std::size_t lo = j * n / stage_count;
        std::size_t hi = (j + 1) * n / stage_count;
        for (std::size_t i = lo; i < hi; ++i)
            stages[j].sample_ids.push_back(keys[i].id);
    }

    // stages[] is ordered fewest-chunks first, which is hardest-first.
    if (order == StageOrder::easy_to_hard)
        std::reverse(stages.begin(), stages.end());

    CurriculumPlan plan;
    plan.stages = std::move(stages);
    for (std::size_t j = 0; j < stage_count; ++j) {
        plan.stages[j].index = static_cast<int>(j);
        plan.stages[j].epochs = epochs[j];
        plan.total_steps += static_cast<std::int64_t>(plan.stages[j].sample_ids.size()) *
                            plan.stages[j].epochs;
    }
    return plan;
}

DialogueSample truncate_sample(const DialogueSample& sample, int chunks_available) {
    sample.validate();
    if (!sample.chunk_count)
        throw ValidationError("truncate_sample: sample " + sample.id + " has no chunk_count");
    int total = *sample.chunk_count;
    if (chunks_available < 1 || chunks_available > total)
        throw ValidationError("truncate_sample: chunks_available " +
                              std::to_string(chunks_available) + " outside [1, " +
                              std::to_string(total) + "]");
    DialogueSample out = sample;
    if (chunks_available == total)
        return out;
    // Proportional token prefix, rounded up, never below one token.
    auto keep = static_cast<std::size_t>(
        (sample.u.size() * static_cast<std::size_t>(chunks_available) +
         static_cast<std::size_t>(total) - 1) /
        static_cast<std::size_t>(total));
    keep = std::max<std::size_t>(keep, 1);
    out.u.assign(sample.u.begin(), sample.u.begin() + static_cast<std::ptrdiff_t>(keep));
    out.chunk_count = chunks_available;
    out.audio_ms.reset(); // audio no longer matches the retained prefix
    return out;
}

} // namespace ddtsr
