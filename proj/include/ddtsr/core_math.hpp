#pragma once

// Scalar quantities behind the dual-track gating policy and its training
// objective: token entropy, emission confidence, sequence NLL / perplexity,
// the three loss terms with their weighted sum, and the staged-difficulty
// training schedule over dialogue samples.
//
// Conventions (uniform across the library):
//   * logarithms are natural; entropies are in nats
//   * 0 * ln 0 is taken as 0
//   * unknown tokens are hard errors, never smoothed
//   * probability sums are checked to an absolute tolerance of 1e-9

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ddtsr/tokens.hpp"

namespace ddtsr {

/// Shannon entropy of one next-token distribution, in nats.
/// Throws ValidationError if the distribution is malformed.
double entropy(const TokenDistribution& dist);

/// Mean per-token entropy of a candidate, marker tokens excluded.
/// Throws ValidationError if no scoreable (non-marker) token remains.
double mean_connective_entropy(const ConnectiveCandidate& candidate);

/// Emission confidence over the top-m candidate list:
///   conf = 1 - (sum of mean candidate entropies) / (m * h_max)
/// clamped to [0, 1]. `h_max` is the calibration ceiling for a single
/// candidate's mean entropy; values above it saturate the penalty rather
/// than pushing confidence below zero.
/// Throws ValidationError on an empty list or h_max <= 0.
double confidence(std::span<const ConnectiveCandidate> candidates, double h_max);

/// Same formula on precomputed mean entropies; the candidate overload
/// delegates here. Exposed so callers with closed-form entropies can pin
/// exact expectations.
double confidence_from_entropies(std::span<const double> mean_entropies, double h_max);

/// Sum of -ln P(target_t | context, target_<t) under the oracle.
/// Throws UnknownTokenError if any target token is outside the vocabulary.
double sequence_nll(const ProbabilityOracle& oracle,
                    std::span<const std::string> context,
                    std::span<const std::string> target);

/// exp(nll / |target|) with context = u ⊕ c. Length-invariant for a constant
/// per-token probability p: ppl == 1/p at any length.
double perplexity(const ProbabilityOracle& oracle,
                  std::span<const std::string> u,
                  std::span<const std::string> c,
                  std::span<const std::string> target);

/// Style term: NLL of the reference long response under the tuned small
/// oracle, conditioned on u ⊕ c. Defined as sequence_nll and bit-identical
/// to calling it directly.
double style_consistency_loss(const ProbabilityOracle& f_small,
                              std::span<const std::string> u,
                              std::span<const std::string> c,
                              std::span<const std::string> r_long);

/// Coherence term: squared gap between two perplexities, each taken over the
/// concatenated pair c ⊕ r given context u (token count |c| + |r|):
/// the tuned small oracle scoring the long response against the frozen base
/// oracle scoring the short one.
double coherence_loss(const ProbabilityOracle& f_small,
                      const ProbabilityOracle& f_small_base,
                      std::span<const std::string> u,
                      std::span<const std::string> c,
                      std::span<const std::string> r_long,
                      std::span<const std::string> r_short);

/// KL(p ‖ q) over one shared finite candidate set, in nats.
/// Throws ValidationError if the vectors differ in length, either fails to
/// sum to 1, any entry is negative, or p[i] > 0 where q[i] == 0.
double prior_regularization_loss(std::span<const double> p, std::span<const double> q);

/// Probability of each multi-token candidate connective under the oracle
/// given context u: per-token product, renormalized over the candidate set.
/// Throws ValidationError if every candidate has probability zero.
std::vector<double> connective_distribution(const ProbabilityOracle& oracle,
                                            std::span<const std::string> u,
                                            std::span<const std::vector<std::string>> candidates);

struct LossWeights {
    double style = 1.0;
    double coherence = 0.5;
    double prior = 0.1;
};

/// Weighted sum of the three loss terms. Throws ValidationError if any
/// component or weight is non-finite.
double total_loss(double style, double coherence, double prior, const LossWeights& w);

enum class StageOrder { hard_to_easy, easy_to_hard };

struct CurriculumStage {
    int index = 0;                       // position in training order
    std::vector<std::string> sample_ids; // members, ordered by (chunk_count, id)
    int epochs = 0;
};

struct CurriculumPlan {
    std::vector<CurriculumStage> stages;
    std::int64_t total_steps = 0; // sum over stages of |stage| * epochs
};

/// Partition samples into `epochs.size()` stages by quantiles of their
/// chunk-count distribution (ties broken by sample id) and order the stages
/// by difficulty. Difficulty is audio scarcity: fewer chunks available means
/// the harder condition, so hard_to_easy runs the fewest-chunk stage first.
/// Epoch counts attach positionally to the ordered stages.
/// Throws ValidationError if any sample lacks chunk_count, epochs is empty,
/// or there are fewer samples than stages.
CurriculumPlan curriculum_plan(std::span<const DialogueSample> samples,
                               std::span<const int> epochs,
                               StageOrder order = StageOrder::hard_to_easy);

/// Simulate partial audio: keep the first ceil(|u| * chunks_available /
/// chunk_count) tokens of u (never fewer than one token).
/// Throws ValidationError if the sample lacks chunk_count or
/// chunks_available is outside [1, chunk_count].
DialogueSample truncate_sample(const DialogueSample& sample, int chunks_available);

} // namespace ddtsr
