#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ddtsr/errors.hpp"

namespace ddtsr {

/// Closed token inventory shared by the probability oracles of one experiment.
/// Immutable after construction; distributions index into it by position.
class Vocabulary {
public:
    /// Throws ValidationError on an empty list or duplicate entries.
    explicit Vocabulary(std::vector<std::string> tokens);

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(std::size_t i) const { return tokens_.at(i); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    /// Position of `tok`, or nullopt if the vocabulary does not contain it.
    std::optional<std::size_t> index_of(std::string_view tok) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// One next-token distribution over a shared vocabulary. Plain data on
/// purpose: tests build malformed instances and expect the consuming ops to
/// reject them, so validation happens at use, not at construction.
struct TokenDistribution {
    std::shared_ptr<const Vocabulary> vocab;
    std::vector<double> probs; // aligned with vocab positions

    /// Throws ValidationError unless probs is non-negative, matches the
    /// vocabulary size, and sums to 1 within `tol`.
    void validate(double tol = 1e-9) const;

    double prob_of(std::string_view tok) const; // throws UnknownTokenError
};

/// Deterministic next-token model: same context in, same distribution out.
/// Implementations are table-driven at desk scale; `role` labels which slot
/// the oracle fills in a loss computation (e.g. "small", "small-base").
class ProbabilityOracle {
public:
    virtual ~ProbabilityOracle() = default;
    virtual const Vocabulary& vocab() const = 0;
    virtual TokenDistribution next_token(std::span<const std::string> context) const = 0;
    virtual std::string_view role() const = 0;
};

/// One dialogue turn: user tokens `u`, connective tokens `c` (may be empty),
/// reference response tokens `r`. `audio_ms` is the spoken length of `u`;
/// `chunk_count` is derived from it at load time (500 ms audio chunks).
struct DialogueSample {
    std::string id;
    std::vector<std::string> u;
    std::vector<std::string> c;
    std::vector<std::string> r;
    std::optional<std::int64_t> audio_ms;
    std::optional<int> chunk_count;

    void validate() const; // throws ValidationError
};

/// Audio chunk length assumed when deriving chunk_count from audio_ms.
inline constexpr std::int64_t kAudioChunkMs = 500;

/// Load DialogueSample records from a JSON-Lines file. Derives chunk_count
/// from audio_ms when absent; cross-checks it when both are present.
std::vector<DialogueSample> load_dialogue_samples(const std::string& path);

/// Candidate connective proposed by a small model for one partial transcript.
/// `dists[i]` is the model's next-token distribution at the step that produced
/// `tokens[i]`; `is_marker[i]` flags protocol tokens (segment markers) that
/// carry no linguistic content and are excluded from entropy statistics.
struct ConnectiveCandidate {
    std::vector<std::string> tokens;
    std::vector<TokenDistribution> dists;
    std::vector<bool> is_marker;
    double model_score = 0.0; // in [0, 1]

    void validate() const; // throws ValidationError

    /// Candidate text with marker tokens dropped, tokens joined by spaces.
    std::string text() const;
};

/// Table-driven ProbabilityOracle loaded from a JSON file mapping a
/// space-joined context key to {token: probability}. The key "*" is reserved
/// as the fallback row for contexts without an exact entry. The vocabulary is
/// the sorted union of all tokens that appear in any row; tokens a row omits
/// get probability zero.
class TabularOracle final : public ProbabilityOracle {
public:
    TabularOracle(const std::string& path, std::string role);

    const Vocabulary& vocab() const override { return *vocab_; }
    TokenDistribution next_token(std::span<const std::string> context) const override;
    std::string_view role() const override { return role_; }

private:
    std::shared_ptr<const Vocabulary> vocab_;
    std::unordered_map<std::string, std::vector<double>> rows_;
    std::string role_;
};

/// Space-join used for oracle context keys and candidate text.
std::string join_tokens(std::span<const std::string> tokens);

/// Whitespace tokenizer used wherever plain text meets token-level APIs.
std::vector<std::string> split_whitespace(std::string_view text);

} // namespace ddtsr
