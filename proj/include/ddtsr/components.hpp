#pragma once

// Deterministic stand-ins for the four runtime components of a spoken
// dialogue stack — streaming ASR, small connective model, large response
// model, incremental TTS — plus the audio-stream concatenation step that
// splices an early connective in front of the main response.
//
// All components speak in session-clock milliseconds (int64). The scripted
// implementations compute their event schedules arithmetically, which is
// what makes whole-session traces reproducible to the byte.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddtsr/commit_policy.hpp"
#include "ddtsr/config.hpp"
#include "ddtsr/tokens.hpp"

namespace ddtsr {

using Ms = std::int64_t;

/// Every latency knob lives here, not in code. Dotted keys mirror the field
/// names: asr.final_tail_ms, llm.first_token_ms, llm.per_token_ms,
/// tts.first_chunk_ms, tts.chunk_duration_ms, tts.ms_audio_per_char,
/// tts.ms_audio_per_ms_synth, small.step_ms.
struct TimingConfig {
    Ms asr_final_tail_ms = 350;    // last audio chunk -> final transcript
    Ms llm_first_token_ms = 500;   // invocation -> first token
    Ms llm_per_token_ms = 50;      // spacing between subsequent tokens
    Ms tts_first_chunk_ms = 150;   // text submission -> first audio chunk
    Ms tts_chunk_duration_ms = 500;// playback length of one audio chunk
    Ms tts_ms_audio_per_char = 50; // speech-length estimate for a text
    double tts_ms_audio_per_ms_synth = 5.0; // synthesis speed after warmup
    Ms small_step_ms = 90;         // duration of one small-model evaluation

    static TimingConfig from_config(const KeyValueConfig& cfg);
    /// Apply per-scenario overrides (same dotted keys) on top of *this.
    TimingConfig overridden(const KeyValueConfig& overrides) const;
    void validate() const; // throws ValidationError
};

/// One scheduled input audio chunk and the partial transcript available once
/// it has been sent. end_ms values are non-decreasing and never exceed the
/// scenario's input_audio_ms.
struct ScenarioChunk {
    Ms end_ms = 0;
    std::string partial;
};

/// A scripted user turn: the chunk/partial schedule, the final transcript,
/// optional reference texts, and optional per-scenario timing overrides.
struct Scenario {
    std::string id;
    Ms input_audio_ms = 0;
    std::vector<ScenarioChunk> chunks;
    std::string final_transcript;
    std::string reference_connective; // empty when absent
    std::vector<std::string> reference_response;
    KeyValueConfig timing_overrides;

    void validate() const; // throws ValidationError
};

std::vector<Scenario> load_scenarios(const std::string& path);

/// A hypothesis stamped with its emission time on the session clock.
struct TimedHypothesis {
    PartialHypothesis hyp;
    Ms t_ms = 0;
};

/// Streaming ASR front: yields every partial hypothesis and, last, the final
/// one. The final is emitted input_audio_ms + final_tail_ms into the session.
class AsrSource {
public:
    virtual ~AsrSource() = default;
    virtual std::vector<TimedHypothesis> stream() const = 0;
};

/// Replays a Scenario: partial k at chunks[k].end_ms, final transcript at
/// input_audio_ms + asr_final_tail_ms.
class ScriptedAsrStream final : public AsrSource {
public:
    ScriptedAsrStream(Scenario scenario, const TimingConfig& timing);
    std::vector<TimedHypothesis> stream() const override;

private:
    Scenario scenario_;
    Ms final_tail_ms_;
};

/// One response token with its arrival time on the session clock.
struct ResponseToken {
    std::string text;
    Ms t_ms = 0;
};

/// Large response model: invoked once per session with the final transcript;
/// returns the full timed token stream. Arrival times are non-decreasing.
class LargeModel {
public:
    virtual ~LargeModel() = default;
    virtual std::vector<ResponseToken> generate(const std::string& transcript, Ms t0_ms) = 0;
    virtual std::string_view name() const = 0;
};

/// Table of transcript -> response tokens; token i arrives at
/// t0 + first_token_ms + i * per_token_ms. Unknown transcripts fall back to
/// a fixed apology-free default so a session never dies on a lookup miss.
class ScriptedLargeModel final : public LargeModel {
public:
    ScriptedLargeModel(std::map<std::string, std::vector<std::string>> responses,
                       const TimingConfig& timing,
                       std::vector<std::string> fallback = {"I", "see.", "Tell", "me", "more."});

    std::vector<ResponseToken> generate(const std::string& transcript, Ms t0_ms) override;
    std::string_view name() const override { return "scripted"; }

private:
    std::map<std::string, std::vector<std::string>> responses_;
    std::vector<std::string> fallback_;
    Ms first_token_ms_;
    Ms per_token_ms_;
};

/// Text handed to a TTS engine at a point in time.
struct TtsSubmission {
    Ms t_ms = 0;
    std::string text;
};

/// One synthesized audio chunk. `ready_ms` is when synthesis finished;
/// `play_start_ms` stays -1 until a playback plan assigns it.
struct AudioChunk {
    std::string stream; // "connective" or "main"
    Ms ready_ms = 0;
    Ms play_start_ms = -1;
    Ms duration_ms = 0;
    std::string text;
};

inline constexpr Ms kPlayUnassigned = -1;

class TtsEngine {
public:
    virtual ~TtsEngine() = default;
    /// Synthesize the submissions of one logical stream, in order. Returned
    /// chunks have ready times and durations; playback is assigned later.
    virtual std::vector<AudioChunk> synthesize(const std::string& stream,
                                               std::span<const TtsSubmission> submissions) const = 0;
};

/// Chunked synthesis with a fixed first-chunk latency: a submission at t has
/// its first chunk ready at t + first_chunk_ms, later chunks follow at the
/// configured synthesis rate. A text's speech length is estimated at
/// ms_audio_per_char per character; every chunk plays for chunk_duration_ms
/// (the trailing chunk is padded). Empty text produces no chunks.
class SimulatedTts final : public TtsEngine {
public:
    explicit SimulatedTts(const TimingConfig& timing);
    std::vector<AudioChunk> synthesize(const std::string& stream,
                                       std::span<const TtsSubmission> submissions) const override;

private:
    TimingConfig timing_;
};

/// Assign contiguous playback times to a chunk sequence: the stream starts no
/// earlier than `not_before` and no earlier than guarantees every chunk is
/// ready by its slot (no mid-stream stall, ever). Returns the chunks with
/// play_start_ms set. Chunks must be in non-decreasing ready order.
std::vector<AudioChunk> schedule_playback(std::vector<AudioChunk> chunks, Ms not_before);

struct ConcatResult {
    std::vector<AudioChunk> timeline; // connective chunks then main chunks
    Ms main_start_ms = -1;            // -1 when there is no main stream
    Ms handoff_gap_ms = -1;           // silence between streams; -1 if either absent
};

/// Splice the connective stream (already play-scheduled) in front of the main
/// stream. Main playback starts at max(end of connective playback, earliest
/// feasible main start, floor_ms); with no connective it starts at its
/// feasible start (first-chunk ready time when synthesis keeps up). If main
/// arrives pre-scheduled, overlap with the connective is a validation error.
ConcatResult concat_streams(std::span<const AudioChunk> connective,
                            std::vector<AudioChunk> main,
                            Ms floor_ms = 0);

/// Frequency-table small model built from dialogue samples. Keys are every
/// token prefix of each sample's user turn, so streaming partials of a known
/// utterance hit progressively richer rows. Seen-prefix candidates carry
/// near-point-mass per-token distributions; unseen prefixes back off to the
/// global connective marginal with flattened (higher-entropy) distributions.
/// Candidates open with the "<c>" marker token the wire format uses to tag a
/// connective span; markers never enter entropy statistics.
class TabularSmallModel final : public SmallModel {
public:
    /// `smoothing` is the Laplace alpha for per-token distributions;
    /// `backoff_flatten` in [0,1] mixes backoff rows toward uniform.
    TabularSmallModel(std::span<const DialogueSample> samples,
                      double smoothing = 0.05,
                      double backoff_flatten = 0.5);

    std::vector<ConnectiveCandidate> top_candidates(const std::string& transcript,
                                                    int m) const override;
    std::vector<std::string> short_response(const std::string& transcript) const override;

    static constexpr const char* kMarker = "<c>";

private:
    struct Row {
        std::map<std::string, int> connective_counts; // joined-token text -> count
        std::vector<std::string> response;            // representative short reply
    };

    std::vector<ConnectiveCandidate> build_candidates(const Row& row, int m, bool flattened) const;

    std::map<std::string, Row> rows_; // prefix key -> stats
    Row global_;                      // marginal over all samples
    std::shared_ptr<const Vocabulary> vocab_;
    double smoothing_;
    double backoff_flatten_;
};

} // namespace ddtsr
