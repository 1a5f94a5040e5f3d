#pragma once

// Session orchestration: wires an ASR stream, the connective-gating small
// model, a large responder, and TTS into one timed dialogue turn, and emits
// an event trace suitable for latency analysis.
//
// Time is simulated on a virtual clock: every component reports when its
// outputs become available, events are collected and then stable-sorted by
// timestamp, so simultaneous events keep their insertion order. In realtime
// mode the runner additionally sleeps until the large model's invocation
// time before calling it, so a remote endpoint is contacted at the wall-time
// offset the session dictates; scripted components behave identically in
// both modes.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddtsr/commit_policy.hpp"
#include "ddtsr/components.hpp"

namespace ddtsr {

enum class Strategy {
    ssc,   // single stream: large model only, invoked once ASR finalizes
    sdc,   // dual stream: small model gates a connective, but only on the final transcript
    ddtsr, // dual track: small model gates on every partial, large model in parallel
};

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

// A synthesizable unit of the main response: tokens accumulate until one
// ends a sentence or the unit reaches this many tokens, whichever first.
inline constexpr int kMaxUnitTokens = 12;

// Event kinds appearing in a session trace.
namespace ev {
inline constexpr const char* input_chunk_sent = "input_chunk_sent";
inline constexpr const char* asr_partial = "asr_partial";
inline constexpr const char* asr_final = "asr_final";
inline constexpr const char* small_eval = "small_eval";
inline constexpr const char* commit = "commit";
inline constexpr const char* connective_text = "connective_text";
inline constexpr const char* large_invoked = "large_invoked";
inline constexpr const char* large_first_token = "large_first_token";
inline constexpr const char* tts_chunk_ready = "tts_chunk_ready";
inline constexpr const char* audio_play_start = "audio_play_start";
inline constexpr const char* audio_play_end = "audio_play_end";
inline constexpr const char* handoff = "handoff";
inline constexpr const char* error = "error";
} // namespace ev

struct TraceEvent {
    std::string kind;
    Ms t_ms = 0;
    nlohmann::ordered_json data = nlohmann::ordered_json::object();
};

struct SessionTrace {
    std::string id;
    Strategy strategy = Strategy::ssc;
    Ms input_audio_ms = 0;
    bool connective_emitted = false;
    Ms handoff_gap_ms = -1; // -1: no handoff happened
    std::string error;      // empty on a clean run
    std::vector<TraceEvent> events;

    const TraceEvent* first_event(const std::string& kind) const;
    const TraceEvent* last_event(const std::string& kind) const;
    std::size_t count_events(const std::string& kind) const;

    // Structural checks for a clean trace: timestamps sorted, input closed
    // at input_audio_ms, exactly one final hypothesis and one large-model
    // invocation, commit/connective pairing, and no audio before input ends.
    void validate() const;

    // One header line followed by one line per event; byte-stable for
    // identical traces.
    std::string to_jsonl() const;
};

// Non-owning view of the parts a session needs. `small` may be null for
// strategies that never consult it. The large model is mutable because a
// remote implementation owns a connection.
struct SessionComponents {
    const AsrSource* asr = nullptr;
    const SmallModel* small = nullptr;
    LargeModel* large = nullptr;
    const TtsEngine* tts = nullptr;
};

struct SessionOptions {
    PolicyConfig policy;
    TimingConfig timing;
    bool realtime = false;
};

SessionTrace run_session(const Scenario& scenario, Strategy strategy,
                         const SessionComponents& components, const SessionOptions& options);

// Owned per-scenario component set, produced by a factory so batches can
// honor per-scenario timing overrides and stay thread-safe without sharing.
struct SessionBundle {
    std::unique_ptr<AsrSource> asr;
    std::unique_ptr<SmallModel> small;
    std::unique_ptr<LargeModel> large;
    std::unique_ptr<TtsEngine> tts;
    SessionOptions options;
};

using SessionFactory = std::function<SessionBundle(const Scenario&)>;

// Runs every scenario under one strategy. Results keep scenario order
// regardless of `jobs`. A session that throws becomes a trace with the
// `error` field set and a single error event instead of failing the batch.
std::vector<SessionTrace> run_batch(std::span<const Scenario> scenarios, Strategy strategy,
                                    const SessionFactory& factory, int jobs = 1);

} // namespace ddtsr
