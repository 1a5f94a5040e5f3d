#include "ddtsr/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include "ddtsr/errors.hpp"

namespace ddtsr {

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::ssc: return "ssc";
    case Strategy::sdc: return "sdc";
    case Strategy::ddtsr: return "ddtsr";
    }
    throw ValidationError("unrepresentable strategy value");
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "ssc") return Strategy::ssc;
    if (name == "sdc") return Strategy::sdc;
    if (name == "ddtsr") return Strategy::ddtsr;
    throw ValidationError("unknown strategy: '" + name + "' (expected ssc, sdc, or ddtsr)");
}

const TraceEvent* SessionTrace::first_event(const std::string& kind) const {
    for (const auto& e : events)
        if (e.kind == kind) return &e;
    return nullptr;
}

const TraceEvent* SessionTrace::last_event(const std::string& kind) const {
    const TraceEvent* found = nullptr;
    for (const auto& e : events)
        if (e.kind == kind) found = &e;
    return found;
}

std::size_t SessionTrace::count_events(const std::string& kind) const {
    std::size_t n = 0;
    for (const auto& e : events)
        if (e.kind == kind) ++n;
    return n;
}

void SessionTrace::validate() const {
    if (id.empty()) throw ValidationError("trace: empty session id");
    if (!error.empty()) return; // failed sessions carry whatever was recorded
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i].t_ms < events[i - 1].t_ms)
            throw ValidationError("trace " + id + ": events not sorted by time");
    }
    const TraceEvent* input_close = last_event(ev::input_chunk_sent);
    if (input_close == nullptr)
        throw ValidationError("trace " + id + ": no input_chunk_sent events");
    if (input_close->t_ms != input_audio_ms)
        throw ValidationError("trace " + id + ": input does not close at input_audio_ms");
    if (count_events(ev::asr_final) != 1)
        throw ValidationError("trace " + id + ": expected exactly one asr_final");
    if (count_events(ev::large_invoked) != 1)
        throw ValidationError("trace " + id + ": expected exactly one large_invoked");
    std::size_t commits = count_events(ev::commit);
    if (commits > 1) throw ValidationError("trace " + id + ": more than one commit");
    if ((commits == 1) != connective_emitted)
        throw ValidationError("trace " + id + ": commit events disagree with connective_emitted");
    if (count_events(ev::connective_text) != commits)
        throw ValidationError("trace " + id + ": connective_text/commit mismatch");
    for (const auto& e : events) {
        if (e.kind == ev::audio_play_start && e.t_ms < input_audio_ms)
            throw ValidationError("trace " + id + ": audio playback before input ended");
    }
}

std::string SessionTrace::to_jsonl() const {
    nlohmann::ordered_json header;
    header["type"] = "session";
    header["id"] = id;
    header["strategy"] = to_string(strategy);
    header["input_audio_ms"] = input_audio_ms;
    header["connective_emitted"] = connective_emitted;
    if (handoff_gap_ms >= 0)
        header["handoff_gap_ms"] = handoff_gap_ms;
    else
        header["handoff_gap_ms"] = nullptr;
    if (error.empty())
        header["error"] = nullptr;
    else
        header["error"] = error;

    std::ostringstream out;
    out << header.dump() << "\n";
    for (const auto& e : events) {
        nlohmann::ordered_json line;
        line["type"] = "event";
        line["t_ms"] = e.t_ms;
        line["kind"] = e.kind;
        line["data"] = e.data;
        out << line.dump() << "\n";
    }
    return out.str();
}

namespace {

struct EventLog {
    std::vector<TraceEvent> events;

    void add(const char* kind, Ms t, nlohmann::ordered_json data) {
        events.push_back(TraceEvent{kind, t, std::move(data)});
    }

    // Virtual-clock tie rule: order by timestamp, simultaneous events keep
    // the order they were recorded in.
    std::vector<TraceEvent> sorted() && {
        std::stable_sort(events.begin(), events.end(),
                         [](const TraceEvent& a, const TraceEvent& b) { return a.t_ms < b.t_ms; });
        return std::move(events);
    }
};

bool ends_sentence(const std::string& token) {
    if (token.empty()) return false;
    char c = token.back();
    return c == '.' || c == '!' || c == '?';
}

// Group response tokens into synthesizable units: a unit closes on the first
// sentence-final token or after kMaxUnitTokens tokens, and the tail is
// flushed when generation ends. Each unit is submitted to TTS when its last
// token has arrived.
std::vector<TtsSubmission> synthesis_units(const std::vector<ResponseToken>& tokens) {
    std::vector<TtsSubmission> subs;
    std::vector<std::string> buffer;
    Ms last_t = 0;
    for (const auto& tok : tokens) {
        buffer.push_back(tok.text);
        last_t = tok.t_ms;
        if (ends_sentence(tok.text) || static_cast<int>(buffer.size()) >= kMaxUnitTokens) {
            subs.push_back(TtsSubmission{last_t, join_tokens(buffer)});
            buffer.clear();
        }
    }
    if (!buffer.empty()) subs.push_back(TtsSubmission{last_t, join_tokens(buffer)});
    return subs;
}

void record_audio(EventLog& log, const std::vector<AudioChunk>& timeline) {
    std::size_t index = 0;
    std::string prev_stream;
    for (const auto& chunk : timeline) {
        if (chunk.stream != prev_stream) {
            index = 0;
            prev_stream = chunk.stream;
        }
        nlohmann::ordered_json tag{{"stream", chunk.stream}, {"index", index}};
        log.add(ev::tts_chunk_ready, chunk.ready_ms,
                {{"stream", chunk.stream}, {"index", index}, {"duration_ms", chunk.duration_ms}});
        log.add(ev::audio_play_start, chunk.play_start_ms, tag);
        log.add(ev::audio_play_end, chunk.play_start_ms + chunk.duration_ms, tag);
        ++index;
    }
}

} // namespace

SessionTrace run_session(const Scenario& scenario, Strategy strategy,
                         const SessionComponents& components, const SessionOptions& options) {
    scenario.validate();
    options.policy.validate();
    options.timing.validate();
    if (components.asr == nullptr || components.large == nullptr || components.tts == nullptr)
        throw SessionError("session " + scenario.id + ": missing component");
    if (strategy != Strategy::ssc && components.small == nullptr)
        throw SessionError("session " + scenario.id + ": strategy needs a small model");

    const auto wall_epoch = std::chrono::steady_clock::now();
    auto pace_until = [&](Ms t) {
        if (options.realtime && t > 0)
            std::this_thread::sleep_until(wall_epoch + std::chrono::milliseconds(t));
    };

    SessionTrace trace;
    trace.id = scenario.id;
    trace.strategy = strategy;
    trace.input_audio_ms = scenario.input_audio_ms;

    EventLog log;

    // Input side: one event per audio chunk, closed at the end of input.
    const Ms input_end = scenario.input_audio_ms;
    std::size_t chunk_index = 0;
    for (const auto& chunk : scenario.chunks)
        log.add(ev::input_chunk_sent, chunk.end_ms, {{"index", chunk_index++}});
    if (scenario.chunks.empty() || scenario.chunks.back().end_ms < input_end)
        log.add(ev::input_chunk_sent, input_end, {{"index", chunk_index}});

    // ASR events arrive on the schedule the source dictates.
    const auto hypotheses = components.asr->stream();
    if (hypotheses.empty() || !hypotheses.back().hyp.is_final)
        throw SessionError("session " + scenario.id + ": ASR stream has no final hypothesis");
    const TimedHypothesis& final_hyp = hypotheses.back();
    for (const auto& th : hypotheses) {
        log.add(th.hyp.is_final ? ev::asr_final : ev::asr_partial, th.t_ms,
                {{"step", th.hyp.step}, {"text", th.hyp.text}});
        if (th.hyp.is_final && &th != &final_hyp)
            throw SessionError("session " + scenario.id + ": final hypothesis not last");
    }

    // Connective track. The small model evaluates hypotheses one at a time;
    // an evaluation occupies it for small_step_ms, partials that arrive while
    // it is busy are dropped (the next partial supersedes them anyway), and
    // the final transcript is always evaluated, queued behind any evaluation
    // still in flight. The first firing decision commits; nothing is
    // evaluated after a commit.
    std::optional<CommitDecision> committed;
    Ms commit_at = -1;
    const Ms step_ms = options.timing.small_step_ms;
    auto evaluate_at = [&](const PartialHypothesis& hyp, Ms start) -> Ms {
        const Ms done = start + step_ms;
        CommitDecision dec = evaluate_step(*components.small, hyp, options.policy);
        log.add(ev::small_eval, done,
                {{"step", hyp.step}, {"conf", dec.conf}, {"sig", dec.sig}});
        if (dec.sig && !committed) {
            committed = std::move(dec);
            commit_at = done;
        }
        return done;
    };
    if (strategy == Strategy::ddtsr) {
        Ms busy_until = 0;
        for (const auto& th : hypotheses) {
            if (th.hyp.is_final) break;
            if (th.hyp.text.empty()) continue;
            if (th.t_ms < busy_until) continue;
            busy_until = evaluate_at(th.hyp, th.t_ms);
            if (committed) break;
        }
        if (!committed)
            evaluate_at(final_hyp.hyp, std::max(final_hyp.t_ms, busy_until));
    } else if (strategy == Strategy::sdc) {
        evaluate_at(final_hyp.hyp, final_hyp.t_ms);
    }

    std::vector<AudioChunk> connective_audio;
    if (committed) {
        const std::string text = committed->chosen->text();
        log.add(ev::commit, commit_at,
                {{"step", committed->step}, {"conf", committed->conf}, {"text", text}});
        log.add(ev::connective_text, commit_at, {{"text", text}});
        std::vector<TtsSubmission> subs{TtsSubmission{commit_at, text}};
        auto chunks = components.tts->synthesize("connective", subs);
        connective_audio = schedule_playback(std::move(chunks), input_end);
        trace.connective_emitted = true;
    }

    // Response track: the large model starts from the final transcript, its
    // tokens are grouped into synthesizable units, and the resulting audio
    // queues behind the connective (and never before the input ends).
    pace_until(final_hyp.t_ms);
    log.add(ev::large_invoked, final_hyp.t_ms, {{"transcript", final_hyp.hyp.text}});
    const auto tokens = components.large->generate(final_hyp.hyp.text, final_hyp.t_ms);
    if (!tokens.empty())
        log.add(ev::large_first_token, tokens.front().t_ms, {{"text", tokens.front().text}});
    auto main_chunks = components.tts->synthesize("main", synthesis_units(tokens));
    ConcatResult merged = concat_streams(connective_audio, std::move(main_chunks), input_end);
    if (trace.connective_emitted && merged.main_start_ms >= 0) {
        trace.handoff_gap_ms = merged.handoff_gap_ms;
        log.add(ev::handoff, merged.main_start_ms, {{"gap_ms", merged.handoff_gap_ms}});
    }
    record_audio(log, merged.timeline);

    trace.events = std::move(log).sorted();
    trace.validate();
    return trace;
}

std::vector<SessionTrace> run_batch(std::span<const Scenario> scenarios, Strategy strategy,
                                    const SessionFactory& factory, int jobs) {
    if (jobs < 1) throw ValidationError("run_batch: jobs must be at least 1");
    if (!factory) throw ValidationError("run_batch: no session factory");

    std::vector<SessionTrace> traces(scenarios.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= scenarios.size()) return;
            const Scenario& scenario = scenarios[i];
            try {
                SessionBundle bundle = factory(scenario);
                SessionComponents view{bundle.asr.get(), bundle.small.get(), bundle.large.get(),
                                       bundle.tts.get()};
                traces[i] = run_session(scenario, strategy, view, bundle.options);
            } catch (const std::exception& e) {
                SessionTrace failed;
                failed.id = scenario.id;
                failed.strategy = strategy;
                failed.input_audio_ms = scenario.input_audio_ms;
                failed.error = e.what();
                failed.events.push_back(
                    TraceEvent{ev::error, 0, {{"message", std::string(e.what())}}});
                traces[i] = std::move(failed);
            }
        }
    };

    const int n = static_cast<int>(std::min<std::size_t>(jobs, scenarios.size()));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n);
        for (int i = 0; i < n; ++i)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    return traces;
}

} // namespace ddtsr
