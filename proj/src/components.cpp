#include "ddtsr/components.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace ddtsr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// timing

TimingConfig TimingConfig::from_config(const KeyValueConfig& cfg) {
    TimingConfig t;
    t.asr_final_tail_ms = cfg.get_int("asr.final_tail_ms", t.asr_final_tail_ms);
    t.llm_first_token_ms = cfg.get_int("llm.first_token_ms", t.llm_first_token_ms);
    t.llm_per_token_ms = cfg.get_int("llm.per_token_ms", t.llm_per_token_ms);
    t.tts_first_chunk_ms = cfg.get_int("tts.first_chunk_ms", t.tts_first_chunk_ms);
    t.tts_chunk_duration_ms = cfg.get_int("tts.chunk_duration_ms", t.tts_chunk_duration_ms);
    t.tts_ms_audio_per_char = cfg.get_int("tts.ms_audio_per_char", t.tts_ms_audio_per_char);
    t.tts_ms_audio_per_ms_synth =
        cfg.get_double("tts.ms_audio_per_ms_synth", t.tts_ms_audio_per_ms_synth);
    t.small_step_ms = cfg.get_int("small.step_ms", t.small_step_ms);
    t.validate();
    return t;
}

TimingConfig TimingConfig::overridden(const KeyValueConfig& overrides) const {
    KeyValueConfig merged;
    merged.set("asr.final_tail_ms", std::to_string(asr_final_tail_ms));
    merged.set("llm.first_token_ms", std::to_string(llm_first_token_ms));
    merged.set("llm.per_token_ms", std::to_string(llm_per_token_ms));
    merged.set("tts.first_chunk_ms", std::to_string(tts_first_chunk_ms));
    merged.set("tts.chunk_duration_ms", std::to_string(tts_chunk_duration_ms));
    merged.set("tts.ms_audio_per_char", std::to_string(tts_ms_audio_per_char));
    merged.set("tts.ms_audio_per_ms_synth", std::to_string(tts_ms_audio_per_ms_synth));
    merged.set("small.step_ms", std::to_string(small_step_ms));
    merged.merge(overrides);
    return from_config(merged);
}

void TimingConfig::validate() const {
    if (asr_final_tail_ms < 0 || llm_first_token_ms < 0 || llm_per_token_ms < 0 ||
        tts_first_chunk_ms < 0 || small_step_ms < 0)
        throw ValidationError("timing: latencies must be non-negative");
    if (tts_chunk_duration_ms <= 0)
        throw ValidationError("timing: tts.chunk_duration_ms must be positive");
    if (tts_ms_audio_per_char <= 0)
        throw ValidationError("timing: tts.ms_audio_per_char must be positive");
    if (!(tts_ms_audio_per_ms_synth > 0.0))
        throw ValidationError("timing: tts.ms_audio_per_ms_synth must be positive");
}

// ---------------------------------------------------------------------------
// scenarios

void Scenario::validate() const {
    if (id.empty())
        throw ValidationError("scenario has an empty id");
    if (input_audio_ms <= 0)
        throw ValidationError("scenario " + id + ": input_audio_ms must be positive");
    if (final_transcript.empty())
        throw ValidationError("scenario " + id + ": final_transcript is empty");
    Ms prev = 0;
    for (const auto& ch : chunks) {
        if (ch.end_ms < prev)
            throw ValidationError("scenario " + id + ": chunk end times must be non-decreasing");
        if (ch.end_ms > input_audio_ms)
            throw ValidationError("scenario " + id + ": chunk ends after input_audio_ms");
        prev = ch.end_ms;
    }
}

std::vector<Scenario> load_scenarios(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open scenario file: " + path);
    std::vector<Scenario> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const std::string where = path + ":" + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(where + ": bad JSON: " + e.what());
        }
        Scenario s;
        try {
            s.id = j.at("id").get<std::string>();
            s.input_audio_ms = j.at("input_audio_ms").get<Ms>();
            s.final_transcript = j.at("final_transcript").get<std::string>();
            if (j.contains("chunks")) {
                for (const auto& c : j.at("chunks")) {
                    ScenarioChunk ch;
                    ch.end_ms = c.at("end_ms").get<Ms>();
                    ch.partial = c.value("partial", std::string{});
                    s.chunks.push_back(std::move(ch));
                }
            }
            if (j.contains("reference")) {
                const auto& ref = j.at("reference");
                s.reference_connective = ref.value("connective", std::string{});
                if (ref.contains("response")) {
                    for (const auto& tok : ref.at("response"))
                        s.reference_response.push_back(tok.get<std::string>());
                }
            }
            if (j.contains("timing")) {
                for (const auto& [k, v] : j.at("timing").items()) {
                    if (v.is_string())
                        s.timing_overrides.set(k, v.get<std::string>());
                    else
                        s.timing_overrides.set(k, v.dump());
                }
            }
        } catch (const json::exception& e) {
            throw ValidationError(where + ": " + e.what());
        }
        try {
            s.validate();
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// ASR

ScriptedAsrStream::ScriptedAsrStream(Scenario scenario, const TimingConfig& timing)
    : scenario_(std::move(scenario)), final_tail_ms_(timing.asr_final_tail_ms) {
    scenario_.validate();
}

std::vector<TimedHypothesis> ScriptedAsrStream::stream() const {
    std::vector<TimedHypothesis> out;
    int step = 0;
    for (const auto& ch : scenario_.chunks) {
        TimedHypothesis th;
        th.hyp.step = ++step;
        th.hyp.text = ch.partial;
        th.hyp.audio_offset_ms = ch.end_ms;
        th.hyp.is_final = false;
        th.t_ms = ch.end_ms;
        out.push_back(std::move(th));
    }
    TimedHypothesis fin;
    fin.hyp.step = ++step;
    fin.hyp.text = scenario_.final_transcript;
    fin.hyp.audio_offset_ms = scenario_.input_audio_ms;
    fin.hyp.is_final = true;
    fin.t_ms = scenario_.input_audio_ms + final_tail_ms_;
    out.push_back(std::move(fin));
    return out;
}

// ---------------------------------------------------------------------------
// large model

ScriptedLargeModel::ScriptedLargeModel(std::map<std::string, std::vector<std::string>> responses,
                                       const TimingConfig& timing,
                                       std::vector<std::string> fallback)
    : responses_(std::move(responses)),
      fallback_(std::move(fallback)),
      first_token_ms_(timing.llm_first_token_ms),
      per_token_ms_(timing.llm_per_token_ms) {
    if (fallback_.empty())
        throw ValidationError("scripted large model needs a non-empty fallback response");
}

std::vector<ResponseToken> ScriptedLargeModel::generate(const std::string& transcript, Ms t0_ms) {
    auto it = responses_.find(transcript);
    const auto& tokens = it == responses_.end() ? fallback_ : it->second;
    std::vector<ResponseToken> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i)
        out.push_back({tokens[i], t0_ms + first_token_ms_ + static_cast<Ms>(i) * per_token_ms_});
    return out;
}

// ---------------------------------------------------------------------------
// TTS

SimulatedTts::SimulatedTts(const TimingConfig& timing) : timing_(timing) {
    timing_.validate();
}

std::vector<AudioChunk> SimulatedTts::synthesize(const std::string& stream,
                                                 std::span<const TtsSubmission> submissions) const {
    std::vector<AudioChunk> out;
    Ms prev_ready = 0;
    Ms prev_t = 0;
    bool has_prev = false;
    for (const auto& sub : submissions) {
        if (has_prev && sub.t_ms < prev_t)
            throw ValidationError("tts submissions must be in non-decreasing time order");
        prev_t = sub.t_ms;
        has_prev = true;
        if (sub.text.empty())
            continue; // nothing to say, nothing to synthesize
        const Ms audio_total =
            static_cast<Ms>(sub.text.size()) * timing_.tts_ms_audio_per_char;
        const Ms chunk_ms = timing_.tts_chunk_duration_ms;
        const auto n_chunks = static_cast<std::size_t>((audio_total + chunk_ms - 1) / chunk_ms);
        const std::size_t chars_per_chunk =
            (sub.text.size() + n_chunks - 1) / n_chunks; // ceil split of the text

        Ms ready = sub.t_ms + timing_.tts_first_chunk_ms;
        if (!out.empty())
            ready = std::max(ready, prev_ready); // synthesis is sequential per stream
        for (std::size_t i = 0; i < n_chunks; ++i) {
            Ms covered = std::min<Ms>(chunk_ms, audio_total - static_cast<Ms>(i) * chunk_ms);
            if (i > 0) {
                auto synth = static_cast<Ms>(
                    std::ceil(static_cast<double>(covered) / timing_.tts_ms_audio_per_ms_synth));
                ready = prev_ready + synth;
            }
            AudioChunk ch;
            ch.stream = stream;
            ch.ready_ms = ready;
            ch.duration_ms = chunk_ms;
            std::size_t from = i * chars_per_chunk;
            std::size_t len = std::min(chars_per_chunk, sub.text.size() - from);
            ch.text = sub.text.substr(from, len);
            out.push_back(std::move(ch));
            prev_ready = ready;
        }
    }
    return out;
}

std::vector<AudioChunk> schedule_playback(std::vector<AudioChunk> chunks, Ms not_before) {
    if (chunks.empty())
        return chunks;
    Ms prev_ready = chunks.front().ready_ms;
    Ms offset = 0;
    Ms start = not_before;
    for (const auto& ch : chunks) {
        if (ch.ready_ms < prev_ready)
            throw ValidationError("playback: chunk ready times must be non-decreasing");
        if (ch.duration_ms <= 0)
            throw ValidationError("playback: chunk durations must be positive");
        prev_ready = ch.ready_ms;
        start = std::max(start, ch.ready_ms - offset); // no chunk may stall the stream
        offset += ch.duration_ms;
    }
    Ms at = start;
    for (auto& ch : chunks) {
        ch.play_start_ms = at;
        at += ch.duration_ms;
    }
    return chunks;
}

namespace {

// Contiguity and ready-before-play checks for an already-scheduled stream.
void check_scheduled(std::span<const AudioChunk> chunks, const char* which) {
    Ms expect = -1;
    for (const auto& ch : chunks) {
        if (ch.play_start_ms == kPlayUnassigned)
            throw ValidationError(std::string(which) + " stream has an unscheduled chunk");
        if (ch.play_start_ms < ch.ready_ms)
            throw ValidationError(std::string(which) + " stream plays a chunk before it is ready");
        if (expect >= 0 && ch.play_start_ms != expect)
            throw ValidationError(std::string(which) + " stream playback is not contiguous");
        expect = ch.play_start_ms + ch.duration_ms;
    }
}

} // namespace

ConcatResult concat_streams(std::span<const AudioChunk> connective,
                            std::vector<AudioChunk> main,
                            Ms floor_ms) {
    check_scheduled(connective, "connective");
    ConcatResult res;
    res.timeline.assign(connective.begin(), connective.end());

    const Ms conn_end = connective.empty()
                            ? -1
                            : connective.back().play_start_ms + connective.back().duration_ms;
    if (main.empty()) {
        res.main_start_ms = -1;
        res.handoff_gap_ms = -1;
        return res;
    }

    const bool pre_scheduled =
        std::any_of(main.begin(), main.end(),
                    [](const AudioChunk& c) { return c.play_start_ms != kPlayUnassigned; });
    if (pre_scheduled) {
        check_scheduled(main, "main");
        if (conn_end >= 0 && main.front().play_start_ms < conn_end)
            throw ValidationError("main stream playback overlaps the connective stream");
    } else {
        main = schedule_playback(std::move(main), std::max<Ms>(floor_ms, std::max<Ms>(conn_end, 0)));
    }

    res.main_start_ms = main.front().play_start_ms;
    res.handoff_gap_ms = conn_end >= 0 ? res.main_start_ms - conn_end : -1;
    res.timeline.insert(res.timeline.end(), main.begin(), main.end());
    return res;
}

// ---------------------------------------------------------------------------
// tabular small model

TabularSmallModel::TabularSmallModel(std::span<const DialogueSample> samples,
                                     double smoothing,
                                     double backoff_flatten)
    : smoothing_(smoothing), backoff_flatten_(backoff_flatten) {
    if (!(smoothing_ > 0.0))
        throw ValidationError("small model smoothing must be positive");
    if (backoff_flatten_ < 0.0 || backoff_flatten_ > 1.0)
        throw ValidationError("small model backoff_flatten must lie in [0, 1]");

    std::set<std::string> token_set;
    token_set.insert(kMarker);
    for (const auto& s : samples) {
        if (s.c.empty())
            continue;
        for (const auto& tok : s.c)
            token_set.insert(tok);
    }
    vocab_ = std::make_shared<Vocabulary>(
        std::vector<std::string>(token_set.begin(), token_set.end()));

    for (const auto& s : samples) {
        if (s.c.empty())
            continue;
        std::string text = join_tokens(s.c);
        global_.connective_counts[text] += 1;
        if (global_.response.empty() && !s.r.empty())
            global_.response = s.r;
        std::string key;
        for (std::size_t i = 0; i < s.u.size(); ++i) {
            if (i)
                key += ' ';
            key += s.u[i];
            Row& row = rows_[key];
            row.connective_counts[text] += 1;
            if (row.response.empty() && !s.r.empty())
                row.response = s.r;
        }
    }
}

std::vector<ConnectiveCandidate> TabularSmallModel::build_candidates(const Row& row,
                                                                     int m,
                                                                     bool flattened) const {
    // Rank by count desc, then text asc — both deterministic.
    std::vector<std::pair<std::string, int>> ranked(row.connective_counts.begin(),
                                                    row.connective_counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second)
            return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > static_cast<std::size_t>(m))
        ranked.resize(static_cast<std::size_t>(m));

    int total = 0;
    for (const auto& [text, n] : row.connective_counts)
        total += n;

    const std::size_t V = vocab_->size();
    std::vector<ConnectiveCandidate> out;
    for (const auto& [text, count] : ranked) {
        ConnectiveCandidate cand;
        cand.tokens.push_back(kMarker);
        std::vector<double> marker(V, 0.0);
        marker[*vocab_->index_of(kMarker)] = 1.0;
        cand.dists.push_back(TokenDistribution{vocab_, std::move(marker)});
        cand.is_marker.push_back(true);

        auto toks = split_whitespace(text);
        std::vector<std::string> prefix;
        for (const auto& tok : toks) {
            // Distribution over the next token among row connectives that
            // share the current token prefix, Laplace-smoothed over the
            // whole vocabulary.
            std::map<std::string, int> next_counts;
            int sharing = 0;
            for (const auto& [other_text, n] : row.connective_counts) {
                auto other = split_whitespace(other_text);
                if (other.size() <= prefix.size())
                    continue;
                if (!std::equal(prefix.begin(), prefix.end(), other.begin()))
                    continue;
                next_counts[other[prefix.size()]] += n;
                sharing += n;
            }
            std::vector<double> p(V, 0.0);
            double denom = sharing + smoothing_ * static_cast<double>(V);
            for (std::size_t i = 0; i < V; ++i)
                p[i] = smoothing_ / denom;
            for (const auto& [next_tok, n] : next_counts) {
                if (auto idx = vocab_->index_of(next_tok))
                    p[*idx] = (n + smoothing_) / denom;
            }
            if (flattened) {
                const double u = 1.0 / static_cast<double>(V);
                for (auto& x : p)
                    x = (1.0 - backoff_flatten_) * x + backoff_flatten_ * u;
            }
            cand.dists.push_back(TokenDistribution{vocab_, std::move(p)});
            cand.tokens.push_back(tok);
            cand.is_marker.push_back(false);
            prefix.push_back(tok);
        }
        cand.model_score = total > 0 ? static_cast<double>(count) / total : 0.0;
        cand.validate();
        out.push_back(std::move(cand));
    }
    return out;
}

std::vector<ConnectiveCandidate> TabularSmallModel::top_candidates(const std::string& transcript,
                                                                   int m) const {
    if (m < 1)
        throw ValidationError("small model candidate count must be at least 1");
    if (global_.connective_counts.empty())
        return {};
    std::string key = join_tokens(split_whitespace(transcript));
    auto it = rows_.find(key);
    if (it != rows_.end())
        return build_candidates(it->second, m, /*flattened=*/false);
    return build_candidates(global_, m, /*flattened=*/true);
}

std::vector<std::string> TabularSmallModel::short_response(const std::string& transcript) const {
    std::string key = join_tokens(split_whitespace(transcript));
    auto it = rows_.find(key);
    if (it != rows_.end() && !it->second.response.empty())
        return it->second.response;
    return global_.response;
}

} // namespace ddtsr
