#pragma once

// Latency accounting over session traces.
//
// For one session, with t_input_end the last input chunk, t_trigger the
// commit (when a connective was emitted) or the large-model invocation
// (otherwise), t_resp = max(t_input_end, t_trigger), and t_audio the first
// audio playback:
//
//   perception = t_resp  - t_input_end   (deciding what to say)
//   reaction   = t_audio - t_resp        (getting sound out)
//   waiting    = t_audio - t_input_end   (what the user actually endures)
//
// waiting == perception + reaction holds exactly in integer milliseconds.
//
// Aggregation reports each metric three ways: Opt averages the sessions
// where a connective was committed, Rem averages the remaining sessions,
// Avg averages everything.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddtsr/orchestrator.hpp"

namespace ddtsr {

struct LatencyBreakdown {
    std::string id;
    Ms input_audio_ms = 0;
    Ms perception_ms = 0;
    Ms reaction_ms = 0;
    Ms waiting_ms = 0;
    bool connective_emitted = false;
};

// Throws MeasurementError when the trace failed or lacks a needed event,
// naming the missing event kind.
LatencyBreakdown latency_breakdown(const SessionTrace& trace);

struct AggregateTags {
    std::string dataset;
    std::string strategy;
    std::string model;
};

struct MetricSummary {
    std::optional<double> opt; // mean over connective sessions
    std::optional<double> rem; // mean over the rest
    std::optional<double> avg; // mean over all
};

struct AggregateRow {
    AggregateTags tags;
    std::size_t sessions = 0;
    std::size_t connective_sessions = 0;
    MetricSummary perception;
    MetricSummary reaction;
    MetricSummary waiting;
};

AggregateRow aggregate(std::span<const LatencyBreakdown> breakdowns, AggregateTags tags);

struct AggregateReport {
    std::vector<AggregateRow> rows;
};

std::string render_markdown(const AggregateReport& report);
std::string render_csv(const AggregateReport& report);

// Input-length strata: short/medium/long turns, split at 3 and 6 seconds.
inline constexpr Ms kBucketEdgesMs[] = {3000, 6000};
std::string bucket_label(Ms input_audio_ms);

struct StratumRow {
    std::string bucket;
    std::size_t sessions = 0; // per strategy; strategies must align
    std::optional<double> waiting_ssc;
    std::optional<double> waiting_sdc;
    std::optional<double> waiting_ddtsr;
    std::optional<double> reduction; // 1 - ddtsr/ssc, when both exist
};

struct StratifiedReport {
    std::vector<StratumRow> rows; // one per bucket, in length order
};

// Per-bucket mean waiting per strategy plus the headline reduction. All
// strategies present must have run the same scenarios, so per-bucket session
// counts must match; a mismatch throws MeasurementError.
StratifiedReport stratify(const std::map<Strategy, std::vector<LatencyBreakdown>>& by_strategy);

std::string render_markdown(const StratifiedReport& report);
std::string render_csv(const StratifiedReport& report);

// Long-form CSV (bucket,strategy,metric,value) of per-bucket mean
// perception/reaction/waiting for each strategy — plotting input.
std::string plot_data_csv(const std::map<Strategy, std::vector<LatencyBreakdown>>& by_strategy);

} // namespace ddtsr
