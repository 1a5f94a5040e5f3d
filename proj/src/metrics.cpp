#include "ddtsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ddtsr/errors.hpp"

namespace ddtsr {

namespace {

const TraceEvent* require_event(const SessionTrace& trace, const char* kind, bool last = false) {
    const TraceEvent* e = last ? trace.last_event(kind) : trace.first_event(kind);
    if (e == nullptr)
        throw MeasurementError("session " + trace.id + ": trace has no '" + kind + "' event");
    return e;
}

std::string ms_cell(const std::optional<double>& v) {
    if (!v) return "-";
    return std::to_string(std::llround(*v));
}

std::string fixed1(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::optional<double> mean_of(const std::vector<double>& values) {
    if (values.empty()) return std::nullopt;
    double sum = 0.0;
    for (double v : values)
        sum += v;
    return sum / static_cast<double>(values.size());
}

struct Cell {
    std::size_t sessions = 0;
    std::optional<double> perception;
    std::optional<double> reaction;
    std::optional<double> waiting;
};

Cell bucket_cell(const std::vector<LatencyBreakdown>& breakdowns, const std::string& bucket) {
    std::vector<double> p, r, w;
    for (const auto& b : breakdowns) {
        if (bucket_label(b.input_audio_ms) != bucket) continue;
        p.push_back(static_cast<double>(b.perception_ms));
        r.push_back(static_cast<double>(b.reaction_ms));
        w.push_back(static_cast<double>(b.waiting_ms));
    }
    return Cell{p.size(), mean_of(p), mean_of(r), mean_of(w)};
}

const std::vector<std::string>& bucket_order() {
    static const std::vector<std::string> order{"0-3s", "3-6s", "6s+"};
    return order;
}

} // namespace

LatencyBreakdown latency_breakdown(const SessionTrace& trace) {
    if (!trace.error.empty())
        throw MeasurementError("session " + trace.id + " failed: " + trace.error);

    const Ms input_end = require_event(trace, ev::input_chunk_sent, /*last=*/true)->t_ms;
    const Ms trigger = trace.connective_emitted ? require_event(trace, ev::commit)->t_ms
                                                : require_event(trace, ev::large_invoked)->t_ms;
    const Ms first_audio = require_event(trace, ev::audio_play_start)->t_ms;
    const Ms response_start = std::max(input_end, trigger);

    LatencyBreakdown b;
    b.id = trace.id;
    b.input_audio_ms = trace.input_audio_ms;
    b.perception_ms = response_start - input_end;
    b.reaction_ms = first_audio - response_start;
    b.waiting_ms = first_audio - input_end;
    b.connective_emitted = trace.connective_emitted;
    if (b.reaction_ms < 0)
        throw MeasurementError("session " + trace.id + ": audio precedes the response trigger");
    return b;
}

AggregateRow aggregate(std::span<const LatencyBreakdown> breakdowns, AggregateTags tags) {
    if (breakdowns.empty())
        throw MeasurementError("aggregate: no sessions to summarize");

    std::vector<double> p_opt, p_rem, p_all, r_opt, r_rem, r_all, w_opt, w_rem, w_all;
    for (const auto& b : breakdowns) {
        const auto p = static_cast<double>(b.perception_ms);
        const auto r = static_cast<double>(b.reaction_ms);
        const auto w = static_cast<double>(b.waiting_ms);
        (b.connective_emitted ? p_opt : p_rem).push_back(p);
        (b.connective_emitted ? r_opt : r_rem).push_back(r);
        (b.connective_emitted ? w_opt : w_rem).push_back(w);
        p_all.push_back(p);
        r_all.push_back(r);
        w_all.push_back(w);
    }

    AggregateRow row;
    row.tags = std::move(tags);
    row.sessions = breakdowns.size();
    row.connective_sessions = p_opt.size();
    row.perception = MetricSummary{mean_of(p_opt), mean_of(p_rem), mean_of(p_all)};
    row.reaction = MetricSummary{mean_of(r_opt), mean_of(r_rem), mean_of(r_all)};
    row.waiting = MetricSummary{mean_of(w_opt), mean_of(w_rem), mean_of(w_all)};
    return row;
}

std::string render_markdown(const AggregateReport& report) {
    std::ostringstream out;
    out << "| Dataset | Strategy | Model | Sessions | Perception Opt | Perception Rem "
           "| Perception Avg | Reaction Opt | Reaction Rem | Reaction Avg "
           "| Waiting Opt | Waiting Rem | Waiting Avg |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& row : report.rows) {
        auto tag = [](const std::string& s) { return s.empty() ? std::string("-") : s; };
        out << "| " << tag(row.tags.dataset) << " | " << tag(row.tags.strategy) << " | "
            << tag(row.tags.model) << " | " << row.sessions;
        for (const auto* m : {&row.perception, &row.reaction, &row.waiting})
            out << " | " << ms_cell(m->opt) << " | " << ms_cell(m->rem) << " | "
                << ms_cell(m->avg);
        out << " |\n";
    }
    return out.str();
}

std::string render_csv(const AggregateReport& report) {
    std::ostringstream out;
    out << "dataset,strategy,model,sessions,connective_sessions,"
           "perception_opt,perception_rem,perception_avg,"
           "reaction_opt,reaction_rem,reaction_avg,"
           "waiting_opt,waiting_rem,waiting_avg\n";
    for (const auto& row : report.rows) {
        out << row.tags.dataset << ',' << row.tags.strategy << ',' << row.tags.model << ','
            << row.sessions << ',' << row.connective_sessions;
        for (const auto* m : {&row.perception, &row.reaction, &row.waiting})
            out << ',' << ms_cell(m->opt) << ',' << ms_cell(m->rem) << ',' << ms_cell(m->avg);
        out << '\n';
    }
    return out.str();
}

std::string bucket_label(Ms input_audio_ms) {
    if (input_audio_ms < kBucketEdgesMs[0]) return "0-3s";
    if (input_audio_ms < kBucketEdgesMs[1]) return "3-6s";
    return "6s+";
}

StratifiedReport stratify(const std::map<Strategy, std::vector<LatencyBreakdown>>& by_strategy) {
    StratifiedReport report;
    for (const auto& bucket : bucket_order()) {
        StratumRow row;
        row.bucket = bucket;
        std::optional<std::size_t> expected;
        for (const auto& [strategy, breakdowns] : by_strategy) {
            Cell cell = bucket_cell(breakdowns, bucket);
            if (expected && *expected != cell.sessions)
                throw MeasurementError("stratify: strategies ran different scenario sets in "
                                       "bucket " + bucket);
            expected = cell.sessions;
            row.sessions = cell.sessions;
            switch (strategy) {
            case Strategy::ssc: row.waiting_ssc = cell.waiting; break;
            case Strategy::sdc: row.waiting_sdc = cell.waiting; break;
            case Strategy::ddtsr: row.waiting_ddtsr = cell.waiting; break;
            }
        }
        if (row.waiting_ssc && row.waiting_ddtsr && *row.waiting_ssc > 0.0)
            row.reduction = 1.0 - *row.waiting_ddtsr / *row.waiting_ssc;
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string render_markdown(const StratifiedReport& report) {
    std::ostringstream out;
    out << "| Bucket | Sessions | Waiting SSC | Waiting SDC | Waiting DDTSR | Reduction |\n";
    out << "|---|---|---|---|---|---|\n";
    for (const auto& row : report.rows) {
        out << "| " << row.bucket << " | " << row.sessions << " | " << ms_cell(row.waiting_ssc)
            << " | " << ms_cell(row.waiting_sdc) << " | " << ms_cell(row.waiting_ddtsr) << " | ";
        if (row.reduction)
            out << fixed1(*row.reduction * 100.0) << "%";
        else
            out << "-";
        out << " |\n";
    }
    return out.str();
}

std::string render_csv(const StratifiedReport& report) {
    std::ostringstream out;
    out << "bucket,sessions,waiting_ssc,waiting_sdc,waiting_ddtsr,reduction\n";
    for (const auto& row : report.rows) {
        out << row.bucket << ',' << row.sessions << ',' << ms_cell(row.waiting_ssc) << ','
            << ms_cell(row.waiting_sdc) << ',' << ms_cell(row.waiting_ddtsr) << ',';
        out << (row.reduction ? fixed4(*row.reduction) : std::string("-"));
        out << '\n';
    }
    return out.str();
}

std::string plot_data_csv(const std::map<Strategy, std::vector<LatencyBreakdown>>& by_strategy) {
    std::ostringstream out;
    out << "bucket,strategy,metric,value\n";
    for (const auto& bucket : bucket_order()) {
        for (const auto& [strategy, breakdowns] : by_strategy) {
            Cell cell = bucket_cell(breakdowns, bucket);
            if (cell.sessions == 0) continue;
            const std::string name = to_string(strategy);
            out << bucket << ',' << name << ",perception," << fixed3(*cell.perception) << '\n';
            out << bucket << ',' << name << ",reaction," << fixed3(*cell.reaction) << '\n';
            out << bucket << ',' << name << ",waiting," << fixed3(*cell.waiting) << '\n';
        }
    }
    return out.str();
}

} // namespace ddtsr
