#include "ddtsr/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddtsr/components.hpp"
#include "ddtsr/config.hpp"
#include "ddtsr/core_math.hpp"
#include "ddtsr/errors.hpp"
#include "ddtsr/metrics.hpp"
#include "ddtsr/miner.hpp"
#include "ddtsr/orchestrator.hpp"
#include "ddtsr/remote_llm.hpp"

namespace ddtsr::cli {

namespace {

namespace fs = std::filesystem;

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write file: " + path.string());
    f << content;
}

std::vector<std::int64_t> parse_int_list(const std::string& text, const std::string& flag) {
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoll(part, &used));
            if (used != part.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ConfigError(flag + " expects comma-separated integers, got '" + text + "'");
        }
    }
    if (out.empty()) throw ConfigError(flag + " must not be empty");
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ConfigError(flag + " expects comma-separated numbers, got '" + text + "'");
        }
    }
    return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string scenarios;
    std::string strategy = "all";
    std::string config;
    std::string out_dir;
    std::string endpoint;
    std::uint64_t seed = kDefaultSeed;
    int jobs = 1;
    int timeout_ms = 10000;
    bool realtime = false;
};

struct BatchSetup {
    TimingConfig timing;
    PolicyConfig policy;
    std::vector<Strategy> strategies;
    std::vector<Scenario> scenarios;
    std::vector<DialogueSample> small_samples;
    bool needs_small = false;
    std::map<std::string, std::vector<std::string>> responses;
    std::string endpoint;
    int timeout_ms = 10000;
    bool realtime = false;
    double smoothing = 0.05;
    double backoff_flatten = 0.5;
    std::string dataset_label;
    std::string model_label;
};

BatchSetup prepare_batch(const SimulateArgs& a) {
    BatchSetup b;

    KeyValueConfig cfg;
    if (!a.config.empty()) cfg = KeyValueConfig::load_file(a.config);
    b.timing = TimingConfig::from_config(cfg);
    b.policy = PolicyConfig::from_config(cfg);
    b.smoothing = cfg.get_double("small.smoothing", b.smoothing);
    b.backoff_flatten = cfg.get_double("small.backoff_flatten", b.backoff_flatten);

    if (a.realtime && a.endpoint.empty())
        throw ConfigError("--realtime requires --llm-endpoint");
    b.endpoint = a.endpoint;
    b.timeout_ms = a.timeout_ms;
    b.realtime = a.realtime;

    if (a.strategy == "all")
        b.strategies = {Strategy::ssc, Strategy::sdc, Strategy::ddtsr};
    else
        b.strategies = {strategy_from_string(a.strategy)};

    b.scenarios = load_scenarios(a.scenarios);
    if (b.scenarios.empty())
        throw ValidationError("scenario file has no sessions: " + a.scenarios);
    for (const Scenario& sc : b.scenarios) sc.validate();

    b.needs_small = std::any_of(b.strategies.begin(), b.strategies.end(), [](Strategy s) {
        return s != Strategy::ssc;
    });
    if (b.needs_small) {
        std::string small_path = cfg.get_string("small.dataset", "");
        if (small_path.empty())
            throw ConfigError("config key small.dataset (dialogue-sample JSONL backing the "
                              "connective model) is required for strategy " +
                              a.strategy);
        // Relative dataset paths resolve against the config file's directory,
        // so a config bundle works from any working directory.
        if (fs::path(small_path).is_relative() && !a.config.empty())
            small_path = (fs::path(a.config).parent_path() / small_path).string();
        b.small_samples = load_dialogue_samples(small_path);
    }

    for (const Scenario& sc : b.scenarios)
        if (!sc.reference_response.empty())
            b.responses[sc.final_transcript] = sc.reference_response;

    b.dataset_label = fs::path(a.scenarios).stem().string();
    b.model_label = b.endpoint.empty() ? "scripted" : "remote";
    return b;
}

SessionFactory make_factory(const BatchSetup& b) {
    return [&b](const Scenario& sc) {
        SessionBundle bundle;
        const TimingConfig timing = b.timing.overridden(sc.timing_overrides);
        bundle.asr = std::make_unique<ScriptedAsrStream>(sc, timing);
        if (b.needs_small)
            bundle.small = std::make_unique<TabularSmallModel>(b.small_samples, b.smoothing,
                                                               b.backoff_flatten);
        if (b.endpoint.empty())
            bundle.large = std::make_unique<ScriptedLargeModel>(b.responses, timing);
        else
            bundle.large = remote_large_model(b.endpoint, b.timeout_ms);
        bundle.tts = std::make_unique<SimulatedTts>(timing);
        bundle.options = SessionOptions{b.policy, timing, b.realtime};
        return bundle;
    };
}

struct StrategyOutcome {
    Strategy strategy = Strategy::ssc;
    std::vector<SessionTrace> traces;
    std::vector<LatencyBreakdown> breakdowns; // error-free sessions only
};

// Runs every requested strategy over the whole batch. Failed sessions land in
// `failures`; their traces are still returned so they can be written out.
std::vector<StrategyOutcome> run_strategies(const BatchSetup& b, int jobs,
                                            std::vector<std::string>& failures) {
    const SessionFactory factory = make_factory(b);
    std::vector<StrategyOutcome> out;
    for (const Strategy strategy : b.strategies) {
        StrategyOutcome oc;
        oc.strategy = strategy;
        oc.traces = run_batch(b.scenarios, strategy, factory, jobs);
        for (const SessionTrace& t : oc.traces) {
            if (t.error.empty())
                oc.breakdowns.push_back(latency_breakdown(t));
            else
                failures.push_back(to_string(strategy) + "/" + t.id + ": " + t.error);
        }
        out.push_back(std::move(oc));
    }
    return out;
}

AggregateReport aggregate_outcomes(const std::vector<StrategyOutcome>& outcomes,
                                   const BatchSetup& b) {
    AggregateReport report;
    for (const StrategyOutcome& oc : outcomes) {
        AggregateTags tags;
        tags.dataset = b.dataset_label;
        tags.strategy = to_string(oc.strategy);
        tags.model = b.model_label;
        report.rows.push_back(aggregate(oc.breakdowns, tags));
    }
    return report;
}

int cmd_simulate(const SimulateArgs& a, std::ostream&, std::ostream& err) {
    const BatchSetup b = prepare_batch(a);

    const fs::path out_dir(a.out_dir);
    fs::create_directories(out_dir / "traces");

    std::vector<std::string> failures;
    const auto outcomes = run_strategies(b, a.jobs, failures);

    for (const StrategyOutcome& oc : outcomes) {
        std::string blob;
        for (const SessionTrace& t : oc.traces) blob += t.to_jsonl();
        write_file(out_dir / "traces" / (to_string(oc.strategy) + ".jsonl"), blob);
    }

    if (!failures.empty()) {
        err << "simulate: " << failures.size() << " session(s) failed; traces written, "
            << "reports skipped\n";
        for (const std::string& f : failures) err << "  " << f << "\n";
        return 2;
    }

    write_file(out_dir / "aggregate.md", render_markdown(aggregate_outcomes(outcomes, b)));
    write_file(out_dir / "aggregate.csv", render_csv(aggregate_outcomes(outcomes, b)));

    if (outcomes.size() == 3) {
        std::map<Strategy, std::vector<LatencyBreakdown>> by_strategy;
        for (const StrategyOutcome& oc : outcomes) by_strategy[oc.strategy] = oc.breakdowns;
        const StratifiedReport strat = stratify(by_strategy);
        write_file(out_dir / "stratified.md", render_markdown(strat));
        write_file(out_dir / "stratified.csv", render_csv(strat));
        write_file(out_dir / "plot.csv", plot_data_csv(by_strategy));
    }

    err << "simulate: " << b.scenarios.size() << " session(s) x " << outcomes.size()
        << " strateg" << (outcomes.size() == 1 ? "y" : "ies") << " -> " << a.out_dir << "\n";
    return 0;
}

// ----------------------------------------------------------------- compare

struct CompareArgs {
    std::string scenarios;
    std::string config;
    std::string out_dir;
    int jobs = 1;
};

int cmd_compare(const CompareArgs& a, std::ostream&, std::ostream& err) {
    SimulateArgs sim;
    sim.scenarios = a.scenarios;
    sim.config = a.config;
    sim.strategy = "all";
    const BatchSetup b = prepare_batch(sim);

    std::vector<std::string> failures;
    const auto outcomes = run_strategies(b, a.jobs, failures);
    if (!failures.empty()) {
        err << "compare: " << failures.size() << " session(s) failed\n";
        for (const std::string& f : failures) err << "  " << f << "\n";
        return 2;
    }

    fs::create_directories(a.out_dir);
    write_file(fs::path(a.out_dir) / "compare.md",
               render_markdown(aggregate_outcomes(outcomes, b)));
    err << "compare: " << b.scenarios.size() << " session(s) x 3 strategies -> "
        << a.out_dir << "/compare.md\n";
    return 0;
}

// -------------------------------------------------------------------- mine

struct MineArgs {
    std::string input;
    std::string lexicons;
    std::string out_file;
    std::string endpoint;
    int timeout_ms = 10000;
    bool resume = false;
};

int cmd_mine(const MineArgs& a, std::ostream&, std::ostream& err) {
    const miner::LexiconTagger tagger = miner::LexiconTagger::from_directory(a.lexicons);
    miner::AnnotatorFn annotate;
    if (!a.endpoint.empty()) annotate = remote_annotator(a.endpoint, a.timeout_ms);

    const fs::path out_parent = fs::path(a.out_file).parent_path();
    if (!out_parent.empty()) fs::create_directories(out_parent);

    const std::string progress = a.out_file + ".progress";
    const miner::MineOutcome outcome =
        miner::mine_file(a.input, a.out_file, progress, a.resume, annotate,
                         [&err](const std::string& m) { err << m << "\n"; }, &tagger);

    err << "mine: wrote " << outcome.records.size() << " record(s) to " << a.out_file
        << " (" << outcome.skipped << " skipped)\n";
    return 0;
}

// ------------------------------------------------------------ stats / split

int cmd_stats(const std::string& input, std::ostream& out) {
    out << miner::render_markdown(miner::dataset_stats(miner::load_records(input)));
    return 0;
}

int cmd_split(const std::string& input, std::uint64_t seed, const std::string& out_dir,
              std::ostream& err) {
    const auto records = miner::load_records(input);
    const miner::DatasetSplit split = miner::split_dataset(records, seed);

    fs::create_directories(out_dir);
    const auto dump = [](const std::vector<miner::ConnectiveRecord>& part) {
        std::string blob;
        for (const auto& r : part) blob += miner::record_to_json(r) + "\n";
        return blob;
    };
    write_file(fs::path(out_dir) / "train.jsonl", dump(split.train));
    write_file(fs::path(out_dir) / "validation.jsonl", dump(split.validation));
    write_file(fs::path(out_dir) / "test.jsonl", dump(split.test));

    err << "split: " << split.train.size() << "/" << split.validation.size() << "/"
        << split.test.size() << " records -> " << out_dir << "\n";
    return 0;
}

// -------------------------------------------------------------------- loss

struct LossArgs {
    std::string oracle;
    std::string oracle_base;
    std::string data;
    std::string weights = "1.0,0.5,0.1";
};

int cmd_loss(const LossArgs& a, std::ostream& out) {
    const auto w_list = parse_double_list(a.weights, "--weights");
    if (w_list.size() != 3)
        throw ConfigError("--weights expects exactly three values (style, coherence, prior)");
    LossWeights w;
    w.style = w_list[0];
    w.coherence = w_list[1];
    w.prior = w_list[2];

    const TabularOracle tuned(a.oracle, "small");
    const TabularOracle base(a.oracle_base, "small-base");
    const auto samples = load_dialogue_samples(a.data);

    // Prior term compares candidate-connective distributions over the
    // distinct connectives observed in the dataset, in sorted-text order.
    std::map<std::string, std::vector<std::string>> distinct;
    for (const DialogueSample& s : samples)
        if (!s.c.empty()) distinct[join_tokens(s.c)] = s.c;
    std::vector<std::vector<std::string>> candidates;
    for (const auto& [text, tokens] : distinct) candidates.push_back(tokens);

    out << "id,style,coherence,prior,total\n";
    double sum_style = 0, sum_coh = 0, sum_prior = 0, sum_total = 0;
    for (const DialogueSample& s : samples) {
        const double style = style_consistency_loss(tuned, s.u, s.c, s.r);
        const double coherence = coherence_loss(tuned, base, s.u, s.c, s.r, s.r);
        double prior = 0.0;
        if (!candidates.empty()) {
            const auto p = connective_distribution(tuned, s.u, candidates);
            const auto q = connective_distribution(base, s.u, candidates);
            prior = prior_regularization_loss(p, q);
        }
        const double total = total_loss(style, coherence, prior, w);
        out << s.id << ',' << fixed6(style) << ',' << fixed6(coherence) << ','
            << fixed6(prior) << ',' << fixed6(total) << "\n";
        sum_style += style;
        sum_coh += coherence;
        sum_prior += prior;
        sum_total += total;
    }
    if (!samples.empty()) {
        const auto n = static_cast<double>(samples.size());
        out << "mean," << fixed6(sum_style / n) << ',' << fixed6(sum_coh / n) << ','
            << fixed6(sum_prior / n) << ',' << fixed6(sum_total / n) << "\n";
    }
    return 0;
}

// -------------------------------------------------------------- curriculum

struct CurriculumArgs {
    std::string data;
    int stages = 4;
    std::string epochs = "5,3,3,2";
    std::string order = "hard_to_easy";
};

int cmd_curriculum(const CurriculumArgs& a, std::ostream& out) {
    const auto epoch_list = parse_int_list(a.epochs, "--epochs");
    if (static_cast<int>(epoch_list.size()) != a.stages)
        throw ConfigError("--stages is " + std::to_string(a.stages) + " but --epochs lists " +
                          std::to_string(epoch_list.size()) + " entries");
    std::vector<int> epochs;
    for (const std::int64_t e : epoch_list) {
        if (e <= 0) throw ConfigError("--epochs entries must be positive");
        epochs.push_back(static_cast<int>(e));
    }
    const StageOrder order = a.order == "hard_to_easy" ? StageOrder::hard_to_easy
                                                       : StageOrder::easy_to_hard;

    const auto samples = load_dialogue_samples(a.data);
    const CurriculumPlan plan = curriculum_plan(samples, epochs, order);

    nlohmann::ordered_json j;
    j["stages"] = nlohmann::ordered_json::array();
    for (const CurriculumStage& st : plan.stages) {
        nlohmann::ordered_json stage;
        stage["index"] = st.index;
        stage["epochs"] = st.epochs;
        stage["sample_ids"] = st.sample_ids;
        j["stages"].push_back(std::move(stage));
    }
    j["total_steps"] = plan.total_steps;
    out << j.dump(2) << "\n";
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dual-track streaming dialogue toolkit: latency simulation, "
                 "connective mining, and training-schedule math"};
    app.name("ddtsr");
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand(
        "simulate", "Run scripted sessions under one or all strategies and report latency");
    sim_cmd->add_option("--scenarios", sim.scenarios, "Scenario JSONL file")->required();
    sim_cmd->add_option("--strategy", sim.strategy, "ssc | sdc | ddtsr | all")
        ->check(CLI::IsMember({"ssc", "sdc", "ddtsr", "all"}));
    sim_cmd->add_option("--config", sim.config, "Key-value config file (flags win)");
    sim_cmd->add_option("--out", sim.out_dir, "Output directory")->required();
    sim_cmd->add_option("--seed", sim.seed,
                        "Accepted for interface uniformity; the scripted pipeline is "
                        "deterministic, so simulate ignores it");
    sim_cmd->add_option("--jobs", sim.jobs, "Concurrent sessions (default 1)")
        ->check(CLI::PositiveNumber);
    sim_cmd->add_flag("--realtime", sim.realtime,
                      "Pace sessions on the wall clock (requires --llm-endpoint)");
    sim_cmd->add_option("--llm-endpoint", sim.endpoint,
                        "http://host:port[/path] of a streaming large model");
    sim_cmd->add_option("--timeout-ms", sim.timeout_ms, "Remote request timeout")
        ->check(CLI::PositiveNumber);

    CompareArgs cmp;
    auto* cmp_cmd = app.add_subcommand(
        "compare", "Run all three strategies and write one side-by-side latency table");
    cmp_cmd->add_option("--scenarios", cmp.scenarios, "Scenario JSONL file")->required();
    cmp_cmd->add_option("--config", cmp.config, "Key-value config file");
    cmp_cmd->add_option("--out", cmp.out_dir, "Output directory")->required();
    cmp_cmd->add_option("--jobs", cmp.jobs, "Concurrent sessions (default 1)")
        ->check(CLI::PositiveNumber);

    MineArgs mine;
    auto* mine_cmd = app.add_subcommand(
        "mine", "Extract turn-opening connectives from a tagged dialogue corpus");
    mine_cmd->add_option("--input", mine.input, "Tagged corpus JSONL")->required();
    mine_cmd->add_option("--lexicons", mine.lexicons, "Directory of word-list files")
        ->required();
    mine_cmd->add_option("--out", mine.out_file, "Output record JSONL file")->required();
    mine_cmd->add_option("--llm-endpoint", mine.endpoint,
                         "Optional annotator endpoint for utterances the pattern pass misses");
    mine_cmd->add_option("--timeout-ms", mine.timeout_ms, "Remote request timeout")
        ->check(CLI::PositiveNumber);
    mine_cmd->add_flag("--resume", mine.resume,
                       "Continue from the progress file instead of starting over");

    std::string stats_input;
    auto* stats_cmd =
        app.add_subcommand("stats", "Summarize a mined connective dataset as markdown");
    stats_cmd->add_option("--input", stats_input, "Record JSONL file")->required();

    std::string split_input, split_out;
    std::uint64_t split_seed = kDefaultSeed;
    auto* split_cmd = app.add_subcommand(
        "split", "Shuffle records with a seed and write 8:1:1 train/validation/test files");
    split_cmd->add_option("--input", split_input, "Record JSONL file")->required();
    split_cmd->add_option("--seed", split_seed, "Shuffle seed (default 17)");
    split_cmd->add_option("--out", split_out, "Output directory")->required();

    LossArgs loss;
    auto* loss_cmd = app.add_subcommand(
        "loss",
        "Score dialogue samples under tuned/base oracles and print per-sample losses as "
        "CSV. Desk-scale convention: the sample's reference response stands in for both "
        "the long and short responses in the coherence term.");
    loss_cmd->add_option("--oracle", loss.oracle, "Tuned next-token oracle JSON")->required();
    loss_cmd->add_option("--oracle-base", loss.oracle_base, "Frozen base oracle JSON")
        ->required();
    loss_cmd->add_option("--data", loss.data, "Dialogue-sample JSONL")->required();
    loss_cmd->add_option("--weights", loss.weights,
                         "style,coherence,prior weights (default 1.0,0.5,0.1)");

    CurriculumArgs cur;
    auto* cur_cmd = app.add_subcommand(
        "curriculum", "Plan staged training over dialogue samples and print it as JSON");
    cur_cmd->add_option("--data", cur.data, "Dialogue-sample JSONL")->required();
    cur_cmd->add_option("--stages", cur.stages, "Number of difficulty stages (default 4)")
        ->check(CLI::PositiveNumber);
    cur_cmd->add_option("--epochs", cur.epochs, "Per-stage epochs (default 5,3,3,2)");
    cur_cmd->add_option("--order", cur.order, "hard_to_easy | easy_to_hard")
        ->check(CLI::IsMember({"hard_to_easy", "easy_to_hard"}));

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (sim_cmd->parsed()) return cmd_simulate(sim, out, err);
        if (cmp_cmd->parsed()) return cmd_compare(cmp, out, err);
        if (mine_cmd->parsed()) return cmd_mine(mine, out, err);
        if (stats_cmd->parsed()) return cmd_stats(stats_input, out);
        if (split_cmd->parsed()) return cmd_split(split_input, split_seed, split_out, err);
        if (loss_cmd->parsed()) return cmd_loss(loss, out);
        if (cur_cmd->parsed()) return cmd_curriculum(cur, out);
        err << "error: no subcommand selected\n";
        return 1;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const UnknownTokenError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const RemoteError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const ProtocolError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace ddtsr::cli
