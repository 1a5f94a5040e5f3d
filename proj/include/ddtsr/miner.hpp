#pragma once

// Connective mining: turn a corpus of (Speaker A, Speaker B) exchanges into
// dialogue samples whose openers are labeled connectives.
//
// Two passes share the work. A part-of-speech pattern pass accumulates whole
// punctuation-delimited segments of Speaker B's reply while they look like a
// discourse connective (function-word patterns, no substantial content, at
// most six tokens). Replies the pattern pass rejects can be sent to a
// language model that proposes a connective for the turn; its two-line reply
// format is parsed here. Pattern-extracted connectives reconstruct the reply
// exactly; model-generated ones are additions and do not.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddtsr/tokens.hpp"

namespace ddtsr::miner {

enum class Pos { intj, adv, pron, aux, verb, part, adj, noun, sconj, propn, num, other };

std::string to_string(Pos pos);
Pos pos_from_string(const std::string& tag); // expects upper-case tags, throws ValidationError

struct TaggedToken {
    std::string text; // surface form, trailing punctuation kept attached
    Pos pos = Pos::other;
    bool is_meta_verb = false;      // "look", "see", "mean"… — only valid on verbs
    bool is_abstract_noun = false;  // "fact", "point", "way"… — only valid on nouns
    bool is_concrete_entity = false;

    void validate() const; // flag/pos consistency, throws ValidationError
};

// Splits on {, . ! ? ; :}, each delimiter staying attached to its segment;
// concatenating the segments reproduces the input byte for byte.
std::vector<std::string> split_by_punctuation(const std::string& text);

enum class PrefixClass { type_a, type_b, mixed, reject };

std::string to_string(PrefixClass cls);

// Pattern gate for a candidate connective prefix.
//
// Function-word classes: set A is interjections, adverbs, pronouns,
// auxiliaries, particles, and meta-verbs; set B is adjectives, adverbs,
// abstract nouns, and subordinating conjunctions. A prefix is TypeA when
// every token is in A, TypeB when every token is in B and at least one is an
// adjective, Mixed when every token is in A ∪ B, neither pure class applies,
// and the adjective requirement holds whenever a B-only tag appears.
// Anything containing substantial content — a proper noun, a concrete
// entity, a non-meta verb — is rejected outright, whatever else it contains.
PrefixClass classify_prefix(std::span<const TaggedToken> tokens);

// Largest number of tokens a connective may accumulate.
inline constexpr int kMaxConnectiveTokens = 6;

struct Extraction {
    std::string connective; // "" when nothing was extracted
    std::string remainder;  // the reply minus the connective
    PrefixClass prefix_class = PrefixClass::reject;
    std::string stop_reason; // "content" | "pos" | "length" | "end"
};

// Accumulates whole leading segments while the growing candidate stays a
// plausible connective. When a segment fails both the content and the
// pattern check, the break is attributed to content.
Extraction extract_connective(std::span<const TaggedToken> tokens,
                              int max_tokens = kMaxConnectiveTokens);

enum class Category { cdm, edm, idm, tom, dmm, am, none };

std::string to_string(Category c);
Category category_from_string(const std::string& name); // case-insensitive

struct ConnectiveRecord {
    std::string id;
    std::string s1;         // Speaker A turn
    std::string connective; // possibly empty
    std::string remainder;  // Speaker B turn minus the connective
    std::optional<Category> category; // unset unless a model pass supplied one
    std::string source;     // "pos_extraction" | "llm_generation"

    void validate() const; // category/connective agreement, throws ValidationError
};

// Figure-template prompt asking a model to identify or propose a
// turn-transition connective for one exchange. Deterministic; a calibration
// block, when given, is appended after the output specification.
std::string build_llm_prompt(const std::string& s1, const std::string& s2,
                             const std::string& calibration = "");

struct LlmAnnotation {
    bool present = false;
    std::string connective;
    std::optional<Category> category;
};

// Parses the model's reply: a "CONNECTIVE PRESENT: YES|NO" line, a
// "CONNECTIVE: <text or NONE>" line, optionally a "CATEGORY: <label>" line.
// Matching is case-insensitive and whitespace-tolerant, nothing else is.
// Contradictions (YES with NONE, NO with a connective) and missing lines
// throw ProtocolError.
LlmAnnotation parse_llm_output(const std::string& text);

// Word-list tagger for desk-scale fixtures. Loads one plain-text word list
// per tag class from a directory ('#' comments allowed) and tags by
// lowercase lookup after stripping attached punctuation. Unknown capitalized
// words past the first position become proper nouns, digit strings become
// numbers, anything else tags `other`. Statistical tagging is out of scope —
// pre-tagged corpora bypass this entirely.
class LexiconTagger {
public:
    static LexiconTagger from_directory(const std::string& dir);

    std::vector<TaggedToken> tag(const std::string& text) const;

private:
    LexiconTagger() = default;
    struct Lists;
    std::shared_ptr<const Lists> lists_;
};

struct TaggedUtterance {
    std::string id;
    std::string s1;
    std::string s2;
    std::vector<TaggedToken> s2_tokens;
};

// JSONL loader: {"id"?, "s1", "s2", "s2_tokens"?: [[text, POS, flags...]]}.
// Lines without s2_tokens are tagged with `tagger`; if none was given they
// are a ValidationError. Errors name the offending line.
std::vector<TaggedUtterance> load_tagged_corpus(const std::string& path,
                                                const LexiconTagger* tagger = nullptr);

// Model hook for the generation pass: takes a finished prompt, returns the
// raw reply text. Implemented over the streaming wire client; tests stub it.
using AnnotatorFn = std::function<std::string(const std::string& prompt)>;

struct MineOutcome {
    std::vector<ConnectiveRecord> records;
    std::size_t skipped = 0; // model replies that failed to parse
};

// Runs the two-pass pipeline over utterances already in memory. `annotate`
// may be empty (pattern pass only). A reply that fails to parse skips that
// record and reports it through `log`.
MineOutcome mine_utterances(std::span<const TaggedUtterance> utterances,
                            const AnnotatorFn& annotate = {},
                            const std::function<void(const std::string&)>& log = {});

// File-to-file pipeline, resumable: the progress file stores how many input
// lines are fully handled, records append to the output, and `resume` picks
// up after the stored count instead of starting over.
MineOutcome mine_file(const std::string& input_path, const std::string& output_path,
                      const std::string& progress_path, bool resume,
                      const AnnotatorFn& annotate = {},
                      const std::function<void(const std::string&)>& log = {},
                      const LexiconTagger* tagger = nullptr);

// Serialization of mined records: dialogue-sample JSONL (u/c/r token lists)
// plus category and source.
std::string record_to_json(const ConnectiveRecord& record);
ConnectiveRecord record_from_json(const std::string& line);
std::vector<ConnectiveRecord> load_records(const std::string& path);

struct DatasetStats {
    std::size_t total_samples = 0;
    std::size_t samples_with_connectives = 0;
    std::size_t connective_types = 0;
    double normalized_entropy = 0.0; // H(label dist)/ln(types); 0 when types <= 1
};

DatasetStats dataset_stats(std::span<const ConnectiveRecord> records);
std::string render_markdown(const DatasetStats& stats);

struct SplitRatios {
    int train = 8;
    int validation = 1;
    int test = 1;
};

struct DatasetSplit {
    std::vector<ConnectiveRecord> train;
    std::vector<ConnectiveRecord> validation;
    std::vector<ConnectiveRecord> test;
};

// Seeded shuffle (hand-rolled swaps, stable across standard libraries), then
// contiguous cuts at floor(n*train/sum) and floor(n*(train+validation)/sum).
// Needs at least 10 records and positive ratios.
DatasetSplit split_dataset(std::span<const ConnectiveRecord> records, std::uint64_t seed,
                           SplitRatios ratios = {});

} // namespace ddtsr::miner
