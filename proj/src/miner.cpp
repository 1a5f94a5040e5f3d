#include "ddtsr/miner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ddtsr/errors.hpp"

namespace ddtsr::miner {

namespace {

std::string lower(std::string s) {
    for (char& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string upper(std::string s) {
    for (char& c : s)
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    std::size_t from = 0, to = s.size();
    while (from < to && std::isspace(static_cast<unsigned char>(s[from])))
        ++from;
    while (to > from && std::isspace(static_cast<unsigned char>(s[to - 1])))
        --to;
    return s.substr(from, to - from);
}

bool ci_prefix(const std::string& s, const std::string& prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    }
    return true;
}

constexpr const char* kDelimiters = ",.!?;:";

bool ends_segment(const std::string& token) {
    return !token.empty() &&
           std::string(kDelimiters).find(token.back()) != std::string::npos;
}

bool is_content(const TaggedToken& t) {
    return t.pos == Pos::propn || t.is_concrete_entity ||
           (t.pos == Pos::verb && !t.is_meta_verb);
}

bool in_set_a(const TaggedToken& t) {
    switch (t.pos) {
    case Pos::intj:
    case Pos::adv:
    case Pos::pron:
    case Pos::aux:
    case Pos::part: return true;
    case Pos::verb: return t.is_meta_verb;
    default: return false;
    }
}

bool in_set_b(const TaggedToken& t) {
    switch (t.pos) {
    case Pos::adj:
    case Pos::adv:
    case Pos::sconj: return true;
    case Pos::noun: return t.is_abstract_noun;
    default: return false;
    }
}

} // namespace

std::string to_string(Pos pos) {
    switch (pos) {
    case Pos::intj: return "INTJ";
    case Pos::adv: return "ADV";
    case Pos::pron: return "PRON";
    case Pos::aux: return "AUX";
    case Pos::verb: return "VERB";
    case Pos::part: return "PART";
    case Pos::adj: return "ADJ";
    case Pos::noun: return "NOUN";
    case Pos::sconj: return "SCONJ";
    case Pos::propn: return "PROPN";
    case Pos::num: return "NUM";
    case Pos::other: return "OTHER";
    }
    throw ValidationError("unrepresentable pos value");
}

Pos pos_from_string(const std::string& tag) {
    const std::string t = upper(trim(tag));
    if (t == "INTJ") return Pos::intj;
    if (t == "ADV") return Pos::adv;
    if (t == "PRON") return Pos::pron;
    if (t == "AUX") return Pos::aux;
    if (t == "VERB") return Pos::verb;
    if (t == "PART") return Pos::part;
    if (t == "ADJ") return Pos::adj;
    if (t == "NOUN") return Pos::noun;
    if (t == "SCONJ") return Pos::sconj;
    if (t == "PROPN") return Pos::propn;
    if (t == "NUM") return Pos::num;
    if (t == "OTHER") return Pos::other;
    throw ValidationError("unknown pos tag: '" + tag + "'");
}

void TaggedToken::validate() const {
    if (text.empty()) throw ValidationError("tagged token with empty text");
    if (is_meta_verb && pos != Pos::verb)
        throw ValidationError("token '" + text + "': meta-verb flag on a non-verb");
    if (is_abstract_noun && pos != Pos::noun)
        throw ValidationError("token '" + text + "': abstract-noun flag on a non-noun");
}

std::vector<std::string> split_by_punctuation(const std::string& text) {
    std::vector<std::string> segments;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (std::string(kDelimiters).find(text[i]) != std::string::npos) {
            segments.push_back(text.substr(start, i - start + 1));
            start = i + 1;
        }
    }
    if (start < text.size()) segments.push_back(text.substr(start));
    return segments;
}

std::string to_string(PrefixClass cls) {
    switch (cls) {
    case PrefixClass::type_a: return "TypeA";
    case PrefixClass::type_b: return "TypeB";
    case PrefixClass::mixed: return "Mixed";
    case PrefixClass::reject: return "Reject";
    }
    throw ValidationError("unrepresentable prefix class");
}

PrefixClass classify_prefix(std::span<const TaggedToken> tokens) {
    if (tokens.empty()) throw ValidationError("classify_prefix: empty prefix");
    bool all_a = true, all_b = true, all_ab = true, has_adj = false, has_b_only = false;
    for (const auto& t : tokens) {
        t.validate();
        if (is_content(t)) return PrefixClass::reject;
        const bool a = in_set_a(t);
        const bool b = in_set_b(t);
        all_a = all_a && a;
        all_b = all_b && b;
        all_ab = all_ab && (a || b);
        has_adj = has_adj || t.pos == Pos::adj;
        has_b_only = has_b_only || (b && !a);
    }
    if (all_a) return PrefixClass::type_a;
    if (all_b) return has_adj ? PrefixClass::type_b : PrefixClass::reject;
    if (!all_ab) return PrefixClass::reject;
    if (has_b_only && !has_adj) return PrefixClass::reject;
    return PrefixClass::mixed;
}

Extraction extract_connective(std::span<const TaggedToken> tokens, int max_tokens) {
    if (tokens.empty()) throw ValidationError("extract_connective: empty utterance");
    if (max_tokens < 1) throw ValidationError("extract_connective: max_tokens must be positive");

    // Segment boundaries sit after tokens carrying a trailing delimiter.
    std::vector<std::size_t> segment_ends;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        tokens[i].validate();
        if (ends_segment(tokens[i].text)) segment_ends.push_back(i + 1);
    }
    if (segment_ends.empty() || segment_ends.back() != tokens.size())
        segment_ends.push_back(tokens.size());

    std::size_t accepted = 0;
    PrefixClass cls = PrefixClass::reject;
    std::string reason = "end";
    for (std::size_t end : segment_ends) {
        const auto segment = tokens.subspan(accepted, end - accepted);
        if (std::any_of(segment.begin(), segment.end(), is_content)) {
            reason = "content";
            break;
        }
        const PrefixClass candidate_cls = classify_prefix(tokens.subspan(0, end));
        if (candidate_cls == PrefixClass::reject) {
            reason = "pos";
            break;
        }
        if (end > static_cast<std::size_t>(max_tokens)) {
            reason = "length";
            break;
        }
        accepted = end;
        cls = candidate_cls;
    }

    Extraction out;
    out.stop_reason = reason;
    out.prefix_class = accepted > 0 ? cls : PrefixClass::reject;
    std::vector<std::string> head, tail;
    for (std::size_t i = 0; i < tokens.size(); ++i)
        (i < accepted ? head : tail).push_back(tokens[i].text);
    out.connective = join_tokens(head);
    out.remainder = join_tokens(tail);
    return out;
}

std::string to_string(Category c) {
    switch (c) {
    case Category::cdm: return "CDM";
    case Category::edm: return "EDM";
    case Category::idm: return "IDM";
    case Category::tom: return "TOM";
    case Category::dmm: return "DMM";
    case Category::am: return "AM";
    case Category::none: return "NONE";
    }
    throw ValidationError("unrepresentable category value");
}

Category category_from_string(const std::string& name) {
    const std::string t = upper(trim(name));
    if (t == "CDM") return Category::cdm;
    if (t == "EDM") return Category::edm;
    if (t == "IDM") return Category::idm;
    if (t == "TOM") return Category::tom;
    if (t == "DMM") return Category::dmm;
    if (t == "AM") return Category::am;
    if (t == "NONE") return Category::none;
    throw ValidationError("unknown connective category: '" + name + "'");
}

void ConnectiveRecord::validate() const {
    if (id.empty()) throw ValidationError("connective record with empty id");
    if (source != "pos_extraction" && source != "llm_generation")
        throw ValidationError("record " + id + ": unknown source '" + source + "'");
    if (category.has_value()) {
        const bool none = *category == Category::none;
        if (none != connective.empty())
            throw ValidationError("record " + id +
                                  ": category and connective presence disagree");
    }
}

std::string build_llm_prompt(const std::string& s1, const std::string& s2,
                             const std::string& calibration) {
    if (s1.empty() || s2.empty())
        throw ValidationError("build_llm_prompt: both turns are required");
    std::string p;
    p += "Task: decide whether Speaker B's reply opens with a turn-transition "
         "connective, and name it.\n\n";
    p += "A turn-transition connective is a short discourse phrase that bridges the "
         "turn before any content-carrying words: a filler, acknowledgement, hedge, "
         "or stance marker (for example \"Well,\" or \"But honestly,\").\n\n";
    p += "Speaker A: " + s1 + "\n";
    p += "Speaker B: " + s2 + "\n\n";
    p += "Decision procedure: read Speaker B's reply. If its opening words form such "
         "a connective, report them verbatim. Otherwise propose a natural connective "
         "for this turn, or NONE if none fits.\n";
    p += "Category space: CDM | EDM | IDM | TOM | DMM | AM | NONE\n\n";
    p += "Output exactly two lines:\n";
    p += "CONNECTIVE PRESENT: YES | NO\n";
    p += "CONNECTIVE: <CONNECTIVE or NONE>\n";
    if (!calibration.empty()) p += "\nExamples:\n" + calibration + "\n";
    return p;
}

LlmAnnotation parse_llm_output(const std::string& text) {
    std::optional<std::string> present_raw, connective_raw, category_raw;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        const std::string t = trim(line);
        if (ci_prefix(t, "connective present:"))
            present_raw = trim(t.substr(19));
        else if (ci_prefix(t, "connective:"))
            connective_raw = trim(t.substr(11));
        else if (ci_prefix(t, "category:"))
            category_raw = trim(t.substr(9));
    }
    if (!present_raw) throw ProtocolError("reply lacks a CONNECTIVE PRESENT line");
    if (!connective_raw) throw ProtocolError("reply lacks a CONNECTIVE line");

    const std::string presence = upper(*present_raw);
    if (presence != "YES" && presence != "NO")
        throw ProtocolError("CONNECTIVE PRESENT must be YES or NO, got '" + *present_raw + "'");
    const bool names_none = upper(*connective_raw) == "NONE" || connective_raw->empty();

    LlmAnnotation out;
    if (presence == "YES") {
        if (names_none) throw ProtocolError("reply claims a connective but names NONE");
        out.present = true;
        out.connective = *connective_raw;
        if (category_raw) {
            out.category = category_from_string(*category_raw);
            if (*out.category == Category::none)
                throw ProtocolError("reply claims a connective but labels it NONE");
        }
    } else {
        if (!names_none) throw ProtocolError("reply denies a connective but names one");
        out.present = false;
        out.category = Category::none;
    }
    return out;
}

struct LexiconTagger::Lists {
    std::set<std::string> interjections, adverbs, pronouns, auxiliaries, particles,
        adjectives, sconj, meta_verbs, abstract_nouns, concrete_entities;
};

namespace {

std::set<std::string> load_word_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open lexicon file: " + path);
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        words.insert(lower(t));
    }
    return words;
}

std::string strip_punct(const std::string& token) {
    std::size_t from = 0, to = token.size();
    while (from < to && !std::isalnum(static_cast<unsigned char>(token[from])) &&
           token[from] != '\'')
        ++from;
    while (to > from && !std::isalnum(static_cast<unsigned char>(token[to - 1])) &&
           token[to - 1] != '\'')
        --to;
    return token.substr(from, to - from);
}

} // namespace

LexiconTagger LexiconTagger::from_directory(const std::string& dir) {
    auto lists = std::make_shared<Lists>();
    lists->interjections = load_word_list(dir + "/interjections.txt");
    lists->adverbs = load_word_list(dir + "/adverbs.txt");
    lists->pronouns = load_word_list(dir + "/pronouns.txt");
    lists->auxiliaries = load_word_list(dir + "/auxiliaries.txt");
    lists->particles = load_word_list(dir + "/particles.txt");
    lists->adjectives = load_word_list(dir + "/adjectives.txt");
    lists->sconj = load_word_list(dir + "/subordinating_conjunctions.txt");
    lists->meta_verbs = load_word_list(dir + "/meta_verbs.txt");
    lists->abstract_nouns = load_word_list(dir + "/abstract_nouns.txt");
    lists->concrete_entities = load_word_list(dir + "/concrete_entities.txt");
    LexiconTagger tagger;
    tagger.lists_ = std::move(lists);
    return tagger;
}

std::vector<TaggedToken> LexiconTagger::tag(const std::string& text) const {
    const auto raw = split_whitespace(text);
    std::vector<TaggedToken> out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        TaggedToken t;
        t.text = raw[i];
        const std::string key = lower(strip_punct(raw[i]));
        const Lists& lx = *lists_;
        if (key.empty()) {
            t.pos = Pos::other;
        } else if (std::all_of(key.begin(), key.end(),
                               [](unsigned char c) { return std::isdigit(c); })) {
            t.pos = Pos::num;
        } else if (lx.interjections.count(key)) {
            t.pos = Pos::intj;
        } else if (lx.meta_verbs.count(key)) {
            t.pos = Pos::verb;
            t.is_meta_verb = true;
        } else if (lx.abstract_nouns.count(key)) {
            t.pos = Pos::noun;
            t.is_abstract_noun = true;
        } else if (lx.concrete_entities.count(key)) {
            t.pos = Pos::noun;
            t.is_concrete_entity = true;
        } else if (lx.auxiliaries.count(key)) {
            t.pos = Pos::aux;
        } else if (lx.particles.count(key)) {
            t.pos = Pos::part;
        } else if (lx.pronouns.count(key)) {
            t.pos = Pos::pron;
        } else if (lx.sconj.count(key)) {
            t.pos = Pos::sconj;
        } else if (lx.adjectives.count(key)) {
            t.pos = Pos::adj;
        } else if (lx.adverbs.count(key)) {
            t.pos = Pos::adv;
        } else if (i > 0 && std::isupper(static_cast<unsigned char>(raw[i][0]))) {
            t.pos = Pos::propn; // unknown capitalized word mid-utterance
        } else {
            t.pos = Pos::other;
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<TaggedUtterance> load_tagged_corpus(const std::string& path,
                                                const LexiconTagger* tagger) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open tagged corpus: " + path);
    std::vector<TaggedUtterance> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where + ": " + e.what());
        }
        if (!j.contains("s1") || !j.contains("s2"))
            throw ValidationError(where + ": record needs s1 and s2");
        TaggedUtterance u;
        u.id = j.value("id", "rec-" + std::to_string(line_no));
        u.s1 = j.at("s1").get<std::string>();
        u.s2 = j.at("s2").get<std::string>();
        if (u.s1.empty() || u.s2.empty())
            throw ValidationError(where + ": empty speaker turn");
        if (j.contains("s2_tokens")) {
            for (const auto& entry : j.at("s2_tokens")) {
                if (!entry.is_array() || entry.size() < 2)
                    throw ValidationError(where + ": token entries are [text, POS, flags...]");
                TaggedToken t;
                t.text = entry.at(0).get<std::string>();
                t.pos = pos_from_string(entry.at(1).get<std::string>());
                for (std::size_t k = 2; k < entry.size(); ++k) {
                    const std::string flag = entry.at(k).get<std::string>();
                    if (flag == "meta")
                        t.is_meta_verb = true;
                    else if (flag == "abstract")
                        t.is_abstract_noun = true;
                    else if (flag == "entity")
                        t.is_concrete_entity = true;
                    else
                        throw ValidationError(where + ": unknown token flag '" + flag + "'");
                }
                try {
                    t.validate();
                } catch (const ValidationError& e) {
                    throw ValidationError(where + ": " + e.what());
                }
                u.s2_tokens.push_back(std::move(t));
            }
            if (u.s2_tokens.empty())
                throw ValidationError(where + ": empty s2_tokens");
        } else if (tagger != nullptr) {
            u.s2_tokens = tagger->tag(u.s2);
        } else {
            throw ValidationError(where + ": line has no s2_tokens and no lexicon tagger "
                                          "was configured");
        }
        out.push_back(std::move(u));
    }
    return out;
}

namespace {

ConnectiveRecord mine_one(const TaggedUtterance& u, const AnnotatorFn& annotate) {
    ConnectiveRecord rec;
    rec.id = u.id;
    rec.s1 = u.s1;

    const Extraction ex = extract_connective(u.s2_tokens);
    if (!ex.connective.empty()) {
        rec.connective = ex.connective;
        rec.remainder = ex.remainder;
        rec.source = "pos_extraction";
        // category stays unset: the pattern pass cannot name one
    } else if (annotate) {
        const LlmAnnotation ann = parse_llm_output(annotate(build_llm_prompt(u.s1, u.s2)));
        rec.source = "llm_generation";
        rec.remainder = u.s2; // generated connectives are additions, not splits
        if (ann.present) {
            rec.connective = ann.connective;
            rec.category = ann.category;
        } else {
            rec.category = Category::none;
        }
    } else {
        rec.source = "pos_extraction";
        rec.remainder = u.s2;
        rec.category = Category::none;
    }
    rec.validate();
    return rec;
}

} // namespace

MineOutcome mine_utterances(std::span<const TaggedUtterance> utterances,
                            const AnnotatorFn& annotate,
                            const std::function<void(const std::string&)>& log) {
    MineOutcome out;
    for (const auto& u : utterances) {
        try {
            out.records.push_back(mine_one(u, annotate));
        } catch (const ProtocolError& e) {
            ++out.skipped;
            if (log) log("record " + u.id + " skipped: " + e.what());
        }
    }
    return out;
}

MineOutcome mine_file(const std::string& input_path, const std::string& output_path,
                      const std::string& progress_path, bool resume,
                      const AnnotatorFn& annotate,
                      const std::function<void(const std::string&)>& log,
                      const LexiconTagger* tagger) {
    const auto utterances = load_tagged_corpus(input_path, tagger);

    std::size_t start = 0;
    if (resume) {
        std::ifstream progress(progress_path);
        if (progress) progress >> start;
        if (start > utterances.size())
            throw ValidationError("progress file " + progress_path +
                                  " exceeds the corpus size; it belongs to another input");
    }

    std::ofstream out(output_path, resume ? std::ios::app : std::ios::trunc);
    if (!out) throw ValidationError("cannot open output file: " + output_path);

    MineOutcome result;
    for (std::size_t i = start; i < utterances.size(); ++i) {
        try {
            ConnectiveRecord rec = mine_one(utterances[i], annotate);
            out << record_to_json(rec) << "\n";
            out.flush(); // records on disk before progress advances past them
            result.records.push_back(std::move(rec));
        } catch (const ProtocolError& e) {
            ++result.skipped;
            if (log) log("record " + utterances[i].id + " skipped: " + e.what());
        }
        std::ofstream progress(progress_path, std::ios::trunc);
        progress << (i + 1) << "\n";
    }
    return result;
}

std::string record_to_json(const ConnectiveRecord& record) {
    record.validate();
    nlohmann::ordered_json j;
    j["id"] = record.id;
    j["u"] = split_whitespace(record.s1);
    j["c"] = split_whitespace(record.connective);
    j["r"] = split_whitespace(record.remainder);
    j["source"] = record.source;
    if (record.category) j["category"] = to_string(*record.category);
    return j.dump();
}

ConnectiveRecord record_from_json(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad record line: ") + e.what());
    }
    ConnectiveRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.s1 = join_tokens(j.at("u").get<std::vector<std::string>>());
    rec.connective = join_tokens(j.at("c").get<std::vector<std::string>>());
    rec.remainder = join_tokens(j.at("r").get<std::vector<std::string>>());
    rec.source = j.at("source").get<std::string>();
    if (j.contains("category"))
        rec.category = category_from_string(j.at("category").get<std::string>());
    rec.validate();
    return rec;
}

std::vector<ConnectiveRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open records file: " + path);
    std::vector<ConnectiveRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            out.push_back(record_from_json(line));
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

DatasetStats dataset_stats(std::span<const ConnectiveRecord> records) {
    DatasetStats stats;
    stats.total_samples = records.size();
    std::map<std::string, std::size_t> labels;
    for (const auto& r : records) {
        if (r.connective.empty()) continue;
        ++stats.samples_with_connectives;
        ++labels[r.connective];
    }
    stats.connective_types = labels.size();
    if (stats.connective_types >= 2) {
        const auto total = static_cast<double>(stats.samples_with_connectives);
        double h = 0.0;
        for (const auto& [label, count] : labels) {
            const double p = static_cast<double>(count) / total;
            h -= p * std::log(p);
        }
        // The ratio can overshoot 1 by a few ulps when the distribution is uniform.
        stats.normalized_entropy =
            std::min(1.0, h / std::log(static_cast<double>(stats.connective_types)));
    }
    return stats;
}

std::string render_markdown(const DatasetStats& stats) {
    char entropy[32];
    std::snprintf(entropy, sizeof entropy, "%.3f", stats.normalized_entropy);
    std::ostringstream out;
    out << "| Samples | With connectives | Connective types | Normalized entropy |\n";
    out << "|---|---|---|---|\n";
    out << "| " << stats.total_samples << " | " << stats.samples_with_connectives << " | "
        << stats.connective_types << " | " << entropy << " |\n";
    return out.str();
}

DatasetSplit split_dataset(std::span<const ConnectiveRecord> records, std::uint64_t seed,
                           SplitRatios ratios) {
    if (ratios.train <= 0 || ratios.validation <= 0 || ratios.test <= 0)
        throw ValidationError("split ratios must all be positive");
    if (records.size() < 10)
        throw ValidationError("split needs at least 10 records, got " +
                              std::to_string(records.size()));

    std::vector<ConnectiveRecord> pool(records.begin(), records.end());
    // Hand-rolled shuffle: std::shuffle's draw sequence differs between
    // standard libraries, and split assignments must be reproducible.
    std::mt19937_64 rng(seed);
    for (std::size_t i = pool.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(pool[i], pool[j]);
    }

    const std::size_t n = pool.size();
    const auto sum = static_cast<std::size_t>(ratios.train + ratios.validation + ratios.test);
    const std::size_t cut1 = n * static_cast<std::size_t>(ratios.train) / sum;
    const std::size_t cut2 =
        n * static_cast<std::size_t>(ratios.train + ratios.validation) / sum;

    DatasetSplit split;
    split.train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cut1));
    split.validation.assign(pool.begin() + static_cast<std::ptrdiff_t>(cut1),
                            pool.begin() + static_cast<std::ptrdiff_t>(cut2));
    split.test.assign(pool.begin() + static_cast<std::ptrdiff_t>(cut2), pool.end());
    return split;
}

} // namespace ddtsr::miner
