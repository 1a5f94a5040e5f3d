#include "ddtsr/tokens.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ddtsr {

using nlohmann::json;

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty())
        throw ValidationError("vocabulary must contain at least one token");
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        auto [it, inserted] = index_.emplace(tokens_[i], i);
        if (!inserted)
            throw ValidationError("duplicate vocabulary token: " + tokens_[i]);
    }
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view tok) const {
    auto it = index_.find(std::string(tok));
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

void TokenDistribution::validate(double tol) const {
    if (!vocab)
        throw ValidationError("distribution has no vocabulary");
    if (probs.size() != vocab->size())
        throw ValidationError("distribution length " + std::to_string(probs.size()) +
                              " does not match vocabulary size " + std::to_string(vocab->size()));
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0)
            throw ValidationError("distribution has a negative or non-finite probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > tol)
        throw ValidationError("distribution sums to " + std::to_string(sum) + ", not 1");
}

double TokenDistribution::prob_of(std::string_view tok) const {
    if (!vocab)
        throw ValidationError("distribution has no vocabulary");
    auto idx = vocab->index_of(tok);
    if (!idx)
        throw UnknownTokenError("token not in vocabulary: " + std::string(tok));
    return probs.at(*idx);
}

void DialogueSample::validate() const {
    if (id.empty())
        throw ValidationError("dialogue sample has an empty id");
    if (u.empty())
        throw ValidationError("dialogue sample " + id + " has an empty user turn");
    if (audio_ms && *audio_ms <= 0)
        throw ValidationError("dialogue sample " + id + " has non-positive audio_ms");
    if (chunk_count && *chunk_count <= 0)
        throw ValidationError("dialogue sample " + id + " has non-positive chunk_count");
    if (audio_ms && chunk_count) {
        auto expect = static_cast<int>((*audio_ms + kAudioChunkMs - 1) / kAudioChunkMs);
        if (expect != *chunk_count)
            throw ValidationError("dialogue sample " + id + ": chunk_count " +
                                  std::to_string(*chunk_count) + " does not match audio_ms " +
                                  std::to_string(*audio_ms));
    }
}

namespace {

std::vector<std::string> string_array(const json& j, const char* field, const std::string& where) {
    if (!j.contains(field))
        throw ValidationError(where + ": missing field '" + field + "'");
    const json& arr = j.at(field);
    if (!arr.is_array())
        throw ValidationError(where + ": field '" + field + "' must be an array of strings");
    std::vector<std::string> out;
    out.reserve(arr.size());
    for (const auto& item : arr) {
        if (!item.is_string())
            throw ValidationError(where + ": field '" + field + "' must be an array of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

} // namespace

std::vector<DialogueSample> load_dialogue_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open dialogue file: " + path);
    std::vector<DialogueSample> out;
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
        DialogueSample s;
        if (!j.contains("id") || !j.at("id").is_string())
            throw ValidationError(where + ": missing string field 'id'");
        s.id = j.at("id").get<std::string>();
        s.u = string_array(j, "u", where);
        if (j.contains("c"))
            s.c = string_array(j, "c", where);
        if (j.contains("r"))
            s.r = string_array(j, "r", where);
        if (j.contains("audio_ms")) {
            if (!j.at("audio_ms").is_number_integer())
                throw ValidationError(where + ": audio_ms must be an integer");
            s.audio_ms = j.at("audio_ms").get<std::int64_t>();
        }
        if (j.contains("chunk_count"))
            s.chunk_count = j.at("chunk_count").get<int>();
        if (s.audio_ms && !s.chunk_count)
            s.chunk_count = static_cast<int>((*s.audio_ms + kAudioChunkMs - 1) / kAudioChunkMs);
        try {
            s.validate();
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
        out.push_back(std::move(s));
    }
    return out;
}

void ConnectiveCandidate::validate() const {
    if (tokens.empty())
        throw ValidationError("connective candidate has no tokens");
    if (dists.size() != tokens.size() || is_marker.size() != tokens.size())
        throw ValidationError("connective candidate arrays disagree in length");
    if (!std::isfinite(model_score) || model_score < 0.0 || model_score > 1.0)
        throw ValidationError("connective candidate model_score must lie in [0, 1]");
}

std::string ConnectiveCandidate::text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i < is_marker.size() && is_marker[i])
            continue;
        if (!out.empty())
            out += ' ';
        out += tokens[i];
    }
    return out;
}

TabularOracle::TabularOracle(const std::string& path, std::string role) : role_(std::move(role)) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open oracle file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("oracle file " + path + ": bad JSON: " + e.what());
    }
    if (!j.is_object())
        throw ValidationError("oracle file " + path + ": top level must be an object");

    // The vocabulary is the sorted union of all row tokens, so row iteration
    // order in the file cannot leak into downstream numerics.
    std::set<std::string> seen;
    for (const auto& [key, row] : j.items()) {
        (void)key;
        if (!row.is_object())
            throw ValidationError("oracle file " + path + ": rows must be objects");
        for (const auto& [tok, p] : row.items()) {
            (void)p;
            seen.insert(tok);
        }
    }
    if (seen.empty())
        throw ValidationError("oracle file " + path + ": no tokens in any row");
    vocab_ = std::make_shared<Vocabulary>(std::vector<std::string>(seen.begin(), seen.end()));

    for (const auto& [key, row] : j.items()) {
        std::vector<double> probs(vocab_->size(), 0.0);
        double sum = 0.0;
        for (const auto& [tok, p] : row.items()) {
            if (!p.is_number())
                throw ValidationError("oracle row '" + key + "': probability for '" + tok +
                                      "' is not a number");
            double v = p.get<double>();
            if (v < 0.0)
                throw ValidationError("oracle row '" + key + "': negative probability for '" +
                                      tok + "'");
            probs[*vocab_->index_of(tok)] = v;
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("oracle row '" + key + "' sums to " + std::to_string(sum) +
                                  ", not 1");
        rows_.emplace(key, std::move(probs));
    }
}

TokenDistribution TabularOracle::next_token(std::span<const std::string> context) const {
    std::string key = join_tokens(context);
    auto it = rows_.find(key);
    if (it == rows_.end())
        it = rows_.find("*");
    if (it == rows_.end())
        throw ValidationError("oracle has no row for context '" + key + "' and no '*' fallback");
    return TokenDistribution{vocab_, it->second};
}

std::string join_tokens(std::span<const std::string> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i)
            out += ' ';
        out += tokens[i];
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        if (i > start)
            out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

} // namespace ddtsr
