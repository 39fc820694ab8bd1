#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tweetstudy/io.hpp"
#include "tweetstudy/types.hpp"

namespace tweetstudy::textlab {

namespace detail {

inline bool is_word_char(unsigned char c) {
    // Bytes >= 0x80 keep UTF-8 sequences intact.
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

inline bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// Strips scheme-prefixed URLs ("xxx://..." up to the next whitespace).
inline std::string strip_urls(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t pos = text.find("://", i);
        if (pos == std::string_view::npos) {
            out.append(text.substr(i));
            break;
        }
        // Walk back over the scheme.
        std::size_t scheme_start = pos;
        while (scheme_start > i && (std::isalnum(static_cast<unsigned char>(text[scheme_start - 1])) ||
                                    text[scheme_start - 1] == '+' || text[scheme_start - 1] == '-' ||
                                    text[scheme_start - 1] == '.'))
            --scheme_start;
        out.append(text.substr(i, scheme_start - i));
        std::size_t end = pos + 3;
        while (end < text.size() && !is_space(static_cast<unsigned char>(text[end]))) ++end;
        i = end;
    }
    return out;
}

} // namespace detail

/// Lowercases, removes URLs, splits on non-alphanumeric boundaries.
/// '#' and '@' are boundaries, so prefixed words survive bare.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::string cleaned = detail::strip_urls(text);
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : cleaned) {
        if (detail::is_word_char(c)) {
            cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

using Stoplist = std::unordered_set<std::string>;

inline Stoplist load_stoplist(const std::string& path) {
    Stoplist words;
    std::ifstream in = open_input(path);
    std::string line;
    while (std::getline(in, line)) {
        auto w = trim(line);
        if (!w.empty()) words.insert(to_lower_ascii(w));
    }
    return words;
}

inline std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                                 const Stoplist& stoplist) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens)
        if (!stoplist.count(t)) out.push_back(t);
    return out;
}

/// Corpus word frequencies restricted to frequency >= min_count.
struct Vocabulary {
    std::map<std::string, std::uint64_t> counts;
    std::uint64_t min_count = 50;

    bool contains(const std::string& w) const { return counts.count(w) != 0; }
};

inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                                   std::uint64_t min_count = 50) {
    std::unordered_map<std::string, std::uint64_t> raw;
    for (const auto& tokens : corpus)
        for (const auto& t : tokens) ++raw[t];
    Vocabulary vocab;
    vocab.min_count = min_count;
    for (const auto& [word, n] : raw)
        if (n >= min_count) vocab.counts.emplace(word, n);
    return vocab;
}

/// Polarity weights plus valence shifters. Negators flip the sign of a
/// scored word; amplifiers/deamplifiers scale it. Shifters act within a
/// two-token window before the scored word.
struct SentimentLexicon {
    std::unordered_map<std::string, double> polarity;
    std::unordered_set<std::string> negators;
    std::unordered_map<std::string, double> shifters; // amplifier > 1, deamplifier < 1
};

/// Lexicon file rows: `word,weight`, `word,NEGATOR`,
/// `word,AMPLIFIER:x` or `word,DEAMPLIFIER:x`.
inline SentimentLexicon load_lexicon(const std::string& path) {
    SentimentLexicon lex;
    std::ifstream in = open_input(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        auto fields = split(stripped, ',');
        if (fields.size() != 2) throw MalformedRow(line_no, "lexicon row needs 2 fields");
        std::string word = to_lower_ascii(trim(fields[0]));
        std::string spec(trim(fields[1]));
        if (word.empty()) throw MalformedRow(line_no, "empty lexicon word");
        if (spec == "NEGATOR") {
            lex.negators.insert(word);
        } else if (spec.rfind("AMPLIFIER:", 0) == 0 || spec.rfind("DEAMPLIFIER:", 0) == 0) {
            auto mult = parse_f64(spec.substr(spec.find(':') + 1));
            if (!mult || !(*mult > 0.0)) throw MalformedRow(line_no, "shifter multiplier must be > 0");
            lex.shifters.emplace(word, *mult);
        } else {
            auto weight = parse_f64(spec);
            if (!weight || !std::isfinite(*weight)) throw MalformedRow(line_no, "bad lexicon weight");
            lex.polarity.emplace(word, *weight);
        }
    }
    return lex;
}

namespace detail {

inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> sentences;
    std::string cur;
    for (char c : text) {
        cur += c;
        if (c == '.' || c == '!' || c == '?') {
            sentences.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) sentences.push_back(std::move(cur));
    return sentences;
}

} // namespace detail

/// Scores one tokenized sentence: sum of signed word weights, each
/// negated/scaled by shifters in the two preceding tokens, divided by
/// sqrt(token count).
inline double sentence_score(const std::vector<std::string>& tokens, const SentimentLexicon& lex) {
    if (tokens.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto hit = lex.polarity.find(tokens[i]);
        if (hit == lex.polarity.end()) continue;
        double weight = hit->second;
        for (std::size_t back = 1; back <= 2 && back <= i; ++back) {
            const std::string& prev = tokens[i - back];
            if (lex.negators.count(prev)) {
                weight = -weight;
            } else if (auto sh = lex.shifters.find(prev); sh != lex.shifters.end()) {
                weight *= sh->second;
            }
        }
        sum += weight;
    }
    return sum / std::sqrt(static_cast<double>(tokens.size()));
}

/// Mean of per-sentence scores; sentences split on terminal punctuation.
/// Empty or hit-free text scores exactly 0.
inline double sentiment_score(std::string_view text, const SentimentLexicon& lex) {
    double total = 0.0;
    std::size_t counted = 0;
    for (const auto& sentence : detail::split_sentences(text)) {
        auto tokens = tokenize(sentence);
        if (tokens.empty()) continue;
        total += sentence_score(tokens, lex);
        ++counted;
    }
    return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

} // namespace tweetstudy::textlab
