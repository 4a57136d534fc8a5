#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "triage/error.hpp"
#include "triage/fnv.hpp"

namespace triage {

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;
inline constexpr std::int32_t kSepId = 2;
inline constexpr std::int32_t kNumSpecialIds = 3;

inline constexpr std::string_view kTitleBodySeparator = " [SEP] ";
/// The separator after normalization.
inline constexpr std::string_view kSepToken = "[sep]";

inline std::string concat_title_body(std::string_view title, std::string_view body) {
  std::string out;
  out.reserve(title.size() + kTitleBodySeparator.size() + body.size());
  out.append(title).append(kTitleBodySeparator).append(body);
  return out;
}

namespace detail {

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string nfc_lower(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  u = nfc->normalize(u, status);
  u.toLower();
  u = nfc->normalize(u, status);
  if (U_FAILURE(status)) throw Error("ICU normalization failed");
  std::string out;
  u.toUTF8String(out);
  return out;
}

/// Replaces each closed ``` ... ``` span with " codeblock ". An unmatched
/// opening fence is left as text.
inline std::string replace_code_fences(std::string_view s) {
  static constexpr std::string_view kFence = "```";
  std::string out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto open = s.find(kFence, pos);
    if (open == std::string_view::npos) break;
    const auto close = s.find(kFence, open + kFence.size());
    if (close == std::string_view::npos) break;
    out.append(s.substr(pos, open - pos)).append(" codeblock ");
    pos = close + kFence.size();
  }
  out.append(s.substr(pos));
  return out;
}

/// Replaces every "http://..." or "https://..." run of non-space bytes with "url".
inline std::string replace_urls(std::string_view s) {
  std::string out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto at = s.find("http", pos);
    if (at == std::string_view::npos) break;
    std::size_t scheme_end = 0;
    if (s.substr(at, 7) == "http://") {
      scheme_end = at + 7;
    } else if (s.substr(at, 8) == "https://") {
      scheme_end = at + 8;
    } else {
      out.append(s.substr(pos, at + 4 - pos));
      pos = at + 4;
      continue;
    }
    std::size_t end = scheme_end;
    while (end < s.size() && !is_ascii_space(s[end])) ++end;
    out.append(s.substr(pos, at - pos)).append("url");
    pos = end;
  }
  out.append(s.substr(pos));
  return out;
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// NFC, lowercase, fenced code -> "codeblock", URLs -> "url", whitespace
/// runs collapsed and trimmed. Idempotent.
inline std::string normalize_text(std::string_view s) {
  std::string t = detail::nfc_lower(s);
  t = detail::replace_code_fences(t);
  t = detail::replace_urls(t);
  return detail::collapse_whitespace(t);
}

/// Splits on ASCII whitespace; no normalization.
inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && detail::is_ascii_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !detail::is_ascii_space(s[i])) ++i;
    if (i > start) words.emplace_back(s.substr(start, i - start));
  }
  return words;
}

// ---------------------------------------------------------------------------

/// Word vocabulary. Learned tokens take ids from kNumSpecialIds upward; ids
/// 0..2 are PAD, UNK, SEP.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> tokens, std::size_t min_frequency, std::size_t max_size)
      : tokens_(std::move(tokens)), min_frequency_(min_frequency), max_size_(max_size) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<std::int32_t>(i) + kNumSpecialIds).second)
        throw ConfigError("duplicate vocabulary token: " + tokens_[i]);
    }
  }

  /// Total id space including the reserved ids.
  std::size_t size() const { return tokens_.size() + kNumSpecialIds; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t min_frequency() const { return min_frequency_; }
  std::size_t max_size() const { return max_size_; }

  std::int32_t id_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkId : it->second;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["min_frequency"] = min_frequency_;
    j["max_size"] = max_size_;
    j["tokens"] = tokens_;
    return j;
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    try {
      return Vocabulary(j.at("tokens").get<std::vector<std::string>>(),
                        j.at("min_frequency").get<std::size_t>(), j.at("max_size").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid vocabulary: ") + e.what());
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write vocabulary: " + path);
    out << to_json().dump() << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open vocabulary: " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("invalid vocabulary file " + path + ": " + e.what());
    }
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.min_frequency_ == b.min_frequency_ && a.max_size_ == b.max_size_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::size_t min_frequency_ = 1;
  std::size_t max_size_ = 1;
};

/// Counts whitespace-split words of each normalized document; keeps those with
/// frequency >= min_frequency, most frequent first, ties lexicographic,
/// truncated to max_size.
inline Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_frequency,
                              std::size_t max_size) {
  if (corpus.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");
  if (min_frequency == 0 || max_size == 0)
    throw ConfigError("min_frequency and max_size must be positive");
  std::map<std::string, std::size_t> freq;
  for (const auto& doc : corpus) {
    for (auto& w : split_words(normalize_text(doc))) ++freq[std::move(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n >= min_frequency && tok != kSepToken) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (kept.size() > max_size) kept.resize(max_size);
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(std::move(tok));
  return Vocabulary(std::move(tokens), min_frequency, max_size);
}

/// Fixed-length id sequence with attention mask.
struct TokenSequence {
  std::vector<std::int32_t> ids;  // always max_seq_len long
  std::vector<bool> mask;         // true on real tokens
  std::size_t length = 0;         // number of real tokens

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

inline TokenSequence encode_sequence(std::string_view text, const Vocabulary& vocab,
                                     std::size_t max_seq_len) {
  if (max_seq_len == 0) throw ConfigError("max_seq_len must be positive");
  const auto words = split_words(normalize_text(text));
  TokenSequence seq;
  seq.length = std::min(words.size(), max_seq_len);
  seq.ids.assign(max_seq_len, kPadId);
  seq.mask.assign(max_seq_len, false);
  for (std::size_t i = 0; i < seq.length; ++i) {
    seq.ids[i] = words[i] == kSepToken ? kSepId : vocab.id_of(words[i]);
    seq.mask[i] = true;
  }
  return seq;
}

// ---------------------------------------------------------------------------

struct NgramRange {
  std::size_t min = 2;
  std::size_t max = 4;
};

namespace detail {

/// Byte offsets of UTF-8 code point starts, plus the end offset.
inline std::vector<std::size_t> code_point_bounds(std::string_view s) {
  std::vector<std::size_t> b;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) b.push_back(i);
  }
  b.push_back(s.size());
  return b;
}

}  // namespace detail

/// Character n-grams (over code points) of every whitespace-separated word
/// wrapped in '<' '>', hashed with FNV-1a 64 and reduced modulo `buckets`.
/// The result is a multiset in generation order.
inline std::vector<std::uint64_t> hash_ngrams(std::string_view text, NgramRange range,
                                              std::uint64_t buckets) {
  if (buckets == 0) throw ConfigError("bucket count must be positive");
  if (range.min == 0 || range.min > range.max) throw ConfigError("invalid n-gram range");
  std::vector<std::uint64_t> out;
  for (const auto& word : split_words(text)) {
    const std::string wrapped = "<" + word + ">";
    const auto bounds = detail::code_point_bounds(wrapped);
    const std::size_t n_chars = bounds.size() - 1;
    for (std::size_t n = range.min; n <= range.max; ++n) {
      for (std::size_t i = 0; i + n <= n_chars; ++i) {
        const std::string_view gram(wrapped.data() + bounds[i], bounds[i + n] - bounds[i]);
        out.push_back(fnv1a64(gram) % buckets);
      }
    }
  }
  return out;
}

}  // namespace triage
