#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/error.hpp"
#include "triage/labels.hpp"
#include "triage/rng.hpp"

namespace triage {

/// One issue report as stored in a dataset file.
struct IssueRecord {
  std::uint64_t id = 0;
  std::string repo;
  std::string title;
  std::string body;
  std::vector<std::string> raw_labels;
  LabelVector labels;
  std::optional<std::string> assignee;
  std::string created_at;
  std::string language;

  friend bool operator==(const IssueRecord&, const IssueRecord&) = default;
};

/// Removes raw NUL bytes, which never survive ingestion.
inline std::string strip_nul(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != '\0') out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Timestamps

using Timestamp = std::chrono::sys_seconds;

/// Parses RFC 3339 date-times ("2021-03-04T05:06:07Z", optional fraction,
/// optional numeric offset). Returns nullopt on malformed input.
inline std::optional<Timestamp> parse_rfc3339(std::string_view s) {
  using namespace std::chrono;
  auto digits = [&](std::size_t pos, std::size_t n) -> std::optional<int> {
    if (pos + n > s.size()) return std::nullopt;
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 20 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    return std::nullopt;
  auto Y = digits(0, 4), M = digits(5, 2), D = digits(8, 2);
  auto h = digits(11, 2), m = digits(14, 2), sec = digits(17, 2);
  if (!Y || !M || !D || !h || !m || !sec) return std::nullopt;
  const year_month_day ymd{year{*Y}, month{static_cast<unsigned>(*M)},
                           day{static_cast<unsigned>(*D)}};
  if (!ymd.ok() || *h > 23 || *m > 59 || *sec > 60) return std::nullopt;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) return std::nullopt;
  }
  if (pos >= s.size()) return std::nullopt;
  int offset_minutes = 0;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    const int sign = s[pos] == '+' ? 1 : -1;
    auto oh = digits(pos + 1, 2), om = digits(pos + 4, 2);
    if (!oh || !om || pos + 3 >= s.size() || s[pos + 3] != ':') return std::nullopt;
    offset_minutes = sign * (*oh * 60 + *om);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;
  return sys_days{ymd} + hours{*h} + minutes{*m} + seconds{*sec} - minutes{offset_minutes};
}

/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
inline std::string format_rfc3339(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long long>(hms.seconds().count()));
  return buf;
}

// ---------------------------------------------------------------------------
// Dataset file (JSONL)

inline nlohmann::ordered_json to_json(const IssueRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["repo"] = r.repo;
  j["title"] = r.title;
  j["body"] = r.body;
  j["raw_labels"] = r.raw_labels;
  j["labels"] = {{"bug", r.labels.bug},
                 {"enhancement", r.labels.enhancement},
                 {"question", r.labels.question}};
  if (r.assignee) {
    j["assignee"] = *r.assignee;
  } else {
    j["assignee"] = nullptr;
  }
  j["created_at"] = r.created_at;
  j["language"] = r.language;
  return j;
}

inline IssueRecord record_from_json(const nlohmann::json& j) {
  IssueRecord r;
  r.id = j.at("id").get<std::uint64_t>();
  r.repo = j.at("repo").get<std::string>();
  r.title = j.at("title").get<std::string>();
  r.body = j.at("body").get<std::string>();
  r.raw_labels = j.at("raw_labels").get<std::vector<std::string>>();
  const auto& l = j.at("labels");
  r.labels.bug = l.at("bug").get<bool>();
  r.labels.enhancement = l.at("enhancement").get<bool>();
  r.labels.question = l.at("question").get<bool>();
  if (const auto& a = j.at("assignee"); !a.is_null()) r.assignee = a.get<std::string>();
  r.created_at = j.at("created_at").get<std::string>();
  r.language = j.at("language").get<std::string>();
  return r;
}

inline std::string to_jsonl_line(const IssueRecord& r) {
  return to_json(r).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

/// Writes one object per line, LF endings, no BOM. Rejects duplicate ids.
inline void write_dataset(std::ostream& out, const std::vector<IssueRecord>& records) {
  std::set<std::uint64_t> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second)
      throw ConfigError("duplicate issue id in dataset: " + std::to_string(r.id));
    out << to_jsonl_line(r) << '\n';
  }
}

inline void write_dataset(const std::string& path, const std::vector<IssueRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open dataset for writing: " + path);
  write_dataset(out, records);
  if (!out) throw Error("failed writing dataset: " + path);
}

inline std::vector<IssueRecord> read_dataset(std::istream& in) {
  std::vector<IssueRecord> records;
  std::set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(records.back().id).second)
      throw Error("dataset line " + std::to_string(line_no) + ": duplicate id " +
                  std::to_string(records.back().id));
  }
  return records;
}

inline std::vector<IssueRecord> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset: " + path);
  return read_dataset(in);
}

// ---------------------------------------------------------------------------
// Sampling and splitting

namespace detail {

inline std::vector<IssueRecord> sorted_by_id(std::vector<IssueRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const IssueRecord& a, const IssueRecord& b) { return a.id < b.id; });
  return records;
}

}  // namespace detail

/// Uniform sample without replacement. Records are ordered by id before the
/// seeded shuffle, so the result does not depend on input order.
inline std::vector<IssueRecord> sample_dataset(std::vector<IssueRecord> records, std::size_t n,
                                               std::uint64_t seed) {
  if (n == 0) throw SizeError("sample size must be positive");
  if (n > records.size())
    throw SizeError("cannot sample " + std::to_string(n) + " of " +
                    std::to_string(records.size()) + " records");
  records = detail::sorted_by_id(std::move(records));
  Rng rng(seed);
  rng.shuffle(records);
  records.resize(n);
  return records;
}

struct DatasetSplit {
  std::vector<IssueRecord> train;
  std::vector<IssueRecord> test;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
};

/// Number of training records for a split: round(fraction * n), half away from zero.
inline std::size_t train_count(std::size_t n, double train_fraction) {
  return static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
}

inline DatasetSplit split_dataset(std::vector<IssueRecord> records, double train_fraction,
                                  std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie strictly between 0 and 1");
  if (records.size() < 2) throw SizeError("need at least 2 records to split");
  const std::size_t n_train = train_count(records.size(), train_fraction);
  if (n_train == 0 || n_train == records.size())
    throw SizeError("split of " + std::to_string(records.size()) + " records leaves an empty side");
  records = detail::sorted_by_id(std::move(records));
  Rng rng(seed);
  rng.shuffle(records);
  DatasetSplit split;
  split.seed = seed;
  split.train_fraction = train_fraction;
  split.test.assign(std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(n_train)),
                    std::make_move_iterator(records.end()));
  records.resize(n_train);
  split.train = std::move(records);
  return split;
}

/// Records usable for label training: at least one canonical category set.
inline std::vector<IssueRecord> labelled_only(const std::vector<IssueRecord>& records) {
  std::vector<IssueRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [](const IssueRecord& r) { return r.labels.any(); });
  return out;
}

// ---------------------------------------------------------------------------
// Assignment candidates

struct TimeWindow {
  Timestamp begin;
  Timestamp end;  // inclusive

  bool contains(Timestamp t) const { return t >= begin && t <= end; }
};

/// The `days`-long window ending at the newest parseable created_at.
inline TimeWindow trailing_window(const std::vector<IssueRecord>& records, int days = 365) {
  std::optional<Timestamp> newest;
  for (const auto& r : records) {
    if (auto t = parse_rfc3339(r.created_at); t && (!newest || *t > *newest)) newest = t;
  }
  if (!newest) throw ColdStartError("no record carries a valid created_at timestamp");
  return {*newest - std::chrono::days{days}, *newest};
}

struct CandidateSet {
  std::vector<IssueRecord> records;
  /// Qualifying assignees, sorted lexicographically. Index = class id.
  std::vector<std::string> roster;
};

inline CandidateSet filter_candidates(const std::vector<IssueRecord>& records,
                                      std::size_t min_assigned, const TimeWindow& window) {
  if (min_assigned == 0) throw ConfigError("min_assigned must be positive");
  std::map<std::string, std::size_t> counts;
  std::vector<const IssueRecord*> in_window;
  for (const auto& r : records) {
    if (!r.assignee) continue;
    const auto t = parse_rfc3339(r.created_at);
    if (!t || !window.contains(*t)) continue;
    ++counts[*r.assignee];
    in_window.push_back(&r);
  }
  CandidateSet out;
  for (const auto& [login, n] : counts) {
    if (n >= min_assigned) out.roster.push_back(login);
  }
  if (out.roster.empty())
    throw ColdStartError("no assignee has at least " + std::to_string(min_assigned) +
                         " assignments in the window; assignment model cannot be trained");
  for (const IssueRecord* r : in_window) {
    if (std::binary_search(out.roster.begin(), out.roster.end(), *r->assignee))
      out.records.push_back(*r);
  }
  return out;
}

}  // namespace triage
