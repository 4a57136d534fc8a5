#include <algorithm>
#include <string>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "triage/error.hpp"
#include "triage/fnv.hpp"
#include "triage/rng.hpp"
#include "triage/textproc.hpp"

using namespace triage;

TEST(Concat, TitleAndBody) {
  EXPECT_EQ(concat_title_body("Crash on start", "stack trace ..."), "Crash on start [SEP] stack trace ...");
  EXPECT_EQ(concat_title_body("", ""), " [SEP] ");
  EXPECT_EQ(concat_title_body("T", ""), "T [SEP] ");
}

TEST(Normalize, UrlCaseAndSpaces) {
  EXPECT_EQ(normalize_text("Fix  THIS https://x.y/z"), "fix this url");
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text("  \t\n "), "");
}

TEST(Normalize, CodeFence) {
  EXPECT_EQ(normalize_text("```rs\npanic!()\n``` bad"), "codeblock bad");
  EXPECT_EQ(normalize_text("a ```x``` b ```y``` c"), "a codeblock b codeblock c");
  // An unterminated fence is left alone.
  EXPECT_EQ(normalize_text("see ``` here"), "see ``` here");
}

TEST(Normalize, UnicodeNfcAndLower) {
  // "E" + combining acute composes, then lowercases to U+00E9.
  EXPECT_EQ(normalize_text("CAF\x45\xcc\x81"), "caf\xc3\xa9");
  EXPECT_EQ(normalize_text("\xc3\x89T\xc3\x89"), "\xc3\xa9t\xc3\xa9");
}

TEST(Normalize, Idempotent) {
  const char* samples[] = {"Fix  THIS https://x.y/z", "```rs\npanic!()\n``` bad", "CAF\x45\xcc\x81 Ω ΣΑΣ",
                           "http://a.b/c?d=e#f tail", "Title [SEP] body with ```code``` and\ttabs",
                           "I\xcc\x87stanbul", "```a```\n```b```", "url url https://u"};
  for (const char* s : samples) {
    const auto once = normalize_text(s);
    EXPECT_EQ(normalize_text(once), once) << s;
  }
  Rng rng(11);
  const std::string alphabet[] = {"a", "B", " ", "\n", "`", "```", "http://", "https://x", ".", "\xc3\x89",
                                  "\xcc\x81", "Z", "\t", "[SEP]", "\xe2\x84\xab"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const auto len = rng.below(20);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.below(std::size(alphabet))];
    const auto once = normalize_text(s);
    EXPECT_EQ(normalize_text(once), once) << s;
  }
}

TEST(Vocab, MinFrequency) {
  const auto v = build_vocab({"a a b"}, 2, 100);
  EXPECT_EQ(v.tokens(), std::vector<std::string>{"a"});
  EXPECT_EQ(v.id_of("a"), 3);
  EXPECT_EQ(v.id_of("b"), kUnkId);
}

TEST(Vocab, Single) {
  const auto v = build_vocab({"x"}, 1, 1000000);
  EXPECT_EQ(v.tokens(), std::vector<std::string>{"x"});
  EXPECT_EQ(v.size(), 4u);
}

TEST(Vocab, LexicographicTies) {
  const auto v = build_vocab({"b a"}, 1, 10);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"a", "b"}));
}

TEST(Vocab, FrequencyOrderAndTruncation) {
  const auto v = build_vocab({"c c c b b a d d", "b"}, 1, 2);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"b", "c"}));
}

TEST(Vocab, EmptyCorpus) { EXPECT_THROW(build_vocab({}, 1, 10), ConfigError); }

TEST(Vocab, SeparatorIsNotLearned) {
  const auto v = build_vocab({concat_title_body("x", "y"), concat_title_body("x", "z")}, 1, 10);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"x", "y", "z"}));
}

TEST(Vocab, OrderIndependent) {
  std::vector<std::string> docs = {"the cat sat", "the dog", "a cat and a dog", "sat sat the", "zebra"};
  const auto ref = build_vocab(docs, 1, 100);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    rng.shuffle(docs);
    EXPECT_EQ(build_vocab(docs, 1, 100), ref);
  }
}

TEST(Vocab, JsonRoundTrip) {
  const auto v = build_vocab({"one two two three three three"}, 1, 10);
  EXPECT_EQ(Vocabulary::from_json(nlohmann::json::parse(v.to_json().dump())), v);
  EXPECT_EQ(v.to_json().dump(), R"({"min_frequency":1,"max_size":10,"tokens":["three","two","one"]})");
}

TEST(Encode, TruncatesToMaxLength) {
  std::string text;
  for (int i = 0; i < 200; ++i) text += "w" + std::to_string(i) + " ";
  const auto v = build_vocab({text}, 1, 1000);
  const auto s = encode_sequence(text, v, 128);
  EXPECT_EQ(s.ids.size(), 128u);
  EXPECT_EQ(s.length, 128u);
  EXPECT_TRUE(std::all_of(s.mask.begin(), s.mask.end(), [](bool m) { return m; }));
}

TEST(Encode, EmptyIsAllPad) {
  const auto v = build_vocab({"x"}, 1, 10);
  const auto s = encode_sequence("", v, 8);
  EXPECT_EQ(s.ids, std::vector<std::int32_t>(8, kPadId));
  EXPECT_EQ(s.mask, std::vector<bool>(8, false));
  EXPECT_EQ(s.length, 0u);
}

TEST(Encode, OovIsUnkAndSeparatorIsSep) {
  const auto v = build_vocab({"known"}, 1, 10);
  const auto s = encode_sequence(concat_title_body("known", "mystery"), v, 5);
  EXPECT_EQ(s.ids, (std::vector<std::int32_t>{3, kSepId, kUnkId, kPadId, kPadId}));
  EXPECT_EQ(s.mask, (std::vector<bool>{true, true, true, false, false}));
}

TEST(Encode, MaskCountProperty) {
  const auto v = build_vocab({"a b c d e f g"}, 1, 100);
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t tokens = rng.below(40);
    const std::size_t max_len = 1 + rng.below(30);
    std::string text;
    for (std::size_t i = 0; i < tokens; ++i) text += std::string(1, static_cast<char>('a' + rng.below(10))) + " ";
    const auto s = encode_sequence(text, v, max_len);
    EXPECT_EQ(s.ids.size(), max_len);
    EXPECT_EQ(s.mask.size(), max_len);
    EXPECT_EQ(static_cast<std::size_t>(std::count(s.mask.begin(), s.mask.end(), true)), std::min(tokens, max_len));
    for (std::size_t i = 0; i < max_len; ++i) EXPECT_EQ(s.mask[i], s.ids[i] != kPadId);
  }
}

TEST(Fnv, KnownValues) {
  // Frozen from an independent implementation.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ull);
  static_assert(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST(Fnv, MatchesReference) {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    std::string s(rng.below(30), '\0');
    for (auto& c : s) c = static_cast<char>(rng.below(256));
    EXPECT_EQ(fnv1a64(s), triage::testing::fnv1a_reference(s));
  }
}

TEST(Ngrams, Bigram) {
  const auto h = hash_ngrams("ab", {2, 2}, 1000);
  EXPECT_EQ(h, (std::vector<std::uint64_t>{782, 762, 9}));
  const std::uint64_t B = 12345;
  EXPECT_EQ(hash_ngrams("ab", {2, 2}, B),
            (std::vector<std::uint64_t>{triage::testing::fnv1a_reference("<a") % B, triage::testing::fnv1a_reference("ab") % B,
                                        triage::testing::fnv1a_reference("b>") % B}));
}

TEST(Ngrams, EmptyAndDeterministic) {
  EXPECT_TRUE(hash_ngrams("", {2, 4}, 100).empty());
  EXPECT_EQ(hash_ngrams("hello world", {2, 4}, 97), hash_ngrams("hello world", {2, 4}, 97));
}

TEST(Ngrams, CodePoints) {
  // "<é" is two code points, so it is one bigram.
  const auto h = hash_ngrams("\xc3\xa9", {2, 2}, 1000);
  EXPECT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0], 987u);
}

TEST(Ngrams, CountPerWord) {
  // "<abc>" has 5 code points: 4 bigrams, 3 trigrams, 2 four-grams.
  EXPECT_EQ(hash_ngrams("abc", {2, 4}, 1u << 20).size(), 9u);
  EXPECT_EQ(hash_ngrams("abc abc", {2, 4}, 1u << 20).size(), 18u);
  EXPECT_THROW(hash_ngrams("abc", {2, 4}, 0), ConfigError);
}
