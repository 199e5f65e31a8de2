#include <algorithm>

#include "doctest.h"
#include "mulr/corpus.hpp"
#include "mulr/error.hpp"
#include "mulr/rng.hpp"

using namespace mulr;

using Strings = std::vector<std::string>;

TEST_CASE("corpus parsing with inline mentions") {
  auto c = parse_corpus("X visited [[m.05|Paris]].\n[[m.1|New York City]] is big\n");
  REQUIRE(c.sentences.size() == 2);
  CHECK(c.sentences[0].tokens == Strings{"X", "visited", "Paris", "."});
  REQUIRE(c.sentences[0].mentions.size() == 1);
  CHECK(c.sentences[0].mentions[0] == Mention{2, 3, "m.05"});
  CHECK(c.sentences[1].mentions[0] == Mention{0, 3, "m.1"});
  CHECK(parse_corpus(serialize_corpus(c)) == c);
  CHECK_THROWS_AS(parse_corpus("a [[m.1|b\n"), ParseError);
  CHECK_THROWS_AS(parse_corpus("a [[m.1]] b\n"), ParseError);
}

TEST_CASE("three-copy corpus examples") {
  NotableTypes notable{{"m.05", "city"}};
  auto c = parse_corpus("X visited [[m.05|Paris]]\n");
  auto s = build_three_copy_corpus(c, notable, {});
  REQUIRE(s.sentences.size() == 3);
  CHECK(s.sentences[0] == Strings{"X", "visited", "Paris"});
  CHECK(s.sentences[1] == Strings{"X", "visited", "m.05"});
  CHECK(s.sentences[2] == Strings{"X", "visited", "city"});
  CHECK(s.exempt.count("m.05"));
  CHECK(s.exempt.count("city"));

  auto plain = build_three_copy_corpus(parse_corpus("no mentions here\n"), notable, {});
  REQUIRE(plain.sentences.size() == 3);
  CHECK(plain.sentences[0] == plain.sentences[1]);
  CHECK(plain.sentences[1] == plain.sentences[2]);

  auto held = build_three_copy_corpus(c, notable, {"m.05"});
  CHECK(held.sentences[1] == Strings{"X", "visited", "m.05"});
  CHECK(held.sentences[2] == Strings{"X", "visited", "Paris"});

  CHECK_THROWS_AS(build_three_copy_corpus(parse_corpus("[[m.9|Q]]\n"), notable, {}), DataError);
}

TEST_CASE("three-copy corpus token accounting on random corpora") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    AnnotatedCorpus c;
    NotableTypes notable;
    std::unordered_set<std::string> exclude;
    std::size_t expected_copy1 = 0, expected_copy2 = 0, expected_copy3 = 0;
    for (int si = 0; si < 5; ++si) {
      Sentence s;
      std::size_t len = 1 + rng.below(10);
      for (std::size_t i = 0; i < len; ++i) s.tokens.push_back("w" + std::to_string(rng.below(5)));
      std::size_t i = 0;
      std::size_t collapsed = len;
      while (i < len) {
        std::size_t span = 1 + rng.below(3);
        if (i + span <= len && rng.bernoulli(0.3)) {
          std::string id = "m." + std::to_string(rng.below(4));
          notable[id] = "type" + id;
          if (rng.bernoulli(0.3)) exclude.insert(id);
          s.mentions.push_back({i, i + span, id});
          collapsed -= span - 1;
          i += span;
        } else {
          ++i;
        }
      }
      expected_copy1 += len;
      expected_copy2 += collapsed;
      c.sentences.push_back(std::move(s));
    }
    for (const auto &s : c.sentences) {
      std::size_t n = s.tokens.size();
      for (const auto &m : s.mentions) {
        if (!exclude.count(m.entity)) n -= (m.end - m.begin) - 1;
      }
      expected_copy3 += n;
    }
    auto stream = build_three_copy_corpus(c, notable, exclude);
    REQUIRE(stream.sentences.size() == 3 * c.sentences.size());
    std::size_t c1 = 0, c2 = 0, c3 = 0;
    for (std::size_t k = 0; k < stream.sentences.size(); k += 3) {
      c1 += stream.sentences[k].size();
      c2 += stream.sentences[k + 1].size();
      c3 += stream.sentences[k + 2].size();
    }
    CHECK(c1 == expected_copy1);
    CHECK(c2 == expected_copy2);
    CHECK(c3 == expected_copy3);
    CHECK(stream.token_count() == c1 + c2 + c3);
  }
}

TEST_CASE("build_vocabulary threshold, exemption and ordering") {
  TokenStream s;
  std::vector<std::string> sent;
  for (int i = 0; i < 99; ++i) sent.push_back("rare");
  for (int i = 0; i < 100; ++i) sent.push_back("common");
  sent.push_back("m.01");
  sent.push_back("zeta");
  sent.push_back("alpha");
  s.sentences.push_back(sent);
  s.exempt = {"m.01"};
  auto v = build_vocabulary(s, 100);
  CHECK(!v.find("rare"));
  CHECK(v.find("common") == 0);
  CHECK(v.find("m.01"));

  auto all = build_vocabulary(s, 1);
  CHECK(*all.find("alpha") < *all.find("m.01"));
  CHECK(*all.find("m.01") < *all.find("zeta"));

  auto again = build_vocabulary(s, 1);
  CHECK(again.tokens() == all.tokens());

  CHECK_THROWS_AS(build_vocabulary(TokenStream{}, 1), DataError);
  CHECK_THROWS_AS(build_vocabulary(s, 0), DataError);
}

TEST_CASE("extract_subwords examples") {
  CHECK(extract_subwords("ab", 2, 3) == Strings{"<a", "ab", "b>", "<ab", "ab>", "<ab>"});
  CHECK(extract_subwords("x", 3, 3) == Strings{"<x>"});
  CHECK(extract_subwords("aa", 2, 2) == Strings{"<a", "aa", "a>", "<aa>"});
  CHECK(extract_subwords("", 3, 6).empty());
  CHECK_THROWS_AS(extract_subwords("a", 0, 2), DataError);
  CHECK_THROWS_AS(extract_subwords("a", 3, 2), DataError);
}

TEST_CASE("extract_subwords count matches brute-force enumeration") {
  Rng rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t len = 1 + rng.below(12);
    std::string w;
    for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + rng.below(4));
    int nmin = 1 + static_cast<int>(rng.below(4));
    int nmax = nmin + static_cast<int>(rng.below(4));
    // Oracle: every substring of "<w>" with length in range, by brute force.
    std::string b = "<" + w + ">";
    Strings expect;
    for (int n = nmin; n <= nmax; ++n) {
      for (std::size_t i = 0; i + n <= b.size(); ++i) expect.push_back(b.substr(i, n));
    }
    if (static_cast<int>(b.size()) > nmax) expect.push_back(b);
    CHECK(extract_subwords(w, nmin, nmax) == expect);
  }
}

TEST_CASE("subword index keeps whole-word units and frequent ngrams") {
  TokenStream s;
  s.sentences.push_back({"lipofen", "lipofen", "lipofen", "lipofen", "lipofen", "rare"});
  auto v = build_vocabulary(s, 1);
  auto idx = SubwordIndex::build(v, 3, 6, 5);
  CHECK(idx.find("<lipofen>"));
  CHECK(idx.find("ofen>"));
  CHECK(idx.find("<rare>"));
  CHECK(!idx.find("rar"));
  auto units = idx.units("rare");
  CHECK(units.size() == 1);
  CHECK(idx.units("zzzz").empty());
}

TEST_CASE("most frequent names break ties lexicographically") {
  auto c = parse_corpus(
      "[[m.1|Bob]] x\n[[m.1|Bobby]] y\n[[m.1|Robert]] z\n[[m.1|Robert]] w\n[[m.1|Al]] q\n");
  auto names = most_frequent_names(c, 3);
  CHECK(names["m.1"] == Strings{"Robert", "Al", "Bob"});
  CHECK(mention_counts(c)["m.1"] == 5);
}
