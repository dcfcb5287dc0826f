#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include <zlib.h>

#include "backforth/corpus.hpp"
#include "test_util.hpp"

using namespace backforth;
using testutil::TempDir;
using testutil::write_file;

namespace {

std::vector<Document> make_docs(const std::vector<std::uint64_t>& estimates) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    Document d;
    d.id = "d" + std::to_string(i);
    d.text = "text " + std::to_string(i);
    d.token_estimate = estimates[i];
    docs.push_back(std::move(d));
  }
  return docs;
}

}  // namespace

TEST_CASE("token estimators") {
  auto ws = make_token_estimator("whitespace");
  CHECK(ws->count("hello world") == 2);
  CHECK(ws->count("") == 0);
  CHECK(ws->count("  a\t\nbb   c ") == 3);

  auto b4 = make_token_estimator("bytes4");
  CHECK(b4->count(std::string(16, 'x')) == 4);
  CHECK(b4->count("") == 0);
  CHECK(b4->count("abcde") == 2);  // ceil(5/4)

  CHECK_THROWS_AS(make_token_estimator("nope"), std::invalid_argument);
  CHECK_THROWS_AS(make_token_estimator("remote"), std::invalid_argument);  // needs a URL
}

TEST_CASE("stream_documents yields records in file order") {
  TempDir tmp;
  const std::string path = tmp.file("corpus.jsonl");
  write_file(path,
             R"({"id": "a", "text": "first document"})" "\n"
             R"({"text": "second, id synthesized"})" "\n"
             R"({"id": "c", "text": "third"})" "\n");

  StreamOptions opts;
  opts.estimator = make_token_estimator("whitespace");
  DocumentStream stream(path, "fixture", opts);
  auto docs = read_all(stream);

  REQUIRE(docs.size() == 3);
  CHECK(docs[0].id == "a");
  CHECK(docs[1].id == "corpus.jsonl:2");
  CHECK(docs[2].id == "c");
  CHECK(docs[0].source == "fixture");
  CHECK(docs[0].token_estimate == 2);
  CHECK(stream.stats().read_count == 3);
  CHECK(stream.stats().kept_count == 3);
}

TEST_CASE("stream_documents drops whitespace-only text and counts it") {
  TempDir tmp;
  const std::string path = tmp.file("corpus.jsonl");
  write_file(path,
             R"({"text": "   "})" "\n"
             R"({"text": "kept"})" "\n");
  StreamOptions opts;
  opts.estimator = make_token_estimator("bytes4");
  DocumentStream stream(path, "s", opts);
  auto docs = read_all(stream);
  CHECK(docs.size() == 1);
  CHECK(stream.stats().dropped_empty == 1);
  CHECK(stream.stats().read_count == 2);
  CHECK(stream.stats().read_count ==
        stream.stats().kept_count + stream.stats().dropped_empty);
}

TEST_CASE("malformed record: lenient skips, strict throws") {
  TempDir tmp;
  const std::string path = tmp.file("corpus.jsonl");
  write_file(path,
             R"({"text": "good one"})" "\n"
             "this is not json\n"
             R"({"text": "good two"})" "\n");

  StreamOptions opts;
  opts.estimator = make_token_estimator("bytes4");
  {
    DocumentStream stream(path, "s", opts);
    auto docs = read_all(stream);
    CHECK(docs.size() == 2);
    CHECK(stream.stats().read_count == 2);  // malformed lines are not records
  }
  opts.strict = true;
  {
    DocumentStream stream(path, "s", opts);
    CHECK(stream.next().has_value());
    CHECK_THROWS_AS(stream.next(), std::runtime_error);
  }
}

TEST_CASE("stream_documents reads gzip files") {
  TempDir tmp;
  const std::string path = tmp.file("corpus.jsonl.gz");
  gzFile gz = gzopen(path.c_str(), "wb");
  REQUIRE(gz != nullptr);
  const std::string content =
      R"({"id": "z1", "text": "compressed record one"})" "\n"
      R"({"id": "z2", "text": "compressed record two"})" "\n";
  gzwrite(gz, content.data(), static_cast<unsigned>(content.size()));
  gzclose(gz);

  StreamOptions opts;
  opts.estimator = make_token_estimator("whitespace");
  DocumentStream stream(path, "gz", opts);
  auto docs = read_all(stream);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].id == "z1");
  CHECK(docs[1].text == "compressed record two");
}

TEST_CASE("stream_documents respects a custom text field") {
  TempDir tmp;
  const std::string path = tmp.file("corpus.jsonl");
  write_file(path, R"({"content": "custom field", "text": 7})" "\n");
  StreamOptions opts;
  opts.text_field = "content";
  opts.estimator = make_token_estimator("whitespace");
  DocumentStream stream(path, "s", opts);
  auto docs = read_all(stream);
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].text == "custom field");
}

TEST_CASE("unreadable file is fatal") {
  StreamOptions opts;
  opts.estimator = make_token_estimator("bytes4");
  CHECK_THROWS_WITH_AS(DocumentStream("/nonexistent/nowhere.jsonl", "s", std::move(opts)),
                       doctest::Contains("/nonexistent/nowhere.jsonl"), std::runtime_error);
}

TEST_CASE("filter_by_length keeps estimates at or below the threshold") {
  auto docs = make_docs({100, 4000, 3500});
  auto result = filter_by_length(docs, 3584);
  REQUIRE(result.kept.size() == 2);
  CHECK(result.kept[0].token_estimate == 100);
  CHECK(result.kept[1].token_estimate == 3500);
  CHECK(result.stats.dropped_too_long == 1);

  SUBCASE("all inputs over threshold") {
    auto none = filter_by_length(make_docs({10, 20}), 5);
    CHECK(none.kept.empty());
    CHECK(none.stats.dropped_too_long == none.stats.read_count);
  }
  SUBCASE("boundary estimate is kept") {
    auto edge = filter_by_length(make_docs({3584}), 3584);
    CHECK(edge.kept.size() == 1);
  }
  SUBCASE("conservation and order preservation") {
    auto mixed = filter_by_length(make_docs({5, 50, 5, 50, 5}), 10);
    CHECK(mixed.stats.read_count == mixed.kept.size() + mixed.stats.dropped_too_long);
    REQUIRE(mixed.kept.size() == 3);
    CHECK(mixed.kept[0].id == "d0");
    CHECK(mixed.kept[1].id == "d2");
    CHECK(mixed.kept[2].id == "d4");
  }
}

TEST_CASE("sample_documents returns everything when the population is small") {
  auto docs = make_docs({1, 1, 1, 1, 1});
  auto sample = sample_documents(docs, 10, 7);
  CHECK(sample.size() == 5);
}

TEST_CASE("sample_documents is deterministic in (input, n, seed)") {
  std::vector<Document> docs;
  for (int i = 0; i < 1000; ++i) {
    Document d;
    d.id = "doc" + std::to_string(1000 + i);
    docs.push_back(std::move(d));
  }
  auto a = sample_documents(docs, 100, 7);
  auto b = sample_documents(docs, 100, 7);
  REQUIRE(a.size() == 100);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
  CHECK(std::is_sorted(a.begin(), a.end(),
                       [](const Document& x, const Document& y) { return x.id < y.id; }));
  auto c = sample_documents(docs, 100, 8);
  bool any_difference = false;
  for (std::size_t i = 0; i < a.size(); ++i) any_difference |= a[i].id != c[i].id;
  CHECK(any_difference);
}

TEST_CASE("reservoir inclusion probability: exhaustive small case") {
  // N=5, n=2: every item should be picked with probability 2/5 = 0.4.
  const int trials = 20000;
  std::array<int, 5> hits{};
  for (int seed = 0; seed < trials; ++seed) {
    Reservoir<int> reservoir(2, static_cast<std::uint64_t>(seed));
    for (int i = 0; i < 5; ++i) reservoir.offer(i);
    for (int picked : reservoir.take()) ++hits[static_cast<std::size_t>(picked)];
  }
  // 3 standard errors: sqrt(0.4*0.6/20000) ~ 0.0035 -> +-0.0104
  for (int h : hits) {
    const double freq = static_cast<double>(h) / trials;
    CHECK(freq == doctest::Approx(0.4).epsilon(0.03));
  }
}

TEST_CASE("reservoir inclusion probability: 1000 docs, n=100, many seeds") {
  const int docs = 1000;
  const int n = 100;
  const int seeds = 10000;
  std::vector<int> hits(docs, 0);
  for (int seed = 0; seed < seeds; ++seed) {
    Reservoir<int> reservoir(n, static_cast<std::uint64_t>(seed));
    for (int i = 0; i < docs; ++i) reservoir.offer(i);
    for (int picked : reservoir.take()) ++hits[static_cast<std::size_t>(picked)];
  }
  for (int h : hits) {
    const double freq = static_cast<double>(h) / seeds;
    CHECK(freq > 0.09);
    CHECK(freq < 0.11);
  }
}
