#include <doctest.h>

#include <nlohmann/json.hpp>

#include "backforth/config.hpp"
#include "backforth/ledger.hpp"
#include "test_util.hpp"

using namespace backforth;
using nlohmann::json;

namespace {

json endpoint_json() {
  return json{{"base_url", "http://localhost:9999"}, {"model_name", "m"}};
}

json minimal_config_json() {
  return json{
      {"corpus", {{"path", "corpus.jsonl"}}},
      {"endpoints",
       {{"backward", endpoint_json()},
        {"forward", endpoint_json()},
        {"rewriter", endpoint_json()}}},
      {"paths", {{"ledger", "run/ledger.jsonl"}, {"output_dir", "run/out"}}},
  };
}

}  // namespace

TEST_CASE("minimal config gets the documented defaults") {
  const PipelineConfig config = parse_config(minimal_config_json());
  CHECK(config.corpus.max_tokens == 3584);
  CHECK(config.corpus.estimator == "bytes4");
  CHECK(config.corpus.text_field == "text");
  CHECK(config.corpus.source_label == "corpus.jsonl");
  CHECK(config.stages.filtering);
  CHECK(config.stages.rewriting);
  CHECK_FALSE(config.stages.distilling);
  CHECK(config.sampling.backtranslate.temperature == doctest::Approx(1.0));
  CHECK(config.sampling.backtranslate.top_p == doctest::Approx(0.9));
  CHECK(config.sampling.backtranslate.max_new_tokens == 1024);
  CHECK(config.sampling.rewrite.max_new_tokens == 2048);
  CHECK(config.analysis.scaling_constant == doctest::Approx(5.0));
  CHECK(config.analysis.grid_size == 25);
  CHECK(config.limits.max_consecutive_failures == 20);
  CHECK(config.endpoints.at("backward").max_retries == 3);
  CHECK(config.endpoints.at("backward").backoff_base_ms == 1000);
  CHECK_FALSE(config.seed_data.has_value());
}

TEST_CASE("unknown keys are rejected by name") {
  json bad = minimal_config_json();
  bad["endponts"] = json::object();  // typo
  CHECK_THROWS_WITH_AS((void)parse_config(bad), doctest::Contains("endponts"), ConfigError);

  json nested = minimal_config_json();
  nested["corpus"]["max_tokenz"] = 10;
  CHECK_THROWS_WITH_AS((void)parse_config(nested), doctest::Contains("corpus.max_tokenz"),
                       ConfigError);
}

TEST_CASE("a stage enabled without its endpoint role fails validation") {
  json no_rewriter = minimal_config_json();
  no_rewriter["endpoints"].erase("rewriter");
  CHECK_THROWS_WITH_AS((void)parse_config(no_rewriter), doctest::Contains("rewriter"),
                       ConfigError);

  SUBCASE("disabling the stage makes it valid") {
    no_rewriter["stages"] = {{"rewriting", false}, {"distilling", false}};
    CHECK_NOTHROW((void)parse_config(no_rewriter));
  }
  SUBCASE("filtering needs the forward role") {
    json no_forward = minimal_config_json();
    no_forward["endpoints"].erase("forward");
    CHECK_THROWS_WITH_AS((void)parse_config(no_forward), doctest::Contains("forward"),
                         ConfigError);
  }
  SUBCASE("the backward role is always needed") {
    json no_backward = minimal_config_json();
    no_backward["endpoints"].erase("backward");
    CHECK_THROWS_AS((void)parse_config(no_backward), ConfigError);
  }
}

TEST_CASE("config validation catches bad values") {
  json bad = minimal_config_json();
  bad["corpus"]["estimator"] = "letters";
  CHECK_THROWS_AS((void)parse_config(bad), ConfigError);

  json remote = minimal_config_json();
  remote["corpus"]["estimator"] = "remote";
  CHECK_THROWS_WITH_AS((void)parse_config(remote), doctest::Contains("tokenizer_url"),
                       ConfigError);

  json bad_top_p = minimal_config_json();
  bad_top_p["sampling"] = {{"score", {{"top_p", 1.5}}}};
  CHECK_THROWS_AS((void)parse_config(bad_top_p), ConfigError);
}

TEST_CASE("config hash is stable and sensitive to semantic changes") {
  const PipelineConfig a = parse_config(minimal_config_json());
  const PipelineConfig b = parse_config(minimal_config_json());
  CHECK(config_hash(a) == config_hash(b));

  json changed = minimal_config_json();
  changed["corpus"]["max_tokens"] = 1111;
  CHECK(config_hash(parse_config(changed)) != config_hash(a));
}

TEST_CASE("load_config reports missing files and invalid JSON as config errors") {
  CHECK_THROWS_AS((void)load_config("/nonexistent/config.json"), ConfigError);
  testutil::TempDir tmp;
  const std::string path = tmp.file("bad.json");
  testutil::write_file(path, "{ not json");
  CHECK_THROWS_AS((void)load_config(path), ConfigError);
}

// --- ledger ---------------------------------------------------------------------

namespace {

CandidatePair pair_at(const std::string& id, PairStatus status) {
  CandidatePair pair;
  pair.doc_id = id;
  pair.response_initial = "resp " + id;
  pair.status = status;
  if (status != PairStatus::ingested) pair.instruction = "inst " + id;
  return pair;
}

}  // namespace

TEST_CASE("ledger append and replay reconstruct identical state") {
  testutil::TempDir tmp;
  const std::string path = tmp.file("ledger.jsonl");
  {
    Ledger ledger = Ledger::open(path, "hash-1");
    ledger.append(pair_at("a", PairStatus::ingested));
    ledger.append(pair_at("b", PairStatus::ingested));
    CandidatePair a2 = pair_at("a", PairStatus::backtranslated);
    a2.instruction = "generated";
    ledger.append(a2);  // last entry wins
    CHECK(ledger.appends_this_session() == 3);
  }
  const auto state = Ledger::load_state(path);
  REQUIRE(state.size() == 2);
  CHECK(state.at("a").status == PairStatus::backtranslated);
  CHECK(state.at("a").payload.instruction == "generated");
  CHECK(state.at("a").attempt_count == 2);
  CHECK(state.at("b").attempt_count == 1);

  {
    Ledger reopened = Ledger::open(path, "hash-1");
    CHECK(reopened.state().size() == 2);
    const auto pairs = reopened.pairs_sorted();
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].doc_id == "a");
    CHECK(pairs[1].doc_id == "b");
  }
}

TEST_CASE("candidate pair JSON round-trip") {
  CandidatePair pair = pair_at("x", PairStatus::rewritten);
  pair.score = 5;
  pair.score_raw = "Score: 5";
  pair.response_rewritten = "better\nanswer";
  pair.token_estimate = 99;
  pair.doc_source = "cc";
  const CandidatePair back = pair_from_json(pair_to_json(pair));
  CHECK(back == pair);

  CandidatePair failed = pair_at("y", PairStatus::ingested);
  failed.failed = true;
  failed.failure_reason = "HTTP 500";
  CHECK(pair_from_json(pair_to_json(failed)) == failed);
}

TEST_CASE("ledger refuses a different config hash unless forced") {
  testutil::TempDir tmp;
  const std::string path = tmp.file("ledger.jsonl");
  {
    Ledger ledger = Ledger::open(path, "hash-1");
    ledger.append(pair_at("a", PairStatus::ingested));
  }
  CHECK_THROWS_WITH_AS((void)Ledger::open(path, "hash-2"), doctest::Contains("--force"),
                       ConfigError);
  {
    Ledger forced = Ledger::open(path, "hash-2", /*force=*/true);
    CHECK(forced.state().size() == 1);
  }
  // After forcing, the new hash is the recorded one.
  CHECK_NOTHROW((void)Ledger::open(path, "hash-2"));
}

TEST_CASE("an empty ledger accepts any hash") {
  testutil::TempDir tmp;
  const std::string path = tmp.file("ledger.jsonl");
  { Ledger ledger = Ledger::open(path, "hash-1"); }
  CHECK_NOTHROW((void)Ledger::open(path, "hash-1"));
}

TEST_CASE("the ledger lock admits one writer at a time") {
  testutil::TempDir tmp;
  const std::string path = tmp.file("ledger.jsonl");
  Ledger first = Ledger::open(path, "h");
  CHECK_THROWS_WITH_AS((void)Ledger::open(path, "h"), doctest::Contains("in progress"),
                       std::runtime_error);
}

TEST_CASE("corrupt ledger lines are fatal") {
  testutil::TempDir tmp;
  const std::string path = tmp.file("ledger.jsonl");
  testutil::write_file(path, "{\"type\":\"header\",\"config_hash\":\"h\"}\nnot json\n");
  CHECK_THROWS_AS((void)Ledger::load_state(path), std::runtime_error);
}
