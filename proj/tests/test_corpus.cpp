#include <doctest.h>

#include <set>

#include "babilab/corpus.hpp"

using namespace babilab;

namespace {

GenConfig small_config(uint64_t seed, size_t size = 200) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.train_size = cfg.dev_size = cfg.test_size = cfg.test_oov_size = size;
  return cfg;
}

}  // namespace

TEST_CASE("slot catalog defaults") {
  const auto catalog = SlotCatalog::defaults();
  catalog.validate();
  CHECK(catalog.all_values(Slot::cuisine).size() == 10);
  CHECK(catalog.all_values(Slot::location).size() == 10);
  CHECK(catalog.all_values(Slot::party_size).size() == 4);
  CHECK(catalog.all_values(Slot::price_range).size() == 3);
  CHECK(catalog.slot_of("british") == Slot::cuisine);
  CHECK(catalog.slot_of("madrid") == Slot::location);
  CHECK(catalog.slot_of("eight") == Slot::party_size);
  CHECK(catalog.slot_of("cheap") == Slot::price_range);
  CHECK(!catalog.slot_of("table").has_value());
  CHECK(catalog.is_oov_value("tokyo"));
  CHECK(!catalog.is_oov_value("paris"));
}

TEST_CASE("template instantiation replaces the value position") {
  CHECK(instantiate_template({"in", "a", "*", "price", "range"}, "cheap") ==
        Utterance{"in", "a", "cheap", "price", "range"});
}

TEST_CASE("dialogue with everything upfront and no greeting has 3 turns") {
  Rng rng(42);
  const auto goal = sample_goal(rng, SlotCatalog::defaults(), false);
  DialoguePlan plan;
  plan.greeting_turn = false;
  plan.upfront = {true, true, true, true};
  const auto d = realize_dialogue(goal, plan, TemplateSet::defaults(), rng);
  REQUIRE(d.turns.size() == 3);
  CHECK(join_tokens(d.turns[1].system) == kSysOk);
  CHECK(d.api_call()[0] == kApiCallToken);
}

TEST_CASE("generated dialogues are structurally sound") {
  const auto bundle = generate_corpus(small_config(3));
  std::set<std::string> canonical;
  for (const auto& u : canonical_system_utterances()) canonical.insert(join_tokens(u));
  for (const auto& d : bundle.train.dialogues) {
    REQUIRE(!d.turns.empty());
    const auto& api = d.api_call();
    REQUIRE(api.size() == 5);
    CHECK(api[0] == kApiCallToken);
    CHECK(api[1] == d.goal.cuisine);
    CHECK(api[2] == d.goal.location);
    CHECK(api[3] == d.goal.party_size);
    CHECK(api[4] == d.goal.price_range);
    for (size_t i = 0; i < d.turns.size(); ++i) {
      CHECK(d.turns[i].index == int(i) + 1);
      if (i + 1 < d.turns.size())
        CHECK(canonical.count(join_tokens(d.turns[i].system)) == 1);
    }
  }
  // OOV split uses held-out cuisine/location values.
  size_t oov_goals = 0;
  for (const auto& d : bundle.test_oov.dialogues)
    if (SlotCatalog::defaults().is_oov_value(d.goal.cuisine)) ++oov_goals;
  CHECK(oov_goals == bundle.test_oov.dialogues.size());
}

TEST_CASE("generation is deterministic in the seed") {
  const auto a = generate_corpus(small_config(9, 50));
  const auto b = generate_corpus(small_config(9, 50));
  const auto c = generate_corpus(small_config(10, 50));
  CHECK(serialize_babi(a.train) == serialize_babi(b.train));
  CHECK(serialize_babi(a.train) != serialize_babi(c.train));
}

TEST_CASE("parse then serialize is the identity on generated corpora") {
  const auto bundle = generate_corpus(small_config(5, 300));
  const std::string text = serialize_babi(bundle.train);
  const Corpus parsed = parse_babi(text, Split::train);
  CHECK(parsed.dialogues.size() == bundle.train.dialogues.size());
  CHECK(serialize_babi(parsed) == text);
  CHECK(parsed == bundle.train);
}

TEST_CASE("parser reports line numbers on malformed input") {
  CHECK_THROWS_AS(parse_babi("1 hello hello\n2 no tab here\n"), ParseError);
  try {
    parse_babi("1 hi\thello what can i help you with today\n1 bad\tx\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  // Dialogue must end in an API call.
  CHECK_THROWS_AS(parse_babi("1 hi\thello what can i help you with today\n\n"),
                  ParseError);
}

TEST_CASE("corpus statistics land in the documented bands") {
  GenConfig cfg;
  cfg.seed = 7;
  const auto bundle = generate_corpus(cfg);
  const auto stats = corpus_stats(bundle.train);
  CHECK(stats.dialogue_count == 1000);
  CHECK(stats.distinct_system_utterances.size() == 7);
  CHECK(stats.distinct_api_calls.size() <= 300);
  CHECK(stats.mean_user_utterance_len >= 4.0);
  CHECK(stats.mean_user_utterance_len <= 6.0);
  const auto vocab = build_vocabulary(bundle.train);
  const int content_words = vocab.size() - Vocabulary::kNumReserved;
  CHECK(content_words >= 75);
  CHECK(content_words <= 95);
}

TEST_CASE("vocabulary reserves control ids and maps unknowns") {
  const auto bundle = generate_corpus(small_config(11, 30));
  const auto vocab = build_vocabulary(bundle.train);
  CHECK(vocab.token(Vocabulary::kPad) == "<pad>");
  CHECK(vocab.token(Vocabulary::kUnk) == "<unk>");
  CHECK(vocab.token(Vocabulary::kEos) == "<eos>");
  CHECK(vocab.token(Vocabulary::kSilence) == kSilenceToken);
  CHECK(vocab.id("<u>") == Vocabulary::kUserMark);
  CHECK(vocab.id("<s>") == Vocabulary::kSysMark);
  CHECK(vocab.id("zzz-not-a-word") == Vocabulary::kUnk);
  const auto ids = vocab.encode({"api_call", "zzz-not-a-word"});
  CHECK(ids[1] == Vocabulary::kUnk);
  CHECK(vocab.decode(ids)[0] == "api_call");
}

TEST_CASE("canonical system utterance order is stable") {
  const auto greeting = split_tokens(kSysGreeting);
  const auto on_it = split_tokens(kSysOnIt);
  const auto ok = split_tokens(kSysOk);
  REQUIRE(canonical_index(greeting).has_value());
  REQUIRE(canonical_index(on_it).has_value());
  REQUIRE(canonical_index(ok).has_value());
  CHECK(*canonical_index(greeting) < *canonical_index(on_it));
  CHECK(*canonical_index(on_it) < *canonical_index(ok));
  CHECK(!canonical_index({"api_call", "british", "rome", "two", "cheap"}).has_value());
}

TEST_CASE("catalog and template config round-trips") {
  const auto catalog = SlotCatalog::defaults();
  const auto templates = TemplateSet::defaults();
  const std::string text = serialize_catalog_config(catalog, templates);
  SlotCatalog catalog2;
  TemplateSet templates2;
  parse_catalog_config(text, catalog2, templates2);
  CHECK(catalog2.cuisines_in == catalog.cuisines_in);
  CHECK(catalog2.locations_oov == catalog.locations_oov);
  CHECK(templates2.greetings == templates.greetings);
  CHECK(templates2.answers == templates.answers);
  CHECK(serialize_catalog_config(catalog2, templates2) == text);
}

TEST_CASE("atomic file write and read round-trip") {
  const std::string path = "test_corpus_tmp.txt";
  write_file_atomic(path, "hello\nworld\n");
  CHECK(read_file(path) == "hello\nworld\n");
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_file("does-not-exist-at-all.txt"), DataError);
}
