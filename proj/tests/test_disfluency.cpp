#include <doctest.h>

#include <map>

#include "babilab/disfluency.hpp"

using namespace babilab;

namespace {

Corpus generated(uint64_t seed, size_t size) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.train_size = size;
  cfg.dev_size = cfg.test_size = cfg.test_oov_size = 1;
  return generate_corpus(cfg).train;
}

}  // namespace

TEST_CASE("hesitation inserts one labelled filler at an internal boundary") {
  Rng rng(5);
  const Utterance u = {"we", "will", "be", "eight"};
  const auto a = insert_hesitation(u, rng, DisfluencyConfig{});
  a.check_well_formed();
  CHECK(a.kind == DisfluencyKind::hesitation);
  REQUIRE(a.tokens.size() == u.size() + 1);
  int fillers = 0;
  for (size_t i = 0; i < a.tokens.size(); ++i)
    if (a.labels[i] == kEditingTerm) {
      ++fillers;
      CHECK(i > 0);
      CHECK(i < a.tokens.size() - 1);
    } else {
      CHECK(a.labels[i] == kOther);
    }
  CHECK(fillers == 1);
  CHECK(strip_disfluencies(a) == u);

  const auto single = insert_hesitation({"hi"}, rng, DisfluencyConfig{});
  CHECK(single.kind == DisfluencyKind::none);
  CHECK(single.tokens == Utterance{"hi"});
}

TEST_CASE("restart repeats the utterance after an abandoned prefix") {
  const Utterance u = {"good", "morning"};
  DisfluencyConfig cfg = DisfluencyConfig::with_policy(EtPolicy::fullET);
  bool found_paper_example = false;
  for (uint64_t seed = 0; seed < 200 && !found_paper_example; ++seed) {
    Rng rng(seed);
    const auto a = insert_restart(u, rng, cfg);
    a.check_well_formed();
    CHECK(a.kind == DisfluencyKind::restart);
    CHECK(strip_disfluencies(a) == u);
    if (a.tokens == Utterance{"good", "morning", "uhm", "yeah", "good", "morning"}) {
      CHECK(a.labels == std::vector<int>{1, 1, 2, 2, 3, 3});
      found_paper_example = true;
    }
  }
  CHECK(found_paper_example);
}

TEST_CASE("correction replaces the phrase value and keeps the repair") {
  const Utterance u = {"with", "british", "cuisine", "in", "a", "cheap", "price",
                       "range"};
  const auto catalog = SlotCatalog::defaults();
  const auto phrases = find_slot_phrases(u, catalog);
  // "a cheap" is one of the recognised price phrases.
  const SlotPhrase* target = nullptr;
  for (const auto& p : phrases)
    if (p.slot == Slot::price_range && p.length == 2) target = &p;
  REQUIRE(target != nullptr);
  CHECK(target->value == "cheap");

  DisfluencyConfig cfg = DisfluencyConfig::with_policy(EtPolicy::fullET);
  Rng rng(3);
  const auto a = insert_correction(u, *target, "moderate", rng, cfg);
  a.check_well_formed();
  CHECK(a.kind == DisfluencyKind::correction);
  CHECK(a.corrected_slot == Slot::price_range);
  CHECK(strip_disfluencies(a) == u);
  // Layout: prefix 0s, reparandum "a moderate", an editing term, repair "a cheap".
  REQUIRE(a.tokens.size() > u.size());
  std::vector<std::string> reparandum, repair;
  for (size_t i = 0; i < a.tokens.size(); ++i) {
    if (a.labels[i] == kReparandum) reparandum.push_back(a.tokens[i]);
    if (a.labels[i] == kRepair) repair.push_back(a.tokens[i]);
  }
  CHECK(reparandum == std::vector<std::string>{"a", "moderate"});
  CHECK(repair == std::vector<std::string>{"a", "cheap"});
}

TEST_CASE("the spec's five-token correction phrase is recognised") {
  const Utterance u = {"i", "am", "looking", "for", "something", "in", "a",
                       "moderate", "price", "range"};
  const auto phrases = find_slot_phrases(u, SlotCatalog::defaults());
  bool found = false;
  for (const auto& p : phrases)
    if (p.slot == Slot::price_range && p.length == 5) {
      found = true;
      CHECK(p.value == "moderate");
    }
  CHECK(found);
}

TEST_CASE("labelled composite sentence strips and aligns correctly") {
  // Restart ("with") plus a self-correction ("a moderate" -> "a cheap").
  AnnotatedUtterance a;
  a.tokens = {"with", "uhm", "yeah", "with", "british", "cuisine", "in", "a",
              "moderate", "no", "sorry", "a", "cheap", "price", "range"};
  a.labels = {1, 2, 2, 3, 0, 0, 0, 1, 1, 2, 2, 3, 3, 0, 0};
  a.kind = DisfluencyKind::correction;
  CHECK(strip_disfluencies(a) ==
        Utterance{"with", "british", "cuisine", "in", "a", "cheap", "price", "range"});

  AnnotatedDialogue d;
  Turn t1;
  t1.index = 1;
  t1.user = a.tokens;
  t1.system = split_tokens(kSysOnIt);
  Turn t2;
  t2.index = 2;
  t2.user = {kSilenceToken};
  t2.system = {"api_call", "british", "rome", "two", "cheap"};
  d.dialogue.turns = {t1, t2};
  d.user_turns = {a, AnnotatedUtterance::fluent({kSilenceToken})};
  const auto labels = token_labels(d);
  // <u> + 15 labels + <s> + 3 system tokens + <u> + silence
  std::vector<int> expected = {0};
  expected.insert(expected.end(), a.labels.begin(), a.labels.end());
  expected.insert(expected.end(), {0, 0, 0, 0, 0, 0});
  CHECK(labels == expected);
}

TEST_CASE("augmentation rates, inverses, and policies at corpus scale") {
  const Corpus corpus = generated(7, 1000);
  DisfluencyConfig cfg = DisfluencyConfig::with_policy(EtPolicy::fullET);
  const auto annotated = augment_corpus(corpus, cfg, 21);

  size_t eligible = 0;
  std::map<DisfluencyKind, size_t> kinds;
  for (size_t i = 0; i < annotated.dialogues.size(); ++i) {
    const auto& ad = annotated.dialogues[i];
    CHECK(strip_dialogue(ad) == corpus.dialogues[i]);
    for (size_t k = 0; k < ad.user_turns.size(); ++k) {
      const auto& a = ad.user_turns[k];
      a.check_well_formed();
      if (corpus.dialogues[i].turns[k].user == Utterance{kSilenceToken}) {
        CHECK(a.kind == DisfluencyKind::none);
        continue;
      }
      ++eligible;
      ++kinds[a.kind];
      if (a.kind == DisfluencyKind::correction || a.kind == DisfluencyKind::restart) {
        bool has_et = false;
        for (int l : a.labels) has_et |= l == kEditingTerm;
        CHECK(has_et);  // fullET
      }
    }
  }
  REQUIRE(eligible > 2000);
  const double hes = double(kinds[DisfluencyKind::hesitation]) / double(eligible);
  const double res = double(kinds[DisfluencyKind::restart]) / double(eligible);
  const double cor = double(kinds[DisfluencyKind::correction]) / double(eligible);
  CHECK(hes == doctest::Approx(0.21).epsilon(0.12));
  CHECK(res == doctest::Approx(0.40).epsilon(0.06));
  CHECK(cor == doctest::Approx(0.05).epsilon(0.45));
  CHECK(std::abs(hes - 0.21) < 0.02);
  CHECK(std::abs(res - 0.40) < 0.02);
  CHECK(std::abs(cor - 0.05) < 0.02);

  // Disfluent corpora read longer than their fluent sources.
  const auto plain = corpus_stats(corpus);
  const auto plus = corpus_stats(annotated.to_corpus());
  CHECK(plus.mean_user_utterance_len > plain.mean_user_utterance_len);
}

TEST_CASE("realET inserts editing terms in roughly a fifth of structures") {
  const Corpus corpus = generated(8, 600);
  const auto annotated =
      augment_corpus(corpus, DisfluencyConfig::with_policy(EtPolicy::realET), 22);
  size_t structures = 0, with_et = 0;
  for (const auto& ad : annotated.dialogues)
    for (const auto& a : ad.user_turns) {
      if (a.kind != DisfluencyKind::correction && a.kind != DisfluencyKind::restart)
        continue;
      ++structures;
      for (int l : a.labels)
        if (l == kEditingTerm) {
          ++with_et;
          break;
        }
    }
  REQUIRE(structures >= 500);
  const double fraction = double(with_et) / double(structures);
  CHECK(fraction > 0.15);
  CHECK(fraction < 0.25);

  // noET removes editing terms from corrections and restarts; hesitation
  // fillers are editing terms by definition and stay.
  const auto no_et =
      augment_corpus(corpus, DisfluencyConfig::with_policy(EtPolicy::noET), 23);
  for (const auto& ad : no_et.dialogues)
    for (const auto& a : ad.user_turns) {
      if (a.kind != DisfluencyKind::correction && a.kind != DisfluencyKind::restart)
        continue;
      for (int l : a.labels) CHECK(l != kEditingTerm);
    }
}

TEST_CASE("augmentation is deterministic and annotations round-trip") {
  const Corpus corpus = generated(9, 120);
  const DisfluencyConfig cfg = DisfluencyConfig::with_policy(EtPolicy::fullET);
  const auto a = augment_corpus(corpus, cfg, 5);
  const auto b = augment_corpus(corpus, cfg, 5);
  CHECK(serialize_babi(a.to_corpus()) == serialize_babi(b.to_corpus()));
  CHECK(serialize_annotations(a) == serialize_annotations(b));

  const std::string text = serialize_babi(a.to_corpus());
  const std::string sidecar = serialize_annotations(a);
  const auto reparsed = parse_annotations(parse_babi(text), sidecar);
  REQUIRE(reparsed.dialogues.size() == a.dialogues.size());
  for (size_t i = 0; i < a.dialogues.size(); ++i) {
    const auto& x = a.dialogues[i];
    const auto& y = reparsed.dialogues[i];
    REQUIRE(x.user_turns.size() == y.user_turns.size());
    for (size_t k = 0; k < x.user_turns.size(); ++k) {
      CHECK(x.user_turns[k].tokens == y.user_turns[k].tokens);
      CHECK(x.user_turns[k].labels == y.user_turns[k].labels);
      CHECK(x.user_turns[k].kind == y.user_turns[k].kind);
    }
  }
}

TEST_CASE("editing-term policies expose their rates") {
  CHECK(DisfluencyConfig::with_policy(EtPolicy::noET).et_rate() == 0.0);
  CHECK(DisfluencyConfig::with_policy(EtPolicy::realET).et_rate() == doctest::Approx(0.2));
  CHECK(DisfluencyConfig::with_policy(EtPolicy::fullET).et_rate() == 1.0);
  CHECK(et_policy_from_name("realET") == EtPolicy::realET);
  CHECK(!et_policy_from_name("bogus").has_value());
  CHECK(std::string(et_policy_name(EtPolicy::fullET)) == "fullET");
}
