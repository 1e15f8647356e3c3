#include <doctest.h>

#include <map>
#include <sstream>

#include "babilab/probe.hpp"

using namespace babilab;

namespace {

struct ProbeFixture {
  AnnotatedCorpus annotated;
  Vocabulary vocab;
  Seq2Seq<float> model;
  StateDataset states;

  ProbeFixture() : model(make_model()) {
    GenConfig cfg;
    cfg.seed = 31;
    cfg.train_size = 60;
    cfg.dev_size = cfg.test_size = cfg.test_oov_size = 1;
    const Corpus corpus = generate_corpus(cfg).train;
    annotated =
        augment_corpus(corpus, DisfluencyConfig::with_policy(EtPolicy::fullET), 32);
    vocab = build_vocabulary(annotated.to_corpus());
    ModelConfig mc = model.config();
    mc.vocab_size = vocab.size();
    model = Seq2Seq<float>(mc);
    model.init_params(33);
    states = collect_encoder_states(model, vocab, annotated);
  }

  static ModelConfig make_model() {
    ModelConfig mc;
    mc.embedding_dim = 12;
    mc.hidden_dim = 20;
    mc.vocab_size = 8;
    mc.attention = true;
    return mc;
  }
};

// Linearly separable toy dataset: label-1 tokens live at +1 on the first
// axis, label-0 tokens at -1.
StateDataset toy_dataset(int dialogues, int per_dialogue) {
  StateDataset ds;
  ds.hidden_dim = 3;
  Rng rng(44);
  std::vector<StateRecord> records;
  std::vector<float> xs;
  for (int d = 0; d < dialogues; ++d)
    for (int p = 0; p < per_dialogue; ++p) {
      const bool positive = p % 2 == 0;
      StateRecord r;
      r.dialogue = d;
      r.position = p;
      r.token_id = 6;
      r.label = positive ? kReparandum : kOther;
      r.kind = positive ? DisfluencyKind::correction : DisfluencyKind::none;
      records.push_back(r);
      xs.push_back(positive ? 1.0f : -1.0f);
    }
  ds.records = records;
  ds.states = MatF::Zero(3, Eigen::Index(records.size()));
  for (size_t i = 0; i < records.size(); ++i) {
    ds.states(0, Eigen::Index(i)) = xs[i] + float(rng.uniform_symmetric(0.1));
    ds.states(1, Eigen::Index(i)) = float(rng.uniform_symmetric(0.1));
    ds.states(2, Eigen::Index(i)) = float(rng.uniform_symmetric(0.1));
  }
  return ds;
}

}  // namespace

TEST_CASE("probe train split is a deterministic 70/30 cut") {
  CHECK(in_probe_train_split(0, 10));
  CHECK(in_probe_train_split(6, 10));
  CHECK(!in_probe_train_split(7, 10));
  CHECK(!in_probe_train_split(9, 10));
  size_t train = 0;
  for (int d = 0; d < 1000; ++d) train += in_probe_train_split(d, 1000) ? 1 : 0;
  CHECK(train == 700);
  CHECK_THROWS_AS(in_probe_train_split(0, 0), DataError);
}

TEST_CASE_FIXTURE(ProbeFixture, "encoder states align with the token stream") {
  size_t expected = 0;
  for (const auto& d : annotated.dialogues)
    expected += history_tokens(d.dialogue, d.dialogue.turns.size() - 1).size();
  CHECK(states.records.size() == expected);
  CHECK(size_t(states.states.cols()) == expected);
  CHECK(states.hidden_dim == 20);

  std::map<int, size_t> by_label;
  for (const auto& r : states.records) ++by_label[r.label];
  CHECK(by_label[kOther] > 0);
  CHECK(by_label[kReparandum] > 0);
  CHECK(by_label[kEditingTerm] > 0);
  CHECK(by_label[kRepair] > 0);

  for (const auto& r : states.records) {
    if (r.label != kOther) CHECK(r.kind != DisfluencyKind::none);
  }

  const auto again = collect_encoder_states(model, vocab, annotated);
  CHECK(again.states == states.states);
}

TEST_CASE_FIXTURE(ProbeFixture, "state datasets round-trip through their binary form") {
  std::ostringstream out(std::ios::binary);
  write_state_dataset(out, states);
  std::istringstream in(out.str(), std::ios::binary);
  const auto loaded = read_state_dataset(in);
  CHECK(loaded.hidden_dim == states.hidden_dim);
  REQUIRE(loaded.records.size() == states.records.size());
  CHECK(loaded.states == states.states);
  for (size_t i = 0; i < states.records.size(); ++i) {
    CHECK(loaded.records[i].dialogue == states.records[i].dialogue);
    CHECK(loaded.records[i].label == states.records[i].label);
    CHECK(loaded.records[i].kind == states.records[i].kind);
  }
  std::istringstream bad("NOTADATA", std::ios::binary);
  CHECK_THROWS_AS(read_state_dataset(bad), DataError);
}

TEST_CASE("diagnostic probes learn a separable toy problem") {
  const auto ds = toy_dataset(10, 40);
  const auto clf = train_diagnostic(ds, kReparandum, 10, 1);
  CHECK(clf.target_label == kReparandum);
  const auto pr = eval_diagnostic(clf, ds, DisfluencyKind::correction, 10);
  CHECK(pr.positives > 0);
  CHECK(pr.negatives > 0);
  REQUIRE(pr.precision.has_value());
  REQUIRE(pr.recall.has_value());
  CHECK(*pr.precision == doctest::Approx(1.0));
  CHECK(*pr.recall == doctest::Approx(1.0));

  const auto clf2 = train_diagnostic(ds, kReparandum, 10, 1);
  CHECK(clf.w == clf2.w);
  CHECK(clf.bias == clf2.bias);

  // Tokens of the other structure kind are not counted as positives.
  const auto pr_restart = eval_diagnostic(clf, ds, DisfluencyKind::restart, 10);
  CHECK(pr_restart.positives == 0);
  CHECK(!pr_restart.recall.has_value());

  StateDataset single;
  single.hidden_dim = 3;
  single.records = {{0, 0, 6, kOther, DisfluencyKind::none}};
  single.states = MatF::Zero(3, 1);
  CHECK_THROWS_AS(train_diagnostic(single, kReparandum, 1, 1), DataError);
}

TEST_CASE_FIXTURE(ProbeFixture, "diagnostic report covers both kinds and all labels") {
  const auto report = run_diagnostics(states, int(annotated.dialogues.size()), 2);
  REQUIRE(report.cells.size() == 2);
  for (DisfluencyKind kind : {DisfluencyKind::correction, DisfluencyKind::restart}) {
    REQUIRE(report.cells.count(kind) == 1);
    for (int label : {kReparandum, kEditingTerm, kRepair})
      CHECK(report.cells.at(kind).count(label) == 1);
  }
  const std::string text = diagnostic_report_text(report);
  CHECK(text.find("restart") != std::string::npos);
  CHECK(text.find("correction") != std::string::npos);
}

TEST_CASE_FIXTURE(ProbeFixture, "slot probes report per-slot and per-offset numbers") {
  const auto report =
      probe_slots(states, vocab, SlotCatalog::defaults(),
                  int(annotated.dialogues.size()), 3, 0, 10);
  REQUIRE(report.slots.size() == 4);
  CHECK(report.delay == 0);
  for (const auto& r : report.slots) {
    CHECK(r.train_count > 0);
    CHECK(r.eval_count > 0);
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
    size_t bucket_total = 0;
    int last = -1;
    for (const auto& bk : r.by_offset) {
      CHECK(bk.offset > last);
      CHECK(bk.offset <= 10);
      CHECK(bk.correct <= bk.count);
      last = bk.offset;
      bucket_total += bk.count;
    }
    CHECK(bucket_total == r.eval_count);
  }
  CHECK_THROWS_AS(probe_slots(states, vocab, SlotCatalog::defaults(),
                              int(annotated.dialogues.size()), 3, -1),
                  DataError);
  const std::string text = slot_probe_report_text(report);
  CHECK(text.find("cuisine") != std::string::npos);
  CHECK(text.find("offset curve") != std::string::npos);
}

TEST_CASE_FIXTURE(ProbeFixture, "attention alignment is bounded and dumps rows sum to 1") {
  std::vector<AttentionDump> dumps;
  std::vector<Dialogue> dialogues;
  for (size_t i = 0; i < 10; ++i) dialogues.push_back(annotated.dialogues[i].dialogue);
  const auto matrix = attention_alignment(model, vocab, dialogues,
                                          SlotCatalog::defaults(), 0.2f, &dumps);
  CHECK(matrix.row_labels.size() == 5);
  CHECK(size_t(matrix.values.rows()) == 5);
  CHECK(size_t(matrix.values.cols()) == matrix.col_labels.size());
  for (Eigen::Index r = 0; r < matrix.values.rows(); ++r)
    for (Eigen::Index c = 0; c < matrix.values.cols(); ++c) {
      CHECK(matrix.values(r, c) >= 0.0f);
      CHECK(matrix.values(r, c) <= 1.0f + 1e-6f);
    }
  REQUIRE(dumps.size() == dialogues.size());
  for (const auto& dump : dumps) {
    CHECK(size_t(dump.weights.rows()) == dump.output_tokens.size());
    CHECK(size_t(dump.weights.cols()) == dump.input_tokens.size());
    for (Eigen::Index r = 0; r < dump.weights.rows(); ++r)
      CHECK(std::abs(dump.weights.row(r).sum() - 1.0f) < 1e-5f);
  }

  ModelConfig plain_cfg = model.config();
  plain_cfg.attention = false;
  Seq2Seq<float> plain(plain_cfg);
  plain.init_params(1);
  CHECK_THROWS_AS(attention_alignment(plain, vocab, dialogues, SlotCatalog::defaults()),
                  DataError);
}

TEST_CASE_FIXTURE(ProbeFixture, "trigger report counts prompts and slots consistently") {
  const auto prompt = default_trigger_prompt();
  const Utterance ok = split_tokens(kSysOk);
  REQUIRE(prompt.size() == ok.size() + 3);
  CHECK(prompt.front() == "<s>");
  CHECK(prompt[1 + ok.size()] == "<u>");
  CHECK(prompt.back() == kSilenceToken);

  std::vector<Dialogue> dialogues;
  for (size_t i = 0; i < 8; ++i) dialogues.push_back(annotated.dialogues[i].dialogue);
  const auto report =
      trigger_api_calls(model, vocab, dialogues, SlotCatalog::defaults());
  size_t turns = 0;
  for (const auto& d : dialogues) turns += d.turns.size();
  CHECK(report.prompts == turns);
  CHECK(report.triggered <= report.prompts);
  CHECK(report.correct_slots <= report.fillable_slots);
  if (report.prompts > 0)
    CHECK(report.success_rate ==
          doctest::Approx(double(report.triggered) / double(report.prompts)));
  if (report.fillable_slots == 0) CHECK(report.partial_accuracy == 0.0);
}

TEST_CASE("error taxonomy classifies jump-ahead and dialogue-initial errors") {
  GenConfig cfg;
  cfg.seed = 55;
  cfg.train_size = 5;
  cfg.dev_size = cfg.test_size = cfg.test_oov_size = 1;
  const Corpus corpus = generate_corpus(cfg).train;
  const auto vocab = build_vocabulary(corpus);
  const auto examples = build_examples(corpus.dialogues, vocab);

  EvalResult eval;
  eval.records.resize(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) {
    eval.records[i].example = i;
    eval.records[i].is_api =
        examples[i].target.front() == vocab.id(kApiCallToken);
    eval.records[i].exact = true;
    eval.records[i].predicted = examples[i].target;
  }
  // All-correct predictions produce an empty taxonomy.
  const auto clean = error_taxonomy(eval, examples, corpus.dialogues, vocab);
  CHECK(clean.utterance_errors == 0);
  CHECK(clean.fraction_dialogue_initial == 0.0);

  // Make the first dialogue's first turn a jump-ahead: gold greeting,
  // predicted "i'm on it".
  const auto& d0 = corpus.dialogues[0];
  REQUIRE(join_tokens(d0.turns[0].system) == kSysGreeting);
  eval.records[0].exact = false;
  eval.records[0].predicted = vocab.encode(split_tokens(kSysOnIt));
  // And one unparseable error later in the same dialogue.
  size_t second = 1;
  eval.records[second].exact = false;
  eval.records[second].is_api = false;
  eval.records[second].predicted = {vocab.id("api_call")};

  const auto report = error_taxonomy(eval, examples, corpus.dialogues, vocab);
  CHECK(report.utterance_errors == 2);
  CHECK(report.jump_ahead == 1);
  CHECK(report.jump_back == 0);
  CHECK(report.other == 1);
  CHECK(report.errors_by_turn.at(0) == 1);
  CHECK(report.fraction_dialogue_initial == doctest::Approx(0.5));
  const std::string text = taxonomy_report_text(report);
  CHECK(text.find("jump-ahead: 1") != std::string::npos);

  EvalResult mismatched = eval;
  mismatched.records.pop_back();
  std::vector<SeqExample> fewer(examples.begin(), examples.end() - 1);
  CHECK_THROWS_AS(error_taxonomy(mismatched, fewer, corpus.dialogues, vocab), DataError);
}
