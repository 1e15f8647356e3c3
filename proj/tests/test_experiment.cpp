#include <doctest.h>

#include <sstream>

#include "babilab/experiment.hpp"

using namespace babilab;

namespace {

CorpusBundle tiny_bundle(uint64_t seed, size_t size) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.train_size = cfg.dev_size = cfg.test_size = size;
  cfg.test_oov_size = 1;
  return generate_corpus(cfg);
}

ModelConfig smoke_model(const Vocabulary& vocab, bool attention) {
  ModelConfig mc;
  mc.embedding_dim = 16;
  mc.hidden_dim = 32;
  mc.vocab_size = vocab.size();
  mc.attention = attention;
  mc.dropout_rate = 0.0f;
  return mc;
}

}  // namespace

TEST_CASE("history tokens interleave speaker marks") {
  Dialogue d;
  Turn t1;
  t1.index = 1;
  t1.user = {"hi"};
  t1.system = split_tokens(kSysGreeting);
  Turn t2;
  t2.index = 2;
  t2.user = {"we", "are", "two"};
  t2.system = split_tokens(kSysOnIt);
  d.turns = {t1, t2};

  const auto h0 = history_tokens(d, 0);
  CHECK(h0 == Utterance{"<u>", "hi"});
  const auto h1 = history_tokens(d, 1);
  Utterance expected = {"<u>", "hi", "<s>"};
  for (const auto& w : t1.system) expected.push_back(w);
  expected.push_back("<u>");
  for (const auto& w : t2.user) expected.push_back(w);
  CHECK(h1 == expected);
  CHECK_THROWS_AS(history_tokens(d, 2), DataError);
}

TEST_CASE("build_examples yields one example per system turn") {
  const auto bundle = tiny_bundle(4, 40);
  const auto vocab = build_vocabulary(bundle.train);
  const auto examples = build_examples(bundle.train.dialogues, vocab);
  size_t turns = 0;
  for (const auto& d : bundle.train.dialogues) turns += d.turns.size();
  CHECK(examples.size() == turns);
  for (const auto& ex : examples) {
    REQUIRE(!ex.history.empty());
    REQUIRE(ex.target.size() >= 2);
    CHECK(ex.target.back() == Vocabulary::kEos);
    for (int id : ex.target) CHECK(id != Vocabulary::kUnk);
    CHECK(ex.history.front() == Vocabulary::kUserMark);
  }
  // Unknown words map to <unk> in histories.
  const auto oov_examples = build_examples(bundle.test_oov.dialogues, vocab);
  bool saw_unk = false;
  for (const auto& ex : oov_examples)
    for (int id : ex.history) saw_unk |= id == Vocabulary::kUnk;
  CHECK(saw_unk);
}

TEST_CASE("word accuracy scores positions over the longer sequence") {
  CHECK(word_accuracy({7, 8, 9}, {7, 8, 9}) == doctest::Approx(1.0));
  CHECK(word_accuracy({7, 8}, {7, 9}) == doctest::Approx(0.5));
  CHECK(word_accuracy({7, 8, 9, 10}, {7, 8}) == doctest::Approx(0.5));
  CHECK(word_accuracy({}, {7, 8}) == doctest::Approx(0.0));
  // trailing <eos> on the reference is ignored
  CHECK(word_accuracy({7, 8}, {7, 8, Vocabulary::kEos}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(word_accuracy({7}, {}), DataError);
  CHECK_THROWS_AS(word_accuracy({7}, {Vocabulary::kEos}), DataError);
}

TEST_CASE("training reduces loss and is deterministic in the seed") {
  const auto bundle = tiny_bundle(6, 60);
  const auto vocab = build_vocabulary(bundle.train);
  const auto train_ex = build_examples(bundle.train.dialogues, vocab);
  const auto dev_ex = build_examples(bundle.dev.dialogues, vocab);

  TrainConfig tc;
  tc.max_epochs = 3;
  tc.patience = 3;
  tc.seed = 5;

  Seq2Seq<float> m1(smoke_model(vocab, true));
  m1.init_params(tc.seed);
  const auto r1 = train(m1, train_ex, dev_ex, tc);
  REQUIRE(r1.epochs_run == 3);
  CHECK(r1.train_loss.front() > r1.train_loss.back());
  CHECK(r1.best_dev_loss < std::log(double(vocab.size())));

  Seq2Seq<float> m2(smoke_model(vocab, true));
  m2.init_params(tc.seed);
  const auto r2 = train(m2, train_ex, dev_ex, tc);
  CHECK(r1.train_loss == r2.train_loss);
  CHECK(r1.dev_loss == r2.dev_loss);
  for (const auto& e : m1.params().entries())
    CHECK(m2.params().value(e.name) == e.value);

  // Evaluation categories partition the examples.
  const auto eval = evaluate(m1, dev_ex, vocab);
  CHECK(eval.all.count == dev_ex.size());
  CHECK(eval.api.count + eval.utterance.count == eval.all.count);
  CHECK(eval.api.count == bundle.dev.dialogues.size());
  CHECK(eval.records.size() == dev_ex.size());

  const std::string tsv =
      eval_records_tsv(eval, dev_ex, bundle.dev.dialogues, vocab);
  std::istringstream lines(tsv);
  std::string header;
  std::getline(lines, header);
  CHECK(header ==
        "dialogue\tturn\tcategory\tgold\thypothesis\tword_acc\tseq_acc");
  size_t rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == dev_ex.size());
}

TEST_CASE("a tiny grid produces all cells deterministically") {
  const auto a = tiny_bundle(12, 40);
  const auto b = tiny_bundle(13, 40);
  GridCorpora corpora;
  corpora.train_a = a.train;
  corpora.dev_a = a.dev;
  corpora.test_a = a.test;
  corpora.train_b = b.train;
  corpora.dev_b = b.dev;
  corpora.test_b = b.test;

  ModelConfig mc;
  mc.embedding_dim = 8;
  mc.hidden_dim = 16;
  mc.vocab_size = build_vocabulary(a.train).size();
  mc.attention = true;

  TrainConfig tc;
  tc.max_epochs = 1;
  tc.seed = 1;

  const auto report = run_grid(corpora, {1, 2}, true, true, mc, tc);
  CHECK(report.cells.size() == 8);
  size_t attentive = 0;
  for (const auto& cell : report.cells) {
    if (cell.attention) ++attentive;
    CHECK(cell.all.count > 0);
    CHECK(cell.api.sequence_accuracy >= 0.0);
    CHECK(cell.api.sequence_accuracy <= 1.0);
  }
  CHECK(attentive == 4);

  const auto again = run_grid(corpora, {1, 2}, true, true, mc, tc);
  CHECK(report == again);

  const std::string text = grid_report_text(report);
  CHECK(text.find("babi+") != std::string::npos);
  CHECK(text.find("api") != std::string::npos);
}

TEST_CASE("checkpoint cache names encode the run") {
  ModelConfig mc;
  mc.embedding_dim = 128;
  mc.hidden_dim = 500;
  mc.vocab_size = 90;
  mc.attention = true;
  CHECK(checkpoint_cache_name("babi+", true, mc, 3) ==
        "model_babi+_attn_h500_e128_s3.ckpt");
  mc.attention = false;
  CHECK(checkpoint_cache_name("babi", false, mc, 1) ==
        "model_babi_noattn_h500_e128_s1.ckpt");
}

TEST_CASE("train_or_load reuses a cached checkpoint byte for byte") {
  const auto bundle = tiny_bundle(14, 30);
  const auto vocab = build_vocabulary(bundle.train);
  ModelConfig mc = smoke_model(vocab, false);
  mc.hidden_dim = 16;
  TrainConfig tc;
  tc.max_epochs = 1;
  tc.seed = 9;

  const std::string cache = "test_experiment_cache.ckpt";
  std::remove(cache.c_str());
  const auto first = train_or_load(bundle.train, bundle.dev, mc, tc, cache);
  const std::string bytes1 = read_file(cache);
  const auto second = train_or_load(bundle.train, bundle.dev, mc, tc, cache);
  CHECK(read_file(cache) == bytes1);
  for (const auto& e : first.model.params().entries())
    CHECK(second.model.params().value(e.name) == e.value);
  CHECK(second.vocab.tokens == vocab.tokens);
  std::remove(cache.c_str());
}
