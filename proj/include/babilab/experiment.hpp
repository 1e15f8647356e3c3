#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "babilab/corpus.hpp"
#include "babilab/model.hpp"

namespace babilab {

// One encoder input per system turn: speaker-marked history up to and
// including the current user utterance. Targets carry a trailing <eos>.
//   <u> u_1 <s> s_1 ... <u> u_k   ->   s_k <eos>
Utterance history_tokens(const Dialogue& d, size_t turn);
std::vector<SeqExample> build_examples(const std::vector<Dialogue>& dialogues,
                                       const Vocabulary& vocab);

// Positional token matches over max(len_pred, len_gold); <eos> excluded.
double word_accuracy(const std::vector<int>& predicted, const std::vector<int>& gold);

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 30;
  int patience = 3;               // epochs of dev stagnation before stopping
  double min_improvement = 1e-3;  // dev-loss delta that counts as progress
  double grad_clip = 5.0;
  double learning_rate = 0.001;
  uint64_t seed = 1;
};

struct TrainResult {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> dev_loss;
  int best_epoch = -1;             // 0-based; model holds these weights on return
  double best_dev_loss = 0.0;
  int epochs_run = 0;
};

// Adam with global-norm clipping, length-grouped shuffled batches, early
// stopping on dev loss. The model is left at its best-dev weights.
TrainResult train(Seq2Seq<float>& model, const std::vector<SeqExample>& train_examples,
                  const std::vector<SeqExample>& dev_examples, const TrainConfig& config,
                  std::ostream* log = nullptr);

struct EvalCategory {
  size_t count = 0;
  double word_accuracy = 0.0;  // mean over examples
  double sequence_accuracy = 0.0;

  bool operator==(const EvalCategory&) const = default;
};

struct EvalRecord {
  size_t example = 0;
  bool is_api = false;
  bool exact = false;
  double word_accuracy = 0.0;
  std::vector<int> predicted;
};

// Greedy decoding from gold histories. "api" covers targets whose first
// token is api_call; "utterance" covers the rest.
struct EvalResult {
  EvalCategory all, api, utterance;
  std::vector<EvalRecord> records;
};
EvalResult evaluate(const Seq2Seq<float>& model, const std::vector<SeqExample>& examples,
                    const Vocabulary& vocab);

std::string eval_records_tsv(const EvalResult& result,
                             const std::vector<SeqExample>& examples,
                             const std::vector<Dialogue>& dialogues,
                             const Vocabulary& vocab);

// 2x2 train/test grid over two corpus pairs, optionally for both attention
// variants, averaged over seeds.
struct GridCorpora {
  std::string name_a = "babi", name_b = "babi+";
  Corpus train_a, dev_a, test_a;
  Corpus train_b, dev_b, test_b;
};

struct GridCell {
  std::string train_corpus, test_corpus;
  bool attention = true;
  EvalCategory all, api, utterance;

  bool operator==(const GridCell&) const = default;
};

struct GridReport {
  std::vector<uint64_t> seeds;
  std::vector<GridCell> cells;

  bool operator==(const GridReport&) const = default;
};

// Trains one model per (train corpus, variant, seed) and evaluates on both
// test sets. When cache_dir is set, checkpoints found there are reused and
// new ones saved (keyed on corpus, variant, dims, seed).
GridReport run_grid(const GridCorpora& corpora, const std::vector<uint64_t>& seeds,
                    bool attentive, bool non_attentive, const ModelConfig& model_config,
                    const TrainConfig& train_config, const std::string& cache_dir = "",
                    std::ostream* log = nullptr);

std::string grid_report_text(const GridReport& report);

// Cache file name used by run_grid for one trained model.
std::string checkpoint_cache_name(const std::string& corpus_name, bool attention,
                                  const ModelConfig& config, uint64_t seed);

// Trains (or loads from cache_path, if it exists) one model.
LoadedModel train_or_load(const Corpus& train_corpus, const Corpus& dev_corpus,
                          const ModelConfig& model_config, const TrainConfig& train_config,
                          const std::string& cache_path = "", std::ostream* log = nullptr);

}  // namespace babilab
