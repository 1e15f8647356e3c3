#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "babilab/disfluency.hpp"
#include "babilab/experiment.hpp"
#include "babilab/model.hpp"

namespace babilab {

// One encoder hidden state per input token of each dialogue's final history.
struct StateRecord {
  int dialogue = 0;
  int position = 0;       // index into the encoder input stream
  int token_id = 0;
  int label = kOther;     // disfluency label of this token
  DisfluencyKind kind = DisfluencyKind::none;  // of the covering user turn
};

struct StateDataset {
  int hidden_dim = 0;
  MatF states;  // hidden_dim x record count, column i belongs to records[i]
  std::vector<StateRecord> records;
};

StateDataset collect_encoder_states(const Seq2Seq<float>& model, const Vocabulary& vocab,
                                    const AnnotatedCorpus& corpus);

void write_state_dataset(std::ostream& out, const StateDataset& ds);
StateDataset read_state_dataset(std::istream& in);

// Deterministic 70/30 split by dialogue id.
bool in_probe_train_split(int dialogue, int dialogue_count);

// Binary logistic probe for one disfluency label, trained by full-batch
// gradient descent (lr 0.1, 500 iterations, L2 1e-4) on a class-balanced
// resample of the training-split tokens.
struct DiagnosticClassifier {
  VecF w;
  float bias = 0.0f;
  int target_label = 0;

  float score(const VecF& state) const { return w.dot(state) + bias; }
};

DiagnosticClassifier train_diagnostic(const StateDataset& ds, int target_label,
                                      int dialogue_count, uint64_t seed);

struct PrecisionRecall {
  size_t positives = 0, negatives = 0;
  size_t true_pos = 0, false_pos = 0, false_neg = 0;
  std::optional<double> precision;  // empty when nothing was predicted positive
  std::optional<double> recall;     // empty when there are no positives
};

// Positives: eval-split tokens with the target label inside structures of
// `kind`; negatives: eval-split tokens labelled 0.
PrecisionRecall eval_diagnostic(const DiagnosticClassifier& clf, const StateDataset& ds,
                                DisfluencyKind kind, int dialogue_count);

struct DiagnosticReport {
  // [kind][label 1..3]
  std::map<DisfluencyKind, std::map<int, PrecisionRecall>> cells;
};
DiagnosticReport run_diagnostics(const StateDataset& ds, int dialogue_count,
                                 uint64_t seed);
std::string diagnostic_report_text(const DiagnosticReport& report);

// Multiclass (softmax) logistic probe.
struct LogisticClassifier {
  MatF W;                            // classes x hidden_dim
  VecF b;
  std::vector<std::string> classes;

  int predict(const VecF& state) const;
};

struct OffsetBucket {
  int offset = 0;
  size_t count = 0;
  size_t correct = 0;
};

struct SlotProbeResult {
  Slot slot{};
  size_t train_count = 0, eval_count = 0, correct = 0;
  double accuracy = 0.0;
  std::vector<OffsetBucket> by_offset;  // offset = words since last mention
};

struct SlotProbeReport {
  int delay = 0;  // predict the value current `delay` words earlier
  std::vector<SlotProbeResult> slots;
};

// Word-by-word slot probes over post-mention positions. A slot's current
// value changes only at mentions (corrections update it at the repair).
SlotProbeReport probe_slots(const StateDataset& ds, const Vocabulary& vocab,
                            const SlotCatalog& catalog, int dialogue_count,
                            uint64_t seed, int delay = 0, int max_offset_bucket = 15);
std::string slot_probe_report_text(const SlotProbeReport& report);

// Mean attention mass per (API-call output position, input token type),
// aggregated over final-history decodes that produce an API call. Slot
// values collapse to their slot category; other tokens stay literal.
struct AlignmentMatrix {
  std::vector<std::string> row_labels;  // api_call output positions
  std::vector<std::string> col_labels;  // input token types
  MatF values;                          // means in [0,1]
  float tau = 0.2f;                     // rendering threshold only
  size_t examples = 0;
};

struct AttentionDump {
  int dialogue = 0;
  std::vector<std::string> input_tokens;
  std::vector<std::string> output_tokens;
  MatF weights;  // outputs x inputs, rows sum to 1
};

AlignmentMatrix attention_alignment(const Seq2Seq<float>& model, const Vocabulary& vocab,
                                    const std::vector<Dialogue>& dialogues,
                                    const SlotCatalog& catalog, float tau = 0.2f,
                                    std::vector<AttentionDump>* dumps = nullptr);

// After every user utterance, append `prompt` (default: the pre-API system
// exchange) and decode; a response beginning with api_call counts as
// triggered and is scored on the slots already mentioned.
struct TriggerReport {
  size_t prompts = 0, triggered = 0;
  size_t fillable_slots = 0, correct_slots = 0;
  double success_rate = 0.0;       // triggered / prompts
  double partial_accuracy = 0.0;   // correct / fillable over triggered calls
};

Utterance default_trigger_prompt();
TriggerReport trigger_api_calls(const Seq2Seq<float>& model, const Vocabulary& vocab,
                                const std::vector<Dialogue>& dialogues,
                                const SlotCatalog& catalog,
                                const Utterance& prompt = default_trigger_prompt());

// Wrong non-API responses classified against the canonical system-utterance
// order: jump-ahead, jump-back, or other.
struct TaxonomyReport {
  size_t utterance_errors = 0;
  size_t jump_ahead = 0, jump_back = 0, other = 0;
  std::map<int, size_t> errors_by_turn;
  double fraction_dialogue_initial = 0.0;  // errors at the first system turn
};

TaxonomyReport error_taxonomy(const EvalResult& eval,
                              const std::vector<SeqExample>& examples,
                              const std::vector<Dialogue>& dialogues,
                              const Vocabulary& vocab);
std::string taxonomy_report_text(const TaxonomyReport& report);

}  // namespace babilab
