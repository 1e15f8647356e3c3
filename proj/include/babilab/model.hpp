#pragma once

#include <string>
#include <vector>

#include "babilab/corpus.hpp"
#include "babilab/numerics.hpp"
#include "babilab/rng.hpp"

namespace babilab {

struct ModelConfig {
  int embedding_dim = 128;
  int hidden_dim = 500;  // grid {100..600} supported
  bool attention = true;
  float dropout_rate = 0.2f;  // embeddings only, training only
  int vocab_size = 0;
  int max_decode_len = 24;

  void validate() const {
    if (embedding_dim <= 0 || hidden_dim <= 0 || vocab_size <= 0)
      throw NumericError("model dims must be positive");
    if (dropout_rate < 0.0f || dropout_rate >= 1.0f)
      throw NumericError("dropout must be in [0, 1)");
  }
};

// One teacher-forcing example: encoder input and target (ends with <eos>).
struct SeqExample {
  std::vector<int> history;
  std::vector<int> target;
};

// One-layer LSTM encoder-decoder with optional additive attention.
// Parameter names: embed, enc.W/U/b, dec.W/U/b, attn.Wh/Ws/v, out.W/b.
template <class S>
class Seq2Seq {
 public:
  explicit Seq2Seq(const ModelConfig& config);

  void init_params(uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore<S>& params() { return params_; }
  const ParameterStore<S>& params() const { return params_; }

  // Evaluation-mode encoder trace: per-token hidden states (columns) plus
  // the final cell state.
  struct Trace {
    Mat<S> h;        // hidden_dim x T
    Vec<S> c_final;  // hidden_dim
  };
  Trace encode(const std::vector<int>& input_ids) const;

  // Additive attention on decoder state s over the trace; returns weights
  // and context. Errors when the model was built without attention.
  std::pair<Vec<S>, Vec<S>> attend(const Vec<S>& s, const Mat<S>& trace_h) const;

  // One greedy decoder step; h/c updated in place. alpha_out (optional)
  // receives the attention row.
  Vec<S> decode_step(int prev_token, Vec<S>& h, Vec<S>& c, const Mat<S>& trace_h,
                     Vec<S>* alpha_out) const;

  struct DecodeResult {
    std::vector<int> tokens;   // without the terminating <eos>
    Mat<S> attention;          // emitted tokens x T (empty without attention)
  };
  DecodeResult greedy_decode(const std::vector<int>& history, int max_len = -1) const;

  // Teacher-forced mean token loss (per example, then per batch). When
  // `training`, accumulates gradients into the store and applies embedding
  // dropout driven by `dropout_rng`.
  double forward_loss_batch(const std::vector<SeqExample>& batch, bool training,
                            Rng* dropout_rng);
  double forward_loss(const SeqExample& example, bool training, Rng* dropout_rng);

 private:
  struct LstmParamsConst {
    const Mat<S>*W, *U, *b;
  };
  LstmParamsConst lstm_const(const char* prefix) const;

  // Batched cell step; columns where active==0 get zero h/c.
  void lstm_forward_step(const LstmParamsConst& p, const Mat<S>& x, const Mat<S>& h_prev,
                         const Mat<S>& c_prev, Mat<S>& gates, Mat<S>& h, Mat<S>& c,
                         const std::vector<char>* active) const;

  ModelConfig config_;
  ParameterStore<S> params_;
};

extern template class Seq2Seq<float>;
extern template class Seq2Seq<double>;

// Checkpoint: magic, version, ModelConfig + Vocabulary header, then the
// float32 parameter payload. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Seq2Seq<float>& model,
                     const Vocabulary& vocab);
struct LoadedModel {
  Seq2Seq<float> model;
  Vocabulary vocab;
};
LoadedModel load_checkpoint(const std::string& path);

}  // namespace babilab
