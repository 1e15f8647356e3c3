#include "babilab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace babilab {

namespace {

template <class S>
Mat<S> sigmoid(const Mat<S>& x) {
  return (S(1) / (S(1) + (-x.array()).exp())).matrix();
}

constexpr const char* kCheckpointMagic = "BBLCKPT1";
constexpr uint32_t kCheckpointVersion = 1;

}  // namespace

template <class S>
Seq2Seq<S>::Seq2Seq(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int D = config_.embedding_dim, H = config_.hidden_dim, V = config_.vocab_size;
  params_.add("embed", D, V);
  params_.add("enc.W", 4 * H, D);
  params_.add("enc.U", 4 * H, H);
  params_.add("enc.b", 4 * H, 1);
  params_.add("dec.W", 4 * H, D);
  params_.add("dec.U", 4 * H, H);
  params_.add("dec.b", 4 * H, 1);
  if (config_.attention) {
    params_.add("attn.Wh", H, H);
    params_.add("attn.Ws", H, H);
    params_.add("attn.v", H, 1);
    params_.add("out.W", V, 2 * H);
  } else {
    params_.add("out.W", V, H);
  }
  params_.add("out.b", V, 1);
}

template <class S>
void Seq2Seq<S>::init_params(uint64_t seed) {
  Rng rng(mix_seed(seed ^ 0x696e6974ull));
  const int H = config_.hidden_dim;
  for (auto& e : params_.entries()) {
    if (e.name == "enc.b" || e.name == "dec.b" || e.name == "out.b") {
      e.value.setZero();
      if (e.name != "out.b") e.value.block(H, 0, H, 1).setConstant(S(1));  // forget gate
    } else {
      const double scale = 1.0 / std::sqrt(double(e.value.cols() == 1
                                                      ? e.value.rows()
                                                      : e.value.cols()));
      e.value = init_uniform<S>(e.value.rows(), e.value.cols(), scale, rng);
    }
  }
}

template <class S>
typename Seq2Seq<S>::LstmParamsConst Seq2Seq<S>::lstm_const(const char* prefix) const {
  std::string p(prefix);
  return {&params_.value(p + ".W"), &params_.value(p + ".U"), &params_.value(p + ".b")};
}

template <class S>
void Seq2Seq<S>::lstm_forward_step(const LstmParamsConst& p, const Mat<S>& x,
                                   const Mat<S>& h_prev, const Mat<S>& c_prev,
                                   Mat<S>& gates, Mat<S>& h, Mat<S>& c,
                                   const std::vector<char>* active) const {
  const int H = config_.hidden_dim;
  const Eigen::Index B = x.cols();
  gates.noalias() = (*p.W) * x;
  gates.noalias() += (*p.U) * h_prev;
  gates.colwise() += p.b->col(0);
  auto i = gates.block(0, 0, H, B);
  auto f = gates.block(H, 0, H, B);
  auto g = gates.block(2 * H, 0, H, B);
  auto o = gates.block(3 * H, 0, H, B);
  i = sigmoid<S>(i);
  f = sigmoid<S>(f);
  g = g.array().tanh().matrix();
  o = sigmoid<S>(o);
  c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  h = o.cwiseProduct(c.array().tanh().matrix());
  if (active) {
    for (Eigen::Index b = 0; b < B; ++b) {
      if (!(*active)[size_t(b)]) {
        h.col(b).setZero();
        c.col(b).setZero();
      }
    }
  }
}

template <class S>
typename Seq2Seq<S>::Trace Seq2Seq<S>::encode(const std::vector<int>& input_ids) const {
  if (input_ids.empty()) throw NumericError("encode: empty input");
  const int H = config_.hidden_dim;
  const auto& E = params_.value("embed");
  for (int id : input_ids)
    if (id < 0 || id >= config_.vocab_size)
      throw NumericError("encode: token id out of range");
  const auto p = lstm_const("enc");
  const auto T = Eigen::Index(input_ids.size());
  Trace trace;
  trace.h.resize(H, T);
  Mat<S> h = Mat<S>::Zero(H, 1), c = Mat<S>::Zero(H, 1), gates(4 * H, 1);
  Mat<S> h_next(H, 1), c_next(H, 1);
  for (Eigen::Index t = 0; t < T; ++t) {
    Mat<S> x = E.col(input_ids[size_t(t)]);
    lstm_forward_step(p, x, h, c, gates, h_next, c_next, nullptr);
    h = h_next;
    c = c_next;
    trace.h.col(t) = h.col(0);
  }
  trace.c_final = c.col(0);
  return trace;
}

template <class S>
std::pair<Vec<S>, Vec<S>> Seq2Seq<S>::attend(const Vec<S>& s, const Mat<S>& trace_h) const {
  if (!config_.attention) throw NumericError("attend called on a non-attentive model");
  const auto& Wh = params_.value("attn.Wh");
  const auto& Ws = params_.value("attn.Ws");
  const auto& v = params_.value("attn.v");
  const Eigen::Index T = trace_h.cols();
  const Vec<S> q = Ws * s;
  Vec<S> scores(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    Vec<S> a = ((Wh * trace_h.col(t) + q).array().tanh()).matrix();
    scores[t] = v.col(0).dot(a);
  }
  softmax_inplace(scores);
  Vec<S> context = trace_h * scores;
  return {scores, context};
}

template <class S>
Vec<S> Seq2Seq<S>::decode_step(int prev_token, Vec<S>& h, Vec<S>& c,
                               const Mat<S>& trace_h, Vec<S>* alpha_out) const {
  if (prev_token < 0 || prev_token >= config_.vocab_size)
    throw NumericError("decode_step: token id out of range");
  const int H = config_.hidden_dim;
  const auto& E = params_.value("embed");
  const auto p = lstm_const("dec");
  Mat<S> x = E.col(prev_token);
  Mat<S> hm = h, cm = c, gates(4 * H, 1), h_next(H, 1), c_next(H, 1);
  lstm_forward_step(p, x, hm, cm, gates, h_next, c_next, nullptr);
  h = h_next.col(0);
  c = c_next.col(0);
  const auto& Wo = params_.value("out.W");
  const auto& bo = params_.value("out.b");
  Vec<S> logits;
  if (config_.attention) {
    auto [alpha, context] = attend(h, trace_h);
    if (alpha_out) *alpha_out = alpha;
    Vec<S> comb(2 * H);
    comb << h, context;
    logits = Wo * comb + bo.col(0);
  } else {
    logits = Wo * h + bo.col(0);
  }
  return logits;
}

template <class S>
typename Seq2Seq<S>::DecodeResult Seq2Seq<S>::greedy_decode(
    const std::vector<int>& history, int max_len) const {
  if (max_len < 0) max_len = config_.max_decode_len;
  Trace trace = encode(history);
  Vec<S> h = trace.h.col(trace.h.cols() - 1);
  Vec<S> c = trace.c_final;
  DecodeResult result;
  std::vector<Vec<S>> rows;
  int prev = Vocabulary::kEos;
  for (int step = 0; step < max_len; ++step) {
    Vec<S> alpha;
    Vec<S> logits = decode_step(prev, h, c, trace.h,
                                config_.attention ? &alpha : nullptr);
    // argmax; ties break toward the lowest token id
    int best = 0;
    for (int i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[best]) best = i;
    if (best == Vocabulary::kEos) break;
    result.tokens.push_back(best);
    if (config_.attention) rows.push_back(alpha);
    prev = best;
  }
  if (config_.attention) {
    result.attention.resize(Eigen::Index(rows.size()), trace.h.cols());
    for (size_t r = 0; r < rows.size(); ++r)
      result.attention.row(Eigen::Index(r)) = rows[r].transpose();
  }
  return result;
}

template <class S>
double Seq2Seq<S>::forward_loss(const SeqExample& example, bool training, Rng* dropout_rng) {
  return forward_loss_batch({example}, training, dropout_rng);
}

template <class S>
double Seq2Seq<S>::forward_loss_batch(const std::vector<SeqExample>& batch,
                                      bool training, Rng* dropout_rng) {
  const int H = config_.hidden_dim, D = config_.embedding_dim, V = config_.vocab_size;
  const Eigen::Index B = Eigen::Index(batch.size());
  if (B == 0) throw NumericError("empty batch");
  Eigen::Index T = 0, Sdec = 0;
  for (const auto& ex : batch) {
    if (ex.history.empty()) throw NumericError("empty history");
    if (ex.target.empty() || ex.target.back() != Vocabulary::kEos)
      throw NumericError("target must end with <eos>");
    for (int id : ex.history)
      if (id < 0 || id >= V) throw NumericError("history token id out of range");
    for (int id : ex.target)
      if (id < 0 || id >= V) throw NumericError("target token id out of range");
    T = std::max(T, Eigen::Index(ex.history.size()));
    Sdec = std::max(Sdec, Eigen::Index(ex.target.size()));
  }
  const auto& E = params_.value("embed");
  const bool dropout = training && config_.dropout_rate > 0.0f && dropout_rng;
  const S keep_inv = S(1.0 / (1.0 - double(config_.dropout_rate)));

  const size_t Bs = size_t(B);
  // Encoder inputs are front-padded so every final state lands at t = T-1.
  std::vector<Eigen::Index> start(Bs);
  for (Eigen::Index b = 0; b < B; ++b)
    start[size_t(b)] = T - Eigen::Index(batch[size_t(b)].history.size());

  std::vector<std::vector<char>> active(size_t(T), std::vector<char>(size_t(B), 0));
  std::vector<std::vector<int>> enc_tok(size_t(T), std::vector<int>(size_t(B), 0));
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index b = 0; b < B; ++b)
      if (t >= start[size_t(b)]) {
        active[size_t(t)][size_t(b)] = 1;
        enc_tok[size_t(t)][size_t(b)] =
            batch[size_t(b)].history[size_t(t - start[size_t(b)])];
      }

  auto gather = [&](const std::vector<int>& toks, Mat<S>& x, Mat<S>& mask) {
    x.resize(D, B);
    for (Eigen::Index b = 0; b < B; ++b) x.col(b) = E.col(toks[size_t(b)]);
    if (dropout) {
      mask.resize(D, B);
      for (Eigen::Index b = 0; b < B; ++b)
        for (Eigen::Index d = 0; d < D; ++d)
          mask(d, b) = dropout_rng->bernoulli(double(config_.dropout_rate))
                           ? S(0)
                           : keep_inv;
      x = x.cwiseProduct(mask);
    }
  };

  // ---- encoder forward ----
  const auto enc = lstm_const("enc");
  const size_t Ts = size_t(T);
  std::vector<Mat<S>> ex_(Ts), emask(Ts), egate(Ts), eh(Ts), ec(Ts);
  Mat<S> zero = Mat<S>::Zero(H, B);
  for (Eigen::Index t = 0; t < T; ++t) {
    gather(enc_tok[size_t(t)], ex_[size_t(t)], emask[size_t(t)]);
    const Mat<S>& h_prev = t == 0 ? zero : eh[size_t(t - 1)];
    const Mat<S>& c_prev = t == 0 ? zero : ec[size_t(t - 1)];
    egate[size_t(t)].resize(4 * H, B);
    eh[size_t(t)].resize(H, B);
    ec[size_t(t)].resize(H, B);
    lstm_forward_step(enc, ex_[size_t(t)], h_prev, c_prev, egate[size_t(t)],
                      eh[size_t(t)], ec[size_t(t)], &active[size_t(t)]);
  }

  // Attention precomputation: P_t = Wh * h_t for every encoder step.
  std::vector<Mat<S>> P;
  if (config_.attention) {
    const auto& Wh = params_.value("attn.Wh");
    P.resize(size_t(T));
    for (Eigen::Index t = 0; t < T; ++t) P[size_t(t)].noalias() = Wh * eh[size_t(t)];
  }

  // ---- decoder forward ----
  const auto dec = lstm_const("dec");
  std::vector<std::vector<int>> dec_tok(size_t(Sdec), std::vector<int>(size_t(B), 0));
  for (Eigen::Index s = 0; s < Sdec; ++s)
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& tgt = batch[size_t(b)].target;
      dec_tok[size_t(s)][size_t(b)] =
          s == 0 ? Vocabulary::kEos
                 : (size_t(s) <= tgt.size() ? tgt[size_t(s - 1)] : Vocabulary::kPad);
    }

  const size_t Ss = size_t(Sdec);
  std::vector<Mat<S>> dx(Ss), dmask(Ss), dgate(Ss), dh_(Ss), dc_(Ss), alpha(Ss),
      qs(Ss), ctx(Ss), dlogits(Ss);
  const auto& Wo = params_.value("out.W");
  const auto& bo = params_.value("out.b");
  const Mat<S>* Ws = config_.attention ? &params_.value("attn.Ws") : nullptr;
  const Mat<S>* av = config_.attention ? &params_.value("attn.v") : nullptr;

  double total_loss = 0.0;
  std::vector<double> inv_len(Bs);
  for (Eigen::Index b = 0; b < B; ++b)
    inv_len[size_t(b)] = 1.0 / double(batch[size_t(b)].target.size());

  for (Eigen::Index s = 0; s < Sdec; ++s) {
    gather(dec_tok[size_t(s)], dx[size_t(s)], dmask[size_t(s)]);
    const Mat<S>& h_prev = s == 0 ? eh[size_t(T - 1)] : dh_[size_t(s - 1)];
    const Mat<S>& c_prev = s == 0 ? ec[size_t(T - 1)] : dc_[size_t(s - 1)];
    dgate[size_t(s)].resize(4 * H, B);
    dh_[size_t(s)].resize(H, B);
    dc_[size_t(s)].resize(H, B);
    lstm_forward_step(dec, dx[size_t(s)], h_prev, c_prev, dgate[size_t(s)],
                      dh_[size_t(s)], dc_[size_t(s)], nullptr);

    Mat<S> comb;
    if (config_.attention) {
      qs[size_t(s)].noalias() = (*Ws) * dh_[size_t(s)];
      Mat<S>& al = alpha[size_t(s)];
      al.resize(T, B);
      for (Eigen::Index t = 0; t < T; ++t) {
        Mat<S> a = ((P[size_t(t)] + qs[size_t(s)]).array().tanh()).matrix();
        al.row(t) = av->col(0).transpose() * a;
        for (Eigen::Index b = 0; b < B; ++b)
          if (!active[size_t(t)][size_t(b)]) al(t, b) = S(-1e30);
      }
      // column-wise softmax over encoder positions
      for (Eigen::Index b = 0; b < B; ++b) {
        Vec<S> col = al.col(b);
        softmax_inplace(col);
        al.col(b) = col;
      }
      Mat<S>& cx = ctx[size_t(s)];
      cx = Mat<S>::Zero(H, B);
      for (Eigen::Index t = 0; t < T; ++t)
        cx.array() += eh[size_t(t)].array().rowwise() * al.row(t).array();
      comb.resize(2 * H, B);
      comb << dh_[size_t(s)], cx;
    } else {
      comb = dh_[size_t(s)];
    }

    Mat<S> logits = Wo * comb;
    logits.colwise() += bo.col(0);
    Mat<S>& dl = dlogits[size_t(s)];
    dl = Mat<S>::Zero(V, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& tgt = batch[size_t(b)].target;
      if (size_t(s) >= tgt.size()) continue;
      Vec<S> col = logits.col(b);
      Vec<S> grad;
      const double loss = cross_entropy(col, tgt[size_t(s)], grad);
      total_loss += loss * inv_len[size_t(b)] / double(B);
      if (training) dl.col(b) = grad * S(inv_len[size_t(b)] / double(B));
    }
  }

  if (!training) return total_loss;

  // ---- backward ----
  auto& gE = params_.grad("embed");
  auto scatter = [&](const Mat<S>& dxm, const std::vector<int>& toks, const Mat<S>& mask,
                     const std::vector<char>* act) {
    for (Eigen::Index b = 0; b < B; ++b) {
      if (act && !(*act)[size_t(b)]) continue;
      if (dropout)
        gE.col(toks[size_t(b)]) += dxm.col(b).cwiseProduct(mask.col(b));
      else
        gE.col(toks[size_t(b)]) += dxm.col(b);
    }
  };

  auto lstm_backward_step = [&](const char* prefix, const Mat<S>& gates, const Mat<S>& c_t,
                                const Mat<S>& h_prev, const Mat<S>& c_prev, Mat<S>& dh,
                                Mat<S>& dc, const Mat<S>& x, Mat<S>& dx_out,
                                Mat<S>& dh_prev_out, const std::vector<char>* act) {
    std::string pfx(prefix);
    const auto& W = params_.value(pfx + ".W");
    const auto& U = params_.value(pfx + ".U");
    auto& gW = params_.grad(pfx + ".W");
    auto& gU = params_.grad(pfx + ".U");
    auto& gb = params_.grad(pfx + ".b");
    if (act)
      for (Eigen::Index b = 0; b < B; ++b)
        if (!(*act)[size_t(b)]) {
          dh.col(b).setZero();
          dc.col(b).setZero();
        }
    const auto i = gates.block(0, 0, H, B).array();
    const auto f = gates.block(H, 0, H, B).array();
    const auto g = gates.block(2 * H, 0, H, B).array();
    const auto o = gates.block(3 * H, 0, H, B).array();
    Mat<S> tc = c_t.array().tanh().matrix();
    Mat<S> dpre(4 * H, B);
    auto dca = (dc.array() + dh.array() * o * (S(1) - tc.array().square())).eval();
    dpre.block(0, 0, H, B) = (dca * g * i * (S(1) - i)).matrix();          // d input gate
    dpre.block(H, 0, H, B) = (dca * c_prev.array() * f * (S(1) - f)).matrix();  // d forget
    dpre.block(2 * H, 0, H, B) = (dca * i * (S(1) - g.square())).matrix(); // d candidate
    dpre.block(3 * H, 0, H, B) =
        (dh.array() * tc.array() * o * (S(1) - o)).matrix();               // d output gate
    dc = (dca * f).matrix();  // carried to t-1
    gW.noalias() += dpre * x.transpose();
    gU.noalias() += dpre * h_prev.transpose();
    gb.col(0) += dpre.rowwise().sum();
    dx_out.noalias() = W.transpose() * dpre;
    dh_prev_out.noalias() = U.transpose() * dpre;
  };

  std::vector<Mat<S>> denc_h(size_t(T), Mat<S>::Zero(H, B));
  std::vector<Mat<S>> dP;
  if (config_.attention) dP.assign(size_t(T), Mat<S>::Zero(H, B));

  auto& gWo = params_.grad("out.W");
  auto& gbo = params_.grad("out.b");

  Mat<S> dh_carry = Mat<S>::Zero(H, B), dc_carry = Mat<S>::Zero(H, B);
  Mat<S> dx_buf(D, B), dh_prev_buf(H, B);
  for (Eigen::Index s = Sdec - 1; s >= 0; --s) {
    const Mat<S>& dl = dlogits[size_t(s)];
    Mat<S> comb;
    if (config_.attention) {
      comb.resize(2 * H, B);
      comb << dh_[size_t(s)], ctx[size_t(s)];
    } else {
      comb = dh_[size_t(s)];
    }
    gWo.noalias() += dl * comb.transpose();
    gbo.col(0) += dl.rowwise().sum();
    Mat<S> dcomb = Wo.transpose() * dl;
    Mat<S> dh = dh_carry + dcomb.topRows(H);

    if (config_.attention) {
      const Mat<S> dctx = dcomb.bottomRows(H);
      const Mat<S>& al = alpha[size_t(s)];
      // d alpha and the context contribution to encoder states
      Mat<S> dal(T, B);
      for (Eigen::Index t = 0; t < T; ++t) {
        dal.row(t) = (eh[size_t(t)].cwiseProduct(dctx)).colwise().sum();
        denc_h[size_t(t)].array() += dctx.array().rowwise() * al.row(t).array();
      }
      // softmax backward, per column
      Eigen::Matrix<S, 1, Eigen::Dynamic> dot =
          (al.cwiseProduct(dal)).colwise().sum();
      Mat<S> de = dal;
      de.array().rowwise() -= dot.array();
      de = al.cwiseProduct(de);
      // score backward; tanh activations recomputed per step
      Mat<S> dq = Mat<S>::Zero(H, B);
      auto& gv = params_.grad("attn.v");
      for (Eigen::Index t = 0; t < T; ++t) {
        Mat<S> a = ((P[size_t(t)] + qs[size_t(s)]).array().tanh()).matrix();
        Mat<S> common = (((S(1) - a.array().square()).colwise() *
                          av->col(0).array())
                             .rowwise() *
                         de.row(t).array())
                            .matrix();
        dP[size_t(t)] += common;
        dq += common;
        gv.col(0).noalias() += a * de.row(t).transpose();
      }
      params_.grad("attn.Ws").noalias() += dq * dh_[size_t(s)].transpose();
      dh.noalias() += Ws->transpose() * dq;
    }

    const Mat<S>& h_prev = s == 0 ? eh[size_t(T - 1)] : dh_[size_t(s - 1)];
    const Mat<S>& c_prev = s == 0 ? ec[size_t(T - 1)] : dc_[size_t(s - 1)];
    Mat<S> dc = dc_carry;
    lstm_backward_step("dec", dgate[size_t(s)], dc_[size_t(s)], h_prev, c_prev, dh, dc,
                       dx[size_t(s)], dx_buf, dh_prev_buf, nullptr);
    scatter(dx_buf, dec_tok[size_t(s)], dmask[size_t(s)], nullptr);
    dh_carry = dh_prev_buf;
    dc_carry = dc;
  }
  // decoder init state = encoder final state
  denc_h[size_t(T - 1)] += dh_carry;
  Mat<S> denc_c_carry = dc_carry;

  if (config_.attention) {
    const auto& Wh = params_.value("attn.Wh");
    auto& gWh = params_.grad("attn.Wh");
    for (Eigen::Index t = 0; t < T; ++t) {
      gWh.noalias() += dP[size_t(t)] * eh[size_t(t)].transpose();
      denc_h[size_t(t)].noalias() += Wh.transpose() * dP[size_t(t)];
    }
  }

  dh_carry = Mat<S>::Zero(H, B);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    Mat<S> dh = dh_carry + denc_h[size_t(t)];
    Mat<S> dc = t == T - 1 ? denc_c_carry : Mat<S>(std::move(dc_carry));
    const Mat<S>& h_prev = t == 0 ? zero : eh[size_t(t - 1)];
    const Mat<S>& c_prev = t == 0 ? zero : ec[size_t(t - 1)];
    lstm_backward_step("enc", egate[size_t(t)], ec[size_t(t)], h_prev, c_prev, dh, dc,
                       ex_[size_t(t)], dx_buf, dh_prev_buf, &active[size_t(t)]);
    scatter(dx_buf, enc_tok[size_t(t)], emask[size_t(t)], &active[size_t(t)]);
    dh_carry = dh_prev_buf;
    dc_carry = std::move(dc);
  }

  return total_loss;
}

template class Seq2Seq<float>;
template class Seq2Seq<double>;

void save_checkpoint(const std::string& path, const Seq2Seq<float>& model,
                     const Vocabulary& vocab) {
  std::ostringstream out(std::ios::binary);
  out.write(kCheckpointMagic, 8);
  write_u32(out, kCheckpointVersion);
  const ModelConfig& c = model.config();
  write_u32(out, uint32_t(c.embedding_dim));
  write_u32(out, uint32_t(c.hidden_dim));
  write_u32(out, c.attention ? 1 : 0);
  write_u32(out, uint32_t(c.max_decode_len));
  uint32_t drop_bits;
  static_assert(sizeof(drop_bits) == sizeof(c.dropout_rate));
  std::memcpy(&drop_bits, &c.dropout_rate, 4);
  write_u32(out, drop_bits);
  write_u32(out, uint32_t(vocab.size()));
  for (const auto& tok : vocab.tokens) write_string(out, tok);
  write_parameters(out, model.params());
  write_file_atomic(path, out.str());
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != kCheckpointMagic)
    throw DataError("not a checkpoint file: " + path);
  if (read_u32(in) != kCheckpointVersion)
    throw DataError("unsupported checkpoint version in " + path);
  ModelConfig c;
  c.embedding_dim = int(read_u32(in));
  c.hidden_dim = int(read_u32(in));
  c.attention = read_u32(in) != 0;
  c.max_decode_len = int(read_u32(in));
  uint32_t drop_bits = read_u32(in);
  std::memcpy(&c.dropout_rate, &drop_bits, 4);
  Vocabulary vocab;
  const uint32_t vsize = read_u32(in);
  for (uint32_t i = 0; i < vsize; ++i) {
    vocab.tokens.push_back(read_string(in));
    vocab.ids[vocab.tokens.back()] = int(i);
  }
  c.vocab_size = int(vsize);
  LoadedModel loaded{Seq2Seq<float>(c), std::move(vocab)};
  ParameterStore<float> read_store;
  read_parameters(in, read_store);
  for (auto& e : loaded.model.params().entries()) {
    const auto& src = read_store.entry(e.name).value;
    if (src.rows() != e.value.rows() || src.cols() != e.value.cols())
      throw DataError("checkpoint shape mismatch for " + e.name);
    e.value = src;
  }
  return loaded;
}

}  // namespace babilab
