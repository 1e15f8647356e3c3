#include "babilab/probe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace babilab {

namespace {

constexpr const char* kStateMagic = "BBLSTAT1";

// Kind stream aligned with the final-history token stream.
std::vector<DisfluencyKind> token_kinds(const AnnotatedDialogue& d) {
  std::vector<DisfluencyKind> out;
  const size_t last = d.dialogue.turns.size() - 1;
  for (size_t i = 0; i <= last; ++i) {
    out.push_back(DisfluencyKind::none);  // <u>
    out.insert(out.end(), d.user_turns[i].tokens.size(), d.user_turns[i].kind);
    if (i < last) {
      out.push_back(DisfluencyKind::none);  // <s>
      out.insert(out.end(), d.dialogue.turns[i].system.size(), DisfluencyKind::none);
    }
  }
  return out;
}

}  // namespace

StateDataset collect_encoder_states(const Seq2Seq<float>& model, const Vocabulary& vocab,
                                    const AnnotatedCorpus& corpus) {
  StateDataset ds;
  ds.hidden_dim = model.config().hidden_dim;
  size_t total = 0;
  for (const auto& d : corpus.dialogues)
    total += history_tokens(d.dialogue, d.dialogue.turns.size() - 1).size();
  ds.states.resize(ds.hidden_dim, Eigen::Index(total));
  ds.records.reserve(total);

  Eigen::Index col = 0;
  for (size_t di = 0; di < corpus.dialogues.size(); ++di) {
    const auto& d = corpus.dialogues[di];
    const Utterance hist = history_tokens(d.dialogue, d.dialogue.turns.size() - 1);
    const std::vector<int> labels = token_labels(d);
    const std::vector<DisfluencyKind> kinds = token_kinds(d);
    if (labels.size() != hist.size() || kinds.size() != hist.size())
      throw DataError("annotation stream does not align with dialogue history");
    const auto ids = vocab.encode(hist);
    const auto trace = model.encode(ids);
    for (size_t p = 0; p < hist.size(); ++p) {
      ds.states.col(col) = trace.h.col(Eigen::Index(p));
      ds.records.push_back({int(di), int(p), ids[p], labels[p], kinds[p]});
      ++col;
    }
  }
  return ds;
}

void write_state_dataset(std::ostream& out, const StateDataset& ds) {
  out.write(kStateMagic, 8);
  write_u32(out, uint32_t(ds.hidden_dim));
  write_u64(out, uint64_t(ds.records.size()));
  for (const auto& r : ds.records) {
    write_u32(out, uint32_t(r.dialogue));
    write_u32(out, uint32_t(r.position));
    write_u32(out, uint32_t(r.token_id));
    const unsigned char bytes[2] = {static_cast<unsigned char>(r.label),
                                    static_cast<unsigned char>(r.kind)};
    out.write(reinterpret_cast<const char*>(bytes), 2);
  }
  out.write(reinterpret_cast<const char*>(ds.states.data()),
            std::streamsize(sizeof(float)) * ds.states.size());
}

StateDataset read_state_dataset(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != kStateMagic)
    throw DataError("not a state dataset");
  StateDataset ds;
  ds.hidden_dim = int(read_u32(in));
  const uint64_t n = read_u64(in);
  ds.records.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    StateRecord r;
    r.dialogue = int(read_u32(in));
    r.position = int(read_u32(in));
    r.token_id = int(read_u32(in));
    unsigned char bytes[2];
    in.read(reinterpret_cast<char*>(bytes), 2);
    r.label = int(bytes[0]);
    r.kind = DisfluencyKind(bytes[1]);
    ds.records.push_back(r);
  }
  ds.states.resize(ds.hidden_dim, Eigen::Index(n));
  in.read(reinterpret_cast<char*>(ds.states.data()),
          std::streamsize(sizeof(float)) * ds.states.size());
  if (!in) throw DataError("truncated state dataset");
  return ds;
}

bool in_probe_train_split(int dialogue, int dialogue_count) {
  if (dialogue_count <= 0) throw DataError("empty dataset");
  return dialogue * 10 < dialogue_count * 7;
}

namespace {

double sigmoid_d(double z) { return 1.0 / (1.0 + std::exp(-z)); }

constexpr double kProbeLr = 0.1;
constexpr double kProbeL2 = 1e-4;
constexpr int kProbeIters = 500;
constexpr size_t kSlotProbeTrainCap = 4000;

}  // namespace

DiagnosticClassifier train_diagnostic(const StateDataset& ds, int target_label,
                                      int dialogue_count, uint64_t seed) {
  std::vector<size_t> pos, neg;
  for (size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (!in_probe_train_split(r.dialogue, dialogue_count)) continue;
    if (r.label == target_label)
      pos.push_back(i);
    else if (r.label == kOther)
      neg.push_back(i);
  }
  if (pos.empty() || neg.empty())
    throw DataError("diagnostic training needs both classes present");
  // Balance by downsampling the majority class.
  Rng rng(derive_seed(seed, 0x64696167, uint64_t(target_label)));
  rng.shuffle(pos);
  rng.shuffle(neg);
  const size_t n = std::min(pos.size(), neg.size());
  pos.resize(n);
  neg.resize(n);

  const Eigen::Index H = ds.states.rows();
  const Eigen::Index M = Eigen::Index(2 * n);
  Mat<double> X(H, M);
  Vec<double> y(M);
  for (size_t i = 0; i < n; ++i) {
    X.col(Eigen::Index(i)) = ds.states.col(Eigen::Index(pos[i])).cast<double>();
    y[Eigen::Index(i)] = 1.0;
    X.col(Eigen::Index(n + i)) = ds.states.col(Eigen::Index(neg[i])).cast<double>();
    y[Eigen::Index(n + i)] = 0.0;
  }

  Vec<double> w = Vec<double>::Zero(H);
  double b = 0.0;
  for (int it = 0; it < kProbeIters; ++it) {
    Vec<double> z = X.transpose() * w;
    z.array() += b;
    Vec<double> err(M);
    for (Eigen::Index i = 0; i < M; ++i) err[i] = sigmoid_d(z[i]) - y[i];
    Vec<double> gw = X * err / double(M) + kProbeL2 * w;
    const double gb = err.sum() / double(M);
    w -= kProbeLr * gw;
    b -= kProbeLr * gb;
  }
  DiagnosticClassifier clf;
  clf.w = w.cast<float>();
  clf.bias = float(b);
  clf.target_label = target_label;
  return clf;
}

PrecisionRecall eval_diagnostic(const DiagnosticClassifier& clf, const StateDataset& ds,
                                DisfluencyKind kind, int dialogue_count) {
  PrecisionRecall pr;
  for (size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (in_probe_train_split(r.dialogue, dialogue_count)) continue;
    bool positive;
    if (r.label == clf.target_label && r.kind == kind)
      positive = true;
    else if (r.label == kOther)
      positive = false;
    else
      continue;
    const bool predicted = clf.score(ds.states.col(Eigen::Index(i))) > 0.0f;
    if (positive) {
      ++pr.positives;
      if (predicted)
        ++pr.true_pos;
      else
        ++pr.false_neg;
    } else {
      ++pr.negatives;
      if (predicted) ++pr.false_pos;
    }
  }
  if (pr.true_pos + pr.false_pos > 0)
    pr.precision = double(pr.true_pos) / double(pr.true_pos + pr.false_pos);
  if (pr.positives > 0) pr.recall = double(pr.true_pos) / double(pr.positives);
  return pr;
}

DiagnosticReport run_diagnostics(const StateDataset& ds, int dialogue_count,
                                 uint64_t seed) {
  DiagnosticReport report;
  for (int label : {kReparandum, kEditingTerm, kRepair}) {
    const auto clf = train_diagnostic(ds, label, dialogue_count, seed);
    for (DisfluencyKind kind : {DisfluencyKind::correction, DisfluencyKind::restart})
      report.cells[kind][label] = eval_diagnostic(clf, ds, kind, dialogue_count);
  }
  return report;
}

std::string diagnostic_report_text(const DiagnosticReport& report) {
  auto cell = [](const PrecisionRecall& pr) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1);
    if (pr.precision)
      s << *pr.precision * 100.0;
    else
      s << "n/a";
    s << " / ";
    if (pr.recall)
      s << *pr.recall * 100.0;
    else
      s << "n/a";
    return s.str();
  };
  static const std::map<int, std::string> names = {
      {kReparandum, "reparandum"}, {kEditingTerm, "editing term"}, {kRepair, "repair"}};
  std::ostringstream out;
  out << std::left << std::setw(14) << "" << std::setw(20) << "self-corrections"
      << "restarts\n";
  for (int label : {kReparandum, kEditingTerm, kRepair}) {
    out << std::left << std::setw(14) << names.at(label);
    const auto& by_kind = report.cells;
    out << std::setw(20) << cell(by_kind.at(DisfluencyKind::correction).at(label))
        << cell(by_kind.at(DisfluencyKind::restart).at(label)) << "\n";
  }
  return out.str();
}

int LogisticClassifier::predict(const VecF& state) const {
  VecF scores = W * state + b;
  int best = 0;
  for (int i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

namespace {

LogisticClassifier train_multiclass(const MatF& states, const std::vector<size_t>& sample,
                                    const std::vector<int>& targets,
                                    const std::vector<std::string>& classes) {
  const Eigen::Index H = states.rows();
  const Eigen::Index C = Eigen::Index(classes.size());
  const Eigen::Index M = Eigen::Index(sample.size());
  Mat<double> X(H, M);
  for (Eigen::Index i = 0; i < M; ++i)
    X.col(i) = states.col(Eigen::Index(sample[size_t(i)])).cast<double>();

  Mat<double> W = Mat<double>::Zero(C, H);
  Vec<double> b = Vec<double>::Zero(C);
  for (int it = 0; it < kProbeIters; ++it) {
    Mat<double> Z = W * X;
    Z.colwise() += b;
    for (Eigen::Index i = 0; i < M; ++i) {
      Vec<double> col = Z.col(i);
      softmax_inplace(col);
      col[targets[size_t(i)]] -= 1.0;
      Z.col(i) = col;
    }
    Mat<double> gW = Z * X.transpose() / double(M) + kProbeL2 * W;
    Vec<double> gb = Z.rowwise().sum() / double(M);
    W -= kProbeLr * gW;
    b -= kProbeLr * gb;
  }
  LogisticClassifier clf;
  clf.W = W.cast<float>();
  clf.b = b.cast<float>();
  clf.classes = classes;
  return clf;
}

}  // namespace

SlotProbeReport probe_slots(const StateDataset& ds, const Vocabulary& vocab,
                            const SlotCatalog& catalog, int dialogue_count,
                            uint64_t seed, int delay, int max_offset_bucket) {
  if (delay < 0) throw DataError("probe delay must be non-negative");
  struct Sample {
    size_t record;
    int target;
    int offset;
    bool train;
  };
  std::array<std::vector<Sample>, 4> samples;
  std::array<std::vector<std::string>, 4> classes;
  std::array<std::map<std::string, int>, 4> class_ids;
  for (Slot s : kAllSlots) {
    classes[size_t(s)] = catalog.all_values(s);
    for (size_t c = 0; c < classes[size_t(s)].size(); ++c)
      class_ids[size_t(s)][classes[size_t(s)][c]] = int(c);
  }

  // Walk each dialogue's token stream tracking the per-slot current value;
  // values change only at in-catalog tokens labelled other/repair.
  struct SlotState {
    std::string value;
    int mention_pos = -1;
  };
  size_t i = 0;
  while (i < ds.records.size()) {
    const int dlg = ds.records[i].dialogue;
    std::array<std::vector<SlotState>, 4> history;  // per position, per slot
    std::array<SlotState, 4> current;
    size_t begin = i;
    for (; i < ds.records.size() && ds.records[i].dialogue == dlg; ++i) {
      const auto& r = ds.records[i];
      const std::string& tok = vocab.token(r.token_id);
      const auto slot = catalog.slot_of(tok);
      if (slot && (r.label == kOther || r.label == kRepair)) {
        current[size_t(*slot)].value = tok;
        current[size_t(*slot)].mention_pos = r.position;
      }
      for (Slot s : kAllSlots) history[size_t(s)].push_back(current[size_t(s)]);
    }
    const bool train = in_probe_train_split(dlg, dialogue_count);
    for (size_t p = 0; p < history[0].size(); ++p) {
      for (Slot s : kAllSlots) {
        // Target: the value that was current `delay` positions earlier.
        if (long(p) - delay < 0) continue;
        const SlotState& target_state = history[size_t(s)][p - size_t(delay)];
        if (target_state.mention_pos < 0) continue;
        const SlotState& now = history[size_t(s)][p];
        auto it = class_ids[size_t(s)].find(target_state.value);
        if (it == class_ids[size_t(s)].end()) continue;  // out-of-catalog token
        samples[size_t(s)].push_back({begin + p, it->second,
                                      int(ds.records[begin + p].position) - now.mention_pos,
                                      train});
      }
    }
  }

  SlotProbeReport report;
  report.delay = delay;
  for (Slot s : kAllSlots) {
    auto& all = samples[size_t(s)];
    std::vector<size_t> train_idx;
    std::vector<int> train_tgt;
    for (const auto& smp : all)
      if (smp.train) {
        train_idx.push_back(smp.record);
        train_tgt.push_back(smp.target);
      }
    SlotProbeResult res;
    res.slot = s;
    if (train_idx.empty()) {
      report.slots.push_back(res);
      continue;
    }
    if (train_idx.size() > kSlotProbeTrainCap) {
      std::vector<size_t> order(train_idx.size());
      std::iota(order.begin(), order.end(), size_t(0));
      Rng rng(derive_seed(seed, 0x736c6f74, uint64_t(s)));
      rng.shuffle(order);
      order.resize(kSlotProbeTrainCap);
      std::vector<size_t> sub_idx;
      std::vector<int> sub_tgt;
      for (size_t o : order) {
        sub_idx.push_back(train_idx[o]);
        sub_tgt.push_back(train_tgt[o]);
      }
      train_idx.swap(sub_idx);
      train_tgt.swap(sub_tgt);
    }
    res.train_count = train_idx.size();
    const auto clf = train_multiclass(ds.states, train_idx, train_tgt, classes[size_t(s)]);

    std::map<int, OffsetBucket> buckets;
    for (const auto& smp : all) {
      if (smp.train) continue;
      const int pred = clf.predict(ds.states.col(Eigen::Index(smp.record)));
      const bool ok = pred == smp.target;
      ++res.eval_count;
      if (ok) ++res.correct;
      const int bucket = std::min(smp.offset, max_offset_bucket);
      auto& bk = buckets[bucket];
      bk.offset = bucket;
      ++bk.count;
      if (ok) ++bk.correct;
    }
    if (res.eval_count > 0) res.accuracy = double(res.correct) / double(res.eval_count);
    for (const auto& [off, bk] : buckets) res.by_offset.push_back(bk);
    report.slots.push_back(std::move(res));
  }
  return report;
}

std::string slot_probe_report_text(const SlotProbeReport& report) {
  std::ostringstream out;
  out << "delay " << report.delay << "\n";
  out << std::left << std::setw(14) << "slot" << std::setw(10) << "accuracy"
      << std::setw(10) << "eval n"
      << "train n\n";
  for (const auto& r : report.slots)
    out << std::left << std::setw(14) << slot_name(r.slot) << std::setw(10) << std::fixed
        << std::setprecision(1) << r.accuracy * 100.0 << std::setw(10) << r.eval_count
        << r.train_count << "\n";
  out << "\noffset curve (offset: per-slot accuracy%)\n";
  for (const auto& r : report.slots) {
    out << std::left << std::setw(14) << slot_name(r.slot);
    for (const auto& bk : r.by_offset)
      out << bk.offset << ":" << std::fixed << std::setprecision(1)
          << (bk.count ? 100.0 * double(bk.correct) / double(bk.count) : 0.0) << " ";
    out << "\n";
  }
  return out.str();
}

namespace {

std::string token_type(const std::string& token, const SlotCatalog& catalog) {
  if (auto s = catalog.slot_of(token)) {
    std::string name = slot_name(*s);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return char(std::toupper(c)); });
    return name;
  }
  return token;
}

}  // namespace

AlignmentMatrix attention_alignment(const Seq2Seq<float>& model, const Vocabulary& vocab,
                                    const std::vector<Dialogue>& dialogues,
                                    const SlotCatalog& catalog, float tau,
                                    std::vector<AttentionDump>* dumps) {
  if (!model.config().attention)
    throw DataError("attention alignment requires an attentive model");
  const int api_id = vocab.id(kApiCallToken);
  const std::vector<std::string> row_labels = {"api_call", "cuisine", "location",
                                               "party_size", "price_range"};
  std::vector<std::map<std::string, double>> sums(row_labels.size());
  std::vector<size_t> row_counts(row_labels.size(), 0);
  AlignmentMatrix out;
  out.tau = tau;

  for (size_t di = 0; di < dialogues.size(); ++di) {
    const auto& d = dialogues[di];
    const Utterance hist = history_tokens(d, d.turns.size() - 1);
    const auto ids = vocab.encode(hist);
    const auto decoded = model.greedy_decode(ids);
    if (dumps) {
      AttentionDump dump;
      dump.dialogue = int(di);
      dump.input_tokens = hist;
      dump.output_tokens = vocab.decode(decoded.tokens);
      dump.weights = decoded.attention;
      dumps->push_back(std::move(dump));
    }
    if (decoded.tokens.empty() || decoded.tokens.front() != api_id) continue;
    ++out.examples;
    const size_t rows = std::min(row_labels.size(), decoded.tokens.size());
    for (size_t j = 0; j < rows; ++j) {
      ++row_counts[j];
      for (size_t i = 0; i < hist.size(); ++i)
        sums[j][token_type(hist[i], catalog)] +=
            double(decoded.attention(Eigen::Index(j), Eigen::Index(i)));
    }
  }

  std::map<std::string, Eigen::Index> col_of;
  for (const auto& row : sums)
    for (const auto& [type, _] : row)
      if (!col_of.count(type)) col_of[type] = 0;
  Eigen::Index c = 0;
  for (auto& [type, idx] : col_of) {
    idx = c++;
    out.col_labels.push_back(type);
  }
  out.row_labels = row_labels;
  out.values = MatF::Zero(Eigen::Index(row_labels.size()), c);
  for (size_t j = 0; j < row_labels.size(); ++j) {
    if (row_counts[j] == 0) continue;
    for (const auto& [type, sum] : sums[j])
      out.values(Eigen::Index(j), col_of[type]) = float(sum / double(row_counts[j]));
  }
  return out;
}

Utterance default_trigger_prompt() {
  Utterance prompt = {"<s>"};
  const Utterance ok = split_tokens(kSysOk);
  prompt.insert(prompt.end(), ok.begin(), ok.end());
  prompt.push_back("<u>");
  prompt.push_back(kSilenceToken);
  return prompt;
}

TriggerReport trigger_api_calls(const Seq2Seq<float>& model, const Vocabulary& vocab,
                                const std::vector<Dialogue>& dialogues,
                                const SlotCatalog& catalog, const Utterance& prompt) {
  const int api_id = vocab.id(kApiCallToken);
  TriggerReport report;
  for (const auto& d : dialogues) {
    std::array<std::string, 4> value;  // latest mention wins
    for (size_t k = 0; k < d.turns.size(); ++k) {
      for (const auto& tok : d.turns[k].user)
        if (auto s = catalog.slot_of(tok)) value[size_t(*s)] = tok;
      Utterance hist = history_tokens(d, k);
      if (k + 1 < d.turns.size())
        hist.insert(hist.end(), prompt.begin(), prompt.end());
      const auto decoded = model.greedy_decode(vocab.encode(hist));
      ++report.prompts;
      if (decoded.tokens.empty() || decoded.tokens.front() != api_id) continue;
      ++report.triggered;
      for (Slot s : kAllSlots) {
        if (value[size_t(s)].empty()) continue;  // not yet mentioned
        ++report.fillable_slots;
        const size_t arg = 1 + size_t(s);
        if (arg < decoded.tokens.size() &&
            vocab.token(decoded.tokens[arg]) == value[size_t(s)])
          ++report.correct_slots;
      }
    }
  }
  if (report.prompts > 0)
    report.success_rate = double(report.triggered) / double(report.prompts);
  if (report.fillable_slots > 0)
    report.partial_accuracy =
        double(report.correct_slots) / double(report.fillable_slots);
  return report;
}

TaxonomyReport error_taxonomy(const EvalResult& eval,
                              const std::vector<SeqExample>& examples,
                              const std::vector<Dialogue>& dialogues,
                              const Vocabulary& vocab) {
  // Example order matches build_examples: dialogue-major, then turn.
  std::vector<std::pair<size_t, size_t>> origin;
  for (size_t di = 0; di < dialogues.size(); ++di)
    for (size_t k = 0; k < dialogues[di].turns.size(); ++k) origin.emplace_back(di, k);
  if (origin.size() != examples.size())
    throw DataError("prediction records do not match the corpus");

  TaxonomyReport report;
  for (const auto& r : eval.records) {
    if (r.is_api || r.exact) continue;
    ++report.utterance_errors;
    const auto [di, turn] = origin[r.example];
    ++report.errors_by_turn[int(turn)];
    const auto gold_ci = canonical_index(dialogues[di].turns[turn].system);
    const auto pred_ci = canonical_index(vocab.decode(r.predicted));
    if (gold_ci && pred_ci && *pred_ci > *gold_ci)
      ++report.jump_ahead;
    else if (gold_ci && pred_ci && *pred_ci < *gold_ci)
      ++report.jump_back;
    else
      ++report.other;
  }
  if (report.utterance_errors > 0) {
    const auto it = report.errors_by_turn.find(0);
    const size_t first = it == report.errors_by_turn.end() ? 0 : it->second;
    report.fraction_dialogue_initial = double(first) / double(report.utterance_errors);
  }
  return report;
}

std::string taxonomy_report_text(const TaxonomyReport& report) {
  std::ostringstream out;
  out << "utterance errors: " << report.utterance_errors << "\n"
      << "jump-ahead: " << report.jump_ahead << "\n"
      << "jump-back: " << report.jump_back << "\n"
      << "other: " << report.other << "\n"
      << "at first system turn: " << std::fixed << std::setprecision(1)
      << report.fraction_dialogue_initial * 100.0 << "%\n"
      << "errors by turn:";
  for (const auto& [turn, n] : report.errors_by_turn) out << " " << turn << ":" << n;
  out << "\n";
  return out.str();
}

}  // namespace babilab
