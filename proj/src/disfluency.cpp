#include "babilab/disfluency.hpp"

#include <algorithm>
#include <sstream>

namespace babilab {

const char* et_policy_name(EtPolicy p) {
  switch (p) {
    case EtPolicy::noET: return "noET";
    case EtPolicy::realET: return "realET";
    case EtPolicy::fullET: return "fullET";
  }
  return "?";
}

std::optional<EtPolicy> et_policy_from_name(const std::string& name) {
  if (name == "noET") return EtPolicy::noET;
  if (name == "realET") return EtPolicy::realET;
  if (name == "fullET") return EtPolicy::fullET;
  return std::nullopt;
}

double DisfluencyConfig::et_rate() const {
  switch (et_policy) {
    case EtPolicy::noET: return 0.0;
    case EtPolicy::realET: return 0.20;
    case EtPolicy::fullET: return 1.0;
  }
  return 1.0;
}

AnnotatedUtterance AnnotatedUtterance::fluent(const Utterance& u) {
  AnnotatedUtterance a;
  a.tokens = u;
  a.labels.assign(u.size(), kOther);
  return a;
}

namespace {

std::vector<std::pair<size_t, size_t>> label_spans(const std::vector<int>& labels,
                                                   int label) {
  std::vector<std::pair<size_t, size_t>> spans;  // [begin, end)
  size_t i = 0;
  while (i < labels.size()) {
    if (labels[i] == label) {
      size_t j = i;
      while (j < labels.size() && labels[j] == label) ++j;
      spans.emplace_back(i, j);
      i = j;
    } else {
      ++i;
    }
  }
  return spans;
}

}  // namespace

void AnnotatedUtterance::check_well_formed() const {
  if (tokens.size() != labels.size())
    throw DataError("annotation length mismatch");
  for (int l : labels)
    if (l < 0 || l > 3) throw DataError("label out of range");
  auto rm = label_spans(labels, kReparandum);
  auto et = label_spans(labels, kEditingTerm);
  auto rp = label_spans(labels, kRepair);
  switch (kind) {
    case DisfluencyKind::none:
      if (!rm.empty() || !et.empty() || !rp.empty())
        throw DataError("fluent utterance carries disfluency labels");
      break;
    case DisfluencyKind::hesitation:
      if (!rm.empty() || !rp.empty() || et.size() != 1)
        throw DataError("hesitation must contain exactly one editing-term span");
      break;
    case DisfluencyKind::restart:
    case DisfluencyKind::correction: {
      if (rm.size() != 1 || rp.size() != 1 || et.size() > 1)
        throw DataError("expected one reparandum span and one repair span");
      if (rm[0].second > rp[0].first)
        throw DataError("reparandum must precede repair");
      if (!et.empty() &&
          (et[0].first < rm[0].second || et[0].second > rp[0].first))
        throw DataError("editing term must lie between reparandum and repair");
      const Utterance rm_tokens(tokens.begin() + long(rm[0].first),
                                tokens.begin() + long(rm[0].second));
      const Utterance rp_tokens(tokens.begin() + long(rp[0].first),
                                tokens.begin() + long(rp[0].second));
      if (kind == DisfluencyKind::restart && rm_tokens != rp_tokens)
        throw DataError("restart repair must repeat the reparandum");
      if (kind == DisfluencyKind::correction && rm_tokens == rp_tokens)
        throw DataError("correction repair must differ from the reparandum");
      break;
    }
  }
}

const std::vector<Utterance>& correction_patterns(Slot s) {
  static const std::vector<Utterance> cuisine = {
      split_tokens("with * cuisine"), split_tokens("* food"),
      split_tokens("a *"), split_tokens("*")};
  static const std::vector<Utterance> location = {split_tokens("in *"),
                                                  split_tokens("*")};
  static const std::vector<Utterance> party = {
      split_tokens("for * people"), split_tokens("for *"), split_tokens("*")};
  static const std::vector<Utterance> price = {
      split_tokens("in a * price range"), split_tokens("a *"), split_tokens("*")};
  switch (s) {
    case Slot::cuisine: return cuisine;
    case Slot::location: return location;
    case Slot::party_size: return party;
    case Slot::price_range: return price;
  }
  throw DataError("bad slot");
}

std::vector<SlotPhrase> find_slot_phrases(const Utterance& u, const SlotCatalog& catalog) {
  std::vector<SlotPhrase> out;
  for (size_t i = 0; i < u.size(); ++i) {
    auto slot = catalog.slot_of(u[i]);
    if (!slot) continue;
    for (const auto& pattern : correction_patterns(*slot)) {
      auto star = std::find(pattern.begin(), pattern.end(), "*");
      size_t star_pos = size_t(star - pattern.begin());
      if (star_pos > i || i - star_pos + pattern.size() > u.size()) continue;
      size_t begin = i - star_pos;
      bool match = true;
      for (size_t k = 0; k < pattern.size(); ++k) {
        if (pattern[k] == "*") continue;
        if (u[begin + k] != pattern[k]) { match = false; break; }
      }
      if (match)
        out.push_back(SlotPhrase{*slot, begin, pattern.size(), pattern, u[i]});
    }
  }
  return out;
}

AnnotatedUtterance insert_hesitation(const Utterance& u, Rng& rng,
                                     const DisfluencyConfig& cfg) {
  if (u.size() < 2) return AnnotatedUtterance::fluent(u);
  AnnotatedUtterance a;
  a.kind = DisfluencyKind::hesitation;
  const size_t boundary = size_t(rng.uniform_int(1, int(u.size()) - 1));
  const std::string& filler = rng.pick(cfg.filler_lexicon);
  for (size_t i = 0; i < u.size(); ++i) {
    if (i == boundary) {
      a.tokens.push_back(filler);
      a.labels.push_back(kEditingTerm);
    }
    a.tokens.push_back(u[i]);
    a.labels.push_back(kOther);
  }
  return a;
}

AnnotatedUtterance insert_restart(const Utterance& u, Rng& rng,
                                  const DisfluencyConfig& cfg) {
  AnnotatedUtterance a;
  a.kind = DisfluencyKind::restart;
  const size_t prefix = size_t(rng.uniform_int(1, int(std::min<size_t>(3, u.size()))));
  for (size_t i = 0; i < prefix; ++i) {
    a.tokens.push_back(u[i]);
    a.labels.push_back(kReparandum);
  }
  if (rng.bernoulli(cfg.et_rate())) {
    const Utterance& et = rng.pick(cfg.restart_et_lexicon);
    for (const auto& tok : et) {
      a.tokens.push_back(tok);
      a.labels.push_back(kEditingTerm);
    }
  }
  for (size_t i = 0; i < u.size(); ++i) {
    a.tokens.push_back(u[i]);
    a.labels.push_back(i < prefix ? kRepair : kOther);
  }
  return a;
}

AnnotatedUtterance insert_correction(const Utterance& u, const SlotPhrase& phrase,
                                     const std::string& wrong_value, Rng& rng,
                                     const DisfluencyConfig& cfg) {
  if (phrase.begin + phrase.length > u.size())
    throw DataError("slot phrase out of range");
  if (wrong_value == phrase.value)
    throw DataError("correction requires a different wrong value");
  AnnotatedUtterance a;
  a.kind = DisfluencyKind::correction;
  a.corrected_slot = phrase.slot;
  for (size_t i = 0; i < phrase.begin; ++i) {
    a.tokens.push_back(u[i]);
    a.labels.push_back(kOther);
  }
  for (const auto& tok : instantiate_template(phrase.pattern, wrong_value)) {
    a.tokens.push_back(tok);
    a.labels.push_back(kReparandum);
  }
  if (rng.bernoulli(cfg.et_rate())) {
    const Utterance& et = rng.pick(cfg.et_lexicon);
    for (const auto& tok : et) {
      a.tokens.push_back(tok);
      a.labels.push_back(kEditingTerm);
    }
  }
  for (size_t i = 0; i < phrase.length; ++i) {
    a.tokens.push_back(u[phrase.begin + i]);
    a.labels.push_back(kRepair);
  }
  for (size_t i = phrase.begin + phrase.length; i < u.size(); ++i) {
    a.tokens.push_back(u[i]);
    a.labels.push_back(kOther);
  }
  return a;
}

AnnotatedDialogue augment_dialogue(const Dialogue& d, const DisfluencyConfig& cfg,
                                   Rng& rng, const SlotCatalog& catalog) {
  AnnotatedDialogue out;
  out.dialogue = d;
  for (size_t ti = 0; ti < d.turns.size(); ++ti) {
    const Utterance& u = d.turns[ti].user;
    const bool silence = u.size() == 1 && u[0] == kSilenceToken;
    AnnotatedUtterance a = AnnotatedUtterance::fluent(u);
    if (!silence) {
      const double r = rng.uniform_real();
      if (r < cfg.p_hesitation) {
        a = insert_hesitation(u, rng, cfg);
      } else if (r < cfg.p_hesitation + cfg.p_restart) {
        a = insert_restart(u, rng, cfg);
      } else if (r < cfg.p_hesitation + cfg.p_restart + cfg.p_correction) {
        auto phrases = find_slot_phrases(u, catalog);
        if (phrases.empty()) {
          // Slot-free turn: the correction draw degrades to a hesitation.
          a = insert_hesitation(u, rng, cfg);
        } else {
          const SlotPhrase& phrase = rng.pick(phrases);
          std::vector<std::string> wrong;
          for (const auto& v : catalog.values(phrase.slot, false))
            if (v != phrase.value) wrong.push_back(v);
          a = insert_correction(u, phrase, rng.pick(wrong), rng, cfg);
        }
      }
    }
    a.check_well_formed();
    out.dialogue.turns[ti].user = a.tokens;
    out.user_turns.push_back(std::move(a));
  }
  return out;
}

AnnotatedCorpus augment_corpus(const Corpus& corpus, const DisfluencyConfig& cfg,
                               uint64_t seed, const SlotCatalog& catalog) {
  AnnotatedCorpus out;
  out.split = corpus.split;
  out.dialogues.reserve(corpus.dialogues.size());
  for (size_t i = 0; i < corpus.dialogues.size(); ++i) {
    Rng rng(derive_seed(seed, 0x61756721ull, i));
    out.dialogues.push_back(augment_dialogue(corpus.dialogues[i], cfg, rng, catalog));
  }
  return out;
}

Corpus AnnotatedCorpus::to_corpus() const {
  Corpus c;
  c.split = split;
  c.dialogues.reserve(dialogues.size());
  for (const auto& d : dialogues) c.dialogues.push_back(d.dialogue);
  return c;
}

Utterance strip_disfluencies(const AnnotatedUtterance& a) {
  if (a.tokens.size() != a.labels.size()) throw DataError("annotation length mismatch");
  Utterance out;
  for (size_t i = 0; i < a.tokens.size(); ++i)
    if (a.labels[i] == kOther || a.labels[i] == kRepair) out.push_back(a.tokens[i]);
  return out;
}

Dialogue strip_dialogue(const AnnotatedDialogue& d) {
  Dialogue out = d.dialogue;
  for (size_t i = 0; i < out.turns.size(); ++i)
    out.turns[i].user = strip_disfluencies(d.user_turns[i]);
  return out;
}

std::vector<int> token_labels(const AnnotatedDialogue& d) {
  std::vector<int> out;
  const size_t n = d.dialogue.turns.size();
  for (size_t i = 0; i < n; ++i) {
    out.push_back(kOther);  // <u>
    const auto& a = d.user_turns[i];
    if (a.tokens.size() != d.dialogue.turns[i].user.size())
      throw DataError("annotation out of sync with dialogue turn");
    out.insert(out.end(), a.labels.begin(), a.labels.end());
    if (i + 1 < n) {
      out.push_back(kOther);  // <s>
      out.insert(out.end(), d.dialogue.turns[i].system.size(), kOther);
    }
  }
  return out;
}

std::string serialize_annotations(const AnnotatedCorpus& corpus) {
  std::string out;
  for (const auto& d : corpus.dialogues) {
    for (const auto& a : d.user_turns) {
      for (size_t i = 0; i < a.labels.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(a.labels[i]);
      }
      out += "\t-\n";
    }
    out += '\n';
  }
  return out;
}

namespace {

DisfluencyKind infer_kind(const AnnotatedUtterance& a) {
  auto rm = label_spans(a.labels, kReparandum);
  auto et = label_spans(a.labels, kEditingTerm);
  auto rp = label_spans(a.labels, kRepair);
  if (rm.empty() && rp.empty())
    return et.empty() ? DisfluencyKind::none : DisfluencyKind::hesitation;
  if (rm.size() == 1 && rp.size() == 1) {
    Utterance rm_tokens(a.tokens.begin() + long(rm[0].first),
                        a.tokens.begin() + long(rm[0].second));
    Utterance rp_tokens(a.tokens.begin() + long(rp[0].first),
                        a.tokens.begin() + long(rp[0].second));
    return rm_tokens == rp_tokens ? DisfluencyKind::restart
                                  : DisfluencyKind::correction;
  }
  throw DataError("cannot infer disfluency kind from labels");
}

}  // namespace

AnnotatedCorpus parse_annotations(const Corpus& corpus, const std::string& sidecar) {
  AnnotatedCorpus out;
  out.split = corpus.split;
  std::istringstream in(sidecar);
  std::string line;
  size_t line_no = 0;
  size_t di = 0;
  AnnotatedDialogue current;
  size_t ti = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      if (ti > 0) {
        if (di >= corpus.dialogues.size())
          throw ParseError("more annotation blocks than dialogues", line_no);
        if (ti != corpus.dialogues[di].turns.size())
          throw ParseError("annotation block does not cover all turns", line_no);
        current.dialogue = corpus.dialogues[di];
        out.dialogues.push_back(std::move(current));
        current = AnnotatedDialogue{};
        ++di;
        ti = 0;
      }
      continue;
    }
    size_t tab = line.find('\t');
    std::string label_part = tab == std::string::npos ? line : line.substr(0, tab);
    if (di >= corpus.dialogues.size())
      throw ParseError("more annotation lines than dialogue lines", line_no);
    if (ti >= corpus.dialogues[di].turns.size())
      throw ParseError("more annotation lines than turns in dialogue", line_no);
    const Utterance& tokens = corpus.dialogues[di].turns[ti].user;
    AnnotatedUtterance a;
    a.tokens = tokens;
    for (const auto& tok : split_tokens(label_part)) {
      try {
        a.labels.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ParseError("non-numeric label '" + tok + "'", line_no);
      }
    }
    if (a.labels.size() != tokens.size())
      throw ParseError("label count does not match token count", line_no);
    a.kind = infer_kind(a);
    if (a.kind == DisfluencyKind::correction) {
      auto rp = label_spans(a.labels, kRepair);
      SlotCatalog catalog = SlotCatalog::defaults();
      for (size_t i = rp[0].first; i < rp[0].second; ++i)
        if (auto s = catalog.slot_of(a.tokens[i])) { a.corrected_slot = s; break; }
    }
    a.check_well_formed();
    current.user_turns.push_back(std::move(a));
    ++ti;
  }
  if (ti > 0) {
    if (di >= corpus.dialogues.size())
      throw ParseError("more annotation blocks than dialogues", line_no);
    current.dialogue = corpus.dialogues[di];
    out.dialogues.push_back(std::move(current));
    ++di;
  }
  if (di != corpus.dialogues.size())
    throw ParseError("fewer annotation blocks than dialogues", line_no);
  return out;
}

}  // namespace babilab
