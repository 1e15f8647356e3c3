#pragma once

#include <optional>
#include <string>
#include <vector>

#include "babilab/corpus.hpp"
#include "babilab/rng.hpp"

namespace babilab {

// Per-token annotation labels.
enum Label : int {
  kOther = 0,
  kReparandum = 1,
  kEditingTerm = 2,
  kRepair = 3,
};

enum class DisfluencyKind { none, hesitation, restart, correction };

enum class EtPolicy { noET, realET, fullET };
const char* et_policy_name(EtPolicy p);
std::optional<EtPolicy> et_policy_from_name(const std::string& name);

struct DisfluencyConfig {
  double p_hesitation = 0.21;
  double p_restart = 0.40;
  double p_correction = 0.05;
  EtPolicy et_policy = EtPolicy::fullET;
  std::vector<std::string> filler_lexicon = {"uhm", "uh"};
  std::vector<Utterance> et_lexicon = {
      {"sorry"}, {"no"}, {"oh", "no"}, {"no", "sorry"}, {"uhm", "sorry"}};
  std::vector<Utterance> restart_et_lexicon = {{"uhm", "yeah"}};

  double et_rate() const;  // noET 0.0, realET 0.20, fullET 1.0

  static DisfluencyConfig with_policy(EtPolicy p) {
    DisfluencyConfig c;
    c.et_policy = p;
    return c;
  }
};

struct AnnotatedUtterance {
  Utterance tokens;
  std::vector<int> labels;  // same length as tokens
  DisfluencyKind kind = DisfluencyKind::none;
  std::optional<Slot> corrected_slot;

  static AnnotatedUtterance fluent(const Utterance& u);
  // Throws DataError when the label structure violates the invariants
  // (length mismatch, bad span ordering, restart repair != reparandum, ...).
  void check_well_formed() const;
};

struct AnnotatedDialogue {
  std::vector<AnnotatedUtterance> user_turns;  // parallel to dialogue.turns
  Dialogue dialogue;                           // user turns hold disfluent tokens
};

struct AnnotatedCorpus {
  std::vector<AnnotatedDialogue> dialogues;
  Split split = Split::train;

  Corpus to_corpus() const;
};

// A slot-value phrase located inside an utterance, with the pattern that
// matched it (pattern tokens with "*" at the value position).
struct SlotPhrase {
  Slot slot;
  size_t begin = 0;
  size_t length = 0;
  Utterance pattern;
  std::string value;
};

// Token patterns recognised as correctable slot phrases.
const std::vector<Utterance>& correction_patterns(Slot s);
std::vector<SlotPhrase> find_slot_phrases(const Utterance& u, const SlotCatalog& catalog);

AnnotatedUtterance insert_hesitation(const Utterance& u, Rng& rng,
                                     const DisfluencyConfig& cfg);
AnnotatedUtterance insert_restart(const Utterance& u, Rng& rng,
                                  const DisfluencyConfig& cfg);
// `phrase` selects the span to correct; the reparandum is the phrase pattern
// re-instantiated with `wrong_value`.
AnnotatedUtterance insert_correction(const Utterance& u, const SlotPhrase& phrase,
                                     const std::string& wrong_value, Rng& rng,
                                     const DisfluencyConfig& cfg);

AnnotatedDialogue augment_dialogue(const Dialogue& d, const DisfluencyConfig& cfg,
                                   Rng& rng, const SlotCatalog& catalog = SlotCatalog::defaults());
AnnotatedCorpus augment_corpus(const Corpus& corpus, const DisfluencyConfig& cfg,
                               uint64_t seed,
                               const SlotCatalog& catalog = SlotCatalog::defaults());

Utterance strip_disfluencies(const AnnotatedUtterance& a);
// De-disfluenced dialogue; must equal the augmentation source.
Dialogue strip_dialogue(const AnnotatedDialogue& d);

// Labels aligned with the encoder input stream of the dialogue's final
// (longest) history: <u>/<s> markers and system tokens are 0.
std::vector<int> token_labels(const AnnotatedDialogue& d);

// Sidecar: one line per corpus line, user labels space-separated, system "-".
std::string serialize_annotations(const AnnotatedCorpus& corpus);
// Re-attach sidecar labels to a parsed corpus.
AnnotatedCorpus parse_annotations(const Corpus& corpus, const std::string& sidecar);

}  // namespace babilab
