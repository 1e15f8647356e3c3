#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "babilab/rng.hpp"

namespace babilab {

using Utterance = std::vector<std::string>;

std::string join_tokens(const Utterance& u);
Utterance split_tokens(const std::string& line);

// Structural problem in an input file (bad line, missing API call, ...).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  size_t line() const { return line_; }

 private:
  size_t line_;
};

class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Slot { cuisine = 0, location = 1, party_size = 2, price_range = 3 };
constexpr std::array<Slot, 4> kAllSlots = {Slot::cuisine, Slot::location,
                                           Slot::party_size, Slot::price_range};
const char* slot_name(Slot s);

struct SlotCatalog {
  std::vector<std::string> cuisines_in, cuisines_oov;
  std::vector<std::string> locations_in, locations_oov;
  std::vector<std::string> price_ranges;
  std::vector<std::string> party_sizes;

  static SlotCatalog defaults();
  void validate() const;  // throws DataError on an invariant violation

  const std::vector<std::string>& values(Slot s, bool oov) const;
  // All values of a slot, in-vocabulary first (used for classifier class sets).
  std::vector<std::string> all_values(Slot s) const;
  // Slot owning this token, if any.
  std::optional<Slot> slot_of(const std::string& token) const;
  bool is_oov_value(const std::string& token) const;
};

struct UserGoal {
  std::string cuisine, location, party_size, price_range;
  bool oov = false;

  const std::string& value(Slot s) const;
  bool operator==(const UserGoal&) const = default;
};

struct Turn {
  int index = 0;  // 1-based within the dialogue
  Utterance user;
  Utterance system;

  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::vector<Turn> turns;
  UserGoal goal;

  const Utterance& api_call() const { return turns.back().system; }
  bool operator==(const Dialogue&) const = default;
};

enum class Split { train, dev, test, test_oov };
const char* split_name(Split s);

struct Corpus {
  std::vector<Dialogue> dialogues;
  Split split = Split::train;

  bool operator==(const Corpus&) const = default;
};

// The 7 canonical system utterances (API calls excluded).
extern const char* const kSysGreeting;
extern const char* const kSysOnIt;
extern const char* const kSysAskCuisine;
extern const char* const kSysAskLocation;
extern const char* const kSysAskParty;
extern const char* const kSysAskPrice;
extern const char* const kSysOk;
extern const char* const kApiCallToken;
extern const char* const kSilenceToken;

// Canonical order in which the system walks through a dialogue; position of
// an utterance in this list is its "canonical index" for the error taxonomy.
const std::vector<Utterance>& canonical_system_utterances();
// Index in canonical_system_utterances(), or nullopt (API calls and unknown).
std::optional<int> canonical_index(const Utterance& system_utterance);
const Utterance& slot_question(Slot s);

struct TemplateSet {
  std::vector<Utterance> greetings;
  std::vector<Utterance> request_frames;
  // Answer templates per slot; "*" marks the value position.
  std::array<std::vector<Utterance>, 4> answers;
  // Phrase templates used when a slot is mentioned inside the opening request.
  std::array<std::vector<Utterance>, 4> request_phrases;

  static TemplateSet defaults();
};

Utterance instantiate_template(const Utterance& tmpl, const std::string& value);

// Structure of one dialogue; phrasing choices are drawn separately so tests
// can pin the shape.
struct DialoguePlan {
  bool greeting_turn = true;
  std::array<bool, 4> upfront = {false, false, false, false};  // indexed by Slot
};

UserGoal sample_goal(Rng& rng, const SlotCatalog& catalog, bool oov);
Dialogue realize_dialogue(const UserGoal& goal, const DialoguePlan& plan,
                          const TemplateSet& templates, Rng& rng);
Dialogue generate_dialogue(const UserGoal& goal, Rng& rng, const TemplateSet& templates);

struct GenConfig {
  size_t train_size = 1000, dev_size = 1000, test_size = 1000, test_oov_size = 1000;
  uint64_t seed = 1;
  SlotCatalog catalog = SlotCatalog::defaults();
  TemplateSet templates = TemplateSet::defaults();
  // Probability of a separate greeting exchange opening the dialogue.
  double p_greeting = 0.9;
  // Probability that the opening request volunteers any slots (location
  // and/or party size); the remaining slots are elicited by the system's
  // questions.
  double p_upfront = 0.75;
};

struct CorpusBundle {
  Corpus train, dev, test, test_oov;
};

CorpusBundle generate_corpus(const GenConfig& config);

std::string serialize_babi(const Corpus& corpus);
Corpus parse_babi(const std::string& text, Split split = Split::train,
                  const SlotCatalog& catalog = SlotCatalog::defaults());

struct Vocabulary {
  // Reserved ids; <pad> must stay 0.
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kEos = 2;
  static constexpr int kSilence = 3;
  static constexpr int kUserMark = 4;
  static constexpr int kSysMark = 5;
  static constexpr int kNumReserved = 6;

  std::vector<std::string> tokens;        // index = id
  std::map<std::string, int> ids;

  int size() const { return static_cast<int>(tokens.size()); }
  int id(const std::string& token) const;          // <unk> id for unknowns
  const std::string& token(int id) const;
  bool contains(const std::string& token) const { return ids.count(token) > 0; }

  std::vector<int> encode(const Utterance& u) const;
  Utterance decode(const std::vector<int>& ids) const;
};

Vocabulary build_vocabulary(const Corpus& corpus);

struct CorpusStats {
  size_t dialogue_count = 0;
  size_t turn_count = 0;
  size_t user_token_count = 0;        // non-silence user utterances
  size_t user_utterance_count = 0;    // non-silence user utterances
  size_t silence_count = 0;
  double mean_user_utterance_len = 0.0;
  double mean_system_utterances_per_dialogue = 0.0;
  std::vector<std::string> distinct_system_utterances;  // non-API
  std::vector<std::string> distinct_api_calls;

  std::string to_tsv() const;
};

CorpusStats corpus_stats(const Corpus& corpus);

// Catalog + template set round-trip through a human-editable config file.
std::string serialize_catalog_config(const SlotCatalog& catalog, const TemplateSet& templates);
void parse_catalog_config(const std::string& text, SlotCatalog& catalog, TemplateSet& templates);

std::string read_file(const std::string& path);
// Atomic write: temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace babilab
