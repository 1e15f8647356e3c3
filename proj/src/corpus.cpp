#include "babilab/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace babilab {

const char* const kSysGreeting = "hello what can i help you with today";
const char* const kSysOnIt = "i'm on it";
const char* const kSysAskCuisine = "any preference on a type of cuisine";
const char* const kSysAskLocation = "where should it be";
const char* const kSysAskParty = "how many people would be in your party";
const char* const kSysAskPrice = "which price range are you looking for";
const char* const kSysOk = "ok let me look into some options for you";
const char* const kApiCallToken = "api_call";
const char* const kSilenceToken = "<SILENCE>";

std::string join_tokens(const Utterance& u) {
  std::string out;
  for (size_t i = 0; i < u.size(); ++i) {
    if (i) out += ' ';
    out += u[i];
  }
  return out;
}

Utterance split_tokens(const std::string& line) {
  Utterance out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

const char* slot_name(Slot s) {
  switch (s) {
    case Slot::cuisine: return "cuisine";
    case Slot::location: return "location";
    case Slot::party_size: return "party_size";
    case Slot::price_range: return "price_range";
  }
  return "?";
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
    case Split::test_oov: return "test_oov";
  }
  return "?";
}

SlotCatalog SlotCatalog::defaults() {
  SlotCatalog c;
  c.cuisines_in = {"british", "french", "indian", "italian", "spanish"};
  c.cuisines_oov = {"cantonese", "japanese", "korean", "thai", "vietnamese"};
  c.locations_in = {"bombay", "london", "madrid", "paris", "rome"};
  c.locations_oov = {"bangkok", "beijing", "hanoi", "seoul", "tokyo"};
  c.price_ranges = {"cheap", "moderate", "expensive"};
  c.party_sizes = {"two", "four", "six", "eight"};
  return c;
}

void SlotCatalog::validate() const {
  auto disjoint_union = [](const std::vector<std::string>& a,
                           const std::vector<std::string>& b) {
    std::set<std::string> u(a.begin(), a.end());
    for (const auto& t : b)
      if (!u.insert(t).second) return size_t(0);
    return u.size();
  };
  if (disjoint_union(cuisines_in, cuisines_oov) != 10)
    throw DataError("catalog: cuisines must be 5 in-vocabulary + 5 OOV, disjoint");
  if (disjoint_union(locations_in, locations_oov) != 10)
    throw DataError("catalog: locations must be 5 in-vocabulary + 5 OOV, disjoint");
  if (price_ranges.size() != 3) throw DataError("catalog: need 3 price ranges");
  if (party_sizes.size() != 4) throw DataError("catalog: need 4 party sizes");
}

const std::vector<std::string>& SlotCatalog::values(Slot s, bool oov) const {
  switch (s) {
    case Slot::cuisine: return oov ? cuisines_oov : cuisines_in;
    case Slot::location: return oov ? locations_oov : locations_in;
    case Slot::party_size: return party_sizes;
    case Slot::price_range: return price_ranges;
  }
  throw DataError("bad slot");
}

std::vector<std::string> SlotCatalog::all_values(Slot s) const {
  std::vector<std::string> out = values(s, false);
  if (s == Slot::cuisine || s == Slot::location) {
    const auto& oov = values(s, true);
    out.insert(out.end(), oov.begin(), oov.end());
  }
  return out;
}

std::optional<Slot> SlotCatalog::slot_of(const std::string& token) const {
  for (Slot s : kAllSlots) {
    const auto vals = all_values(s);
    if (std::find(vals.begin(), vals.end(), token) != vals.end()) return s;
  }
  return std::nullopt;
}

bool SlotCatalog::is_oov_value(const std::string& token) const {
  auto in = [&](const std::vector<std::string>& v) {
    return std::find(v.begin(), v.end(), token) != v.end();
  };
  return in(cuisines_oov) || in(locations_oov);
}

const std::string& UserGoal::value(Slot s) const {
  switch (s) {
    case Slot::cuisine: return cuisine;
    case Slot::location: return location;
    case Slot::party_size: return party_size;
    case Slot::price_range: return price_range;
  }
  throw DataError("bad slot");
}

const std::vector<Utterance>& canonical_system_utterances() {
  static const std::vector<Utterance> order = {
      split_tokens(kSysGreeting),   split_tokens(kSysOnIt),
      split_tokens(kSysAskCuisine), split_tokens(kSysAskLocation),
      split_tokens(kSysAskParty),   split_tokens(kSysAskPrice),
      split_tokens(kSysOk)};
  return order;
}

std::optional<int> canonical_index(const Utterance& system_utterance) {
  const auto& order = canonical_system_utterances();
  for (size_t i = 0; i < order.size(); ++i)
    if (order[i] == system_utterance) return static_cast<int>(i);
  return std::nullopt;
}

const Utterance& slot_question(Slot s) {
  const auto& order = canonical_system_utterances();
  switch (s) {
    case Slot::cuisine: return order[2];
    case Slot::location: return order[3];
    case Slot::party_size: return order[4];
    case Slot::price_range: return order[5];
  }
  throw DataError("bad slot");
}

TemplateSet TemplateSet::defaults() {
  TemplateSet t;
  t.greetings = {split_tokens("good morning"), split_tokens("hello there"),
                 split_tokens("hi there")};
  t.request_frames = {split_tokens("hello could you please help me to book a table"),
                      split_tokens("i would like to ask you to book a table"),
                      split_tokens("may i ask you to arrange a table for us"),
                      split_tokens("we were hoping you could find us a nice table")};
  t.answers[size_t(Slot::cuisine)] = {split_tokens("maybe *"),
                                      split_tokens("with * cuisine")};
  t.answers[size_t(Slot::location)] = {split_tokens("in *"),
                                       split_tokens("somewhere in *")};
  t.answers[size_t(Slot::party_size)] = {split_tokens("for *"),
                                         split_tokens("for * people")};
  t.answers[size_t(Slot::price_range)] = {split_tokens("something *"),
                                          split_tokens("in a * price range")};
  t.request_phrases[size_t(Slot::cuisine)] = {split_tokens("with * cuisine")};
  t.request_phrases[size_t(Slot::location)] = {split_tokens("in *")};
  t.request_phrases[size_t(Slot::party_size)] = {split_tokens("for * people")};
  t.request_phrases[size_t(Slot::price_range)] = {split_tokens("in a * price range")};
  return t;
}

Utterance instantiate_template(const Utterance& tmpl, const std::string& value) {
  Utterance out;
  for (const auto& tok : tmpl) out.push_back(tok == "*" ? value : tok);
  return out;
}

UserGoal sample_goal(Rng& rng, const SlotCatalog& catalog, bool oov) {
  UserGoal g;
  g.cuisine = rng.pick(catalog.values(Slot::cuisine, oov));
  g.location = rng.pick(catalog.values(Slot::location, oov));
  g.party_size = rng.pick(catalog.party_sizes);
  g.price_range = rng.pick(catalog.price_ranges);
  g.oov = oov;
  return g;
}

Dialogue realize_dialogue(const UserGoal& goal, const DialoguePlan& plan,
                          const TemplateSet& templates, Rng& rng) {
  Dialogue d;
  d.goal = goal;
  auto add_turn = [&](Utterance user, Utterance system) {
    Turn t;
    t.index = static_cast<int>(d.turns.size()) + 1;
    t.user = std::move(user);
    t.system = std::move(system);
    d.turns.push_back(std::move(t));
  };
  const Utterance silence = {kSilenceToken};

  if (plan.greeting_turn)
    add_turn(rng.pick(templates.greetings), split_tokens(kSysGreeting));

  // Opening request: frame + phrase per upfront slot, fixed surface order.
  Utterance request = rng.pick(templates.request_frames);
  const std::array<Slot, 4> surface_order = {Slot::party_size, Slot::location,
                                             Slot::cuisine, Slot::price_range};
  for (Slot s : surface_order) {
    if (!plan.upfront[size_t(s)]) continue;
    Utterance phrase =
        instantiate_template(rng.pick(templates.request_phrases[size_t(s)]), goal.value(s));
    request.insert(request.end(), phrase.begin(), phrase.end());
  }
  add_turn(std::move(request), split_tokens(kSysOnIt));

  // Missing slots requested in canonical order.
  std::vector<Slot> missing;
  for (Slot s : kAllSlots)
    if (!plan.upfront[size_t(s)]) missing.push_back(s);

  if (missing.empty()) {
    add_turn(silence, split_tokens(kSysOk));
  } else {
    add_turn(silence, slot_question(missing[0]));
    for (size_t i = 0; i < missing.size(); ++i) {
      Utterance answer = instantiate_template(
          rng.pick(templates.answers[size_t(missing[i])]), goal.value(missing[i]));
      Utterance reply = (i + 1 < missing.size()) ? slot_question(missing[i + 1])
                                                 : split_tokens(kSysOk);
      add_turn(std::move(answer), std::move(reply));
    }
  }

  Utterance api = {kApiCallToken, goal.cuisine, goal.location, goal.party_size,
                   goal.price_range};
  add_turn(silence, std::move(api));
  return d;
}

// Slot a speaker volunteers inside the opening request; at most one, so most
// slot values are elicited by the system's questions.
static void pick_upfront_slots(Rng& rng, DialoguePlan& plan) {
  plan.upfront[size_t(kAllSlots[size_t(rng.uniform_int(0, 3))])] = true;
}

Dialogue generate_dialogue(const UserGoal& goal, Rng& rng, const TemplateSet& templates) {
  DialoguePlan plan;
  plan.greeting_turn = rng.bernoulli(0.9);
  if (rng.bernoulli(0.75)) pick_upfront_slots(rng, plan);
  return realize_dialogue(goal, plan, templates, rng);
}

namespace {

Corpus generate_split(const GenConfig& cfg, Split split, size_t size, uint64_t stream) {
  Corpus corpus;
  corpus.split = split;
  corpus.dialogues.reserve(size);
  const bool oov = split == Split::test_oov;
  for (size_t i = 0; i < size; ++i) {
    Rng rng(derive_seed(cfg.seed, stream, i));
    UserGoal goal = sample_goal(rng, cfg.catalog, oov);
    DialoguePlan plan;
    plan.greeting_turn = rng.bernoulli(cfg.p_greeting);
    if (rng.bernoulli(cfg.p_upfront)) pick_upfront_slots(rng, plan);
    corpus.dialogues.push_back(realize_dialogue(goal, plan, cfg.templates, rng));
  }
  return corpus;
}

}  // namespace

CorpusBundle generate_corpus(const GenConfig& config) {
  config.catalog.validate();
  CorpusBundle bundle;
  bundle.train = generate_split(config, Split::train, config.train_size, 0);
  bundle.dev = generate_split(config, Split::dev, config.dev_size, 1);
  bundle.test = generate_split(config, Split::test, config.test_size, 2);
  bundle.test_oov = generate_split(config, Split::test_oov, config.test_oov_size, 3);
  return bundle;
}

std::string serialize_babi(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.dialogues) {
    for (const auto& t : d.turns) {
      out += std::to_string(t.index);
      out += ' ';
      out += join_tokens(t.user);
      out += '\t';
      out += join_tokens(t.system);
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

Corpus parse_babi(const std::string& text, Split split, const SlotCatalog& catalog) {
  Corpus corpus;
  corpus.split = split;
  Dialogue current;
  size_t line_no = 0;
  int prev_index = 0;

  auto close_dialogue = [&]() {
    if (current.turns.empty()) return;
    const Utterance& api = current.turns.back().system;
    if (api.size() != 5 || api[0] != kApiCallToken)
      throw ParseError("dialogue does not end with an API call", line_no);
    current.goal.cuisine = api[1];
    current.goal.location = api[2];
    current.goal.party_size = api[3];
    current.goal.price_range = api[4];
    current.goal.oov =
        catalog.is_oov_value(api[1]) || catalog.is_oov_value(api[2]);
    corpus.dialogues.push_back(std::move(current));
    current = Dialogue{};
    prev_index = 0;
  };

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      close_dialogue();
      continue;
    }
    size_t tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("missing tab separator", line_no);
    size_t space = line.find(' ');
    if (space == std::string::npos || space > tab)
      throw ParseError("missing turn index", line_no);
    const std::string index_str = line.substr(0, space);
    int index = 0;
    try {
      size_t pos = 0;
      index = std::stoi(index_str, &pos);
      if (pos != index_str.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ParseError("non-numeric turn index '" + index_str + "'", line_no);
    }
    if (index != prev_index + 1)
      throw ParseError("non-monotone turn index " + std::to_string(index), line_no);
    prev_index = index;

    Turn t;
    t.index = index;
    t.user = split_tokens(line.substr(space + 1, tab - space - 1));
    t.system = split_tokens(line.substr(tab + 1));
    current.turns.push_back(std::move(t));
  }
  close_dialogue();
  return corpus;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids.find(token);
  return it == ids.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw DataError("token id out of range");
  return tokens[static_cast<size_t>(id)];
}

std::vector<int> Vocabulary::encode(const Utterance& u) const {
  std::vector<int> out;
  out.reserve(u.size());
  for (const auto& tok : u) out.push_back(id(tok));
  return out;
}

Utterance Vocabulary::decode(const std::vector<int>& id_seq) const {
  Utterance out;
  out.reserve(id_seq.size());
  for (int i : id_seq) out.push_back(token(i));
  return out;
}

Vocabulary build_vocabulary(const Corpus& corpus) {
  if (corpus.dialogues.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  Vocabulary v;
  v.tokens = {"<pad>", "<unk>", "<eos>", kSilenceToken, "<u>", "<s>"};
  for (int i = 0; i < Vocabulary::kNumReserved; ++i) v.ids[v.tokens[size_t(i)]] = i;

  std::map<std::string, size_t> freq;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns) {
      for (const auto& tok : t.user) ++freq[tok];
      for (const auto& tok : t.system) ++freq[tok];
    }
  std::vector<std::pair<std::string, size_t>> entries;
  for (const auto& [tok, n] : freq)
    if (!v.ids.count(tok)) entries.emplace_back(tok, n);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tok, n] : entries) {
    v.ids[tok] = v.size();
    v.tokens.push_back(tok);
  }
  return v;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  std::set<std::string> sys_utts, api_calls;
  size_t system_utterance_total = 0;
  for (const auto& d : corpus.dialogues) {
    ++s.dialogue_count;
    for (const auto& t : d.turns) {
      ++s.turn_count;
      ++system_utterance_total;
      if (t.user.size() == 1 && t.user[0] == kSilenceToken) {
        ++s.silence_count;
      } else {
        ++s.user_utterance_count;
        s.user_token_count += t.user.size();
      }
      if (!t.system.empty() && t.system[0] == kApiCallToken)
        api_calls.insert(join_tokens(t.system));
      else
        sys_utts.insert(join_tokens(t.system));
    }
  }
  if (s.user_utterance_count)
    s.mean_user_utterance_len =
        double(s.user_token_count) / double(s.user_utterance_count);
  if (s.dialogue_count)
    s.mean_system_utterances_per_dialogue =
        double(system_utterance_total) / double(s.dialogue_count);
  s.distinct_system_utterances.assign(sys_utts.begin(), sys_utts.end());
  s.distinct_api_calls.assign(api_calls.begin(), api_calls.end());
  return s;
}

std::string CorpusStats::to_tsv() const {
  std::ostringstream out;
  out << "dialogues\t" << dialogue_count << '\n'
      << "turns\t" << turn_count << '\n'
      << "user_utterances\t" << user_utterance_count << '\n'
      << "silence_turns\t" << silence_count << '\n'
      << "mean_user_utterance_len\t" << mean_user_utterance_len << '\n'
      << "mean_system_utterances_per_dialogue\t" << mean_system_utterances_per_dialogue << '\n'
      << "distinct_system_utterances\t" << distinct_system_utterances.size() << '\n'
      << "distinct_api_calls\t" << distinct_api_calls.size() << '\n';
  return out.str();
}

namespace {

std::string join_template_list(const std::vector<Utterance>& list) {
  std::string out;
  for (size_t i = 0; i < list.size(); ++i) {
    if (i) out += " | ";
    out += join_tokens(list[i]);
  }
  return out;
}

std::vector<Utterance> parse_template_list(const std::string& value) {
  std::vector<Utterance> out;
  size_t start = 0;
  while (true) {
    size_t bar = value.find('|', start);
    std::string part = value.substr(start, bar == std::string::npos ? bar : bar - start);
    Utterance u = split_tokens(part);
    if (!u.empty()) out.push_back(std::move(u));
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
  return out;
}

}  // namespace

std::string serialize_catalog_config(const SlotCatalog& c, const TemplateSet& t) {
  std::ostringstream out;
  out << "[catalog]\n";
  auto kv = [&](const char* k, const std::vector<std::string>& v) {
    out << k << " = " << join_tokens(v) << '\n';
  };
  kv("cuisines_in", c.cuisines_in);
  kv("cuisines_oov", c.cuisines_oov);
  kv("locations_in", c.locations_in);
  kv("locations_oov", c.locations_oov);
  kv("price_ranges", c.price_ranges);
  kv("party_sizes", c.party_sizes);
  out << "\n[templates]\n";
  out << "greetings = " << join_template_list(t.greetings) << '\n';
  out << "request_frames = " << join_template_list(t.request_frames) << '\n';
  for (Slot s : kAllSlots)
    out << "answers." << slot_name(s) << " = "
        << join_template_list(t.answers[size_t(s)]) << '\n';
  for (Slot s : kAllSlots)
    out << "request_phrases." << slot_name(s) << " = "
        << join_template_list(t.request_phrases[size_t(s)]) << '\n';
  return out.str();
}

void parse_catalog_config(const std::string& text, SlotCatalog& catalog, TemplateSet& templates) {
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  auto slot_by_name = [](const std::string& n) -> std::optional<Slot> {
    for (Slot s : kAllSlots)
      if (n == slot_name(s)) return s;
    return std::nullopt;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    std::string key = line.substr(0, eq);
    key.erase(std::remove(key.begin(), key.end(), ' '), key.end());
    std::string value = line.substr(eq + 1);
    if (key == "cuisines_in") catalog.cuisines_in = split_tokens(value);
    else if (key == "cuisines_oov") catalog.cuisines_oov = split_tokens(value);
    else if (key == "locations_in") catalog.locations_in = split_tokens(value);
    else if (key == "locations_oov") catalog.locations_oov = split_tokens(value);
    else if (key == "price_ranges") catalog.price_ranges = split_tokens(value);
    else if (key == "party_sizes") catalog.party_sizes = split_tokens(value);
    else if (key == "greetings") templates.greetings = parse_template_list(value);
    else if (key == "request_frames") templates.request_frames = parse_template_list(value);
    else if (key.rfind("answers.", 0) == 0) {
      auto s = slot_by_name(key.substr(8));
      if (!s) throw ParseError("unknown slot in key '" + key + "'", line_no);
      templates.answers[size_t(*s)] = parse_template_list(value);
    } else if (key.rfind("request_phrases.", 0) == 0) {
      auto s = slot_by_name(key.substr(16));
      if (!s) throw ParseError("unknown slot in key '" + key + "'", line_no);
      templates.request_phrases[size_t(*s)] = parse_template_list(value);
    } else {
      throw ParseError("unknown key '" + key + "'", line_no);
    }
  }
  catalog.validate();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot rename " + tmp + " to " + path);
}

}  // namespace babilab
