#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualnlu {

using Tokens = std::vector<std::string>;
using Tags = std::vector<std::string>;

// Raised for malformed input data (exit code 2 territory).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised for invalid configuration (exit code 1 territory).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LabeledExample {
  Tokens tokens;
  Tags tags;  // IOB, aligned with tokens
  std::string intent;

  bool operator==(const LabeledExample&) const = default;
};

struct SlotValue {
  std::string slot;
  Tokens value;  // non-empty word sequence

  bool operator==(const SlotValue&) const = default;
  auto operator<=>(const SlotValue&) const = default;
};

// y = (intent, ordered slot-value pairs). Slots may repeat.
struct SemanticForm {
  std::string intent;
  std::vector<SlotValue> pairs;

  bool operator==(const SemanticForm&) const = default;
};

struct DelexToken {
  std::string text;  // surface word, or slot name when is_slot
  bool is_slot = false;

  bool operator==(const DelexToken&) const = default;
  auto operator<=>(const DelexToken&) const = default;
};

using DelexicalizedForm = std::vector<DelexToken>;

struct Dataset {
  std::vector<LabeledExample> labeled;
  std::vector<Tokens> unlabeled_sentences;      // D_x^U
  std::vector<SemanticForm> unexpressed_forms;  // D_y^U
};

// slot -> set of observed values; built from labeled training data only.
using LexiconDB = std::map<std::string, std::set<Tokens>>;

struct CoOccurrenceMatrix {
  std::set<std::pair<std::string, std::string>> seen;  // (intent, slot)

  int operator()(const std::string& intent, const std::string& slot) const {
    return seen.count({intent, slot}) ? 1 : 0;
  }
};

// Index spaces for words, tags, intents and slots. Index 0 of the word
// space is reserved for padding; further reserved symbols cover unknown
// words, sequence start and "EOS".
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  std::vector<std::string> words;  // [0..3] are the reserved symbols
  std::map<std::string, int> word_ids;
  std::vector<std::string> tags;
  std::map<std::string, int> tag_ids;
  std::vector<std::string> intents;
  std::map<std::string, int> intent_ids;
  std::vector<std::string> slots;
  std::map<std::string, int> slot_ids;

  int add_word(const std::string& w);

  int word_id(const std::string& w) const {
    auto it = word_ids.find(w);
    return it == word_ids.end() ? kUnk : it->second;
  }
  int tag_id(const std::string& t) const;
  int intent_id(const std::string& i) const;
  int slot_id(const std::string& s) const;

  int n_words() const { return static_cast<int>(words.size()); }
  int n_tags() const { return static_cast<int>(tags.size()); }
  int n_intents() const { return static_cast<int>(intents.size()); }
  int n_slots() const { return static_cast<int>(slots.size()); }

  // Delexicalized output space: words followed by slot placeholders.
  int delex_vocab() const { return n_words() + n_slots(); }
  int delex_slot_id(int slot) const { return n_words() + slot; }
  bool is_delex_slot(int id) const { return id >= n_words() && id < delex_vocab(); }
  int delex_to_slot(int id) const { return id - n_words(); }
  int delex_id(const DelexToken& t) const {
    return t.is_slot ? delex_slot_id(slot_id(t.text)) : word_id(t.text);
  }
  std::string delex_name(int id) const {
    return is_delex_slot(id) ? slots[delex_to_slot(id)] : words[id];
  }

  // Semantic-token space for SSG encoder inputs: delex space plus "=".
  int sem_vocab() const { return delex_vocab() + 1; }
  int sem_eq_id() const { return delex_vocab(); }

  uint64_t hash() const;  // stable content hash across the four index spaces
};

}  // namespace dualnlu
