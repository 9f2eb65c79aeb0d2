#include "dualnlu/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace dualnlu {

int Vocabulary::add_word(const std::string& w) {
  auto it = word_ids.find(w);
  if (it != word_ids.end()) return it->second;
  int id = static_cast<int>(words.size());
  words.push_back(w);
  word_ids[w] = id;
  return id;
}

namespace {
int lookup_or_throw(const std::map<std::string, int>& m, const std::string& key,
                    const char* space) {
  auto it = m.find(key);
  if (it == m.end()) throw DataError(std::string("unknown ") + space + ": " + key);
  return it->second;
}
}  // namespace

int Vocabulary::tag_id(const std::string& t) const { return lookup_or_throw(tag_ids, t, "tag"); }
int Vocabulary::intent_id(const std::string& i) const {
  return lookup_or_throw(intent_ids, i, "intent");
}
int Vocabulary::slot_id(const std::string& s) const { return lookup_or_throw(slot_ids, s, "slot"); }

uint64_t Vocabulary::hash() const {
  uint64_t h = 1469598103934665603ull;
  auto feed = [&h](const std::vector<std::string>& v) {
    for (const auto& s : v) {
      h = corpus::fnv1a(s.data(), s.size(), h);
      h = corpus::fnv1a("\x1f", 1, h);
    }
    h = corpus::fnv1a("\x1e", 1, h);
  };
  feed(words);
  feed(tags);
  feed(intents);
  feed(slots);
  return h;
}

}  // namespace dualnlu

namespace dualnlu::corpus {

uint64_t fnv1a(const void* data, size_t len, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a(buf, static_cast<size_t>(in.gcount()), h);
    if (!in) break;
  }
  return h;
}

std::string lowercase(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

namespace {

[[noreturn]] void malformed(const std::string& path, size_t line_no, const std::string& what) {
  throw DataError(path + ":" + std::to_string(line_no) + ": " + what);
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

Tokens split_ws(const std::string& s) {
  Tokens out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool parse_tag(const std::string& tag, char* kind, std::string* slot) {
  if (tag == "O") {
    *kind = 'O';
    slot->clear();
    return true;
  }
  if (tag.size() >= 3 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
    *kind = tag[0];
    *slot = tag.substr(2);
    return true;
  }
  return false;
}

}  // namespace

Tags repair_iob(const Tags& tags) {
  Tags out = tags;
  std::string prev_slot;  // empty means O or start
  for (auto& tag : out) {
    char kind;
    std::string slot;
    if (!parse_tag(tag, &kind, &slot)) throw DataError("bad IOB tag: " + tag);
    if (kind == 'I' && slot != prev_slot) {
      tag = "B-" + slot;
    }
    prev_slot = (kind == 'O') ? "" : slot;
  }
  return out;
}

bool is_valid_iob(const Tags& tags) {
  std::string prev_slot;
  for (const auto& tag : tags) {
    char kind;
    std::string slot;
    if (!parse_tag(tag, &kind, &slot)) return false;
    if (kind == 'I' && slot != prev_slot) return false;
    prev_slot = (kind == 'O') ? "" : slot;
  }
  return true;
}

std::vector<LabeledExample> load_labeled(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labeled file: " + path);

  std::vector<LabeledExample> out;
  LabeledExample cur;
  bool has_intent = false;
  size_t line_no = 0, block_start = 1;

  auto flush = [&]() {
    if (cur.tokens.empty() && !has_intent) return;
    if (!has_intent) malformed(path, block_start, "block without #intent line");
    if (cur.tokens.empty()) malformed(path, block_start, "block without tokens");
    cur.tags = repair_iob(cur.tags);
    out.push_back(std::move(cur));
    cur = LabeledExample{};
    has_intent = false;
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) {
      flush();
      block_start = line_no + 1;
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      malformed(path, line_no, "expected token<TAB>tag, got: " + line);
    std::string left = line.substr(0, tab);
    std::string right = line.substr(tab + 1);
    if (left == "#intent") {
      if (has_intent) malformed(path, line_no, "duplicate #intent line");
      if (right.empty()) malformed(path, line_no, "empty intent label");
      cur.intent = right;
      has_intent = true;
    } else {
      if (has_intent) malformed(path, line_no, "token line after #intent");
      if (left.empty() || right.empty()) malformed(path, line_no, "empty token or tag");
      char kind;
      std::string slot;
      if (!parse_tag(right, &kind, &slot)) malformed(path, line_no, "bad IOB tag: " + right);
      cur.tokens.push_back(lowercase(left));
      cur.tags.push_back(right);
    }
  }
  flush();
  return out;
}

std::vector<Tokens> load_sentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sentence file: " + path);
  std::vector<Tokens> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    Tokens toks = split_ws(lowercase(line));
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

std::vector<SemanticForm> load_forms(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open form file: " + path);
  std::vector<SemanticForm> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    SemanticForm form;
    auto tab = line.find('\t');
    std::string rest;
    if (tab == std::string::npos) {
      form.intent = line;
    } else {
      form.intent = line.substr(0, tab);
      rest = line.substr(tab + 1);
    }
    if (form.intent.empty()) malformed(path, line_no, "empty intent");
    size_t pos = 0;
    while (pos < rest.size()) {
      auto semi = rest.find(';', pos);
      std::string item = rest.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos);
      pos = semi == std::string::npos ? rest.size() : semi + 1;
      if (item.empty()) continue;
      auto eq = item.find('=');
      if (eq == std::string::npos) malformed(path, line_no, "slot item without '=': " + item);
      std::string slot = item.substr(0, eq);
      Tokens value = split_ws(lowercase(item.substr(eq + 1)));
      if (slot.empty()) malformed(path, line_no, "empty slot name");
      if (value.empty()) malformed(path, line_no, "empty value for slot " + slot);
      form.pairs.push_back({slot, value});
    }
    out.push_back(std::move(form));
  }
  return out;
}

void save_labeled(const std::string& path, const std::vector<LabeledExample>& examples) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write labeled file: " + path);
  for (const auto& ex : examples) {
    for (size_t i = 0; i < ex.tokens.size(); ++i)
      out << ex.tokens[i] << '\t' << ex.tags[i] << '\n';
    out << "#intent\t" << ex.intent << "\n\n";
  }
}

void save_sentences(const std::string& path, const std::vector<Tokens>& sentences) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write sentence file: " + path);
  for (const auto& s : sentences) {
    for (size_t i = 0; i < s.size(); ++i) out << (i ? " " : "") << s[i];
    out << '\n';
  }
}

void save_forms(const std::string& path, const std::vector<SemanticForm>& forms) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write form file: " + path);
  for (const auto& f : forms) {
    out << f.intent;
    if (!f.pairs.empty()) out << '\t';
    for (size_t i = 0; i < f.pairs.size(); ++i) {
      if (i) out << ';';
      out << f.pairs[i].slot << '=';
      const auto& v = f.pairs[i].value;
      for (size_t j = 0; j < v.size(); ++j) out << (j ? " " : "") << v[j];
    }
    out << '\n';
  }
}

std::vector<SlotValue> iob_to_slot_values(const Tokens& tokens, const Tags& tags) {
  if (tokens.size() != tags.size()) throw DataError("token/tag length mismatch");
  std::vector<SlotValue> out;
  for (size_t i = 0; i < tags.size(); ++i) {
    char kind;
    std::string slot;
    parse_tag(tags[i], &kind, &slot);
    if (kind == 'B') {
      out.push_back({slot, {tokens[i]}});
    } else if (kind == 'I') {
      out.back().value.push_back(tokens[i]);
    }
  }
  return out;
}

SemanticForm form_of(const LabeledExample& ex) {
  return {ex.intent, iob_to_slot_values(ex.tokens, ex.tags)};
}

DelexicalizedForm delexicalize(const Tokens& tokens, const Tags& tags) {
  if (tokens.size() != tags.size()) throw DataError("token/tag length mismatch");
  DelexicalizedForm out;
  for (size_t i = 0; i < tags.size(); ++i) {
    char kind;
    std::string slot;
    parse_tag(tags[i], &kind, &slot);
    if (kind == 'O') {
      out.push_back({tokens[i], false});
    } else if (kind == 'B') {
      out.push_back({slot, true});
    }
    // I- tokens extend the chunk already emitted
  }
  return out;
}

RelexResult relexicalize(const DelexicalizedForm& form, const std::vector<SlotValue>& pairs) {
  RelexResult res;
  std::vector<bool> used(pairs.size(), false);
  for (const auto& tok : form) {
    if (!tok.is_slot) {
      res.tokens.push_back(tok.text);
      res.tags.push_back("O");
      continue;
    }
    size_t match = pairs.size();
    for (size_t i = 0; i < pairs.size(); ++i) {
      if (!used[i] && pairs[i].slot == tok.text) {
        match = i;
        break;
      }
    }
    if (match == pairs.size()) {
      ++res.redundant;  // placeholder with nothing to fill it
      continue;
    }
    used[match] = true;
    const auto& value = pairs[match].value;
    for (size_t j = 0; j < value.size(); ++j) {
      res.tokens.push_back(value[j]);
      res.tags.push_back((j == 0 ? "B-" : "I-") + tok.text);
    }
  }
  for (bool u : used)
    if (!u) ++res.omitted;
  return res;
}

Dataset make_semi_split(const std::vector<LabeledExample>& labeled, double ratio, uint64_t seed) {
  if (labeled.empty()) throw DataError("make_semi_split: empty corpus");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("make_semi_split: ratio must be in (0,1]");
  size_t n = labeled.size();
  size_t keep = static_cast<size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  keep = std::min(std::max<size_t>(keep, 1), n);

  Rng rng(seed);
  std::vector<size_t> perm = rng.permutation(n);

  Dataset out;
  out.labeled.reserve(keep);
  for (size_t i = 0; i < keep; ++i) out.labeled.push_back(labeled[perm[i]]);
  for (size_t i = keep; i < n; ++i) {
    const auto& ex = labeled[perm[i]];
    out.unlabeled_sentences.push_back(ex.tokens);
    out.unexpressed_forms.push_back(form_of(ex));
  }
  return out;
}

LexiconDB build_lexicon_db(const std::vector<LabeledExample>& labeled) {
  LexiconDB db;
  for (const auto& ex : labeled)
    for (auto& sv : iob_to_slot_values(ex.tokens, ex.tags)) db[sv.slot].insert(sv.value);
  return db;
}

CoOccurrenceMatrix build_com(const std::vector<LabeledExample>& labeled) {
  CoOccurrenceMatrix com;
  for (const auto& ex : labeled)
    for (auto& sv : iob_to_slot_values(ex.tokens, ex.tags)) com.seen.insert({ex.intent, sv.slot});
  return com;
}

std::vector<LabeledExample> template_synthesis(const std::vector<LabeledExample>& labeled,
                                               const std::vector<SemanticForm>& forms) {
  // Templates keyed by their placeholder multiset; duplicates removed.
  std::map<Tokens, std::vector<DelexicalizedForm>> by_slots;
  std::set<DelexicalizedForm> seen_templates;
  for (const auto& ex : labeled) {
    DelexicalizedForm t = delexicalize(ex.tokens, ex.tags);
    if (!seen_templates.insert(t).second) continue;
    Tokens key;
    for (const auto& tok : t)
      if (tok.is_slot) key.push_back(tok.text);
    std::sort(key.begin(), key.end());
    by_slots[key].push_back(std::move(t));
  }

  std::vector<LabeledExample> out;
  std::set<std::pair<std::pair<Tokens, Tags>, std::string>> seen;
  for (const auto& form : forms) {
    Tokens key;
    for (const auto& sv : form.pairs) key.push_back(sv.slot);
    std::sort(key.begin(), key.end());
    auto it = by_slots.find(key);
    if (it == by_slots.end()) continue;
    for (const auto& tmpl : it->second) {
      RelexResult r = relexicalize(tmpl, form.pairs);
      LabeledExample ex{r.tokens, r.tags, form.intent};
      if (seen.insert({{ex.tokens, ex.tags}, ex.intent}).second) out.push_back(std::move(ex));
    }
  }
  return out;
}

Vocabulary build_vocab(const Dataset& data, int min_count) {
  std::map<std::string, int> counts;
  std::set<std::string> tag_set, intent_set, slot_set;

  auto count_tokens = [&counts](const Tokens& toks) {
    for (const auto& t : toks) counts[t]++;
  };
  for (const auto& ex : data.labeled) {
    count_tokens(ex.tokens);
    intent_set.insert(ex.intent);
    for (const auto& tag : ex.tags) {
      if (tag != "O") slot_set.insert(tag.substr(2));
    }
  }
  for (const auto& s : data.unlabeled_sentences) count_tokens(s);
  for (const auto& f : data.unexpressed_forms) {
    intent_set.insert(f.intent);
    for (const auto& sv : f.pairs) {
      slot_set.insert(sv.slot);
      count_tokens(sv.value);
    }
  }

  Vocabulary v;
  v.words = {"<pad>", "<unk>", "<s>", "</s>"};
  for (int i = 0; i < Vocabulary::kReserved; ++i) v.word_ids[v.words[i]] = i;
  for (const auto& [w, c] : counts) {
    if (c >= min_count) v.add_word(w);
  }

  v.tags.push_back("O");
  for (const auto& s : slot_set) {
    v.tags.push_back("B-" + s);
    v.tags.push_back("I-" + s);
  }
  for (size_t i = 0; i < v.tags.size(); ++i) v.tag_ids[v.tags[i]] = static_cast<int>(i);

  for (const auto& s : slot_set) {
    v.slot_ids[s] = static_cast<int>(v.slots.size());
    v.slots.push_back(s);
  }
  for (const auto& s : intent_set) {
    v.intent_ids[s] = static_cast<int>(v.intents.size());
    v.intents.push_back(s);
  }
  return v;
}

void dump_vocab(const std::string& path, const std::vector<std::string>& entries) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocab file: " + path);
  for (size_t i = 0; i < entries.size(); ++i) out << entries[i] << '\t' << i << '\n';
}

std::vector<std::string> load_vocab_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocab file: " + path);
  std::vector<std::string> entries;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) malformed(path, line_no, "expected entry<TAB>index");
    size_t idx = 0;
    try {
      idx = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      malformed(path, line_no, "bad vocab index");
    }
    if (idx != entries.size()) malformed(path, line_no, "non-contiguous vocab index");
    entries.push_back(line.substr(0, tab));
  }
  return entries;
}

Eigen::MatrixXd init_embeddings(const Vocabulary& vocab, int dim, Rng& rng,
                                const std::optional<std::string>& pretrained_path) {
  Eigen::MatrixXd table(vocab.n_words(), dim);
  for (int i = 0; i < table.rows(); ++i)
    for (int j = 0; j < dim; ++j) table(i, j) = rng.uniform(-0.2, 0.2);

  if (pretrained_path) {
    std::ifstream in(*pretrained_path);
    if (!in) throw DataError("cannot open embedding file: " + *pretrained_path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = strip_cr(line);
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string word;
      ls >> word;
      auto it = vocab.word_ids.find(lowercase(word));
      if (it == vocab.word_ids.end()) continue;
      for (int j = 0; j < dim; ++j) {
        if (!(ls >> table(it->second, j)))
          malformed(*pretrained_path, line_no, "embedding row shorter than dim");
      }
    }
  }
  return table;
}

}  // namespace dualnlu::corpus
