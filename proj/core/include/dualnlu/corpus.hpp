#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "dualnlu/rng.hpp"
#include "dualnlu/types.hpp"

namespace dualnlu::corpus {

// File loaders. Formats:
//   labeled   : blocks of "token<TAB>tag" lines closed by "#intent<TAB>label",
//               blank line between blocks
//   sentences : one sentence per line, space-separated tokens
//   forms     : "intent<TAB>slot=value;slot=value", spaces allowed in values
// Tokens and values are lowercased at load; labels are kept verbatim.
std::vector<LabeledExample> load_labeled(const std::string& path);
std::vector<Tokens> load_sentences(const std::string& path);
std::vector<SemanticForm> load_forms(const std::string& path);

void save_labeled(const std::string& path, const std::vector<LabeledExample>& examples);
void save_sentences(const std::string& path, const std::vector<Tokens>& sentences);
void save_forms(const std::string& path, const std::vector<SemanticForm>& forms);

std::string lowercase(std::string s);

// "I-X" with no valid predecessor becomes "B-X" (conlleval convention).
Tags repair_iob(const Tags& tags);
bool is_valid_iob(const Tags& tags);

// One (slot, value) pair per maximal B/I chunk, in sentence order.
std::vector<SlotValue> iob_to_slot_values(const Tokens& tokens, const Tags& tags);

SemanticForm form_of(const LabeledExample& ex);

// Each chunk replaced by a single slot placeholder; O-tokens kept verbatim.
DelexicalizedForm delexicalize(const Tokens& tokens, const Tags& tags);

struct RelexResult {
  Tokens tokens;
  Tags tags;
  int omitted = 0;    // pairs left unconsumed
  int redundant = 0;  // placeholders with no matching pair (dropped)
};

// The k-th placeholder of slot s consumes the k-th unconsumed pair with
// slot s; substituted values receive B-/I- tags; mismatches are reported,
// not fatal.
RelexResult relexicalize(const DelexicalizedForm& form, const std::vector<SlotValue>& pairs);

// One shuffled permutation per seed; ratio r keeps the first ceil(r*N)
// examples labeled, the rest become unpaired sentences and forms.
Dataset make_semi_split(const std::vector<LabeledExample>& labeled, double ratio, uint64_t seed);

LexiconDB build_lexicon_db(const std::vector<LabeledExample>& labeled);
CoOccurrenceMatrix build_com(const std::vector<LabeledExample>& labeled);

// Fills delexicalized templates from the labeled data with the values of
// slot-compatible unexpressed forms; deduplicated.
std::vector<LabeledExample> template_synthesis(const std::vector<LabeledExample>& labeled,
                                               const std::vector<SemanticForm>& forms);

Vocabulary build_vocab(const Dataset& data, int min_count = 1);

void dump_vocab(const std::string& path, const std::vector<std::string>& entries);
std::vector<std::string> load_vocab_dump(const std::string& path);

// Word embedding table, |words| x dim. Pretrained rows are copied where the
// file provides them, everything else is sampled uniform [-0.2, 0.2].
Eigen::MatrixXd init_embeddings(const Vocabulary& vocab, int dim, Rng& rng,
                                const std::optional<std::string>& pretrained_path = std::nullopt);

uint64_t fnv1a(const void* data, size_t len, uint64_t h = 1469598103934665603ull);
uint64_t hash_file(const std::string& path);

}  // namespace dualnlu::corpus
