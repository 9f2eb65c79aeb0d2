#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualnlu/nlu.hpp"
#include "dualnlu/types.hpp"

namespace dualnlu::eval {

struct Chunk {
  std::string type;
  int begin = 0;  // token index, inclusive
  int end = 0;    // exclusive

  bool operator==(const Chunk&) const = default;
  auto operator<=>(const Chunk&) const = default;
};

// conlleval chunking: B-X always opens, I-X continues a same-type chunk and
// otherwise opens one, O closes.
std::vector<Chunk> extract_chunks(const Tags& tags);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Micro-averaged chunk-level scores over the corpus; exact boundary and
// type matching.
Prf conll_slot_f1(const std::vector<Tags>& gold, const std::vector<Tags>& predicted);

double intent_accuracy(const std::vector<std::string>& gold,
                       const std::vector<std::string>& predicted);

// F1 over exact (slot, value) pairs as multisets; two empty lists score 1.
double pair_f1(const SemanticForm& gold, const SemanticForm& predicted);

// Corpus-level BLEU-4: n-gram counts aggregated over all pairs, a single
// brevity penalty, no smoothing.
double corpus_bleu(const std::vector<Tokens>& references, const std::vector<Tokens>& hypotheses);

struct McNemar {
  int b = 0;  // first right, second wrong
  int c = 0;  // first wrong, second right
  double statistic = 0.0;   // continuity-corrected chi-square
  double p_chisq = 1.0;     // its one-degree-of-freedom tail
  double p_value = 1.0;     // exact binomial below 25 discordant pairs, else p_chisq
  bool significant = false; // p_value < 0.05
};
McNemar mcnemar(const std::vector<uint8_t>& first_correct,
                const std::vector<uint8_t>& second_correct);

// Index of the highest validation average; ties go to the earliest entry.
size_t select_best(const std::vector<double>& avgs);

struct Report {
  double slot_precision = 0.0;
  double slot_recall = 0.0;
  double slot_f1 = 0.0;
  double intent_acc = 0.0;
  double avg = 0.0;  // (intent_acc + slot_f1) / 2
  std::optional<double> corpus_bleu;
  // per-example correctness, aligned with the evaluated examples
  std::vector<uint8_t> intent_correct, slots_correct, joint_correct;
};

// Top-1 decoding of every example; slot correctness is exact-pair-multiset
// equality against the gold form.
Report evaluate(const nlu::Model& model, const std::vector<LabeledExample>& examples);

std::string report_kv(const Report& r);     // key<TAB>value lines
std::string report_table(const Report& r);  // aligned human-readable block

// One "intent<TAB>slots<TAB>joint" line of 0/1 flags per example.
void save_correctness(const std::string& path, const Report& r);
struct Correctness {
  std::vector<uint8_t> intent, slots, joint;
};
Correctness load_correctness(const std::string& path);

}  // namespace dualnlu::eval
