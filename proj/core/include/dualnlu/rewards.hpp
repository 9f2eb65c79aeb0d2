#pragma once

#include <string>

#include "dualnlu/lm.hpp"
#include "dualnlu/types.hpp"

namespace dualnlu::rewards {

struct Weights {
  double alpha = 0.5;   // NLU-side mix in the sentence→form loop
  double beta = 0.5;    // SSG-side mix in the form→sentence loop
  double gamma = 0.5;   // slot accuracy vs fluency
  double omega = 0.5;   // intent vs pair F1
  double lambda = 0.25; // value plausibility vs intent/slot co-occurrence
  double delta = 0.5;   // reserved, unused

  void validate() const;  // all weights must lie in [0,1]
};

// Word-level Levenshtein distance with unit costs.
int edit_distance(const Tokens& a, const Tokens& b);

// max over DB entries of 1 − ED(e, value)/|value|, clamped to [0,1];
// slots absent from the DB score 0.
double slot_value_score(const std::string& slot, const Tokens& value, const LexiconDB& db);

// R^Y_val = λ·r_sv + (1−λ)·r_si with both sub-scores averaged over the
// pairs; an empty pair list counts as fully valid.
double semantic_validity(const SemanticForm& form, const LexiconDB& db,
                         const CoOccurrenceMatrix& com, double lambda);

// 1 − (omitted + redundant)/m on slot-type multisets; m = 0 yields 1 when
// nothing was generated and 0 otherwise. Not clamped below.
double slot_accuracy(const DelexicalizedForm& generated, const SemanticForm& form);

// R^X_val = γ·SlotAcc(raw delex output) + (1−γ)·mean log LM(relexicalized).
double sentence_validity(const DelexicalizedForm& generated, const SemanticForm& form,
                         const lm::Model& lm, const Tokens& relexicalized, double gamma);

// Sentence BLEU-4: modified precisions under add-one smoothing for n ≥ 2,
// unsmoothed unigrams, brevity penalty. Either side empty scores 0.
double bleu(const Tokens& reference, const Tokens& hypothesis);

// R^Y_rec = ω·1{intents equal} + (1−ω)·F1 over exact (slot, value) pairs
// as multisets; two empty pair lists count as F1 = 1.
double semantic_reconstruction(const SemanticForm& y, const SemanticForm& y_prime, double omega);

}  // namespace dualnlu::rewards
