#pragma once

#include <string>
#include <vector>

#include "dualnlu/eval.hpp"
#include "dualnlu/lm.hpp"
#include "dualnlu/nlu.hpp"
#include "dualnlu/rewards.hpp"
#include "dualnlu/ssg.hpp"

namespace dualnlu::train {

struct Config {
  ad::AdamConfig adam;  // lr 1e-3, l2 1e-5, max-norm clip 5
  int batch_size = 16;
  int epochs = 50;        // supervised pretraining passes
  int beam_k = 5;         // K hypotheses per dual-learning step
  int pl_iterations = 5;  // N; pseudo-sample weight w_i = i/N
  int pl_epochs = 1;      // fine-tuning passes per pseudo-labeling round
  int dual_epochs = 5;    // passes over labeled ∪ unlabeled sentences
  rewards::Weights weights;
  uint64_t seed = 1;
  bool reward_baseline = false;    // moving-average reward centering
  bool pl_include_labeled = true;  // re-decode labeled data during PL
  bool pl_include_ssg = true;      // use form→sentence pseudo samples

  void validate() const;
};

enum class Origin { kNluOnUnlabeled, kSsgOnUnexpressed, kNluOnLabeled, kSsgOnLabeled };

struct PseudoSample {
  Origin origin;
  LabeledExample example;
  int iteration = 0;
};

// One line per evaluation event, stable formatting so identical runs have
// byte-identical logs.
class MetricsLog {
 public:
  void record(const std::string& phase, int epoch, const std::string& split,
              const eval::Report& r);
  const std::vector<std::string>& lines() const { return lines_; }
  std::string text() const;

 private:
  std::vector<std::string> lines_;
};

struct Outcome {
  int best_epoch = 0;
  eval::Report best_report;  // validation report of the kept checkpoint
};

// ---- gradient assembly primitives ----
// grads += scale · Σ_j weight_j · ∇loss(item_j); zero-weight items are
// skipped outright so they contribute exactly nothing.
void accumulate_nlu(nlu::Model& model, const std::vector<LabeledExample>& items,
                    const std::vector<double>& weights, double scale, bool train_mode = false,
                    Rng* dropout_rng = nullptr);

struct SsgItem {
  SemanticForm form;
  DelexicalizedForm target;
};
void accumulate_ssg(ssg::Model& model, const std::vector<SsgItem>& items,
                    const std::vector<double>& weights, double scale, bool train_mode = false,
                    Rng* dropout_rng = nullptr);

// ---- dual-learning steps ----
struct DualContext {
  const LexiconDB* db = nullptr;
  const CoOccurrenceMatrix* com = nullptr;
  const lm::Model* lm = nullptr;
  rewards::Weights weights;
  int beam_k = 5;
  double* baseline_x = nullptr;  // moving averages, used only when enabled
  double* baseline_y = nullptr;
};

// Sentence loop: NLU proposes K forms, SSG reconstructs the sentence.
// NLU grads += scale/K Σ (α·R^Y_val + (1−α)·R^X_rec) ∇L_NLU(x, y'^k)
// SSG grads += scale(1−α)/K Σ R^X_rec ∇L_SSG(y'^k, x)
void nlu2ssg_step(nlu::Model& nlu_model, ssg::Model& ssg_model, const Tokens& x,
                  const DualContext& ctx, double scale, bool train_mode = false,
                  Rng* nlu_rng = nullptr, Rng* ssg_rng = nullptr);

// Form loop: SSG realizes K sentences, NLU parses them back. Truncated or
// empty realizations count as zero-reward samples.
// SSG grads += scale/K Σ (β·R^X_val + (1−β)·R^Y_rec) ∇L_SSG(y, x'^k)
// NLU grads += scale(1−β)/K Σ R^Y_rec ∇L_NLU(x'^k, y)
void ssg2nlu_step(nlu::Model& nlu_model, ssg::Model& ssg_model, const SemanticForm& y,
                  const DualContext& ctx, double scale, bool train_mode = false,
                  Rng* nlu_rng = nullptr, Rng* ssg_rng = nullptr);

// ---- phases ----
Outcome pretrain_supervised(nlu::Model& nlu_model, ssg::Model& ssg_model, const Dataset& data,
                            const std::vector<LabeledExample>& val, const Config& cfg,
                            MetricsLog& log);

std::vector<PseudoSample> make_pseudo_samples(const nlu::Model& nlu_model,
                                              const ssg::Model& ssg_model, const Dataset& data,
                                              bool include_labeled, int iteration = 0);

// Linear confidence ramp: iteration i of n weighs pseudo samples i/n.
double pl_weight(int iteration, int total_iterations);

Outcome dual_pseudo_labeling(nlu::Model& nlu_model, ssg::Model& ssg_model, const Dataset& data,
                             const std::vector<LabeledExample>& val, const Config& cfg,
                             MetricsLog& log);

// dual_pseudo_labeling restricted to nlu-on-unlabeled samples; SSG is
// untouched, so the NLU update stream is the same as the full method's.
Outcome pl_baseline(nlu::Model& nlu_model, const Dataset& data,
                    const std::vector<LabeledExample>& val, const Config& cfg, MetricsLog& log);

Outcome dual_learning(nlu::Model& nlu_model, ssg::Model& ssg_model, const Dataset& data,
                      const std::vector<LabeledExample>& val, const LexiconDB& db,
                      const CoOccurrenceMatrix& com, const lm::Model& lm, const Config& cfg,
                      MetricsLog& log);

// pretrain → dual pseudo-labeling → dual learning; each phase starts from
// the previous phase's best checkpoint with fresh optimizer state.
Outcome combined_training(nlu::Model& nlu_model, ssg::Model& ssg_model, const Dataset& data,
                          const std::vector<LabeledExample>& val, const LexiconDB& db,
                          const CoOccurrenceMatrix& com, const lm::Model& lm, const Config& cfg,
                          MetricsLog& log);

}  // namespace dualnlu::train
