#pragma once

#include <optional>
#include <vector>

#include "dualnlu/nn.hpp"
#include "dualnlu/types.hpp"

namespace dualnlu::ssg {

struct Config {
  int emb_dim = 400;
  int hidden = 256;  // n, per direction
  int intent_emb_dim = 100;
  double dropout = 0.5;       // non-recurrent connections only
  int max_gen_len = 60;       // hard stop; hypotheses cut here count as truncated
};

// Generates delexicalized forms from semantic forms. Slot-value pairs are
// tokenized as (slot, "=", value words), encoded by a local BLSTM whose
// mean-pooled states feed a global BLSTM; the decoder is an SC-LSTM whose
// slot state decays through a reading gate, with attention over the global
// encoding and a soft copy gate over the input pairs.
class Model {
 public:
  Model(const Vocabulary& vocab, Config cfg, Rng& init_rng);

  const Config& config() const { return cfg_; }
  const Vocabulary& vocab() const { return *vocab_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  struct StepOutput {
    ad::Expr mixture;    // p(x̃_t | ·) over the delexicalized vocabulary
    ad::Expr gen;        // generation distribution (softmax head) alone
    ad::Expr gate;       // generation-vs-copy gate in [0,1]
    ad::Expr slot_state; // s_t, non-increasing coordinates in [0,1]
    ad::Expr attention;  // weights over the M pairs; empty handle when M=0
  };
  // Teacher-forced pass over gold ++ [EOS]; output has |gold|+1 steps.
  std::vector<StepOutput> forward(ad::Tape& tape, const SemanticForm& form,
                                  const DelexicalizedForm& gold, bool train = false,
                                  Rng* dropout_rng = nullptr);

  struct Loss {
    ad::Expr total;  // nll + sc
    ad::Expr nll;
    ad::Expr sc;     // ‖s_end‖₂ + Σ_t η·ξ^{‖s_t − s_{t−1}‖₂}
  };
  Loss loss(ad::Tape& tape, const SemanticForm& form, const DelexicalizedForm& gold,
            bool train = false, Rng* dropout_rng = nullptr);

  struct Generated {
    DelexicalizedForm form;  // EOS not included
    double log_score = 0.0;  // includes the EOS step when not truncated
    bool truncated = false;  // ran into max_gen_len without emitting EOS
  };
  // Beam of width k with EOS-absorbing slots: k=1 reproduces greedy
  // decoding exactly. Results sorted by (log-score desc, sequence asc).
  std::vector<Generated> generate(const SemanticForm& form, int k) const;

  static constexpr double kEta = 1e-4;
  static constexpr double kXi = 100.0;

 private:
  struct Encoded {           // tape-side encoder outputs
    std::vector<ad::Expr> global;  // h^g_m, 2n x 1
    ad::Expr intent_emb;
    ad::Expr d0;
    std::vector<int> copy_targets;  // delex id per pair
  };
  Encoded encode(ad::Tape& tape, const SemanticForm& form, double drop, Rng* rng);

  struct PlainEncoded {
    std::vector<ad::Mat> global;
    ad::Mat intent_emb;
    ad::Mat d0;
    std::vector<int> copy_targets;
  };
  PlainEncoded encode_plain(const SemanticForm& form) const;

  std::vector<int> pair_token_ids(const SlotValue& sv) const;

  const Vocabulary* vocab_;
  Config cfg_;
  ad::ParamStore params_;
  int s_dim_;  // max(1, |S|)
};

}  // namespace dualnlu::ssg
