#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dualnlu/nn.hpp"
#include "dualnlu/types.hpp"

namespace dualnlu::nlu {

enum class Mode { kSoftmax, kCrf, kFocus };

Mode mode_from_string(const std::string& s);
std::string mode_name(Mode mode);

struct Config {
  Mode mode = Mode::kFocus;
  int emb_dim = 400;
  int hidden = 256;       // n, per direction
  int tag_emb_dim = 100;  // focus-mode previous-tag embedding
  double dropout = 0.5;   // non-recurrent connections only
};

struct Decoded {
  Tags tags;  // IOB-repaired
  SemanticForm form;
  double intent_logp = 0.0;
  double tags_logp = 0.0;
};

struct BeamHyp {
  Tags raw_tags;  // as decoded, before repair
  Tags tags;      // repaired
  SemanticForm form;
  double log_score = 0.0;    // tag-sequence log-probability
  double intent_logp = 0.0;  // top-1 intent, shared across the beam
};

// Sentence encoder + attention-based intent classifier + one of three slot
// taggers. The intent query is the backward encoder hidden at position 1;
// the focus decoder also starts from it.
class Model {
 public:
  Model(const Vocabulary& vocab, Config cfg, Rng& init_rng,
        const std::optional<ad::Mat>& pretrained_emb = std::nullopt);

  const Config& config() const { return cfg_; }
  const Vocabulary& vocab() const { return *vocab_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  struct Forward {
    ad::Expr intent_log_probs;            // |I| x 1
    std::vector<ad::Expr> tag_log_probs;  // softmax/focus: per-step |T| x 1
    std::vector<ad::Expr> emissions;      // crf: per-step unnormalized |T| x 1
    ad::Expr crf_transitions;             // crf: |T| x |T|, [i][j] scores i -> j
  };
  // Focus mode requires teacher tags (teacher forcing); other modes ignore
  // them. Dropout is active only when train is true.
  Forward forward(ad::Tape& tape, const Tokens& tokens, const std::optional<Tags>& teacher,
                  bool train = false, Rng* dropout_rng = nullptr);

  struct Loss {
    ad::Expr total;       // intent_nll + tag_nll
    ad::Expr intent_nll;
    ad::Expr tag_nll;
  };
  Loss loss(ad::Tape& tape, const LabeledExample& example, bool train = false,
            Rng* dropout_rng = nullptr);

  Decoded decode_top1(const Tokens& tokens) const;
  // Beam over tag sequences; hypotheses sorted by (log-prob desc, sequence
  // asc) and distinct. K wider than the space returns the whole space.
  std::vector<BeamHyp> beam_decode(const Tokens& tokens, int k) const;

 private:
  struct PlainEncoding {
    std::vector<ad::Mat> hiddens;  // h_i^sen, 2n x 1
    ad::Mat query;                 // backward hidden at position 1, n x 1
    ad::Mat intent_log_probs;      // |I| x 1
  };
  PlainEncoding encode_plain(const Tokens& tokens) const;

  std::vector<int> token_ids(const Tokens& tokens) const;

  const Vocabulary* vocab_;
  Config cfg_;
  ad::ParamStore params_;
};

// Exact argmax tag sequence; ties broken by lowest tag index. emissions are
// per-step |T| x 1 score vectors; a[i][j] scores the transition i -> j and
// applies from the second step on.
std::vector<int> viterbi_decode(const std::vector<ad::Mat>& emissions, const ad::Mat& a);

// Exact k-best paths by the same score, ordered by (score desc, sequence
// asc); returns fewer when the space is smaller.
std::vector<std::pair<std::vector<int>, double>> viterbi_kbest(
    const std::vector<ad::Mat>& emissions, const ad::Mat& a, int k);

// Log-partition of the linear-chain score, computed on plain matrices.
double crf_log_partition(const std::vector<ad::Mat>& emissions, const ad::Mat& a);

}  // namespace dualnlu::nlu
