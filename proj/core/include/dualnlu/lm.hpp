#pragma once

#include <vector>

#include "dualnlu/nn.hpp"
#include "dualnlu/types.hpp"

namespace dualnlu::lm {

struct Config {
  int emb_dim = 100;
  int hidden = 100;
};

// Forward LSTM language model over the word space. Sequences are scored
// left to right from a BOS context; EOS is part of the output space and is
// a training target, so word probabilities never sum to one on their own.
class Model {
 public:
  Model(const Vocabulary& vocab, Config cfg, Rng& init_rng);

  const Config& config() const { return cfg_; }
  const Vocabulary& vocab() const { return *vocab_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  // Summed next-token NLL with EOS as the final target.
  ad::Expr loss(ad::Tape& tape, const Tokens& tokens);

  // Σ_t log p(w_t | w_<t) over the sentence's own tokens (EOS step excluded).
  double sentence_logprob(const Tokens& tokens) const;
  // sentence_logprob / |tokens|; always ≤ 0. Empty input is an error.
  double normalized_logprob(const Tokens& tokens) const;
  // log p(EOS | BOS): the probability of generating nothing at all.
  double empty_sentence_logprob() const;

  // Mean per-target NLL (EOS included); exp of this is perplexity.
  double mean_nll(const std::vector<Tokens>& sentences) const;

 private:
  std::vector<int> ids(const Tokens& tokens) const;

  const Vocabulary* vocab_;
  Config cfg_;
  ad::ParamStore params_;
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  Config model;
};

// Adam with the shared defaults; the returned model carries the parameters
// of the epoch with the lowest validation mean NLL (training NLL when no
// validation sentences are given).
Model train_lm(const Vocabulary& vocab, const std::vector<Tokens>& train_sentences,
               const std::vector<Tokens>& val_sentences, const TrainConfig& cfg, uint64_t seed);

}  // namespace dualnlu::lm
