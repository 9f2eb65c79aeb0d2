#include "dualnlu/lm.hpp"

#include <algorithm>
#include <cmath>

namespace dualnlu::lm {

using ad::Mat;

Model::Model(const Vocabulary& vocab, Config cfg, Rng& rng) : vocab_(&vocab), cfg_(cfg) {
  if (cfg_.emb_dim <= 0 || cfg_.hidden <= 0) throw ConfigError("lm: dimensions must be positive");
  params_.add("emb", vocab.n_words(), cfg_.emb_dim, rng);
  ad::LstmCell::create(params_, "cell", cfg_.emb_dim, cfg_.hidden, rng);
  params_.add("w_out", vocab.n_words(), cfg_.hidden, rng);
  params_.add("b_out", vocab.n_words(), 1, rng);
}

std::vector<int> Model::ids(const Tokens& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& w : tokens) out.push_back(vocab_->word_id(w));
  return out;
}

ad::Expr Model::loss(ad::Tape& tape, const Tokens& tokens) {
  auto cell = ad::LstmCell::bind(params_, "cell", cfg_.emb_dim, cfg_.hidden);
  auto& emb = params_.at("emb");
  auto& w_out = params_.at("w_out");
  auto& b_out = params_.at("b_out");

  std::vector<int> targets = ids(tokens);
  targets.push_back(Vocabulary::kEos);

  auto state = cell.initial(tape);
  int prev = Vocabulary::kBos;
  std::vector<ad::Expr> logps;
  logps.reserve(targets.size());
  for (int tgt : targets) {
    state = cell.step(tape, ad::lookup(tape, emb, prev), state);
    ad::Expr logits = ad::affine(tape, w_out, state.h, b_out);
    logps.push_back(ad::pick(ad::log_softmax(logits), tgt));
    prev = tgt;
  }
  return ad::neg(ad::add_n(logps));
}

namespace {

// per-target log-probabilities for tokens ++ [EOS], plain path
std::vector<double> step_logprobs(const ad::ParamStore& params, const Vocabulary& vocab,
                                  const Config& cfg, const std::vector<int>& targets) {
  auto& ps = const_cast<ad::ParamStore&>(params);  // bind/read only
  auto cell = ad::LstmCell::bind(ps, "cell", cfg.emb_dim, cfg.hidden);
  const Mat& emb = ps.at("emb").value;
  const Mat& w_out = ps.at("w_out").value;
  const Mat& b_out = ps.at("b_out").value;

  auto state = cell.initial_plain();
  int prev = Vocabulary::kBos;
  std::vector<double> out;
  out.reserve(targets.size());
  for (int tgt : targets) {
    state = cell.step_plain(emb.row(prev).transpose(), state);
    Mat logp = ad::plain_log_softmax(w_out * state.h + b_out);
    out.push_back(logp(tgt, 0));
    prev = tgt;
  }
  return out;
}

}  // namespace

double Model::sentence_logprob(const Tokens& tokens) const {
  if (tokens.empty()) throw DataError("lm: cannot score an empty sentence");
  std::vector<int> targets = ids(tokens);
  targets.push_back(Vocabulary::kEos);
  auto logps = step_logprobs(params_, *vocab_, cfg_, targets);
  double sum = 0.0;
  for (size_t t = 0; t < tokens.size(); ++t) sum += logps[t];  // EOS step not scored
  return sum;
}

double Model::normalized_logprob(const Tokens& tokens) const {
  return sentence_logprob(tokens) / static_cast<double>(tokens.size());
}

double Model::empty_sentence_logprob() const {
  return step_logprobs(params_, *vocab_, cfg_, {Vocabulary::kEos})[0];
}

double Model::mean_nll(const std::vector<Tokens>& sentences) const {
  double total = 0.0;
  size_t n_targets = 0;
  for (const auto& s : sentences) {
    std::vector<int> targets = ids(s);
    targets.push_back(Vocabulary::kEos);
    for (double lp : step_logprobs(params_, *vocab_, cfg_, targets)) total -= lp;
    n_targets += targets.size();
  }
  if (n_targets == 0) throw DataError("lm: no sentences to score");
  return total / static_cast<double>(n_targets);
}

Model train_lm(const Vocabulary& vocab, const std::vector<Tokens>& train_sentences,
               const std::vector<Tokens>& val_sentences, const TrainConfig& cfg, uint64_t seed) {
  if (train_sentences.empty()) throw DataError("lm: empty training corpus");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ConfigError("lm: bad training config");

  Rng init_rng(Rng::mix(seed, 0));
  Rng shuffle_rng(Rng::mix(seed, 1));
  Model model(vocab, cfg.model, init_rng);
  ad::Adam opt;

  const auto& selection = val_sentences.empty() ? train_sentences : val_sentences;
  double best = model.mean_nll(selection);
  auto best_params = model.params().snapshot();

  std::vector<size_t> order(train_sentences.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t end = std::min(order.size(), start + cfg.batch_size);
      ad::Tape tape;
      std::vector<ad::Expr> losses;
      for (size_t i = start; i < end; ++i)
        losses.push_back(model.loss(tape, train_sentences[order[i]]));
      tape.backward(ad::scale(ad::add_n(losses), 1.0 / static_cast<double>(losses.size())));
      opt.step(model.params());
    }
    double score = model.mean_nll(selection);
    if (score < best) {
      best = score;
      best_params = model.params().snapshot();
    }
  }
  model.params().restore(best_params);
  return model;
}

}  // namespace dualnlu::lm
