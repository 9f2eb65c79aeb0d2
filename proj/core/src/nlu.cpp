#include "dualnlu/nlu.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "dualnlu/corpus.hpp"

namespace dualnlu::nlu {

using namespace dualnlu::ad;

Mode mode_from_string(const std::string& s) {
  if (s == "softmax") return Mode::kSoftmax;
  if (s == "crf") return Mode::kCrf;
  if (s == "focus") return Mode::kFocus;
  throw ConfigError("unknown tagger mode: " + s);
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kSoftmax: return "softmax";
    case Mode::kCrf: return "crf";
    case Mode::kFocus: return "focus";
  }
  return "?";
}

namespace {

int argmax_lowest(const Mat& v) {
  int best = 0;
  for (int i = 1; i < v.rows(); ++i)
    if (v(i, 0) > v(best, 0)) best = i;
  return best;
}

bool hyp_before(double score_a, const std::vector<int>& seq_a, double score_b,
                const std::vector<int>& seq_b) {
  if (score_a != score_b) return score_a > score_b;
  return std::lexicographical_compare(seq_a.begin(), seq_a.end(), seq_b.begin(), seq_b.end());
}

}  // namespace

Model::Model(const Vocabulary& vocab, Config cfg, Rng& init_rng,
             const std::optional<Mat>& pretrained_emb)
    : vocab_(&vocab), cfg_(cfg) {
  const int n = cfg_.hidden;
  if (pretrained_emb) {
    if (pretrained_emb->rows() != vocab.n_words() || pretrained_emb->cols() != cfg_.emb_dim)
      throw ConfigError("pretrained embedding shape mismatch");
    params_.add("emb", *pretrained_emb);
  } else {
    params_.add("emb", vocab.n_words(), cfg_.emb_dim, init_rng);
  }
  Blstm::create(params_, "enc", cfg_.emb_dim, n, init_rng);
  Attention::create(params_, "att", n, 2 * n, n, init_rng);
  params_.add("w1", vocab.n_intents(), 2 * n, init_rng);
  switch (cfg_.mode) {
    case Mode::kSoftmax:
      params_.add("w2", vocab.n_tags(), 2 * n, init_rng);
      break;
    case Mode::kCrf:
      params_.add("w2", vocab.n_tags(), 2 * n, init_rng);
      params_.add("crf.a", vocab.n_tags(), vocab.n_tags(), init_rng);
      break;
    case Mode::kFocus:
      params_.add("tag_emb", vocab.n_tags() + 1, cfg_.tag_emb_dim, init_rng);
      LstmCell::create(params_, "dec", 2 * n + cfg_.tag_emb_dim, n, init_rng);
      params_.add("w3", vocab.n_tags(), n, init_rng);
      break;
  }
}

std::vector<int> Model::token_ids(const Tokens& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& w : tokens) ids.push_back(vocab_->word_id(w));
  return ids;
}

Model::Forward Model::forward(ad::Tape& tape, const Tokens& tokens,
                              const std::optional<Tags>& teacher, bool train, Rng* dropout_rng) {
  if (tokens.empty()) throw DataError("cannot run the model on an empty sentence");
  double drop = train ? cfg_.dropout : 0.0;
  if (drop > 0.0 && dropout_rng == nullptr)
    throw ConfigError("training forward pass needs a dropout rng");

  const int n = cfg_.hidden;
  Tensor& emb = params_.at("emb");
  auto enc_net = Blstm::bind(params_, "enc", cfg_.emb_dim, n);
  auto att_net = Attention::bind(params_, "att");

  std::vector<Expr> xs;
  for (int id : token_ids(tokens)) {
    Expr e = lookup(tape, emb, id);
    if (drop > 0.0) e = dropout(tape, e, drop, *dropout_rng);
    xs.push_back(e);
  }
  auto enc = enc_net.run(tape, xs);

  // heads see dropped copies; recurrent connections stay untouched
  std::vector<Expr> hs;
  hs.reserve(enc.concat.size());
  for (const auto& h : enc.concat)
    hs.push_back(drop > 0.0 ? dropout(tape, h, drop, *dropout_rng) : h);

  Expr query = enc.backward[0];
  Expr att_query = drop > 0.0 ? dropout(tape, query, drop, *dropout_rng) : query;

  Forward out;
  auto att = att_net.run(tape, att_query, hs);
  out.intent_log_probs = log_softmax(matmul(tape, params_.at("w1"), att.context));

  const size_t L = tokens.size();
  switch (cfg_.mode) {
    case Mode::kSoftmax: {
      Tensor& w2 = params_.at("w2");
      for (size_t i = 0; i < L; ++i)
        out.tag_log_probs.push_back(log_softmax(matmul(tape, w2, hs[i])));
      break;
    }
    case Mode::kCrf: {
      Tensor& w2 = params_.at("w2");
      for (size_t i = 0; i < L; ++i) out.emissions.push_back(matmul(tape, w2, hs[i]));
      out.crf_transitions = param(tape, params_.at("crf.a"));
      break;
    }
    case Mode::kFocus: {
      if (!teacher) throw ConfigError("focus-mode forward needs teacher tags");
      if (teacher->size() != L) throw DataError("teacher tag count differs from token count");
      Tensor& tag_emb = params_.at("tag_emb");
      Tensor& w3 = params_.at("w3");
      auto dec = LstmCell::bind(params_, "dec", 2 * n + cfg_.tag_emb_dim, n);
      LstmCell::State st{query, input(tape, Mat::Zero(n, 1))};
      int prev = vocab_->n_tags();  // start symbol row
      for (size_t i = 0; i < L; ++i) {
        Expr te = lookup(tape, tag_emb, prev);
        if (drop > 0.0) te = dropout(tape, te, drop, *dropout_rng);
        st = dec.step(tape, concat({hs[i], te}), st);
        Expr h_out = drop > 0.0 ? dropout(tape, st.h, drop, *dropout_rng) : st.h;
        out.tag_log_probs.push_back(log_softmax(matmul(tape, w3, h_out)));
        prev = vocab_->tag_id((*teacher)[i]);
      }
      break;
    }
  }
  return out;
}

Model::Loss Model::loss(ad::Tape& tape, const LabeledExample& example, bool train,
                        Rng* dropout_rng) {
  if (example.tokens.size() != example.tags.size())
    throw DataError("token/tag length mismatch in training example");
  auto fwd = forward(tape, example.tokens, example.tags, train, dropout_rng);

  Expr intent_nll = neg(pick(fwd.intent_log_probs, vocab_->intent_id(example.intent)));

  std::vector<int> gold;
  gold.reserve(example.tags.size());
  for (const auto& t : example.tags) gold.push_back(vocab_->tag_id(t));

  Expr tag_nll;
  if (cfg_.mode != Mode::kCrf) {
    std::vector<Expr> terms;
    terms.reserve(gold.size());
    for (size_t i = 0; i < gold.size(); ++i) terms.push_back(pick(fwd.tag_log_probs[i], gold[i]));
    tag_nll = neg(add_n(terms));
  } else {
    const size_t L = gold.size();
    std::vector<Expr> eterms;
    for (size_t i = 0; i < L; ++i) eterms.push_back(pick(fwd.emissions[i], gold[i]));
    Expr score = add_n(eterms);
    if (L >= 2) {
      Mat counts = Mat::Zero(vocab_->n_tags(), vocab_->n_tags());
      for (size_t i = 1; i < L; ++i) counts(gold[i - 1], gold[i]) += 1.0;
      score = add(score, dot(fwd.crf_transitions, input(tape, counts)));
    }
    Expr alpha = fwd.emissions[0];
    for (size_t t = 1; t < L; ++t) {
      Expr p = add_col_broadcast(fwd.crf_transitions, alpha);
      alpha = add(fwd.emissions[t], colwise_logsumexp(p));
    }
    tag_nll = sub(logsumexp(alpha), score);
  }
  return {add(intent_nll, tag_nll), intent_nll, tag_nll};
}

Model::PlainEncoding Model::encode_plain(const Tokens& tokens) const {
  if (tokens.empty()) throw DataError("cannot run the model on an empty sentence");
  const int n = cfg_.hidden;
  auto& self = const_cast<Model&>(*this);
  const Tensor& emb = params_.at("emb");
  auto enc_net = Blstm::bind(self.params_, "enc", cfg_.emb_dim, n);
  auto att_net = Attention::bind(self.params_, "att");

  std::vector<Mat> xs;
  for (const auto& w : tokens) xs.push_back(emb.value.row(vocab_->word_id(w)).transpose());
  auto enc = enc_net.run_plain(xs);

  PlainEncoding out;
  out.hiddens = enc.concat;
  out.query = enc.backward[0];
  auto att = att_net.run_plain(out.query, out.hiddens);
  out.intent_log_probs = plain_log_softmax(params_.at("w1").value * att.context);
  return out;
}

Decoded Model::decode_top1(const Tokens& tokens) const {
  auto& self = const_cast<Model&>(*this);
  auto enc = encode_plain(tokens);
  const size_t L = tokens.size();
  const int n = cfg_.hidden;

  std::vector<int> ids(L);
  double tags_logp = 0.0;
  switch (cfg_.mode) {
    case Mode::kSoftmax: {
      const Mat& w2 = params_.at("w2").value;
      for (size_t i = 0; i < L; ++i) {
        Mat lp = plain_log_softmax(w2 * enc.hiddens[i]);
        ids[i] = argmax_lowest(lp);
        tags_logp += lp(ids[i], 0);
      }
      break;
    }
    case Mode::kCrf: {
      const Mat& w2 = params_.at("w2").value;
      const Mat& a = params_.at("crf.a").value;
      std::vector<Mat> emissions;
      for (size_t i = 0; i < L; ++i) emissions.push_back(w2 * enc.hiddens[i]);
      ids = viterbi_decode(emissions, a);
      double score = emissions[0](ids[0], 0);
      for (size_t i = 1; i < L; ++i) score += a(ids[i - 1], ids[i]) + emissions[i](ids[i], 0);
      tags_logp = score - crf_log_partition(emissions, a);
      break;
    }
    case Mode::kFocus: {
      const Mat& tag_emb = params_.at("tag_emb").value;
      const Mat& w3 = params_.at("w3").value;
      auto dec = LstmCell::bind(self.params_, "dec", 2 * n + cfg_.tag_emb_dim, n);
      LstmCell::PlainState st{enc.query, Mat::Zero(n, 1)};
      int prev = vocab_->n_tags();
      for (size_t i = 0; i < L; ++i) {
        Mat x(2 * n + cfg_.tag_emb_dim, 1);
        x << enc.hiddens[i], tag_emb.row(prev).transpose();
        st = dec.step_plain(x, st);
        Mat lp = plain_log_softmax(w3 * st.h);
        ids[i] = argmax_lowest(lp);
        tags_logp += lp(ids[i], 0);
        prev = ids[i];
      }
      break;
    }
  }

  Decoded out;
  Tags raw(L);
  for (size_t i = 0; i < L; ++i) raw[i] = vocab_->tags[ids[i]];
  out.tags = corpus::repair_iob(raw);
  int intent = argmax_lowest(enc.intent_log_probs);
  out.intent_logp = enc.intent_log_probs(intent, 0);
  out.tags_logp = tags_logp;
  out.form.intent = vocab_->intents[intent];
  out.form.pairs = corpus::iob_to_slot_values(tokens, out.tags);
  return out;
}

std::vector<BeamHyp> Model::beam_decode(const Tokens& tokens, int k) const {
  if (k < 1) throw ConfigError("beam width must be at least 1");
  auto& self = const_cast<Model&>(*this);
  auto enc = encode_plain(tokens);
  const size_t L = tokens.size();
  const int n = cfg_.hidden;
  const int T = vocab_->n_tags();

  struct Hyp {
    std::vector<int> seq;
    double score = 0.0;
    LstmCell::PlainState st;  // focus only
  };
  std::vector<Hyp> beam(1);

  if (cfg_.mode == Mode::kCrf) {
    const Mat& w2 = params_.at("w2").value;
    const Mat& a = params_.at("crf.a").value;
    std::vector<Mat> emissions;
    for (size_t i = 0; i < L; ++i) emissions.push_back(w2 * enc.hiddens[i]);
    double log_z = crf_log_partition(emissions, a);
    beam.clear();
    for (auto& [seq, score] : viterbi_kbest(emissions, a, k))
      beam.push_back({seq, score - log_z, {}});
  } else {
    const bool focus = cfg_.mode == Mode::kFocus;
    const Mat* tag_emb = focus ? &params_.at("tag_emb").value : nullptr;
    auto dec = focus ? LstmCell::bind(self.params_, "dec", 2 * n + cfg_.tag_emb_dim, n)
                     : LstmCell{};
    const Mat& w_out = focus ? params_.at("w3").value : params_.at("w2").value;
    if (focus) beam[0].st = {enc.query, Mat::Zero(n, 1)};

    for (size_t i = 0; i < L; ++i) {
      std::vector<Hyp> expanded;
      expanded.reserve(beam.size() * T);
      for (const auto& hyp : beam) {
        Mat lp;
        LstmCell::PlainState st;
        if (focus) {
          int prev = hyp.seq.empty() ? T : hyp.seq.back();
          Mat x(2 * n + cfg_.tag_emb_dim, 1);
          x << enc.hiddens[i], tag_emb->row(prev).transpose();
          st = dec.step_plain(x, hyp.st);
          lp = plain_log_softmax(w_out * st.h);
        } else {
          lp = plain_log_softmax(w_out * enc.hiddens[i]);
        }
        for (int t = 0; t < T; ++t) {
          Hyp next;
          next.seq = hyp.seq;
          next.seq.push_back(t);
          next.score = hyp.score + lp(t, 0);
          next.st = st;
          expanded.push_back(std::move(next));
        }
      }
      std::sort(expanded.begin(), expanded.end(), [](const Hyp& x, const Hyp& y) {
        return hyp_before(x.score, x.seq, y.score, y.seq);
      });
      if (static_cast<int>(expanded.size()) > k) expanded.resize(k);
      beam = std::move(expanded);
    }
  }

  int intent = argmax_lowest(enc.intent_log_probs);
  double intent_logp = enc.intent_log_probs(intent, 0);
  std::vector<BeamHyp> out;
  out.reserve(beam.size());
  for (const auto& hyp : beam) {
    BeamHyp h;
    h.raw_tags.resize(L);
    for (size_t i = 0; i < L; ++i) h.raw_tags[i] = vocab_->tags[hyp.seq[i]];
    h.tags = corpus::repair_iob(h.raw_tags);
    h.log_score = hyp.score;
    h.intent_logp = intent_logp;
    h.form.intent = vocab_->intents[intent];
    h.form.pairs = corpus::iob_to_slot_values(tokens, h.tags);
    out.push_back(std::move(h));
  }
  return out;
}

std::vector<int> viterbi_decode(const std::vector<Mat>& emissions, const Mat& a) {
  const size_t L = emissions.size();
  const int T = static_cast<int>(emissions[0].rows());
  Mat best = emissions[0];
  std::vector<std::vector<int>> back(L, std::vector<int>(T, 0));
  for (size_t t = 1; t < L; ++t) {
    Mat next(T, 1);
    for (int j = 0; j < T; ++j) {
      int arg = 0;
      double s = best(0, 0) + a(0, j);
      for (int i = 1; i < T; ++i) {
        double cand = best(i, 0) + a(i, j);
        if (cand > s) {
          s = cand;
          arg = i;
        }
      }
      next(j, 0) = s + emissions[t](j, 0);
      back[t][j] = arg;
    }
    best = next;
  }
  std::vector<int> seq(L);
  seq[L - 1] = argmax_lowest(best);
  for (size_t t = L - 1; t > 0; --t) seq[t - 1] = back[t][seq[t]];
  return seq;
}

std::vector<std::pair<std::vector<int>, double>> viterbi_kbest(const std::vector<Mat>& emissions,
                                                               const Mat& a, int k) {
  const size_t L = emissions.size();
  const int T = static_cast<int>(emissions[0].rows());
  using Entry = std::pair<double, std::vector<int>>;  // (score, prefix)
  auto entry_before = [](const Entry& x, const Entry& y) {
    return hyp_before(x.first, x.second, y.first, y.second);
  };

  std::vector<std::vector<Entry>> lists(T);
  for (int j = 0; j < T; ++j) lists[j].push_back({emissions[0](j, 0), {j}});

  for (size_t t = 1; t < L; ++t) {
    std::vector<std::vector<Entry>> next(T);
    for (int j = 0; j < T; ++j) {
      std::vector<Entry>& cand = next[j];
      for (int i = 0; i < T; ++i) {
        for (const auto& [score, seq] : lists[i]) {
          std::vector<int> ext = seq;
          ext.push_back(j);
          cand.push_back({score + a(i, j) + emissions[t](j, 0), std::move(ext)});
        }
      }
      std::sort(cand.begin(), cand.end(), entry_before);
      if (static_cast<int>(cand.size()) > k) cand.resize(k);
    }
    lists = std::move(next);
  }

  std::vector<Entry> all;
  for (int j = 0; j < T; ++j)
    for (auto& e : lists[j]) all.push_back(std::move(e));
  std::sort(all.begin(), all.end(), entry_before);
  if (static_cast<int>(all.size()) > k) all.resize(k);

  std::vector<std::pair<std::vector<int>, double>> out;
  out.reserve(all.size());
  for (auto& [score, seq] : all) out.push_back({std::move(seq), score});
  return out;
}

double crf_log_partition(const std::vector<Mat>& emissions, const Mat& a) {
  const size_t L = emissions.size();
  const int T = static_cast<int>(emissions[0].rows());
  Mat alpha = emissions[0];
  for (size_t t = 1; t < L; ++t) {
    Mat next(T, 1);
    for (int j = 0; j < T; ++j) {
      Mat terms(T, 1);
      for (int i = 0; i < T; ++i) terms(i, 0) = alpha(i, 0) + a(i, j);
      next(j, 0) = plain_logsumexp(terms) + emissions[t](j, 0);
    }
    alpha = next;
  }
  return plain_logsumexp(alpha);
}

}  // namespace dualnlu::nlu
