#include "dualnlu/ssg.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace dualnlu::ssg {

namespace {

using ad::Mat;

Mat logistic(const Mat& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

}  // namespace

Model::Model(const Vocabulary& vocab, Config cfg, Rng& rng) : vocab_(&vocab), cfg_(cfg) {
  if (cfg_.emb_dim <= 0 || cfg_.hidden <= 0 || cfg_.intent_emb_dim <= 0 || cfg_.max_gen_len <= 0)
    throw ConfigError("ssg: dimensions and max_gen_len must be positive");
  if (cfg_.dropout < 0.0 || cfg_.dropout >= 1.0) throw ConfigError("ssg: dropout must be in [0,1)");
  const int n = cfg_.hidden;
  const int e = cfg_.emb_dim;
  const int ie = cfg_.intent_emb_dim;
  s_dim_ = std::max(1, vocab.n_slots());

  params_.add("sem_emb", vocab.sem_vocab(), e, rng);
  params_.add("out_emb", vocab.delex_vocab(), e, rng);
  params_.add("intent_emb", vocab.n_intents(), ie, rng);
  ad::Blstm::create(params_, "local", e, n, rng);
  ad::Blstm::create(params_, "global", 2 * n, n, rng);
  ad::Attention::create(params_, "att0", ie, 2 * n, n, rng);
  params_.add("w0", n, 2 * n, rng);
  ad::Attention::create(params_, "att", n, 2 * n, n, rng);
  const int in_cat = e + ie + n;  // prev-token emb ⊕ intent emb ⊕ d_prev
  params_.add("dec.w", 4 * n, in_cat, rng);
  params_.add("dec.b", 4 * n, 1, rng);
  params_.add("dec.wr", s_dim_, in_cat, rng);
  params_.add("dec.ws", n, s_dim_, rng);
  params_.add("wo", vocab.delex_vocab(), 3 * n, rng);
  params_.add("vg", 1, 3 * n, rng);
}

std::vector<int> Model::pair_token_ids(const SlotValue& sv) const {
  std::vector<int> ids;
  ids.push_back(vocab_->delex_slot_id(vocab_->slot_id(sv.slot)));
  ids.push_back(vocab_->sem_eq_id());
  for (const auto& w : sv.value) ids.push_back(vocab_->word_id(w));
  return ids;
}

namespace {

std::vector<int> target_ids(const Vocabulary& v, const DelexicalizedForm& gold) {
  std::vector<int> ids;
  ids.reserve(gold.size() + 1);
  for (const auto& tok : gold) ids.push_back(v.delex_id(tok));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

Mat initial_slot_state(const Vocabulary& v, const SemanticForm& form, int s_dim) {
  Mat s0 = Mat::Zero(s_dim, 1);
  for (const auto& sv : form.pairs) s0(v.slot_id(sv.slot), 0) = 1.0;  // one indicator per type
  return s0;
}

Mat copy_scatter(const std::vector<int>& copy_targets, int vocab_size) {
  Mat sc = Mat::Zero(vocab_size, copy_targets.size());
  for (size_t m = 0; m < copy_targets.size(); ++m) sc(copy_targets[m], m) = 1.0;
  return sc;
}

}  // namespace

Model::Encoded Model::encode(ad::Tape& tape, const SemanticForm& form, double drop, Rng* rng) {
  const int n = cfg_.hidden;
  auto& sem_emb = params_.at("sem_emb");
  auto local = ad::Blstm::bind(params_, "local", cfg_.emb_dim, n);
  auto global = ad::Blstm::bind(params_, "global", 2 * n, n);
  auto att0 = ad::Attention::bind(params_, "att0");

  Encoded enc;
  enc.intent_emb = ad::lookup(tape, params_.at("intent_emb"), vocab_->intent_id(form.intent));
  if (drop > 0) enc.intent_emb = ad::dropout(tape, enc.intent_emb, drop, *rng);

  std::vector<ad::Expr> pooled;
  for (const auto& sv : form.pairs) {
    std::vector<ad::Expr> xs;
    for (int id : pair_token_ids(sv)) {
      ad::Expr x = ad::lookup(tape, sem_emb, id);
      if (drop > 0) x = ad::dropout(tape, x, drop, *rng);
      xs.push_back(x);
    }
    auto out = local.run(tape, xs);
    ad::Expr mean = ad::scale(ad::add_n(out.concat), 1.0 / static_cast<double>(xs.size()));
    if (drop > 0) mean = ad::dropout(tape, mean, drop, *rng);
    pooled.push_back(mean);
    enc.copy_targets.push_back(vocab_->delex_slot_id(vocab_->slot_id(sv.slot)));
  }

  ad::Expr z0;
  if (!pooled.empty()) {
    enc.global = global.run(tape, pooled).concat;
    if (drop > 0)
      for (auto& h : enc.global) h = ad::dropout(tape, h, drop, *rng);
    z0 = att0.run(tape, enc.intent_emb, enc.global).context;
  } else {
    z0 = ad::input(tape, Mat::Zero(2 * n, 1));
  }
  enc.d0 = ad::matmul(tape, params_.at("w0"), z0);
  return enc;
}

std::vector<Model::StepOutput> Model::forward(ad::Tape& tape, const SemanticForm& form,
                                              const DelexicalizedForm& gold, bool train,
                                              Rng* dropout_rng) {
  const double drop = train ? cfg_.dropout : 0.0;
  if (drop > 0 && dropout_rng == nullptr) throw ConfigError("ssg: dropout requires an rng");
  const int n = cfg_.hidden;

  Encoded enc = encode(tape, form, drop, dropout_rng);
  const int M = static_cast<int>(form.pairs.size());
  auto att = ad::Attention::bind(params_, "att");
  auto& out_emb = params_.at("out_emb");
  auto& dec_w = params_.at("dec.w");
  auto& dec_b = params_.at("dec.b");
  auto& dec_wr = params_.at("dec.wr");
  auto& dec_ws = params_.at("dec.ws");
  auto& wo = params_.at("wo");
  auto& vg = params_.at("vg");

  ad::Expr scatter;
  if (M > 0) scatter = ad::input(tape, copy_scatter(enc.copy_targets, vocab_->delex_vocab()));

  ad::Expr d_prev = enc.d0;
  ad::Expr c_prev = ad::input(tape, Mat::Zero(n, 1));
  ad::Expr s_prev = ad::input(tape, initial_slot_state(*vocab_, form, s_dim_));

  std::vector<int> targets = target_ids(*vocab_, gold);
  std::vector<StepOutput> steps;
  steps.reserve(targets.size());
  int prev_id = Vocabulary::kBos;
  for (int tgt : targets) {
    ad::Expr we = ad::lookup(tape, out_emb, prev_id);
    if (drop > 0) we = ad::dropout(tape, we, drop, *dropout_rng);
    ad::Expr x = ad::concat({we, enc.intent_emb, d_prev});

    ad::Expr r = ad::sigmoid(ad::matmul(tape, dec_wr, x));
    ad::Expr s = ad::cmult(r, s_prev);
    ad::Expr gates = ad::affine(tape, dec_w, x, dec_b);
    ad::Expr gi = ad::sigmoid(ad::slice(gates, 0, n));
    ad::Expr gf = ad::sigmoid(ad::slice(gates, n, n));
    ad::Expr go = ad::sigmoid(ad::slice(gates, 2 * n, n));
    ad::Expr gc = ad::tanh_(ad::slice(gates, 3 * n, n));
    ad::Expr c = ad::add(ad::add(ad::cmult(gf, c_prev), ad::cmult(gi, gc)),
                         ad::tanh_(ad::matmul(tape, dec_ws, s)));
    ad::Expr d = ad::cmult(go, ad::tanh_(c));

    ad::Expr z_sem, a;
    if (M > 0) {
      auto att_out = att.run(tape, d, enc.global);
      z_sem = att_out.context;
      a = att_out.weights;
    } else {
      z_sem = ad::input(tape, Mat::Zero(2 * n, 1));
    }
    ad::Expr dz = ad::concat({d, z_sem});
    if (drop > 0) dz = ad::dropout(tape, dz, drop, *dropout_rng);

    ad::Expr p_gen = ad::softmax(ad::matmul(tape, wo, dz));
    ad::Expr g, mix;
    if (M > 0) {
      g = ad::sigmoid(ad::matmul(tape, vg, dz));
      ad::Expr p_copy = ad::matmul_ee(scatter, a);
      mix = ad::add(ad::matmul_ee(p_gen, g), ad::matmul_ee(p_copy, ad::sub(ad::input(tape, 1.0), g)));
    } else {
      g = ad::input(tape, 1.0);  // no pairs to copy from
      mix = p_gen;
    }
    steps.push_back({mix, p_gen, g, s, a});

    prev_id = tgt;
    d_prev = d;
    c_prev = c;
    s_prev = s;
  }
  return steps;
}

Model::Loss Model::loss(ad::Tape& tape, const SemanticForm& form, const DelexicalizedForm& gold,
                        bool train, Rng* dropout_rng) {
  std::vector<StepOutput> steps = forward(tape, form, gold, train, dropout_rng);
  std::vector<int> targets = target_ids(*vocab_, gold);

  std::vector<ad::Expr> logps;
  logps.reserve(targets.size());
  for (size_t t = 0; t < targets.size(); ++t)
    logps.push_back(ad::log_(ad::pick(steps[t].mixture, targets[t])));
  ad::Expr nll = ad::neg(ad::add_n(logps));

  const double log_xi = std::log(kXi);
  ad::Expr s_before = ad::input(tape, initial_slot_state(*vocab_, form, s_dim_));
  std::vector<ad::Expr> sc_terms;
  for (const auto& step : steps) {
    ad::Expr delta = ad::l2_norm(ad::sub(step.slot_state, s_before));
    sc_terms.push_back(ad::scale(ad::exp_(ad::scale(delta, log_xi)), kEta));
    s_before = step.slot_state;
  }
  sc_terms.push_back(ad::l2_norm(steps.back().slot_state));
  ad::Expr sc = ad::add_n(sc_terms);

  return {ad::add(nll, sc), nll, sc};
}

Model::PlainEncoded Model::encode_plain(const SemanticForm& form) const {
  auto& ps = const_cast<ad::ParamStore&>(params_);  // bind/read only
  const int n = cfg_.hidden;
  const Mat& sem_emb = ps.at("sem_emb").value;
  auto local = ad::Blstm::bind(ps, "local", cfg_.emb_dim, n);
  auto global = ad::Blstm::bind(ps, "global", 2 * n, n);
  auto att0 = ad::Attention::bind(ps, "att0");

  PlainEncoded enc;
  enc.intent_emb = ps.at("intent_emb").value.row(vocab_->intent_id(form.intent)).transpose();

  std::vector<Mat> pooled;
  for (const auto& sv : form.pairs) {
    std::vector<Mat> xs;
    for (int id : pair_token_ids(sv)) xs.push_back(sem_emb.row(id).transpose());
    auto out = local.run_plain(xs);
    Mat mean = Mat::Zero(2 * n, 1);
    for (const auto& h : out.concat) mean += h;
    pooled.push_back(mean / static_cast<double>(xs.size()));
    enc.copy_targets.push_back(vocab_->delex_slot_id(vocab_->slot_id(sv.slot)));
  }

  Mat z0 = Mat::Zero(2 * n, 1);
  if (!pooled.empty()) {
    enc.global = global.run_plain(pooled).concat;
    z0 = att0.run_plain(enc.intent_emb, enc.global).context;
  }
  enc.d0 = ps.at("w0").value * z0;
  return enc;
}

namespace {

struct PlainDecState {
  Mat d, c, s;
};

struct Hyp {
  std::vector<int> ids;
  double logp = 0.0;
  std::shared_ptr<PlainDecState> state;
  bool finished = false;
};

bool hyp_before(const Hyp& a, const Hyp& b) {
  if (a.logp != b.logp) return a.logp > b.logp;
  return a.ids < b.ids;
}

}  // namespace

std::vector<Model::Generated> Model::generate(const SemanticForm& form, int k) const {
  if (k < 1) throw ConfigError("ssg: beam width must be >= 1");
  auto& ps = const_cast<ad::ParamStore&>(params_);
  const int n = cfg_.hidden;
  const int V = vocab_->delex_vocab();
  const int M = static_cast<int>(form.pairs.size());

  PlainEncoded enc = encode_plain(form);
  auto att = ad::Attention::bind(ps, "att");
  const Mat& out_emb = ps.at("out_emb").value;
  const Mat& dec_w = ps.at("dec.w").value;
  const Mat& dec_b = ps.at("dec.b").value;
  const Mat& dec_wr = ps.at("dec.wr").value;
  const Mat& dec_ws = ps.at("dec.ws").value;
  const Mat& wo = ps.at("wo").value;
  const Mat& vg = ps.at("vg").value;
  Mat scatter;
  if (M > 0) scatter = copy_scatter(enc.copy_targets, V);

  // Mixture for the next token plus the advanced state, given the hyp's
  // last emitted token (BOS at the start).
  auto advance = [&](int prev_id, const PlainDecState& st) {
    Mat x(cfg_.emb_dim + cfg_.intent_emb_dim + n, 1);
    x << out_emb.row(prev_id).transpose(), enc.intent_emb, st.d;
    Mat r = logistic(dec_wr * x);
    auto next = std::make_shared<PlainDecState>();
    next->s = (r.array() * st.s.array()).matrix();
    Mat gates = dec_w * x + dec_b;
    Mat gi = logistic(gates.topRows(n));
    Mat gf = logistic(gates.middleRows(n, n));
    Mat go = logistic(gates.middleRows(2 * n, n));
    Mat gc = gates.bottomRows(n).array().tanh().matrix();
    next->c = (gf.array() * st.c.array() + gi.array() * gc.array()).matrix() +
              (dec_ws * next->s).array().tanh().matrix();
    next->d = (go.array() * next->c.array().tanh()).matrix();

    Mat z_sem = Mat::Zero(2 * n, 1);
    Mat a;
    if (M > 0) {
      auto att_out = att.run_plain(next->d, enc.global);
      z_sem = att_out.context;
      a = att_out.weights;
    }
    Mat dz(3 * n, 1);
    dz << next->d, z_sem;
    Mat mix = ad::plain_softmax(wo * dz);
    if (M > 0) {
      double g = logistic(vg * dz)(0, 0);
      mix = g * mix + (1.0 - g) * (scatter * a);
    }
    return std::make_pair(mix, next);
  };

  std::vector<Hyp> beam;
  {
    Hyp root;
    root.state = std::make_shared<PlainDecState>();
    root.state->d = enc.d0;
    root.state->c = Mat::Zero(n, 1);
    root.state->s = initial_slot_state(*vocab_, form, s_dim_);
    beam.push_back(std::move(root));
  }

  for (int len = 0; len < cfg_.max_gen_len; ++len) {
    bool any_live = false;
    std::vector<Hyp> candidates;
    for (const auto& hyp : beam) {
      if (hyp.finished) {
        candidates.push_back(hyp);
        continue;
      }
      any_live = true;
      auto [mix, next] = advance(hyp.ids.empty() ? Vocabulary::kBos : hyp.ids.back(), *hyp.state);
      for (int v = 0; v < V; ++v) {
        Hyp child;
        child.ids = hyp.ids;
        child.ids.push_back(v);
        child.logp = hyp.logp + std::log(mix(v, 0));
        child.state = next;
        child.finished = (v == Vocabulary::kEos);
        candidates.push_back(std::move(child));
      }
    }
    if (!any_live) break;
    std::sort(candidates.begin(), candidates.end(), hyp_before);
    if (static_cast<int>(candidates.size()) > k) candidates.resize(k);
    beam = std::move(candidates);
  }

  std::vector<Generated> out;
  out.reserve(beam.size());
  for (const auto& hyp : beam) {
    Generated g;
    g.log_score = hyp.logp;
    g.truncated = !hyp.finished;
    for (int id : hyp.ids) {
      if (id == Vocabulary::kEos) break;  // only ever the last token of a finished hyp
      g.form.push_back(vocab_->is_delex_slot(id)
                           ? DelexToken{vocab_->slots[vocab_->delex_to_slot(id)], true}
                           : DelexToken{vocab_->words[id], false});
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace dualnlu::ssg
