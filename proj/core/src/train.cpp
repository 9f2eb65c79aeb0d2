#include "dualnlu/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "dualnlu/corpus.hpp"
#include "dualnlu/tape.hpp"

namespace dualnlu::train {

namespace {

// Fixed stream tags per phase and purpose, so disabling one model's updates
// never shifts the draws seen by the other.
constexpr uint64_t kPretrainShuffle = 0x10, kPretrainNluDrop = 0x11, kPretrainSsgDrop = 0x12;
constexpr uint64_t kPlNlu = 0x21, kPlSsg = 0x22;
constexpr uint64_t kDualX = 0x31, kDualY = 0x32, kDualSup = 0x33;
constexpr uint64_t kDualNluDrop = 0x34, kDualSsgDrop = 0x35;

constexpr double kBaselineDecay = 0.9;

SsgItem ssg_item_of(const LabeledExample& ex) {
  return {corpus::form_of(ex), corpus::delexicalize(ex.tokens, ex.tags)};
}

// Tracks the best validation average seen so far (ties keep the earliest)
// together with parameter snapshots of the models that produced it.
struct Selector {
  double best_avg = -1.0;
  Outcome out;
  std::map<std::string, ad::Mat> nlu_snap, ssg_snap;

  void consider(int epoch, const eval::Report& r, const nlu::Model& nlu_model,
                const ssg::Model* ssg_model) {
    if (r.avg <= best_avg) return;
    best_avg = r.avg;
    out.best_epoch = epoch;
    out.best_report = r;
    nlu_snap = nlu_model.params().snapshot();
    if (ssg_model) ssg_snap = ssg_model->params().snapshot();
  }

  void restore(nlu::Model& nlu_model, ssg::Model* ssg_model) const {
    nlu_model.params().restore(nlu_snap);
    if (ssg_model) ssg_model->params().restore(ssg_snap);
  }
};

void require_val(const std::vector<LabeledExample>& val) {
  if (val.empty()) throw ConfigError("training requires a non-empty validation split");
}

struct Origins {
  bool nlu_on_unlabeled = true;
  bool ssg_on_unexpressed = true;
  bool labeled = true;
};

std::vector<PseudoSample> build_samples(const nlu::Model& nlu_model, const ssg::Model* ssg_model,
                                        const Dataset& data, const Origins& origins,
                                        int iteration) {
  std::vector<PseudoSample> out;
  auto from_nlu = [&](const Tokens& x, Origin origin) {
    if (x.empty()) return;
    auto dec = nlu_model.decode_top1(x);
    out.push_back({origin, {x, dec.tags, dec.form.intent}, iteration});
  };
  auto from_ssg = [&](const SemanticForm& y, Origin origin) {
    auto gen = ssg_model->generate(y, 1).front();
    auto relex = corpus::relexicalize(gen.form, y.pairs);
    if (relex.tokens.empty()) return;
    out.push_back({origin, {relex.tokens, relex.tags, y.intent}, iteration});
  };

  if (origins.nlu_on_unlabeled)
    for (const auto& x : data.unlabeled_sentences) from_nlu(x, Origin::kNluOnUnlabeled);
  if (origins.ssg_on_unexpressed)
    for (const auto& y : data.unexpressed_forms) from_ssg(y, Origin::kSsgOnUnexpressed);
  if (origins.labeled) {
    for (const auto& ex : data.labeled) from_nlu(ex.tokens, Origin::kNluOnLabeled);
    for (const auto& ex : data.labeled) from_ssg(corpus::form_of(ex), Origin::kSsgOnLabeled);
  }
  return out;
}

// One shuffled weighted pass: mean of weight_j · loss_j per mini-batch,
// one optimizer step per batch.
void nlu_weighted_epoch(nlu::Model& model, ad::Adam& adam,
                        const std::vector<const LabeledExample*>& items,
                        const std::vector<double>& item_weights, int batch_size, Rng& rng) {
  auto perm = rng.permutation(items.size());
  for (size_t start = 0; start < perm.size(); start += batch_size) {
    size_t end = std::min(perm.size(), start + batch_size);
    std::vector<LabeledExample> batch;
    std::vector<double> w;
    for (size_t p = start; p < end; ++p) {
      batch.push_back(*items[perm[p]]);
      w.push_back(item_weights[perm[p]]);
    }
    accumulate_nlu(model, batch, w, 1.0 / static_cast<double>(batch.size()), true, &rng);
    adam.step(model.params());
  }
}

void ssg_weighted_epoch(ssg::Model& model, ad::Adam& adam, const std::vector<SsgItem>& items,
                        const std::vector<double>& item_weights, int batch_size, Rng& rng) {
  auto perm = rng.permutation(items.size());
  for (size_t start = 0; start < perm.size(); start += batch_size) {
    size_t end = std::min(perm.size(), start + batch_size);
    std::vector<SsgItem> batch;
    std::vector<double> w;
    for (size_t p = start; p < end; ++p) {
      batch.push_back(items[perm[p]]);
      w.push_back(item_weights[perm[p]]);
    }
    accumulate_ssg(model, batch, w, 1.0 / static_cast<double>(batch.size()), true, &rng);
    adam.step(model.params());
  }
}

Outcome run_pseudo_labeling(nlu::Model& nlu_model, ssg::Model* ssg_model, const Dataset& data,
                            const std::vector<LabeledExample>& val, const Config& cfg,
                            MetricsLog& log, const Origins& origins, const std::string& phase) {
  cfg.validate();
  require_val(val);
  Rng nlu_rng(Rng::mix(cfg.seed, kPlNlu));
  Rng ssg_rng(Rng::mix(cfg.seed, kPlSsg));
  ad::Adam adam_nlu(cfg.adam), adam_ssg(cfg.adam);

  Selector sel;
  auto r0 = eval::evaluate(nlu_model, val);
  log.record(phase, 0, "val", r0);
  sel.consider(0, r0, nlu_model, ssg_model);

  for (int i = 1; i <= cfg.pl_iterations; ++i) {
    auto samples = build_samples(nlu_model, ssg_model, data, origins, i);
    double w_i = pl_weight(i, cfg.pl_iterations);

    std::vector<const LabeledExample*> nlu_items;
    std::vector<double> nlu_w;
    for (const auto& ex : data.labeled) {
      nlu_items.push_back(&ex);
      nlu_w.push_back(1.0);
    }
    for (const auto& s : samples) {
      nlu_items.push_back(&s.example);
      nlu_w.push_back(w_i);
    }

    std::vector<SsgItem> ssg_items;
    std::vector<double> ssg_w;
    if (ssg_model) {
      for (const auto& ex : data.labeled) {
        ssg_items.push_back(ssg_item_of(ex));
        ssg_w.push_back(1.0);
      }
      for (const auto& s : samples) {
        ssg_items.push_back(ssg_item_of(s.example));
        ssg_w.push_back(w_i);
      }
    }

    for (int ep = 0; ep < cfg.pl_epochs; ++ep) {
      nlu_weighted_epoch(nlu_model, adam_nlu, nlu_items, nlu_w, cfg.batch_size, nlu_rng);
      if (ssg_model)
        ssg_weighted_epoch(*ssg_model, adam_ssg, ssg_items, ssg_w, cfg.batch_size, ssg_rng);
    }

    auto r = eval::evaluate(nlu_model, val);
    log.record(phase, i, "val", r);
    sel.consider(i, r, nlu_model, ssg_model);
  }

  sel.restore(nlu_model, ssg_model);
  return sel.out;
}

double centered(double reward, double* baseline) {
  if (!baseline) return reward;
  double c = reward - *baseline;
  *baseline = kBaselineDecay * *baseline + (1.0 - kBaselineDecay) * reward;
  return c;
}

}  // namespace

void Config::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (beam_k < 1) throw ConfigError("beam_k must be >= 1");
  if (pl_iterations < 0) throw ConfigError("pl_iterations must be >= 0");
  if (pl_epochs < 1) throw ConfigError("pl_epochs must be >= 1");
  if (dual_epochs < 0) throw ConfigError("dual_epochs must be >= 0");
  if (!(adam.lr > 0)) throw ConfigError("learning rate must be positive");
  weights.validate();
}

void MetricsLog::record(const std::string& phase, int epoch, const std::string& split,
                        const eval::Report& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "\t%d\t", epoch);
  std::string line = phase + buf + split;
  std::snprintf(buf, sizeof buf, "\t%.6f\t%.6f\t%.6f", r.intent_acc, r.slot_f1, r.avg);
  lines_.push_back(line + buf);
}

std::string MetricsLog::text() const {
  std::string out;
  for (const auto& l : lines_) {
    out += l;
    out += '\n';
  }
  return out;
}

void accumulate_nlu(nlu::Model& model, const std::vector<LabeledExample>& items,
                    const std::vector<double>& weights, double scale, bool train_mode,
                    Rng* dropout_rng) {
  if (items.size() != weights.size()) throw ConfigError("items/weights length mismatch");
  ad::Tape tape;
  std::vector<ad::Expr> terms;
  for (size_t j = 0; j < items.size(); ++j) {
    if (weights[j] == 0.0) continue;
    auto l = model.loss(tape, items[j], train_mode, dropout_rng);
    terms.push_back(ad::scale(l.total, weights[j]));
  }
  if (terms.empty()) return;
  tape.backward(ad::scale(ad::add_n(terms), scale));
}

void accumulate_ssg(ssg::Model& model, const std::vector<SsgItem>& items,
                    const std::vector<double>& weights, double scale, bool train_mode,
                    Rng* dropout_rng) {
  if (items.size() != weights.size()) throw ConfigError("items/weights length mismatch");
  ad::Tape tape;
  std::vector<ad::Expr> terms;
  for (size_t j = 0; j < items.size(); ++j) {
    if (weights[j] == 0.0) continue;
    auto l = model.loss(tape, items[j].form, items[j].target, train_mode, dropout_rng);
    terms.push_back(ad::scale(l.total, weights[j]));
  }
  if (terms.empty()) return;
  tape.backward(ad::scale(ad::add_n(terms), scale));
}

void nlu2ssg_step(nlu::Model& nlu_model, ssg::Model& ssg_model, const Tokens& x,
                  const DualContext& ctx, double scale, bool train_mode, Rng* nlu_rng,
                  Rng* ssg_rng) {
  if (x.empty()) return;
  auto hyps = nlu_model.beam_decode(x, ctx.beam_k);
  if (hyps.empty()) return;
  double k = static_cast<double>(hyps.size());

  std::vector<LabeledExample> nlu_items;
  std::vector<double> nlu_w;
  std::vector<SsgItem> ssg_items;
  std::vector<double> ssg_w;
  for (const auto& hyp : hyps) {
    double r_yval = rewards::semantic_validity(hyp.form, *ctx.db, *ctx.com, ctx.weights.lambda);
    auto gen = ssg_model.generate(hyp.form, 1).front();
    double r_xrec = 0.0;
    if (!gen.truncated) {
      auto relex = corpus::relexicalize(gen.form, hyp.form.pairs);
      r_xrec = rewards::bleu(x, relex.tokens);
    }
    double r1 = ctx.weights.alpha * r_yval + (1.0 - ctx.weights.alpha) * r_xrec;
    nlu_items.push_back({x, hyp.tags, hyp.form.intent});
    nlu_w.push_back(centered(r1, ctx.baseline_x));
    ssg_items.push_back({hyp.form, corpus::delexicalize(x, hyp.tags)});
    ssg_w.push_back(r_xrec);
  }
  accumulate_nlu(nlu_model, nlu_items, nlu_w, scale / k, train_mode, nlu_rng);
  accumulate_ssg(ssg_model, ssg_items, ssg_w, scale * (1.0 - ctx.weights.alpha) / k, train_mode,
                 ssg_rng);
}

void ssg2nlu_step(nlu::Model& nlu_model, ssg::Model& ssg_model, const SemanticForm& y,
                  const DualContext& ctx, double scale, bool train_mode, Rng* nlu_rng,
                  Rng* ssg_rng) {
  auto gens = ssg_model.generate(y, ctx.beam_k);
  if (gens.empty()) return;
  double k = static_cast<double>(gens.size());

  std::vector<LabeledExample> nlu_items;
  std::vector<double> nlu_w;
  std::vector<SsgItem> ssg_items;
  std::vector<double> ssg_w;
  for (const auto& gen : gens) {
    if (gen.truncated) continue;  // zero-reward sample, still counted in k
    auto relex = corpus::relexicalize(gen.form, y.pairs);
    if (relex.tokens.empty()) continue;
    double r_xval =
        rewards::sentence_validity(gen.form, y, *ctx.lm, relex.tokens, ctx.weights.gamma);
    auto dec = nlu_model.decode_top1(relex.tokens);
    double r_yrec = rewards::semantic_reconstruction(y, dec.form, ctx.weights.omega);
    double r2 = ctx.weights.beta * r_xval + (1.0 - ctx.weights.beta) * r_yrec;
    ssg_items.push_back({y, gen.form});
    ssg_w.push_back(centered(r2, ctx.baseline_y));
    nlu_items.push_back({relex.tokens, relex.tags, y.intent});
    nlu_w.push_back(r_yrec);
  }
  accumulate_ssg(ssg_model, ssg_items, ssg_w, scale / k, train_mode, ssg_rng);
  accumulate_nlu(nlu_model, nlu_items, nlu_w, scale * (1.0 - ctx.weights.beta) / k, train_mode,
                 nlu_rng);
}

Outcome pretrain_supervised(nlu::Model& nlu_model, ssg::Model& ssg_model, const Dataset& data,
                            const std::vector<LabeledExample>& val, const Config& cfg,
                            MetricsLog& log) {
  cfg.validate();
  require_val(val);
  if (data.labeled.empty()) throw ConfigError("pretraining requires labeled examples");
  Rng shuffle_rng(Rng::mix(cfg.seed, kPretrainShuffle));
  Rng nlu_drop(Rng::mix(cfg.seed, kPretrainNluDrop));
  Rng ssg_drop(Rng::mix(cfg.seed, kPretrainSsgDrop));
  ad::Adam adam_nlu(cfg.adam), adam_ssg(cfg.adam);

  std::vector<SsgItem> ssg_targets;
  for (const auto& ex : data.labeled) ssg_targets.push_back(ssg_item_of(ex));

  Selector sel;
  auto r0 = eval::evaluate(nlu_model, val);
  log.record("pretrain", 0, "val", r0);
  sel.consider(0, r0, nlu_model, &ssg_model);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto perm = shuffle_rng.permutation(data.labeled.size());
    for (size_t start = 0; start < perm.size(); start += cfg.batch_size) {
      size_t end = std::min(perm.size(), start + cfg.batch_size);
      std::vector<LabeledExample> nlu_batch;
      std::vector<SsgItem> ssg_batch;
      for (size_t p = start; p < end; ++p) {
        nlu_batch.push_back(data.labeled[perm[p]]);
        ssg_batch.push_back(ssg_targets[perm[p]]);
      }
      std::vector<double> ones(nlu_batch.size(), 1.0);
      double inv = 1.0 / static_cast<double>(nlu_batch.size());
      accumulate_nlu(nlu_model, nlu_batch, ones, inv, true, &nlu_drop);
      adam_nlu.step(nlu_model.params());
      accumulate_ssg(ssg_model, ssg_batch, ones, inv, true, &ssg_drop);
      adam_ssg.step(ssg_model.params());
    }
    auto r = eval::evaluate(nlu_model, val);
    log.record("pretrain", epoch, "val", r);
    sel.consider(epoch, r, nlu_model, &ssg_model);
  }

  sel.restore(nlu_model, &ssg_model);
  return sel.out;
}

std::vector<PseudoSample> make_pseudo_samples(const nlu::Model& nlu_model,
                                              const ssg::Model& ssg_model, const Dataset& data,
                                              bool include_labeled, int iteration) {
  Origins origins;
  origins.labeled = include_labeled;
  return build_samples(nlu_model, &ssg_model, data, origins, iteration);
}

double pl_weight(int iteration, int total_iterations) {
  if (total_iterations < 1 || iteration < 1 || iteration > total_iterations)
    throw ConfigError("pseudo-labeling iteration out of range");
  return static_cast<double>(iteration) / total_iterations;
}

Outcome dual_pseudo_labeling(nlu::Model& nlu_model, ssg::Model& ssg_model, const Dataset& data,
                             const std::vector<LabeledExample>& val, const Config& cfg,
                             MetricsLog& log) {
  Origins origins;
  origins.ssg_on_unexpressed = cfg.pl_include_ssg;
  origins.labeled = cfg.pl_include_labeled;
  return run_pseudo_labeling(nlu_model, &ssg_model, data, val, cfg, log, origins, "dual_pl");
}

Outcome pl_baseline(nlu::Model& nlu_model, const Dataset& data,
                    const std::vector<LabeledExample>& val, const Config& cfg, MetricsLog& log) {
  Origins origins;
  origins.ssg_on_unexpressed = false;
  origins.labeled = false;
  return run_pseudo_labeling(nlu_model, nullptr, data, val, cfg, log, origins, "pl");
}

Outcome dual_learning(nlu::Model& nlu_model, ssg::Model& ssg_model, const Dataset& data,
                      const std::vector<LabeledExample>& val, const LexiconDB& db,
                      const CoOccurrenceMatrix& com, const lm::Model& lm, const Config& cfg,
                      MetricsLog& log) {
  cfg.validate();
  require_val(val);
  if (data.labeled.empty()) throw ConfigError("dual learning requires labeled examples");
  Rng x_rng(Rng::mix(cfg.seed, kDualX));
  Rng y_rng(Rng::mix(cfg.seed, kDualY));
  Rng sup_rng(Rng::mix(cfg.seed, kDualSup));
  Rng nlu_drop(Rng::mix(cfg.seed, kDualNluDrop));
  Rng ssg_drop(Rng::mix(cfg.seed, kDualSsgDrop));
  ad::Adam adam_nlu(cfg.adam), adam_ssg(cfg.adam);

  double baseline_x = 0.0, baseline_y = 0.0;
  DualContext ctx;
  ctx.db = &db;
  ctx.com = &com;
  ctx.lm = &lm;
  ctx.weights = cfg.weights;
  ctx.beam_k = cfg.beam_k;
  if (cfg.reward_baseline) {
    ctx.baseline_x = &baseline_x;
    ctx.baseline_y = &baseline_y;
  }

  std::vector<const Tokens*> xs;
  for (const auto& ex : data.labeled) xs.push_back(&ex.tokens);
  for (const auto& s : data.unlabeled_sentences) xs.push_back(&s);
  std::vector<SemanticForm> ys;
  for (const auto& ex : data.labeled) ys.push_back(corpus::form_of(ex));
  for (const auto& f : data.unexpressed_forms) ys.push_back(f);

  std::vector<SsgItem> ssg_targets;
  for (const auto& ex : data.labeled) ssg_targets.push_back(ssg_item_of(ex));
  std::vector<size_t> sup_order = sup_rng.permutation(data.labeled.size());
  size_t sup_cursor = 0;
  auto next_sup_batch = [&](std::vector<LabeledExample>* nlu_batch,
                            std::vector<SsgItem>* ssg_batch) {
    for (int j = 0; j < cfg.batch_size; ++j) {
      if (sup_cursor == sup_order.size()) {
        sup_order = sup_rng.permutation(data.labeled.size());
        sup_cursor = 0;
      }
      size_t idx = sup_order[sup_cursor++];
      nlu_batch->push_back(data.labeled[idx]);
      ssg_batch->push_back(ssg_targets[idx]);
    }
  };

  Selector sel;
  auto r0 = eval::evaluate(nlu_model, val);
  log.record("dual", 0, "val", r0);
  sel.consider(0, r0, nlu_model, &ssg_model);

  for (int epoch = 1; epoch <= cfg.dual_epochs; ++epoch) {
    auto xperm = x_rng.permutation(xs.size());
    auto yperm = y_rng.permutation(ys.size());
    size_t y_cursor = 0;
    for (size_t start = 0; start < xperm.size(); start += cfg.batch_size) {
      size_t end = std::min(xperm.size(), start + cfg.batch_size);
      double bx = static_cast<double>(end - start);
      for (size_t p = start; p < end; ++p)
        nlu2ssg_step(nlu_model, ssg_model, *xs[xperm[p]], ctx, 1.0 / bx, true, &nlu_drop,
                     &ssg_drop);

      if (y_cursor < yperm.size()) {
        size_t yend = std::min(yperm.size(), y_cursor + cfg.batch_size);
        double by = static_cast<double>(yend - y_cursor);
        for (; y_cursor < yend; ++y_cursor)
          ssg2nlu_step(nlu_model, ssg_model, ys[yperm[y_cursor]], ctx, 1.0 / by, true, &nlu_drop,
                       &ssg_drop);
      }

      std::vector<LabeledExample> sup_nlu;
      std::vector<SsgItem> sup_ssg;
      next_sup_batch(&sup_nlu, &sup_ssg);
      std::vector<double> ones(sup_nlu.size(), 1.0);
      double inv = 1.0 / static_cast<double>(sup_nlu.size());
      accumulate_nlu(nlu_model, sup_nlu, ones, inv, true, &nlu_drop);
      accumulate_ssg(ssg_model, sup_ssg, ones, inv, true, &ssg_drop);

      adam_nlu.step(nlu_model.params());
      adam_ssg.step(ssg_model.params());
    }
    auto r = eval::evaluate(nlu_model, val);
    log.record("dual", epoch, "val", r);
    sel.consider(epoch, r, nlu_model, &ssg_model);
  }

  sel.restore(nlu_model, &ssg_model);
  return sel.out;
}

Outcome combined_training(nlu::Model& nlu_model, ssg::Model& ssg_model, const Dataset& data,
                          const std::vector<LabeledExample>& val, const LexiconDB& db,
                          const CoOccurrenceMatrix& com, const lm::Model& lm, const Config& cfg,
                          MetricsLog& log) {
  pretrain_supervised(nlu_model, ssg_model, data, val, cfg, log);
  dual_pseudo_labeling(nlu_model, ssg_model, data, val, cfg, log);
  return dual_learning(nlu_model, ssg_model, data, val, db, com, lm, cfg, log);
}

}  // namespace dualnlu::train
