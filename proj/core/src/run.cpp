#include "dualnlu/run.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "dualnlu/checkpoint.hpp"
#include "dualnlu/corpus.hpp"
#include "dualnlu/eval.hpp"
#include "dualnlu/synth.hpp"
#include "dualnlu/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace dualnlu::runner {

namespace {

constexpr uint64_t kSplitStream = 0x50, kEmbStream = 0x51, kNluInit = 0x52, kSsgInit = 0x53,
                   kLmStream = 0x54;

std::string hex64(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlu::Config nlu_config(const cfg::RunConfig& rc) {
  nlu::Config c;
  c.mode = rc.nlu_mode();
  c.emb_dim = rc.emb_dim;
  c.hidden = rc.hidden;
  c.tag_emb_dim = rc.tag_emb_dim;
  c.dropout = rc.dropout;
  return c;
}

ssg::Config ssg_config(const cfg::RunConfig& rc) {
  ssg::Config c;
  c.emb_dim = rc.emb_dim;
  c.hidden = rc.hidden;
  c.intent_emb_dim = rc.intent_emb_dim;
  c.dropout = rc.dropout;
  c.max_gen_len = rc.max_gen_len;
  return c;
}

std::string ckpt_dir(const cfg::RunConfig& rc) {
  return rc.checkpoint_dir.empty() ? rc.output_dir + "/checkpoints" : rc.checkpoint_dir;
}

struct Prepared {
  std::vector<LabeledExample> val;
  Dataset data;  // semi-split of the training corpus
  Vocabulary vocab;
};

// The vocabulary is built from the training split only; validation and
// test words fall back to the unknown symbol. Checkpoint consumers
// (eval, generate) rebuild the same vocabulary without a validation set.
Prepared load_for_training(const cfg::RunConfig& rc, bool need_valid = true) {
  if (rc.train_path.empty()) throw ConfigError("'train' path is required");
  if (need_valid && rc.valid_path.empty()) throw ConfigError("'valid' path is required");
  Prepared p;
  auto labeled = corpus::load_labeled(rc.train_path);
  if (!rc.valid_path.empty()) p.val = corpus::load_labeled(rc.valid_path);
  p.data = corpus::make_semi_split(labeled, rc.label_ratio, Rng::mix(rc.seed, kSplitStream));
  p.vocab = corpus::build_vocab(p.data, rc.min_count);
  return p;
}

nlohmann::json base_manifest(const cfg::RunConfig& rc) {
  nlohmann::json j;
  j["version"] = DUALNLU_VERSION;
  j["seed"] = rc.seed;
  nlohmann::json echo;
  for (const auto& [k, v] : rc.to_kv()) echo[k] = v;
  j["config"] = echo;
  nlohmann::json hashes;
  auto add_hash = [&](const char* name, const std::string& path) {
    if (!path.empty()) hashes[name] = hex64(corpus::hash_file(path));
  };
  add_hash("train", rc.train_path);
  add_hash("valid", rc.valid_path);
  add_hash("test", rc.test_path);
  add_hash("embeddings", rc.embeddings_path);
  add_hash("forms", rc.forms_path);
  j["data_hashes"] = hashes;
  return j;
}

void write_manifest(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
}

ckpt::Metadata model_meta(const std::string& component, const cfg::RunConfig& rc,
                          const Vocabulary& vocab, const train::Outcome& outcome) {
  ckpt::Metadata m;
  m.component = component;
  m.mode = rc.mode;
  m.hidden = rc.hidden;
  m.emb_dim = rc.emb_dim;
  m.vocab_hash = vocab.hash();
  m.epoch = outcome.best_epoch;
  m.intent_acc = outcome.best_report.intent_acc;
  m.slot_f1 = outcome.best_report.slot_f1;
  m.avg = outcome.best_report.avg;
  return m;
}

lm::Model train_language_model(const cfg::RunConfig& rc, const Prepared& p) {
  std::vector<Tokens> train_sents;
  for (const auto& ex : p.data.labeled) train_sents.push_back(ex.tokens);
  for (const auto& s : p.data.unlabeled_sentences) train_sents.push_back(s);
  std::vector<Tokens> val_sents;
  for (const auto& ex : p.val) val_sents.push_back(ex.tokens);
  lm::TrainConfig ltc;
  ltc.epochs = rc.lm_epochs;
  ltc.batch_size = rc.training.batch_size;
  ltc.model.emb_dim = rc.lm_emb_dim;
  ltc.model.hidden = rc.lm_hidden;
  return lm::train_lm(p.vocab, train_sents, val_sents, ltc, Rng::mix(rc.seed, kLmStream));
}

int run_prepare(const cfg::RunConfig& rc, std::ostream& out) {
  fs::create_directories(rc.output_dir + "/prepared");
  const std::string dir = rc.output_dir + "/prepared/";

  cfg::RunConfig eff = rc;  // effective paths after optional synthesis
  if (rc.synth_total > 0) {
    int n_test = rc.synth_test > 0 ? rc.synth_test : std::max(1, rc.synth_total / 4);
    int n_valid = rc.synth_valid > 0 ? rc.synth_valid : std::max(1, rc.synth_total / 8);
    if (n_test + n_valid >= rc.synth_total)
      throw ConfigError("synth_valid + synth_test must leave room for training data");
    auto all = synth::generate(rc.synth_total, rc.seed);
    std::vector<LabeledExample> train_part(all.begin(), all.end() - n_test - n_valid);
    std::vector<LabeledExample> valid_part(all.end() - n_test - n_valid, all.end() - n_test);
    std::vector<LabeledExample> test_part(all.end() - n_test, all.end());
    corpus::save_labeled(dir + "train.txt", train_part);
    corpus::save_labeled(dir + "valid.txt", valid_part);
    corpus::save_labeled(dir + "test.txt", test_part);
    out << "synthesized " << all.size() << " examples -> " << dir << "{train,valid,test}.txt\n";
    if (eff.train_path.empty()) eff.train_path = dir + "train.txt";
    if (eff.valid_path.empty()) eff.valid_path = dir + "valid.txt";
    if (eff.test_path.empty()) eff.test_path = dir + "test.txt";
  }

  if (eff.train_path.empty()) throw ConfigError("'train' path or synth_total is required");
  auto labeled = corpus::load_labeled(eff.train_path);
  Dataset data = corpus::make_semi_split(labeled, eff.label_ratio, Rng::mix(eff.seed, kSplitStream));
  corpus::save_labeled(dir + "labeled.txt", data.labeled);
  corpus::save_sentences(dir + "unlabeled.txt", data.unlabeled_sentences);
  corpus::save_forms(dir + "forms.txt", data.unexpressed_forms);
  auto vocab = corpus::build_vocab(data, eff.min_count);
  corpus::dump_vocab(dir + "vocab.txt", vocab.words);

  auto j = base_manifest(eff);
  j["artifacts"] = {{"labeled", dir + "labeled.txt"},
                    {"unlabeled", dir + "unlabeled.txt"},
                    {"forms", dir + "forms.txt"},
                    {"vocab", dir + "vocab.txt"}};
  j["vocab_hash"] = hex64(vocab.hash());
  write_manifest(rc.output_dir + "/manifest.json", j);

  out << "split " << labeled.size() << " examples: " << data.labeled.size() << " labeled, "
      << data.unlabeled_sentences.size() << " unlabeled sentences, "
      << data.unexpressed_forms.size() << " unexpressed forms\n";
  out << "vocabulary: " << vocab.n_words() << " words, " << vocab.n_tags() << " tags, "
      << vocab.n_intents() << " intents, " << vocab.n_slots() << " slots\n";
  return 0;
}

int run_train(const cfg::RunConfig& rc, std::ostream& out) {
  if (rc.test_path.empty()) throw ConfigError("'test' path is required");
  Prepared p = load_for_training(rc);
  fs::create_directories(rc.output_dir);
  fs::create_directories(ckpt_dir(rc));

  Rng nlu_rng(Rng::mix(rc.seed, kNluInit));
  std::optional<ad::Mat> pre_emb;
  if (!rc.embeddings_path.empty()) {
    Rng emb_rng(Rng::mix(rc.seed, kEmbStream));
    pre_emb = corpus::init_embeddings(p.vocab, rc.emb_dim, emb_rng, rc.embeddings_path);
  }
  nlu::Model nlu_model(p.vocab, nlu_config(rc), nlu_rng, pre_emb);
  Rng ssg_rng(Rng::mix(rc.seed, kSsgInit));
  ssg::Model ssg_model(p.vocab, ssg_config(rc), ssg_rng);

  train::Config tcfg = rc.training;
  tcfg.seed = rc.seed;
  train::MetricsLog log;
  train::Outcome outcome;
  std::optional<lm::Model> lm_model;
  auto db = corpus::build_lexicon_db(p.data.labeled);
  auto com = corpus::build_com(p.data.labeled);

  if (rc.regime == "supervised") {
    outcome = train::pretrain_supervised(nlu_model, ssg_model, p.data, p.val, tcfg, log);
  } else if (rc.regime == "template-synthesis") {
    Dataset aug = p.data;
    for (auto& ex : corpus::template_synthesis(p.data.labeled, p.data.unexpressed_forms))
      aug.labeled.push_back(std::move(ex));
    out << "template synthesis: " << p.data.labeled.size() << " labeled -> "
        << aug.labeled.size() << " training examples\n";
    outcome = train::pretrain_supervised(nlu_model, ssg_model, aug, p.val, tcfg, log);
  } else if (rc.regime == "pl") {
    train::pretrain_supervised(nlu_model, ssg_model, p.data, p.val, tcfg, log);
    outcome = train::pl_baseline(nlu_model, p.data, p.val, tcfg, log);
  } else if (rc.regime == "dual-pl") {
    train::pretrain_supervised(nlu_model, ssg_model, p.data, p.val, tcfg, log);
    outcome = train::dual_pseudo_labeling(nlu_model, ssg_model, p.data, p.val, tcfg, log);
  } else if (rc.regime == "dual-learning") {
    train::pretrain_supervised(nlu_model, ssg_model, p.data, p.val, tcfg, log);
    lm_model = train_language_model(rc, p);
    outcome = train::dual_learning(nlu_model, ssg_model, p.data, p.val, db, com, *lm_model, tcfg,
                                   log);
  } else {  // combined
    lm_model = train_language_model(rc, p);
    outcome = train::combined_training(nlu_model, ssg_model, p.data, p.val, db, com, *lm_model,
                                       tcfg, log);
  }

  // test data is touched only now, after every training decision is made
  auto test = corpus::load_labeled(rc.test_path);
  auto report = eval::evaluate(nlu_model, test);
  log.record("final", 0, "test", report);

  write_text(rc.output_dir + "/metrics.log", log.text());
  write_text(rc.output_dir + "/report.txt", eval::report_kv(report));
  eval::save_correctness(rc.output_dir + "/correctness.tsv", report);

  const std::string cdir = ckpt_dir(rc);
  ckpt::save(cdir + "/nlu.ckpt", nlu_model.params(), model_meta("nlu", rc, p.vocab, outcome));
  ckpt::save(cdir + "/ssg.ckpt", ssg_model.params(), model_meta("ssg", rc, p.vocab, outcome));
  if (lm_model)
    ckpt::save(cdir + "/lm.ckpt", lm_model->params(), model_meta("lm", rc, p.vocab, outcome));

  auto j = base_manifest(rc);
  j["vocab_hash"] = hex64(p.vocab.hash());
  j["best_epoch"] = outcome.best_epoch;
  nlohmann::json arts{{"metrics", rc.output_dir + "/metrics.log"},
                      {"report", rc.output_dir + "/report.txt"},
                      {"correctness", rc.output_dir + "/correctness.tsv"},
                      {"nlu_checkpoint", cdir + "/nlu.ckpt"},
                      {"ssg_checkpoint", cdir + "/ssg.ckpt"}};
  if (lm_model) arts["lm_checkpoint"] = cdir + "/lm.ckpt";
  j["artifacts"] = arts;
  write_manifest(rc.output_dir + "/manifest.json", j);

  out << "regime " << rc.regime << ", best validation epoch " << outcome.best_epoch << "\n";
  out << eval::report_table(report);
  out << "artifacts in " << rc.output_dir << "\n";
  return 0;
}

// Rebuilds the vocabulary exactly as training did and loads a checkpoint
// into a freshly constructed model; the stored vocabulary hash guards
// against mismatched data.
void check_vocab(const ckpt::Metadata& meta, const Vocabulary& vocab, const std::string& path) {
  if (meta.vocab_hash != vocab.hash())
    throw DataError("checkpoint " + path + " was trained with a different vocabulary");
}

int run_eval(const cfg::RunConfig& rc, std::ostream& out) {
  if (rc.test_path.empty()) throw ConfigError("'test' path is required");
  Prepared p = load_for_training(rc, /*need_valid=*/false);
  const std::string path = ckpt_dir(rc) + "/nlu.ckpt";

  auto meta = ckpt::peek(path);
  if (meta.component != "nlu") throw DataError(path + " is not an NLU checkpoint");
  if (meta.mode != rc.mode)
    throw ConfigError("checkpoint mode '" + meta.mode + "' does not match config '" + rc.mode +
                      "'");
  check_vocab(meta, p.vocab, path);
  Rng init_rng(Rng::mix(rc.seed, kNluInit));
  nlu::Model nlu_model(p.vocab, nlu_config(rc), init_rng);
  ckpt::load(path, nlu_model.params());

  auto test = corpus::load_labeled(rc.test_path);
  auto report = eval::evaluate(nlu_model, test);
  fs::create_directories(rc.output_dir);
  write_text(rc.output_dir + "/report.txt", eval::report_kv(report));
  eval::save_correctness(rc.output_dir + "/correctness.tsv", report);
  out << eval::report_table(report);
  return 0;
}

int run_generate(const cfg::RunConfig& rc, std::ostream& out) {
  if (rc.forms_path.empty()) throw ConfigError("'forms' path is required");
  Prepared p = load_for_training(rc, /*need_valid=*/false);
  const std::string path = ckpt_dir(rc) + "/ssg.ckpt";

  auto meta = ckpt::peek(path);
  if (meta.component != "ssg") throw DataError(path + " is not a generator checkpoint");
  check_vocab(meta, p.vocab, path);
  Rng init_rng(Rng::mix(rc.seed, kSsgInit));
  ssg::Model ssg_model(p.vocab, ssg_config(rc), init_rng);
  ckpt::load(path, ssg_model.params());

  for (const auto& form : corpus::load_forms(rc.forms_path)) {
    auto gen = ssg_model.generate(form, 1).front();
    auto relex = corpus::relexicalize(gen.form, form.pairs);
    std::string line;
    for (size_t i = 0; i < relex.tokens.size(); ++i) {
      if (i) line += ' ';
      line += relex.tokens[i];
    }
    out << line << "\n";
  }
  return 0;
}

int run_significance(const cfg::RunConfig& rc, std::ostream& out) {
  if (rc.sig_a.empty() || rc.sig_b.empty())
    throw ConfigError("'sig_a' and 'sig_b' correctness paths are required");
  auto a = eval::load_correctness(rc.sig_a);
  auto b = eval::load_correctness(rc.sig_b);

  out << "vector\tb\tc\tstatistic\tp_value\tsignificant\n";
  auto row = [&](const char* name, const std::vector<uint8_t>& va, const std::vector<uint8_t>& vb) {
    auto m = eval::mcnemar(va, vb);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s\t%d\t%d\t%.6f\t%.6f\t%d\n", name, m.b, m.c, m.statistic,
                  m.p_value, m.significant ? 1 : 0);
    out << buf;
  };
  row("intent", a.intent, b.intent);
  row("slots", a.slots, b.slots);
  row("joint", a.joint, b.joint);
  return 0;
}

}  // namespace

int execute(const Invocation& inv, std::ostream& out) {
  try {
    cfg::RunConfig rc = cfg::defaults_with_env();
    if (!inv.config_path.empty()) cfg::load_file(rc, inv.config_path);
    cfg::apply_overrides(rc, inv.overrides);
    rc.validate();

    if (inv.subcommand == "prepare") return run_prepare(rc, out);
    if (inv.subcommand == "train") return run_train(rc, out);
    if (inv.subcommand == "eval") return run_eval(rc, out);
    if (inv.subcommand == "generate") return run_generate(rc, out);
    if (inv.subcommand == "significance") return run_significance(rc, out);
    throw ConfigError("unknown subcommand '" + inv.subcommand +
                      "' (expected prepare|train|eval|generate|significance)");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace dualnlu::runner
