#include <benchmark/benchmark.h>

#include "dualnlu/corpus.hpp"
#include "dualnlu/nlu.hpp"
#include "dualnlu/rewards.hpp"
#include "dualnlu/ssg.hpp"
#include "dualnlu/synth.hpp"

using namespace dualnlu;

namespace {

struct Fixture {
  Vocabulary vocab;
  std::vector<LabeledExample> examples;

  Fixture() {
    examples = synth::generate(400, 1234);
    Dataset d;
    d.labeled = examples;
    vocab = corpus::build_vocab(d);
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

nlu::Config nlu_cfg(nlu::Mode mode) {
  nlu::Config c;
  c.mode = mode;
  c.emb_dim = 64;
  c.hidden = 64;
  c.tag_emb_dim = 32;
  c.dropout = 0.0;
  return c;
}

}  // namespace

static void BM_CrfPartition(benchmark::State& state) {
  int len = static_cast<int>(state.range(0));
  int n_tags = 13;
  Rng rng(1);
  std::vector<ad::Mat> em;
  for (int t = 0; t < len; ++t) {
    ad::Mat e(n_tags, 1);
    for (int i = 0; i < n_tags; ++i) e(i, 0) = rng.uniform(-2.0, 2.0);
    em.push_back(e);
  }
  ad::Mat a(n_tags, n_tags);
  for (int i = 0; i < n_tags; ++i)
    for (int j = 0; j < n_tags; ++j) a(i, j) = rng.uniform(-2.0, 2.0);

  for (auto _ : state) benchmark::DoNotOptimize(nlu::crf_log_partition(em, a));
}
BENCHMARK(BM_CrfPartition)->Arg(10)->Arg(30)->Arg(60);

static void BM_Viterbi(benchmark::State& state) {
  int len = static_cast<int>(state.range(0));
  int n_tags = 13;
  Rng rng(2);
  std::vector<ad::Mat> em;
  for (int t = 0; t < len; ++t) {
    ad::Mat e(n_tags, 1);
    for (int i = 0; i < n_tags; ++i) e(i, 0) = rng.uniform(-2.0, 2.0);
    em.push_back(e);
  }
  ad::Mat a(n_tags, n_tags);
  for (int i = 0; i < n_tags; ++i)
    for (int j = 0; j < n_tags; ++j) a(i, j) = rng.uniform(-2.0, 2.0);

  for (auto _ : state) benchmark::DoNotOptimize(nlu::viterbi_decode(em, a));
}
BENCHMARK(BM_Viterbi)->Arg(10)->Arg(30)->Arg(60);

static void BM_NluTop1(benchmark::State& state) {
  const auto& f = fixture();
  Rng rng(3);
  nlu::Model model(f.vocab, nlu_cfg(nlu::Mode::kFocus), rng);
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.decode_top1(f.examples[i % f.examples.size()].tokens));
    ++i;
  }
}
BENCHMARK(BM_NluTop1);

static void BM_NluBeam(benchmark::State& state) {
  const auto& f = fixture();
  Rng rng(4);
  nlu::Model model(f.vocab, nlu_cfg(nlu::Mode::kFocus), rng);
  int k = static_cast<int>(state.range(0));
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.beam_decode(f.examples[i % f.examples.size()].tokens, k));
    ++i;
  }
}
BENCHMARK(BM_NluBeam)->Arg(1)->Arg(5)->Arg(10);

static void BM_SsgGenerate(benchmark::State& state) {
  const auto& f = fixture();
  ssg::Config cfg;
  cfg.emb_dim = 64;
  cfg.hidden = 64;
  cfg.intent_emb_dim = 32;
  cfg.dropout = 0.0;
  cfg.max_gen_len = 30;
  Rng rng(5);
  ssg::Model model(f.vocab, cfg, rng);
  int k = static_cast<int>(state.range(0));
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        model.generate(corpus::form_of(f.examples[i % f.examples.size()]), k));
    ++i;
  }
}
BENCHMARK(BM_SsgGenerate)->Arg(1)->Arg(5);

static void BM_Bleu(benchmark::State& state) {
  const auto& f = fixture();
  size_t i = 0;
  for (auto _ : state) {
    const auto& a = f.examples[i % f.examples.size()].tokens;
    const auto& b = f.examples[(i + 7) % f.examples.size()].tokens;
    benchmark::DoNotOptimize(rewards::bleu(a, b));
    ++i;
  }
}
BENCHMARK(BM_Bleu);

BENCHMARK_MAIN();
