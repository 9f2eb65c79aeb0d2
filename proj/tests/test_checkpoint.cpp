#include "dualnlu/checkpoint.hpp"

#include "doctest.h"
#include "test_util.hpp"

using namespace dualnlu;
using namespace dualnlu::ad;

TEST_CASE("checkpoint round-trips tensors and metadata") {
  Rng rng(1);
  ParamStore store;
  store.add("layer.w", 3, 4, rng);
  store.add("layer.b", 3, 1, rng);

  ckpt::Metadata meta;
  meta.component = "nlu";
  meta.mode = "focus";
  meta.hidden = 3;
  meta.emb_dim = 4;
  meta.vocab_hash = 0xdeadbeefcafe1234ull;
  meta.epoch = 7;
  meta.intent_acc = 0.75;
  meta.slot_f1 = 0.5;
  meta.avg = 0.625;

  std::string path = testutil::tmp_path("round_trip.ckpt");
  ckpt::save(path, store, meta);

  auto peeked = ckpt::peek(path);
  CHECK(peeked.component == "nlu");
  CHECK(peeked.mode == "focus");
  CHECK(peeked.vocab_hash == meta.vocab_hash);
  CHECK(peeked.epoch == 7);
  CHECK(peeked.avg == doctest::Approx(0.625));

  Rng rng2(999);
  ParamStore loaded;
  loaded.add("layer.w", 3, 4, rng2);
  loaded.add("layer.b", 3, 1, rng2);
  auto meta2 = ckpt::load(path, loaded);
  CHECK(meta2.intent_acc == doctest::Approx(0.75));
  // payload is 32-bit
  CHECK((loaded.at("layer.w").value - store.at("layer.w").value).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((loaded.at("layer.b").value - store.at("layer.b").value).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("checkpoint load validates names and shapes") {
  Rng rng(2);
  ParamStore store;
  store.add("only.w", 2, 2, rng);
  std::string path = testutil::tmp_path("validate.ckpt");
  ckpt::save(path, store, {.component = "lm"});

  ParamStore wrong_shape;
  wrong_shape.add("only.w", 2, 3, rng);
  CHECK_THROWS_AS(ckpt::load(path, wrong_shape), DataError);

  ParamStore wrong_name;
  wrong_name.add("other.w", 2, 2, rng);
  CHECK_THROWS_AS(ckpt::load(path, wrong_name), DataError);

  ParamStore superset;
  superset.add("only.w", 2, 2, rng);
  superset.add("extra.w", 1, 1, rng);
  CHECK_THROWS_AS(ckpt::load(path, superset), DataError);
}

TEST_CASE("checkpoint rejects garbage files") {
  std::string path = testutil::write_file("garbage.ckpt", "not a checkpoint at all");
  CHECK_THROWS_AS(ckpt::peek(path), DataError);
  CHECK_THROWS_AS(ckpt::peek(testutil::tmp_path("missing.ckpt")), DataError);

  std::string truncated = testutil::write_file("short.ckpt", std::string("DNLU\x01\x00", 6));
  CHECK_THROWS_AS(ckpt::peek(truncated), DataError);
}
