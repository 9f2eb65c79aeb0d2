#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dualnlu/nlu.hpp"
#include "dualnlu/train.hpp"

namespace dualnlu::cfg {

// Everything a run needs, assembled as defaults ← environment ← config
// file ← command-line overrides (later layers win).
struct RunConfig {
  std::string train_path, valid_path, test_path;
  std::string embeddings_path, forms_path;
  std::string output_dir = "run_out";
  std::string checkpoint_dir;  // empty: <output_dir>/checkpoints
  std::string sig_a, sig_b;    // correctness files for significance

  std::string mode = "focus";
  std::string regime = "combined";
  double label_ratio = 0.1;
  uint64_t seed = 1;
  int min_count = 1;

  int emb_dim = 400, hidden = 256, tag_emb_dim = 100, intent_emb_dim = 100;
  double dropout = 0.5;
  int max_gen_len = 60;
  int lm_emb_dim = 100, lm_hidden = 100, lm_epochs = 10;

  // bundled grammar emission in `prepare`; 0 disables
  int synth_total = 0, synth_valid = 0, synth_test = 0;

  train::Config training;

  nlu::Mode nlu_mode() const { return nlu::mode_from_string(mode); }
  void validate() const;

  // every known key with its current value, in a fixed order
  std::vector<std::pair<std::string, std::string>> to_kv() const;
};

const std::vector<std::string>& config_keys();

// seed fallback from DUALNLU_SEED when set
RunConfig defaults_with_env();

// flat "key = value" lines; '#' starts a comment; unknown keys are
// reported together in one error
void load_file(RunConfig& rc, const std::string& path);
void apply_overrides(RunConfig& rc, const std::vector<std::string>& assignments);
void set_key(RunConfig& rc, const std::string& key, const std::string& value);

}  // namespace dualnlu::cfg
