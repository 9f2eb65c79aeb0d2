#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dualnlu/run.hpp"

// Thin argv adapter: every option funnels into the shared key=value
// override mechanism so flags, config file, and environment behave the
// same everywhere.
int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised NLU with a dual sentence generator"};
  app.require_subcommand(1);

  dualnlu::runner::Invocation inv;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", inv.config_path, "flat key = value configuration file");
    sub->add_option("-s,--set", inv.overrides, "override, e.g. --set seed=3")
        ->type_name("KEY=VALUE");
    auto alias = [&, sub](const char* flag, const char* key, const char* help) {
      sub->add_option_function<std::string>(
             flag,
             [&inv, key](const std::string& v) { inv.overrides.push_back(std::string(key) + "=" + v); },
             help)
          ->type_name("TEXT");
    };
    alias("--train", "train", "labeled training corpus");
    alias("--valid", "valid", "validation corpus");
    alias("--test", "test", "test corpus");
    alias("--output", "output_dir", "artifact directory");
    alias("--regime", "regime",
          "supervised|pl|dual-pl|dual-learning|combined|template-synthesis");
    alias("--mode", "mode", "softmax|crf|focus");
    alias("--ratio", "label_ratio", "labeled fraction of the training corpus");
    alias("--seed", "seed", "global random seed");
    return sub;
  };

  add_common(app.add_subcommand("prepare", "split a corpus (optionally synthesize one)"));
  add_common(app.add_subcommand("train", "run a training regime and evaluate on test"));
  add_common(app.add_subcommand("eval", "re-evaluate an existing checkpoint on test"));
  auto* gen = add_common(app.add_subcommand("generate", "realize sentences from a form file"));
  gen->add_option_function<std::string>(
         "--forms",
         [&inv](const std::string& v) { inv.overrides.push_back("forms=" + v); },
         "semantic form file, one intent<TAB>slot=value;... per line")
      ->type_name("TEXT");
  auto* sig = add_common(
      app.add_subcommand("significance", "McNemar test between two correctness files"));
  sig->add_option_function<std::string>(
         "--a", [&inv](const std::string& v) { inv.overrides.push_back("sig_a=" + v); },
         "first model's correctness file")
      ->type_name("TEXT");
  sig->add_option_function<std::string>(
         "--b", [&inv](const std::string& v) { inv.overrides.push_back("sig_b=" + v); },
         "second model's correctness file")
      ->type_name("TEXT");

  CLI11_PARSE(app, argc, argv);
  inv.subcommand = app.get_subcommands().front()->get_name();
  return dualnlu::runner::execute(inv, std::cout);
}
