#pragma once

#include <string>

#include "dualnlu/params.hpp"

namespace dualnlu::ckpt {

// Sidecar information stored with the weights. `component` is one of
// "nlu", "ssg", "lm"; `mode` is the tagger mode for nlu checkpoints.
struct Metadata {
  std::string component;
  std::string mode;
  int hidden = 0;
  int emb_dim = 0;
  uint64_t vocab_hash = 0;
  int epoch = 0;
  double intent_acc = 0.0;
  double slot_f1 = 0.0;
  double avg = 0.0;
};

// Binary layout (version 1, little-endian):
//   "DNLU" | u32 version | u32 meta_len | meta JSON
//   | u32 n_tensors | { u32 name_len | name | u32 rows | u32 cols
//                     | rows*cols f32, row-major } ...
void save(const std::string& path, const ad::ParamStore& params, const Metadata& meta);

Metadata peek(const std::string& path);

// Fills an already-constructed store; every stored tensor must be present
// in the file with a matching shape.
Metadata load(const std::string& path, ad::ParamStore& params);

}  // namespace dualnlu::ckpt
