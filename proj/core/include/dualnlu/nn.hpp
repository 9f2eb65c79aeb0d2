#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dualnlu/tape.hpp"

namespace dualnlu::ad {

// Standard LSTM with the four gates packed as [i; f; o; c] in one affine
// map over (x ⊕ h_prev). Provides both a tape step (training) and a plain
// matrix step (decoding); the two must produce identical values.
struct LstmCell {
  Tensor* w = nullptr;  // 4n x (in_dim + n)
  Tensor* b = nullptr;  // 4n x 1
  int n = 0;
  int in_dim = 0;

  static LstmCell create(ParamStore& ps, const std::string& prefix, int in_dim, int n, Rng& rng);
  static LstmCell bind(ParamStore& ps, const std::string& prefix, int in_dim, int n);

  struct State {
    Expr h, c;
  };
  struct PlainState {
    Mat h, c;
  };

  State initial(Tape& t) const;
  PlainState initial_plain() const;

  State step(Tape& t, const Expr& x, const State& prev) const;
  PlainState step_plain(const Mat& x, const PlainState& prev) const;
};

// h_t sequences for both directions; hiddens are n x 1 each.
struct Blstm {
  LstmCell fwd, bwd;

  static Blstm create(ParamStore& ps, const std::string& prefix, int in_dim, int n, Rng& rng);
  static Blstm bind(ParamStore& ps, const std::string& prefix, int in_dim, int n);

  struct Out {
    std::vector<Expr> forward;   // h→_1..h→_L
    std::vector<Expr> backward;  // h←_1..h←_L
    std::vector<Expr> concat;    // [h→_i ; h←_i], 2n x 1
  };
  struct PlainOut {
    std::vector<Mat> forward, backward, concat;
  };

  Out run(Tape& t, const std::vector<Expr>& xs) const;
  PlainOut run_plain(const std::vector<Mat>& xs) const;
};

// u_i = v^T tanh(W (q ⊕ e_i)); a = softmax(u); z = Σ a_i e_i
struct Attention {
  Tensor* w = nullptr;  // att_dim x (q_dim + e_dim)
  Tensor* v = nullptr;  // 1 x att_dim

  static Attention create(ParamStore& ps, const std::string& prefix, int q_dim, int e_dim,
                          int att_dim, Rng& rng);
  static Attention bind(ParamStore& ps, const std::string& prefix);

  struct Out {
    Expr context;  // e_dim x 1
    Expr weights;  // L x 1
  };
  struct PlainOut {
    Mat context, weights;
  };

  Out run(Tape& t, const Expr& q, const std::vector<Expr>& items) const;
  PlainOut run_plain(const Mat& q, const std::vector<Mat>& items) const;
};

Mat plain_softmax(const Mat& x);
Mat plain_log_softmax(const Mat& x);
double plain_logsumexp(const Mat& x);

}  // namespace dualnlu::ad
