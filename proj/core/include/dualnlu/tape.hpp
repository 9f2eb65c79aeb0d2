#pragma once

#include <functional>
#include <vector>

#include "dualnlu/params.hpp"
#include "dualnlu/rng.hpp"

namespace dualnlu::ad {

class Tape;

// Handle to a tape node; valid until the tape is cleared or destroyed.
class Expr {
 public:
  Expr() = default;
  Expr(Tape* tape, int idx) : tape_(tape), idx_(idx) {}

  const Mat& value() const;
  double scalar() const;  // value of a 1x1 node
  Tape* tape() const { return tape_; }
  int idx() const { return idx_; }
  explicit operator bool() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int idx_ = -1;
};

// Reverse-mode tape. Nodes are appended in forward (topological) order;
// backward() walks them in reverse, pushing each node's accumulated
// gradient into its inputs' slots or, for parameter leaves, into the
// owning Tensor's grad.
class Tape {
 public:
  struct Node {
    Mat value;
    Mat grad;  // empty until some consumer accumulates into it
    std::function<void(Tape&, const Mat&)> back;
    Tensor* param = nullptr;
  };

  Expr make(Mat value, std::function<void(Tape&, const Mat&)> back = nullptr,
            Tensor* param = nullptr);

  const Node& node(int i) const { return nodes_[i]; }
  void accum(int idx, const Mat& g);

  void backward(const Expr& root);  // root must be 1x1

  void clear() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

// ---- graph-building operations ----
// Column-vector convention: activations are d x 1 unless stated otherwise.

Expr input(Tape& t, Mat value);
Expr input(Tape& t, double value);

Expr param(Tape& t, Tensor& p);                   // full copy; use for small params
Expr lookup(Tape& t, Tensor& table, int row);     // row of table as a column vector
Expr matmul(Tape& t, Tensor& w, const Expr& x);   // w.value * x
Expr affine(Tape& t, Tensor& w, const Expr& x, Tensor& b);

Expr add(const Expr& a, const Expr& b);
Expr sub(const Expr& a, const Expr& b);
Expr neg(const Expr& a);
Expr cmult(const Expr& a, const Expr& b);         // componentwise
Expr matmul_ee(const Expr& a, const Expr& b);     // general product of two nodes
Expr add_n(const std::vector<Expr>& xs);
Expr scale(const Expr& a, double s);
Expr concat(const std::vector<Expr>& xs);         // stack column vectors
Expr slice(const Expr& a, int start, int len);    // rows [start, start+len)
Expr transpose(const Expr& a);

Expr tanh_(const Expr& a);
Expr sigmoid(const Expr& a);
Expr exp_(const Expr& a);
Expr log_(const Expr& a);

Expr softmax(const Expr& a);       // column vector
Expr log_softmax(const Expr& a);   // column vector
Expr pick(const Expr& a, int i);   // element i of a column vector, as 1x1
Expr sum_all(const Expr& a);
Expr dot(const Expr& a, const Expr& b);
Expr l2_norm(const Expr& a);       // Euclidean norm; subgradient 0 at 0
Expr logsumexp(const Expr& a);     // over all elements of a column vector

// m + v broadcast to every column (v is rows(m) x 1)
Expr add_col_broadcast(const Expr& m, const Expr& v);
// column vector of log-sum-exp per column of m
Expr colwise_logsumexp(const Expr& m);

// Inverted dropout; identity when rate == 0.
Expr dropout(Tape& t, const Expr& a, double rate, Rng& rng);

}  // namespace dualnlu::ad
