#include "dualnlu/tape.hpp"

#include <cassert>
#include <cmath>

namespace dualnlu::ad {

const Mat& Expr::value() const { return tape_->node(idx_).value; }

double Expr::scalar() const {
  const Mat& v = value();
  assert(v.rows() == 1 && v.cols() == 1);
  return v(0, 0);
}

Expr Tape::make(Mat value, std::function<void(Tape&, const Mat&)> back, Tensor* param) {
  nodes_.push_back(Node{std::move(value), Mat(), std::move(back), param});
  return Expr(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accum(int idx, const Mat& g) {
  Mat& dst = nodes_[idx].grad;
  if (dst.size() == 0)
    dst = g;
  else
    dst += g;
}

void Tape::backward(const Expr& root) {
  assert(root.tape() == this);
  Node& r = nodes_[root.idx()];
  assert(r.value.rows() == 1 && r.value.cols() == 1);
  accum(root.idx(), Mat::Ones(1, 1));
  for (int i = root.idx(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.param) n.param->grad += n.grad;
    if (n.back) n.back(*this, n.grad);
  }
}

Expr input(Tape& t, Mat value) { return t.make(std::move(value)); }

Expr input(Tape& t, double value) {
  Mat m(1, 1);
  m(0, 0) = value;
  return t.make(std::move(m));
}

Expr param(Tape& t, Tensor& p) { return t.make(p.value, nullptr, &p); }

Expr lookup(Tape& t, Tensor& table, int row) {
  assert(row >= 0 && row < table.value.rows());
  Tensor* tp = &table;
  return t.make(table.value.row(row).transpose(),
                [tp, row](Tape&, const Mat& g) { tp->grad.row(row) += g.transpose(); });
}

Expr matmul(Tape& t, Tensor& w, const Expr& x) {
  Tensor* wp = &w;
  int xi = x.idx();
  return t.make(w.value * x.value(), [wp, xi](Tape& tp, const Mat& g) {
    wp->grad += g * tp.node(xi).value.transpose();
    tp.accum(xi, wp->value.transpose() * g);
  });
}

Expr affine(Tape& t, Tensor& w, const Expr& x, Tensor& b) {
  Tensor* wp = &w;
  Tensor* bp = &b;
  int xi = x.idx();
  return t.make(w.value * x.value() + b.value, [wp, bp, xi](Tape& tp, const Mat& g) {
    wp->grad += g * tp.node(xi).value.transpose();
    bp->grad += g;
    tp.accum(xi, wp->value.transpose() * g);
  });
}

Expr add(const Expr& a, const Expr& b) {
  Tape& t = *a.tape();
  int ai = a.idx(), bi = b.idx();
  return t.make(a.value() + b.value(), [ai, bi](Tape& tp, const Mat& g) {
    tp.accum(ai, g);
    tp.accum(bi, g);
  });
}

Expr sub(const Expr& a, const Expr& b) {
  Tape& t = *a.tape();
  int ai = a.idx(), bi = b.idx();
  return t.make(a.value() - b.value(), [ai, bi](Tape& tp, const Mat& g) {
    tp.accum(ai, g);
    tp.accum(bi, -g);
  });
}

Expr neg(const Expr& a) {
  Tape& t = *a.tape();
  int ai = a.idx();
  return t.make(-a.value(), [ai](Tape& tp, const Mat& g) { tp.accum(ai, -g); });
}

Expr cmult(const Expr& a, const Expr& b) {
  Tape& t = *a.tape();
  int ai = a.idx(), bi = b.idx();
  return t.make(a.value().cwiseProduct(b.value()), [ai, bi](Tape& tp, const Mat& g) {
    tp.accum(ai, g.cwiseProduct(tp.node(bi).value));
    tp.accum(bi, g.cwiseProduct(tp.node(ai).value));
  });
}

Expr matmul_ee(const Expr& a, const Expr& b) {
  Tape& t = *a.tape();
  int ai = a.idx(), bi = b.idx();
  return t.make(a.value() * b.value(), [ai, bi](Tape& tp, const Mat& g) {
    tp.accum(ai, g * tp.node(bi).value.transpose());
    tp.accum(bi, tp.node(ai).value.transpose() * g);
  });
}

Expr add_n(const std::vector<Expr>& xs) {
  assert(!xs.empty());
  Tape& t = *xs[0].tape();
  Mat sum = xs[0].value();
  std::vector<int> idx{xs[0].idx()};
  for (size_t i = 1; i < xs.size(); ++i) {
    sum += xs[i].value();
    idx.push_back(xs[i].idx());
  }
  return t.make(std::move(sum), [idx](Tape& tp, const Mat& g) {
    for (int i : idx) tp.accum(i, g);
  });
}

Expr scale(const Expr& a, double s) {
  Tape& t = *a.tape();
  int ai = a.idx();
  return t.make(a.value() * s, [ai, s](Tape& tp, const Mat& g) { tp.accum(ai, g * s); });
}

Expr concat(const std::vector<Expr>& xs) {
  assert(!xs.empty());
  Tape& t = *xs[0].tape();
  int rows = 0;
  for (const auto& x : xs) {
    assert(x.value().cols() == 1);
    rows += static_cast<int>(x.value().rows());
  }
  Mat out(rows, 1);
  std::vector<std::pair<int, int>> spans;  // (idx, rows)
  int at = 0;
  for (const auto& x : xs) {
    int r = static_cast<int>(x.value().rows());
    out.block(at, 0, r, 1) = x.value();
    spans.emplace_back(x.idx(), r);
    at += r;
  }
  return t.make(std::move(out), [spans](Tape& tp, const Mat& g) {
    int at = 0;
    for (auto [i, r] : spans) {
      tp.accum(i, g.block(at, 0, r, 1));
      at += r;
    }
  });
}

Expr slice(const Expr& a, int start, int len) {
  Tape& t = *a.tape();
  int ai = a.idx();
  int total = static_cast<int>(a.value().rows());
  assert(start >= 0 && start + len <= total);
  return t.make(a.value().block(start, 0, len, 1), [ai, start, len, total](Tape& tp, const Mat& g) {
    Mat full = Mat::Zero(total, 1);
    full.block(start, 0, len, 1) = g;
    tp.accum(ai, full);
  });
}

Expr transpose(const Expr& a) {
  Tape& t = *a.tape();
  int ai = a.idx();
  return t.make(a.value().transpose(),
                [ai](Tape& tp, const Mat& g) { tp.accum(ai, g.transpose()); });
}

Expr tanh_(const Expr& a) {
  Tape& t = *a.tape();
  int ai = a.idx();
  Mat y = a.value().array().tanh().matrix();
  return t.make(y, [ai, y](Tape& tp, const Mat& g) {
    tp.accum(ai, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Expr sigmoid(const Expr& a) {
  Tape& t = *a.tape();
  int ai = a.idx();
  Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return t.make(y, [ai, y](Tape& tp, const Mat& g) {
    tp.accum(ai, g.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Expr exp_(const Expr& a) {
  Tape& t = *a.tape();
  int ai = a.idx();
  Mat y = a.value().array().exp().matrix();
  return t.make(y, [ai, y](Tape& tp, const Mat& g) { tp.accum(ai, g.cwiseProduct(y)); });
}

Expr log_(const Expr& a) {
  Tape& t = *a.tape();
  int ai = a.idx();
  return t.make(a.value().array().log().matrix(), [ai](Tape& tp, const Mat& g) {
    tp.accum(ai, g.cwiseQuotient(tp.node(ai).value));
  });
}

namespace {

Mat stable_softmax(const Mat& x) {
  double mx = x.maxCoeff();
  Mat e = (x.array() - mx).exp().matrix();
  return e / e.sum();
}

}  // namespace

Expr softmax(const Expr& a) {
  Tape& t = *a.tape();
  int ai = a.idx();
  assert(a.value().cols() == 1);
  Mat p = stable_softmax(a.value());
  return t.make(p, [ai, p](Tape& tp, const Mat& g) {
    double gp = (g.cwiseProduct(p)).sum();
    tp.accum(ai, p.cwiseProduct((g.array() - gp).matrix()));
  });
}

Expr log_softmax(const Expr& a) {
  Tape& t = *a.tape();
  int ai = a.idx();
  assert(a.value().cols() == 1);
  double mx = a.value().maxCoeff();
  double lse = mx + std::log((a.value().array() - mx).exp().sum());
  Mat y = (a.value().array() - lse).matrix();
  Mat p = y.array().exp().matrix();
  return t.make(std::move(y), [ai, p](Tape& tp, const Mat& g) {
    tp.accum(ai, (g.array() - p.array() * g.sum()).matrix());
  });
}

Expr pick(const Expr& a, int i) {
  Tape& t = *a.tape();
  int ai = a.idx();
  int rows = static_cast<int>(a.value().rows());
  assert(a.value().cols() == 1 && i >= 0 && i < rows);
  Mat y(1, 1);
  y(0, 0) = a.value()(i, 0);
  return t.make(std::move(y), [ai, i, rows](Tape& tp, const Mat& g) {
    Mat full = Mat::Zero(rows, 1);
    full(i, 0) = g(0, 0);
    tp.accum(ai, full);
  });
}

Expr sum_all(const Expr& a) {
  Tape& t = *a.tape();
  int ai = a.idx();
  int r = static_cast<int>(a.value().rows());
  int c = static_cast<int>(a.value().cols());
  Mat y(1, 1);
  y(0, 0) = a.value().sum();
  return t.make(std::move(y), [ai, r, c](Tape& tp, const Mat& g) {
    tp.accum(ai, Mat::Constant(r, c, g(0, 0)));
  });
}

Expr dot(const Expr& a, const Expr& b) {
  Tape& t = *a.tape();
  int ai = a.idx(), bi = b.idx();
  Mat y(1, 1);
  y(0, 0) = a.value().cwiseProduct(b.value()).sum();
  return t.make(std::move(y), [ai, bi](Tape& tp, const Mat& g) {
    tp.accum(ai, g(0, 0) * tp.node(bi).value);
    tp.accum(bi, g(0, 0) * tp.node(ai).value);
  });
}

Expr l2_norm(const Expr& a) {
  Tape& t = *a.tape();
  int ai = a.idx();
  double norm = a.value().norm();
  Mat y(1, 1);
  y(0, 0) = norm;
  return t.make(std::move(y), [ai, norm](Tape& tp, const Mat& g) {
    if (norm > 0.0) tp.accum(ai, (g(0, 0) / norm) * tp.node(ai).value);
  });
}

Expr logsumexp(const Expr& a) {
  Tape& t = *a.tape();
  int ai = a.idx();
  assert(a.value().cols() == 1);
  double mx = a.value().maxCoeff();
  double lse = mx + std::log((a.value().array() - mx).exp().sum());
  Mat p = (a.value().array() - lse).exp().matrix();
  Mat y(1, 1);
  y(0, 0) = lse;
  return t.make(std::move(y), [ai, p](Tape& tp, const Mat& g) { tp.accum(ai, g(0, 0) * p); });
}

Expr add_col_broadcast(const Expr& m, const Expr& v) {
  Tape& t = *m.tape();
  int mi = m.idx(), vi = v.idx();
  assert(v.value().cols() == 1 && v.value().rows() == m.value().rows());
  Mat y = m.value().colwise() + Eigen::VectorXd(v.value().col(0));
  return t.make(std::move(y), [mi, vi](Tape& tp, const Mat& g) {
    tp.accum(mi, g);
    tp.accum(vi, g.rowwise().sum());
  });
}

Expr colwise_logsumexp(const Expr& m) {
  Tape& t = *m.tape();
  int mi = m.idx();
  int cols = static_cast<int>(m.value().cols());
  Mat y(cols, 1);
  Mat p(m.value().rows(), cols);  // per-column softmax, reused in back
  for (int j = 0; j < cols; ++j) {
    double mx = m.value().col(j).maxCoeff();
    double lse = mx + std::log((m.value().col(j).array() - mx).exp().sum());
    y(j, 0) = lse;
    p.col(j) = (m.value().col(j).array() - lse).exp().matrix();
  }
  return t.make(std::move(y), [mi, p](Tape& tp, const Mat& g) {
    Mat dm = p;
    for (int j = 0; j < dm.cols(); ++j) dm.col(j) *= g(j, 0);
    tp.accum(mi, dm);
  });
}

Expr dropout(Tape& t, const Expr& a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  int ai = a.idx();
  Mat mask(a.value().rows(), a.value().cols());
  double keep = 1.0 - rate;
  for (int i = 0; i < mask.rows(); ++i)
    for (int j = 0; j < mask.cols(); ++j) mask(i, j) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return t.make(a.value().cwiseProduct(mask),
                [ai, mask](Tape& tp, const Mat& g) { tp.accum(ai, g.cwiseProduct(mask)); });
}

}  // namespace dualnlu::ad
