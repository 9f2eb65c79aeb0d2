#include "dualnlu/nn.hpp"

#include <cassert>
#include <cmath>

namespace dualnlu::ad {

Mat plain_softmax(const Mat& x) {
  double mx = x.maxCoeff();
  Mat e = (x.array() - mx).exp().matrix();
  return e / e.sum();
}

Mat plain_log_softmax(const Mat& x) {
  return (x.array() - plain_logsumexp(x)).matrix();
}

double plain_logsumexp(const Mat& x) {
  double mx = x.maxCoeff();
  return mx + std::log((x.array() - mx).exp().sum());
}

LstmCell LstmCell::create(ParamStore& ps, const std::string& prefix, int in_dim, int n, Rng& rng) {
  LstmCell cell;
  cell.w = &ps.add(prefix + ".w", 4 * n, in_dim + n, rng);
  cell.b = &ps.add(prefix + ".b", 4 * n, 1, rng);
  cell.n = n;
  cell.in_dim = in_dim;
  return cell;
}

LstmCell LstmCell::bind(ParamStore& ps, const std::string& prefix, int in_dim, int n) {
  LstmCell cell;
  cell.w = &ps.at(prefix + ".w");
  cell.b = &ps.at(prefix + ".b");
  cell.n = n;
  cell.in_dim = in_dim;
  return cell;
}

LstmCell::State LstmCell::initial(Tape& t) const {
  return {input(t, Mat::Zero(n, 1)), input(t, Mat::Zero(n, 1))};
}

LstmCell::PlainState LstmCell::initial_plain() const {
  return {Mat::Zero(n, 1), Mat::Zero(n, 1)};
}

LstmCell::State LstmCell::step(Tape& t, const Expr& x, const State& prev) const {
  Expr z = affine(t, *w, concat({x, prev.h}), *b);
  Expr i = sigmoid(slice(z, 0, n));
  Expr f = sigmoid(slice(z, n, n));
  Expr o = sigmoid(slice(z, 2 * n, n));
  Expr chat = tanh_(slice(z, 3 * n, n));
  Expr c = add(cmult(f, prev.c), cmult(i, chat));
  Expr h = cmult(o, tanh_(c));
  return {h, c};
}

LstmCell::PlainState LstmCell::step_plain(const Mat& x, const PlainState& prev) const {
  Mat xh(in_dim + n, 1);
  xh << x, prev.h;
  Mat z = w->value * xh + b->value;
  auto sig = [](const Mat& m) { return (1.0 / (1.0 + (-m.array()).exp())).matrix(); };
  Mat i = sig(z.block(0, 0, n, 1));
  Mat f = sig(z.block(n, 0, n, 1));
  Mat o = sig(z.block(2 * n, 0, n, 1));
  Mat chat = z.block(3 * n, 0, n, 1).array().tanh().matrix();
  PlainState out;
  out.c = f.cwiseProduct(prev.c) + i.cwiseProduct(chat);
  out.h = o.cwiseProduct(out.c.array().tanh().matrix());
  return out;
}

Blstm Blstm::create(ParamStore& ps, const std::string& prefix, int in_dim, int n, Rng& rng) {
  return {LstmCell::create(ps, prefix + ".fwd", in_dim, n, rng),
          LstmCell::create(ps, prefix + ".bwd", in_dim, n, rng)};
}

Blstm Blstm::bind(ParamStore& ps, const std::string& prefix, int in_dim, int n) {
  return {LstmCell::bind(ps, prefix + ".fwd", in_dim, n),
          LstmCell::bind(ps, prefix + ".bwd", in_dim, n)};
}

Blstm::Out Blstm::run(Tape& t, const std::vector<Expr>& xs) const {
  Out out;
  size_t L = xs.size();
  out.forward.resize(L);
  out.backward.resize(L);
  LstmCell::State f = fwd.initial(t);
  for (size_t i = 0; i < L; ++i) {
    f = fwd.step(t, xs[i], f);
    out.forward[i] = f.h;
  }
  LstmCell::State b = bwd.initial(t);
  for (size_t i = L; i > 0; --i) {
    b = bwd.step(t, xs[i - 1], b);
    out.backward[i - 1] = b.h;
  }
  out.concat.resize(L);
  for (size_t i = 0; i < L; ++i) out.concat[i] = concat({out.forward[i], out.backward[i]});
  return out;
}

Blstm::PlainOut Blstm::run_plain(const std::vector<Mat>& xs) const {
  PlainOut out;
  size_t L = xs.size();
  out.forward.resize(L);
  out.backward.resize(L);
  out.concat.resize(L);
  LstmCell::PlainState f = fwd.initial_plain();
  for (size_t i = 0; i < L; ++i) {
    f = fwd.step_plain(xs[i], f);
    out.forward[i] = f.h;
  }
  LstmCell::PlainState b = bwd.initial_plain();
  for (size_t i = L; i > 0; --i) {
    b = bwd.step_plain(xs[i - 1], b);
    out.backward[i - 1] = b.h;
  }
  for (size_t i = 0; i < L; ++i) {
    Mat cat(out.forward[i].rows() + out.backward[i].rows(), 1);
    cat << out.forward[i], out.backward[i];
    out.concat[i] = cat;
  }
  return out;
}

Attention Attention::create(ParamStore& ps, const std::string& prefix, int q_dim, int e_dim,
                            int att_dim, Rng& rng) {
  Attention att;
  att.w = &ps.add(prefix + ".w", att_dim, q_dim + e_dim, rng);
  att.v = &ps.add(prefix + ".v", 1, att_dim, rng);
  return att;
}

Attention Attention::bind(ParamStore& ps, const std::string& prefix) {
  Attention att;
  att.w = &ps.at(prefix + ".w");
  att.v = &ps.at(prefix + ".v");
  return att;
}

Attention::Out Attention::run(Tape& t, const Expr& q, const std::vector<Expr>& items) const {
  assert(!items.empty());
  std::vector<Expr> us;
  us.reserve(items.size());
  for (const auto& e : items) us.push_back(matmul(t, *v, tanh_(matmul(t, *w, concat({q, e})))));
  Expr a = softmax(concat(us));
  std::vector<Expr> terms;
  terms.reserve(items.size());
  for (size_t i = 0; i < items.size(); ++i)
    terms.push_back(matmul_ee(items[i], pick(a, static_cast<int>(i))));
  return {add_n(terms), a};
}

Attention::PlainOut Attention::run_plain(const Mat& q, const std::vector<Mat>& items) const {
  assert(!items.empty());
  Mat u(static_cast<int>(items.size()), 1);
  for (size_t i = 0; i < items.size(); ++i) {
    Mat qe(q.rows() + items[i].rows(), 1);
    qe << q, items[i];
    u(static_cast<int>(i), 0) = (v->value * (w->value * qe).array().tanh().matrix())(0, 0);
  }
  Mat a = plain_softmax(u);
  Mat z = Mat::Zero(items[0].rows(), 1);
  for (size_t i = 0; i < items.size(); ++i) z += a(static_cast<int>(i), 0) * items[i];
  return {z, a};
}

}  // namespace dualnlu::ad
