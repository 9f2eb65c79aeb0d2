#include "dualnlu/params.hpp"

#include <cmath>
#include <stdexcept>

#include "dualnlu/types.hpp"

namespace dualnlu::ad {

Tensor& ParamStore::add(const std::string& name, int rows, int cols, Rng& rng, double lo,
                        double hi) {
  Mat value(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) value(i, j) = rng.uniform(lo, hi);
  return add(name, std::move(value));
}

Tensor& ParamStore::add(const std::string& name, Mat value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  index_[name] = tensors_.size();
  tensors_.push_back(std::make_unique<Tensor>(name, std::move(value)));
  return *tensors_.back();
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return *tensors_[it->second];
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return *tensors_[it->second];
}

std::vector<Tensor*> ParamStore::all() {
  std::vector<Tensor*> out;
  out.reserve(tensors_.size());
  for (auto& t : tensors_) out.push_back(t.get());
  return out;
}

std::vector<const Tensor*> ParamStore::all() const {
  std::vector<const Tensor*> out;
  out.reserve(tensors_.size());
  for (auto& t : tensors_) out.push_back(t.get());
  return out;
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) t->grad.setZero();
}

std::map<std::string, Mat> ParamStore::snapshot() const {
  std::map<std::string, Mat> snap;
  for (const auto& t : tensors_) snap[t->name] = t->value;
  return snap;
}

void ParamStore::restore(const std::map<std::string, Mat>& snap) {
  for (auto& t : tensors_) {
    auto it = snap.find(t->name);
    if (it == snap.end()) throw ConfigError("snapshot missing parameter: " + t->name);
    if (it->second.rows() != t->value.rows() || it->second.cols() != t->value.cols())
      throw ConfigError("snapshot shape mismatch for " + t->name);
    t->value = it->second;
  }
}

void Adam::step(ParamStore& params) {
  auto tensors = params.all();

  double sq_norm = 0.0;
  for (Tensor* t : tensors) {
    if (cfg_.l2 > 0.0) t->grad += cfg_.l2 * t->value;
    sq_norm += t->grad.squaredNorm();
  }
  double scale = 1.0;
  if (cfg_.clip > 0.0) {
    double norm = std::sqrt(sq_norm);
    if (norm > cfg_.clip) scale = cfg_.clip / norm;
  }

  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (Tensor* t : tensors) {
    Mat g = t->grad * scale;
    t->m = cfg_.beta1 * t->m + (1.0 - cfg_.beta1) * g;
    t->v = cfg_.beta2 * t->v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Mat mhat = t->m / bc1;
    Mat vhat = t->v / bc2;
    t->value -= cfg_.lr * (mhat.array() / (vhat.array().sqrt() + cfg_.eps)).matrix();
    t->grad.setZero();
  }
}

void Adam::reset(ParamStore& params) {
  t_ = 0;
  for (Tensor* t : params.all()) {
    t->m.setZero();
    t->v.setZero();
    t->grad.setZero();
  }
}

}  // namespace dualnlu::ad
