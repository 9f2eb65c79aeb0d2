#pragma once

#include <Eigen/Core>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dualnlu/rng.hpp"
#include "dualnlu/types.hpp"

namespace dualnlu::ad {

using Mat = Eigen::MatrixXd;

// Named trainable parameter. grad and the Adam moments always share the
// value's shape and stay allocated for the tensor's lifetime.
struct Tensor {
  std::string name;
  Mat value;
  Mat grad;
  Mat m, v;  // Adam first/second moments

  Tensor(std::string n, Mat val)
      : name(std::move(n)),
        value(std::move(val)),
        grad(Mat::Zero(value.rows(), value.cols())),
        m(Mat::Zero(value.rows(), value.cols())),
        v(Mat::Zero(value.rows(), value.cols())) {}
};

// Owns tensors at stable addresses; iteration follows insertion order so
// reductions over parameters are deterministic.
class ParamStore {
 public:
  Tensor& add(const std::string& name, int rows, int cols, Rng& rng, double lo = -0.2,
              double hi = 0.2);
  Tensor& add(const std::string& name, Mat value);  // pretrained / fixed init

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Tensor*> all();
  std::vector<const Tensor*> all() const;
  size_t size() const { return tensors_.size(); }

  void zero_grad();

  std::map<std::string, Mat> snapshot() const;
  void restore(const std::map<std::string, Mat>& snap);

 private:
  std::vector<std::unique_ptr<Tensor>> tensors_;
  std::map<std::string, size_t> index_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 1e-5;
  double clip = 5.0;  // global gradient max-norm; <=0 disables
};

// step() consumes the accumulated gradients: l2 term added, global-norm
// clipping, bias-corrected moment update, then grads are cleared.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore& params);
  void reset(ParamStore& params);
  int steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
};

}  // namespace dualnlu::ad
