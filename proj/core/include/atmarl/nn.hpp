#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "atmarl/rng.hpp"

// Small dense / recurrent building blocks with hand-written gradients.
namespace atmarl::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A trainable tensor and its accumulated gradient. Biases are stored as
// single-column matrices.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

using ParameterList = std::vector<Parameter*>;

// Fills with U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform(Parameter& p, Eigen::Index fan_in, Rng& rng);

enum class Activation { kTanh, kRelu, kIdentity };

class Dense {
 public:
  struct Cache {
    Vec input;
    Vec output;
  };

  Dense() = default;
  Dense(std::string name, Eigen::Index in, Eigen::Index out, Activation act, Rng& rng);

  Vec forward(const Vec& input, Cache* cache = nullptr) const;

  // Accumulates parameter gradients and returns d(loss)/d(input).
  Vec backward(const Cache& cache, const Vec& upstream);

  Eigen::Index in_size() const { return weights_.value.cols(); }
  Eigen::Index out_size() const { return weights_.value.rows(); }
  Activation activation() const { return activation_; }

  Parameter& weights() { return weights_; }
  Parameter& bias() { return bias_; }
  const Parameter& weights() const { return weights_; }
  const Parameter& bias() const { return bias_; }

  void collect(ParameterList& out) {
    out.push_back(&weights_);
    out.push_back(&bias_);
  }

 private:
  Parameter weights_;
  Parameter bias_;
  Activation activation_ = Activation::kIdentity;
};

// Gated recurrent unit:
//   z  = sigmoid(Wz [x; h] + bz)
//   r  = sigmoid(Wr [x; h] + br)
//   h~ = tanh(Wh [x; r*h] + bh)
//   h' = (1 - z) * h + z * h~
class GruCell {
 public:
  struct Cache {
    Vec input;
    Vec hidden;
    Vec z;
    Vec r;
    Vec candidate;
  };

  GruCell() = default;
  GruCell(std::string name, Eigen::Index input_size, Eigen::Index hidden_size, Rng& rng);

  Vec forward(const Vec& input, const Vec& hidden, Cache* cache = nullptr) const;

  struct StepGrads {
    Vec input;
    Vec hidden;
  };
  // Backward through one step given d(loss)/d(h'); accumulates parameter
  // gradients.
  StepGrads backward(const Cache& cache, const Vec& upstream);

  // BPTT over a sequence whose caches were recorded in order. `upstream[t]`
  // is the gradient arriving at the output of step t from outside the
  // recurrence. Returns per-step input gradients and the gradient on h_0.
  std::vector<Vec> backward_sequence(std::span<const Cache> caches, std::span<const Vec> upstream,
                                     Vec* initial_hidden_grad = nullptr);

  Eigen::Index input_size() const { return input_size_; }
  Eigen::Index hidden_size() const { return hidden_size_; }

  Parameter& update_weights() { return wz_; }
  Parameter& reset_weights() { return wr_; }
  Parameter& candidate_weights() { return wh_; }

  void collect(ParameterList& out) {
    for (Parameter* p : {&wz_, &bz_, &wr_, &br_, &wh_, &bh_}) out.push_back(p);
  }

 private:
  Eigen::Index input_size_ = 0;
  Eigen::Index hidden_size_ = 0;
  Parameter wz_, bz_, wr_, br_, wh_, bh_;
};

Vec softmax(const Vec& logits);

struct Sample {
  int index = 0;
  double log_prob = 0.0;
};

// Draws from softmax(logits). Throws NumericError on non-finite logits.
Sample softmax_sample(const Vec& logits, Rng& rng);
int argmax(const Vec& values);

double entropy(const Vec& probs);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<Mat> first_moment;
  std::vector<Mat> second_moment;
  std::int64_t step = 0;
};

OptimizerState make_optimizer(const ParameterList& params, AdamConfig config = {});

// One Adam update from the gradients stored in `params`. Throws NumericError
// if any gradient is non-finite.
void adam_step(const ParameterList& params, OptimizerState& state);

void zero_grads(const ParameterList& params);
double grad_norm(const ParameterList& params);
void scale_grads(const ParameterList& params, double factor);

}  // namespace atmarl::nn
