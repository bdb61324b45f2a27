#include "atmarl/nn.hpp"

#include <cmath>
#include <limits>

namespace atmarl::nn {
namespace {

Vec sigmoid(const Vec& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace

void init_uniform(Parameter& p, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) p.value(i, j) = rng.uniform(-bound, bound);
  }
  p.grad.setZero(p.value.rows(), p.value.cols());
}

Dense::Dense(std::string name, Eigen::Index in, Eigen::Index out, Activation act, Rng& rng)
    : weights_(name + ".w", out, in), bias_(name + ".b", out, 1), activation_(act) {
  init_uniform(weights_, in, rng);
  init_uniform(bias_, in, rng);
}

Vec Dense::forward(const Vec& input, Cache* cache) const {
  if (input.size() != in_size()) {
    throw ShapeError(weights_.name + ": expected input of size " + std::to_string(in_size()) +
                     ", got " + std::to_string(input.size()));
  }
  Vec out = weights_.value * input + bias_.value.col(0);
  switch (activation_) {
    case Activation::kTanh:
      out = out.array().tanh();
      break;
    case Activation::kRelu:
      out = out.cwiseMax(0.0);
      break;
    case Activation::kIdentity:
      break;
  }
  if (cache) {
    cache->input = input;
    cache->output = out;
  }
  return out;
}

Vec Dense::backward(const Cache& cache, const Vec& upstream) {
  if (upstream.size() != out_size()) throw ShapeError(weights_.name + ": upstream size mismatch");
  Vec delta = upstream;
  switch (activation_) {
    case Activation::kTanh:
      delta.array() *= 1.0 - cache.output.array().square();
      break;
    case Activation::kRelu:
      delta.array() *= (cache.output.array() > 0.0).cast<double>();
      break;
    case Activation::kIdentity:
      break;
  }
  weights_.grad.noalias() += delta * cache.input.transpose();
  bias_.grad.col(0) += delta;
  return weights_.value.transpose() * delta;
}

GruCell::GruCell(std::string name, Eigen::Index input_size, Eigen::Index hidden_size, Rng& rng)
    : input_size_(input_size),
      hidden_size_(hidden_size),
      wz_(name + ".wz", hidden_size, input_size + hidden_size),
      bz_(name + ".bz", hidden_size, 1),
      wr_(name + ".wr", hidden_size, input_size + hidden_size),
      br_(name + ".br", hidden_size, 1),
      wh_(name + ".wh", hidden_size, input_size + hidden_size),
      bh_(name + ".bh", hidden_size, 1) {
  const Eigen::Index fan_in = input_size + hidden_size;
  for (Parameter* p : {&wz_, &bz_, &wr_, &br_, &wh_, &bh_}) init_uniform(*p, fan_in, rng);
}

Vec GruCell::forward(const Vec& input, const Vec& hidden, Cache* cache) const {
  if (input.size() != input_size_ || hidden.size() != hidden_size_) {
    throw ShapeError(wz_.name + ": input/hidden size mismatch");
  }
  const Vec xh = concat(input, hidden);
  const Vec z = sigmoid(wz_.value * xh + bz_.value.col(0));
  const Vec r = sigmoid(wr_.value * xh + br_.value.col(0));
  const Vec xrh = concat(input, r.cwiseProduct(hidden));
  const Vec cand = (wh_.value * xrh + bh_.value.col(0)).array().tanh();
  Vec next = (1.0 - z.array()) * hidden.array() + z.array() * cand.array();
  if (cache) {
    cache->input = input;
    cache->hidden = hidden;
    cache->z = z;
    cache->r = r;
    cache->candidate = cand;
  }
  return next;
}

GruCell::StepGrads GruCell::backward(const Cache& c, const Vec& upstream) {
  const Eigen::Index n_in = input_size_;
  const Eigen::Index n_h = hidden_size_;
  const Vec xh = concat(c.input, c.hidden);
  const Vec xrh = concat(c.input, c.r.cwiseProduct(c.hidden));

  // h' = (1 - z) h + z h~
  const Vec d_cand = upstream.cwiseProduct(c.z);
  Vec d_hidden = upstream.cwiseProduct((1.0 - c.z.array()).matrix());
  const Vec d_z = upstream.cwiseProduct(c.candidate - c.hidden);

  const Vec d_cand_pre = d_cand.array() * (1.0 - c.candidate.array().square());
  const Vec d_z_pre = d_z.array() * c.z.array() * (1.0 - c.z.array());

  wh_.grad.noalias() += d_cand_pre * xrh.transpose();
  bh_.grad.col(0) += d_cand_pre;
  const Vec d_xrh = wh_.value.transpose() * d_cand_pre;
  Vec d_input = d_xrh.head(n_in);
  const Vec d_rh = d_xrh.tail(n_h);
  d_hidden += d_rh.cwiseProduct(c.r);
  const Vec d_r = d_rh.cwiseProduct(c.hidden);
  const Vec d_r_pre = d_r.array() * c.r.array() * (1.0 - c.r.array());

  wz_.grad.noalias() += d_z_pre * xh.transpose();
  bz_.grad.col(0) += d_z_pre;
  wr_.grad.noalias() += d_r_pre * xh.transpose();
  br_.grad.col(0) += d_r_pre;
  const Vec d_xh = wz_.value.transpose() * d_z_pre + wr_.value.transpose() * d_r_pre;
  d_input += d_xh.head(n_in);
  d_hidden += d_xh.tail(n_h);
  return {d_input, d_hidden};
}

std::vector<Vec> GruCell::backward_sequence(std::span<const Cache> caches, std::span<const Vec> upstream,
                                            Vec* initial_hidden_grad) {
  if (caches.size() != upstream.size() || caches.empty()) {
    throw ShapeError(wz_.name + ": BPTT needs one upstream gradient per step");
  }
  std::vector<Vec> input_grads(caches.size());
  Vec carry = Vec::Zero(hidden_size_);
  for (std::size_t t = caches.size(); t-- > 0;) {
    const StepGrads g = backward(caches[t], upstream[t] + carry);
    input_grads[t] = g.input;
    carry = g.hidden;
  }
  if (initial_hidden_grad) *initial_hidden_grad = carry;
  return input_grads;
}

Vec softmax(const Vec& logits) {
  const double top = logits.maxCoeff();
  Vec e = (logits.array() - top).exp();
  return e / e.sum();
}

Sample softmax_sample(const Vec& logits, Rng& rng) {
  if (logits.size() == 0 || !logits.allFinite()) throw NumericError("non-finite logits");
  const double top = logits.maxCoeff();
  const Vec shifted = logits.array() - top;
  const double log_norm = std::log(shifted.array().exp().sum());
  const double u = rng.uniform();
  double acc = 0.0;
  int index = static_cast<int>(logits.size()) - 1;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    acc += std::exp(shifted(i) - log_norm);
    if (u < acc) {
      index = static_cast<int>(i);
      break;
    }
  }
  return {index, shifted(index) - log_norm};
}

int argmax(const Vec& values) {
  Eigen::Index best = 0;
  values.maxCoeff(&best);
  return static_cast<int>(best);
}

double entropy(const Vec& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs(i) > 0.0) h -= probs(i) * std::log(probs(i));
  }
  return h;
}

OptimizerState make_optimizer(const ParameterList& params, AdamConfig config) {
  OptimizerState state;
  state.config = config;
  for (const Parameter* p : params) {
    state.first_moment.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    state.second_moment.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
  return state;
}

void adam_step(const ParameterList& params, OptimizerState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("optimizer state does not match parameter list");
  }
  for (const Parameter* p : params) {
    if (!p->grad.allFinite()) throw NumericError("non-finite gradient in " + p->name);
  }
  ++state.step;
  const auto& c = state.config;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Mat& m = state.first_moment[i];
    Mat& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * p.grad;
    v = c.beta2 * v + (1.0 - c.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= c.learning_rate * (m.array() / bias1) /
                       ((v.array() / bias2).sqrt() + c.epsilon);
  }
}

void zero_grads(const ParameterList& params) {
  for (Parameter* p : params) p->zero_grad();
}

double grad_norm(const ParameterList& params) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void scale_grads(const ParameterList& params, double factor) {
  for (Parameter* p : params) p->grad *= factor;
}

}  // namespace atmarl::nn
