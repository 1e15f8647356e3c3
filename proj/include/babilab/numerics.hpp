#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "babilab/rng.hpp"

namespace babilab {

class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using VecF = Vec<float>;

// Named parameters with paired gradient buffers of identical shape.
template <class S>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Mat<S> value;
    Mat<S> grad;
  };

  Mat<S>& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (index_.count(name)) throw NumericError("duplicate parameter " + name);
    index_[name] = entries_.size();
    entries_.push_back({name, Mat<S>::Zero(rows, cols), Mat<S>::Zero(rows, cols)});
    return entries_.back().value;
  }

  Mat<S>& value(const std::string& name) { return entry(name).value; }
  const Mat<S>& value(const std::string& name) const { return entry(name).value; }
  Mat<S>& grad(const std::string& name) { return entry(name).grad; }

  Entry& entry(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw NumericError("unknown parameter " + name);
    return entries_[it->second];
  }
  const Entry& entry(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw NumericError("unknown parameter " + name);
    return entries_[it->second];
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  void zero_grads() {
    for (auto& e : entries_) e.grad.setZero();
  }

  size_t coordinate_count() const {
    size_t n = 0;
    for (const auto& e : entries_) n += size_t(e.value.size());
    return n;
  }

  double grad_norm() const {
    double sum = 0.0;
    for (const auto& e : entries_)
      sum += e.grad.template cast<double>().squaredNorm();
    return std::sqrt(sum);
  }

  // Scale gradients so their global norm does not exceed max_norm.
  void clip_grad_norm(double max_norm) {
    const double norm = grad_norm();
    if (norm > max_norm && norm > 0.0) {
      const S scale = S(max_norm / norm);
      for (auto& e : entries_) e.grad *= scale;
    }
  }

  template <class T>
  ParameterStore<T> cast() const {
    ParameterStore<T> out;
    for (const auto& e : entries_) {
      out.add(e.name, e.value.rows(), e.value.cols()) = e.value.template cast<T>();
      out.entry(e.name).grad = e.grad.template cast<T>();
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, size_t> index_;
};

template <class S>
struct AdamState {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Mat<S>> m, v;  // parallel to store entries
};

template <class S>
Vec<S> affine(const Vec<S>& x, const Mat<S>& W, const Vec<S>& b) {
  if (W.cols() != x.size() || W.rows() != b.size())
    throw NumericError("affine: shape mismatch");
  return W * x + b;
}

// Max-subtracted softmax, in place. 64-bit accumulation for the normaliser.
template <class S>
void softmax_inplace(Vec<S>& v) {
  if (v.size() == 0) throw NumericError("softmax of empty vector");
  const S m = v.maxCoeff();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = std::exp(v[i] - m);
    sum += double(v[i]);
  }
  v *= S(1.0 / sum);
}

template <class S>
Vec<S> softmax(Vec<S> v) {
  softmax_inplace(v);
  return v;
}

// Returns loss; writes d(loss)/d(logits) = softmax(logits) - onehot(target).
template <class S>
double cross_entropy(const Vec<S>& logits, int target, Vec<S>& grad_out) {
  if (target < 0 || target >= logits.size())
    throw NumericError("cross_entropy: target out of range");
  grad_out = softmax(logits);
  const double p = double(grad_out[target]);
  grad_out[target] -= S(1);
  return -std::log(std::max(p, 1e-30));
}

template <class S>
void adam_init(AdamState<S>& state, const ParameterStore<S>& params) {
  state.t = 0;
  state.m.clear();
  state.v.clear();
  for (const auto& e : params.entries()) {
    state.m.push_back(Mat<S>::Zero(e.value.rows(), e.value.cols()));
    state.v.push_back(Mat<S>::Zero(e.value.rows(), e.value.cols()));
  }
}

// Bias-corrected Adam update over every parameter. Caller zeroes gradients.
template <class S>
void adam_step(ParameterStore<S>& params, AdamState<S>& state) {
  if (state.m.size() != params.size()) adam_init(state, params);
  ++state.t;
  const S c1 = S(1.0 / (1.0 - std::pow(state.beta1, double(state.t))));
  const S c2 = S(1.0 / (1.0 - std::pow(state.beta2, double(state.t))));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entries()[i];
    if (!e.grad.allFinite())
      throw NumericError("non-finite gradient in parameter " + e.name);
    state.m[i] = S(state.beta1) * state.m[i] + S(1 - state.beta1) * e.grad;
    state.v[i] = S(state.beta2) * state.v[i] +
                 S(1 - state.beta2) * e.grad.cwiseProduct(e.grad);
    e.value.array() -= S(state.alpha) * (state.m[i].array() * c1) /
                       ((state.v[i].array() * c2).sqrt() + S(state.eps));
  }
}

template <class S>
Mat<S> init_uniform(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  if (scale <= 0) throw NumericError("init_uniform: scale must be positive");
  Mat<S> m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r)
      m(r, c) = S(rng.uniform_symmetric(scale));
  return m;
}

// Central-difference gradient check in 64-bit. `loss_fn` must be
// deterministic: it computes the loss and accumulates analytic gradients
// into the store it is given (on top of zeroed buffers).
using LossFn = std::function<double(ParameterStore<double>&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  size_t checked = 0;
};

GradCheckReport grad_check(const LossFn& loss_fn, ParameterStore<double>& params,
                           size_t max_coordinates = 200, double h = 1e-3,
                           uint64_t seed = 0);

// Raw named-parameter payload used inside checkpoint files:
// per parameter: u32 name length, name bytes, u32 rows, u32 cols,
// rows*cols little-endian f32 (column-major).
void write_u32(std::ostream& out, uint32_t v);
void write_u64(std::ostream& out, uint64_t v);
void write_string(std::ostream& out, const std::string& s);
uint32_t read_u32(std::istream& in);
uint64_t read_u64(std::istream& in);
std::string read_string(std::istream& in);

void write_parameters(std::ostream& out, const ParameterStore<float>& params);
void read_parameters(std::istream& in, ParameterStore<float>& params);

}  // namespace babilab
