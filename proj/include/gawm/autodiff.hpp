#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "gawm/rng.hpp"

namespace gawm::ad {

using Mat = Eigen::MatrixXd;

// Named parameter matrices with stable ordering. Models register parameters
// once at construction; tapes read values and accumulate gradients into an
// external, shape-aligned buffer so independent tapes can run concurrently.
class ParamStore {
 public:
  int add(const std::string& name, Mat value);

  int size() const { return static_cast<int>(values_.size()); }
  Mat& value(int id) { return values_[id]; }
  const Mat& value(int id) const { return values_[id]; }
  const std::string& name(int id) const { return names_[id]; }
  int find(const std::string& name) const;  // -1 if absent

  std::vector<Mat> zero_grads() const;
  int64_t scalar_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<Mat> values_;
};

using GradBuffer = std::vector<Mat>;

// Record/replay store for values the gradient path treats as constants
// (detached tensors and categorical draws). Finite-difference probes replay
// the recorded values so the perturbed forward evaluates the surrogate
// function whose exact gradient the tape computes.
class ReplayTrace {
 public:
  Mat intern(const Mat& fresh) {
    if (recording_) {
      entries_.push_back(fresh);
      return fresh;
    }
    return entries_.at(cursor_++);
  }
  bool recording() const { return recording_; }
  void rewind() {
    recording_ = false;
    cursor_ = 0;
  }

 private:
  bool recording_ = true;
  size_t cursor_ = 0;
  std::vector<Mat> entries_;
};

struct Var {
  int i = -1;
  bool valid() const { return i >= 0; }
};

class Tape {
 public:
  // grads may be null for inference-only forwards; trace may be null outside
  // of gradient-check harnesses.
  explicit Tape(const ParamStore& params, GradBuffer* grads = nullptr,
                ReplayTrace* trace = nullptr)
      : params_(params), grads_(grads), trace_(trace) {}

  const Mat& val(Var v) const { return nodes_[v.i].value; }
  const Mat& grad(Var v) const { return nodes_[v.i].grad; }
  double scalar(Var v) const { return nodes_[v.i].value(0, 0); }

  Var constant(Mat v);
  Var param(int id);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var cmul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var matmul(Var a, Var b);
  Var transpose(Var a);

  // Broadcast a 1xC row vector over every row of a.
  Var add_rowvec(Var a, Var r);
  Var cmul_rowvec(Var a, Var r);

  Var sum_all(Var a);
  Var mean_all(Var a);
  Var rowwise_sum(Var a);  // (R x C) -> (R x 1)
  Var colwise_mean(Var a); // (R x C) -> (1 x C)

  Var tanh(Var a);
  Var sigmoid(Var a);
  Var silu(Var a);
  Var exp(Var a);
  Var clamp_min(Var a, double floor);
  Var clamp(Var a, double lo, double hi);
  Var cmin(Var a, Var b);  // elementwise min; ties route gradient to a

  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);

  Var slice_rows(Var a, int i0, int n);
  Var slice_cols(Var a, int j0, int n);
  Var hcat(Var a, Var b);
  Var vcat(Var a, Var b);
  Var vcat(const std::vector<Var>& parts);
  // Row-major reinterpretation (R0 x C0) -> (R1 x C1) with R0*C0 == R1*C1.
  Var reshape(Var a, int rows, int cols);

  // Row-normalization of layer norm: y = (x - mean) / sqrt(var + eps), per row.
  Var norm_rows(Var a, double eps = 1e-5);

  // Value is detached from the gradient path. Under a replay trace the
  // recorded value is returned regardless of the current input.
  Var detach(Var a);

  // One straight-through categorical draw per row: the value is a one-hot
  // sample of softmax(logits), the gradient flows through the softmax.
  Var onehot_st_sample(Var logits, Rng& rng);

  // Elementwise stable Bernoulli NLL from logits against {0,1} targets.
  Var bernoulli_nll_logits(Var logits, Var targets);

  // Accumulates d(root)/d(node) for every node; root must be 1x1. Parameter
  // leaves add their gradient into the attached GradBuffer.
  void backward(Var root);

  ReplayTrace* trace() { return trace_; }
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&)> back;
  };

  Var push(Mat value, std::function<void(Tape&)> back = nullptr);
  void accum(int idx, const Mat& delta);

  const ParamStore& params_;
  GradBuffer* grads_;
  ReplayTrace* trace_;
  std::vector<Node> nodes_;
};

// Global L2-norm gradient clipping followed by Adam with bias correction.
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& params, GradBuffer& grads, double clip_norm);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Mat> m_, v_;
};

double grad_global_norm(const GradBuffer& grads);

}  // namespace gawm::ad
