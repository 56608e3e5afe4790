#include "gawm/autodiff.hpp"

#include <cmath>
#include <utility>

#include "gawm/error.hpp"

namespace gawm::ad {

int ParamStore::add(const std::string& name, Mat value) {
  if (find(name) >= 0) throw ConfigError("duplicate parameter name: " + name);
  names_.push_back(name);
  values_.push_back(std::move(value));
  return static_cast<int>(values_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<Mat> ParamStore::zero_grads() const {
  std::vector<Mat> out;
  out.reserve(values_.size());
  for (const Mat& v : values_) out.push_back(Mat::Zero(v.rows(), v.cols()));
  return out;
}

int64_t ParamStore::scalar_count() const {
  int64_t n = 0;
  for (const Mat& v : values_) n += v.size();
  return n;
}

Var Tape::push(Mat value, std::function<void(Tape&)> back) {
  nodes_.push_back(Node{std::move(value), Mat(), std::move(back)});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accum(int idx, const Mat& delta) {
  Mat& g = nodes_[idx].grad;
  if (g.size() == 0) {
    g = delta;
  } else {
    g += delta;
  }
}

Var Tape::constant(Mat v) { return push(std::move(v)); }

Var Tape::param(int id) {
  Var out = push(params_.value(id));
  if (grads_ != nullptr) {
    int self = out.i;
    nodes_[self].back = [self, id](Tape& t) {
      (*t.grads_)[id] += t.nodes_[self].grad;
    };
  }
  return out;
}

Var Tape::add(Var a, Var b) {
  Var out = push(val(a) + val(b));
  int self = out.i, ia = a.i, ib = b.i;
  nodes_[self].back = [self, ia, ib](Tape& t) {
    t.accum(ia, t.nodes_[self].grad);
    t.accum(ib, t.nodes_[self].grad);
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  Var out = push(val(a) - val(b));
  int self = out.i, ia = a.i, ib = b.i;
  nodes_[self].back = [self, ia, ib](Tape& t) {
    t.accum(ia, t.nodes_[self].grad);
    t.accum(ib, -t.nodes_[self].grad);
  };
  return out;
}

Var Tape::neg(Var a) {
  Var out = push(-val(a));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia](Tape& t) { t.accum(ia, -t.nodes_[self].grad); };
  return out;
}

Var Tape::cmul(Var a, Var b) {
  Var out = push(val(a).cwiseProduct(val(b)));
  int self = out.i, ia = a.i, ib = b.i;
  nodes_[self].back = [self, ia, ib](Tape& t) {
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, g.cwiseProduct(t.nodes_[ib].value));
    t.accum(ib, g.cwiseProduct(t.nodes_[ia].value));
  };
  return out;
}

Var Tape::scale(Var a, double s) {
  Var out = push(val(a) * s);
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia, s](Tape& t) {
    t.accum(ia, t.nodes_[self].grad * s);
  };
  return out;
}

Var Tape::add_scalar(Var a, double s) {
  Var out = push(val(a).array() + s);
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia](Tape& t) { t.accum(ia, t.nodes_[self].grad); };
  return out;
}

Var Tape::matmul(Var a, Var b) {
  if (val(a).cols() != val(b).rows()) throw ShapeError("matmul dimension mismatch");
  Var out = push(val(a) * val(b));
  int self = out.i, ia = a.i, ib = b.i;
  nodes_[self].back = [self, ia, ib](Tape& t) {
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, g * t.nodes_[ib].value.transpose());
    t.accum(ib, t.nodes_[ia].value.transpose() * g);
  };
  return out;
}

Var Tape::transpose(Var a) {
  Var out = push(val(a).transpose());
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia](Tape& t) {
    t.accum(ia, t.nodes_[self].grad.transpose());
  };
  return out;
}

Var Tape::add_rowvec(Var a, Var r) {
  if (val(r).rows() != 1 || val(r).cols() != val(a).cols()) {
    throw ShapeError("add_rowvec expects a 1xC row vector");
  }
  Mat v = val(a);
  v.rowwise() += val(r).row(0);
  Var out = push(std::move(v));
  int self = out.i, ia = a.i, ir = r.i;
  nodes_[self].back = [self, ia, ir](Tape& t) {
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, g);
    t.accum(ir, g.colwise().sum());
  };
  return out;
}

Var Tape::cmul_rowvec(Var a, Var r) {
  if (val(r).rows() != 1 || val(r).cols() != val(a).cols()) {
    throw ShapeError("cmul_rowvec expects a 1xC row vector");
  }
  Mat v = val(a).array().rowwise() * val(r).row(0).array();
  Var out = push(std::move(v));
  int self = out.i, ia = a.i, ir = r.i;
  nodes_[self].back = [self, ia, ir](Tape& t) {
    const Mat& g = t.nodes_[self].grad;
    const Mat& av = t.nodes_[ia].value;
    const Mat& rv = t.nodes_[ir].value;
    t.accum(ia, g.array().rowwise() * rv.row(0).array());
    t.accum(ir, g.cwiseProduct(av).colwise().sum());
  };
  return out;
}

Var Tape::sum_all(Var a) {
  Mat v(1, 1);
  v(0, 0) = val(a).sum();
  Var out = push(std::move(v));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia](Tape& t) {
    const Mat& av = t.nodes_[ia].value;
    t.accum(ia, Mat::Constant(av.rows(), av.cols(), t.nodes_[self].grad(0, 0)));
  };
  return out;
}

Var Tape::mean_all(Var a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(val(a).size()));
}

Var Tape::rowwise_sum(Var a) {
  Mat v = val(a).rowwise().sum();
  Var out = push(std::move(v));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia](Tape& t) {
    const Mat& av = t.nodes_[ia].value;
    t.accum(ia, t.nodes_[self].grad * Mat::Ones(1, av.cols()));
  };
  return out;
}

Var Tape::colwise_mean(Var a) {
  double inv = 1.0 / static_cast<double>(val(a).rows());
  Mat v = val(a).colwise().mean();
  Var out = push(std::move(v));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia, inv](Tape& t) {
    const Mat& av = t.nodes_[ia].value;
    t.accum(ia, Mat::Ones(av.rows(), 1) * (t.nodes_[self].grad * inv));
  };
  return out;
}

Var Tape::tanh(Var a) {
  Var out = push(val(a).array().tanh());
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia](Tape& t) {
    const Mat& y = t.nodes_[self].value;
    t.accum(ia, t.nodes_[self].grad.cwiseProduct(
                    (1.0 - y.array().square()).matrix()));
  };
  return out;
}

Var Tape::sigmoid(Var a) {
  Mat y = (0.5 * (val(a) * 0.5).array().tanh() + 0.5).matrix();
  Var out = push(std::move(y));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia](Tape& t) {
    const Mat& y = t.nodes_[self].value;
    Mat dy = y.array() * (1.0 - y.array());
    t.accum(ia, t.nodes_[self].grad.cwiseProduct(dy));
  };
  return out;
}

Var Tape::silu(Var a) {
  Mat s = (0.5 * (val(a) * 0.5).array().tanh() + 0.5).matrix();
  Var out = push(val(a).cwiseProduct(s));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia](Tape& t) {
    const Mat& x = t.nodes_[ia].value;
    Eigen::ArrayXXd s = 0.5 * (x.array() * 0.5).tanh() + 0.5;
    Eigen::ArrayXXd dy = s * (1.0 + x.array() * (1.0 - s));
    t.accum(ia, t.nodes_[self].grad.cwiseProduct(dy.matrix()));
  };
  return out;
}

Var Tape::exp(Var a) {
  Var out = push(val(a).array().exp());
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia](Tape& t) {
    t.accum(ia, t.nodes_[self].grad.cwiseProduct(t.nodes_[self].value));
  };
  return out;
}

Var Tape::clamp_min(Var a, double floor) {
  Var out = push(val(a).cwiseMax(floor));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia, floor](Tape& t) {
    const Mat& x = t.nodes_[ia].value;
    Mat mask = (x.array() > floor).cast<double>();
    t.accum(ia, t.nodes_[self].grad.cwiseProduct(mask));
  };
  return out;
}

Var Tape::clamp(Var a, double lo, double hi) {
  Var out = push(val(a).cwiseMax(lo).cwiseMin(hi));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia, lo, hi](Tape& t) {
    const Mat& x = t.nodes_[ia].value;
    Mat mask = ((x.array() > lo) && (x.array() < hi)).cast<double>();
    t.accum(ia, t.nodes_[self].grad.cwiseProduct(mask));
  };
  return out;
}

Var Tape::cmin(Var a, Var b) {
  if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols()) {
    throw ShapeError("cmin shape mismatch");
  }
  Var out = push(val(a).cwiseMin(val(b)));
  int self = out.i, ia = a.i, ib = b.i;
  nodes_[self].back = [self, ia, ib](Tape& t) {
    const Mat& av = t.nodes_[ia].value;
    const Mat& bv = t.nodes_[ib].value;
    Mat take_a = (av.array() <= bv.array()).cast<double>();
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, g.cwiseProduct(take_a));
    t.accum(ib, g.cwiseProduct((1.0 - take_a.array()).matrix()));
  };
  return out;
}

Var Tape::softmax_rows(Var a) {
  Mat x = val(a);
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::ArrayXd row = x.row(r).array();
    row -= row.maxCoeff();
    Eigen::ArrayXd e = row.exp();
    y.row(r) = (e / e.sum()).matrix().transpose();
  }
  Var out = push(std::move(y));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia](Tape& t) {
    const Mat& s = t.nodes_[self].value;
    const Mat& g = t.nodes_[self].grad;
    Mat dx(s.rows(), s.cols());
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      double dot = g.row(r).dot(s.row(r));
      dx.row(r) = s.row(r).cwiseProduct(g.row(r).array().matrix() -
                                        Mat::Constant(1, s.cols(), dot));
    }
    t.accum(ia, dx);
  };
  return out;
}

Var Tape::log_softmax_rows(Var a) {
  Mat x = val(a);
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::ArrayXd row = x.row(r).array();
    double m = row.maxCoeff();
    double lse = m + std::log((row - m).exp().sum());
    y.row(r) = (row - lse).matrix().transpose();
  }
  Var out = push(std::move(y));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia](Tape& t) {
    const Mat& y = t.nodes_[self].value;
    const Mat& g = t.nodes_[self].grad;
    Mat dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double gsum = g.row(r).sum();
      dx.row(r) = g.row(r) - (y.row(r).array().exp() * gsum).matrix();
    }
    t.accum(ia, dx);
  };
  return out;
}

Var Tape::slice_rows(Var a, int i0, int n) {
  Var out = push(val(a).middleRows(i0, n));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia, i0, n](Tape& t) {
    const Mat& av = t.nodes_[ia].value;
    Mat d = Mat::Zero(av.rows(), av.cols());
    d.middleRows(i0, n) = t.nodes_[self].grad;
    t.accum(ia, d);
  };
  return out;
}

Var Tape::slice_cols(Var a, int j0, int n) {
  Var out = push(val(a).middleCols(j0, n));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia, j0, n](Tape& t) {
    const Mat& av = t.nodes_[ia].value;
    Mat d = Mat::Zero(av.rows(), av.cols());
    d.middleCols(j0, n) = t.nodes_[self].grad;
    t.accum(ia, d);
  };
  return out;
}

Var Tape::hcat(Var a, Var b) {
  if (val(a).rows() != val(b).rows()) throw ShapeError("hcat row mismatch");
  Mat v(val(a).rows(), val(a).cols() + val(b).cols());
  v << val(a), val(b);
  Var out = push(std::move(v));
  int self = out.i, ia = a.i, ib = b.i;
  int ca = static_cast<int>(val(a).cols()), cb = static_cast<int>(val(b).cols());
  nodes_[self].back = [self, ia, ib, ca, cb](Tape& t) {
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, g.leftCols(ca));
    t.accum(ib, g.rightCols(cb));
  };
  return out;
}

Var Tape::vcat(Var a, Var b) {
  if (val(a).cols() != val(b).cols()) throw ShapeError("vcat col mismatch");
  Mat v(val(a).rows() + val(b).rows(), val(a).cols());
  v << val(a), val(b);
  Var out = push(std::move(v));
  int self = out.i, ia = a.i, ib = b.i;
  int ra = static_cast<int>(val(a).rows()), rb = static_cast<int>(val(b).rows());
  nodes_[self].back = [self, ia, ib, ra, rb](Tape& t) {
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, g.topRows(ra));
    t.accum(ib, g.bottomRows(rb));
  };
  return out;
}

Var Tape::vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw InputError("vcat of empty list");
  Var acc = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) acc = vcat(acc, parts[i]);
  return acc;
}

Var Tape::reshape(Var a, int rows, int cols) {
  const Mat& x = val(a);
  if (x.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw ShapeError("reshape element-count mismatch");
  }
  int c0 = static_cast<int>(x.cols());
  Mat v(rows, cols);
  for (int k = 0; k < rows * cols; ++k) {
    v(k / cols, k % cols) = x(k / c0, k % c0);
  }
  Var out = push(std::move(v));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia, rows, cols, c0](Tape& t) {
    const Mat& g = t.nodes_[self].grad;
    const Mat& av = t.nodes_[ia].value;
    Mat d(av.rows(), av.cols());
    for (int k = 0; k < rows * cols; ++k) {
      d(k / c0, k % c0) = g(k / cols, k % cols);
    }
    t.accum(ia, d);
  };
  return out;
}

Var Tape::norm_rows(Var a, double eps) {
  const Mat& x = val(a);
  Eigen::Index C = x.cols();
  Mat y(x.rows(), C);
  Eigen::VectorXd inv_sd(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    double isd = 1.0 / std::sqrt(var + eps);
    inv_sd(r) = isd;
    y.row(r) = ((x.row(r).array() - mu) * isd).matrix();
  }
  Var out = push(std::move(y));
  int self = out.i, ia = a.i;
  nodes_[self].back = [self, ia, inv_sd](Tape& t) {
    const Mat& y = t.nodes_[self].value;
    const Mat& g = t.nodes_[self].grad;
    Mat dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double gm = g.row(r).mean();
      double gym = g.row(r).cwiseProduct(y.row(r)).mean();
      dx.row(r) =
          ((g.row(r).array() - gm - y.row(r).array() * gym) * inv_sd(r)).matrix();
    }
    t.accum(ia, dx);
  };
  return out;
}

Var Tape::detach(Var a) {
  Mat v = trace_ ? trace_->intern(val(a)) : val(a);
  return push(std::move(v));
}

Var Tape::onehot_st_sample(Var logits, Rng& rng) {
  Var probs = softmax_rows(logits);
  const Mat& p = val(probs);
  Mat sample;
  if (trace_ && !trace_->recording()) {
    sample = trace_->intern(Mat());  // replay: draw is frozen
  } else {
    sample = Mat::Zero(p.rows(), p.cols());
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      double u = rng.uniform();
      double acc = 0.0;
      Eigen::Index pick = p.cols() - 1;
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        acc += p(r, c);
        if (u < acc) {
          pick = c;
          break;
        }
      }
      sample(r, pick) = 1.0;
    }
    if (trace_) sample = trace_->intern(sample);
  }
  // value = sample, gradient = d(probs): sample + probs - stopgrad(probs)
  return add(constant(std::move(sample)), sub(probs, detach(probs)));
}

Var Tape::bernoulli_nll_logits(Var logits, Var targets) {
  const Mat& l = val(logits);
  const Mat& y = val(targets);
  if (l.rows() != y.rows() || l.cols() != y.cols()) {
    throw ShapeError("bernoulli_nll_logits shape mismatch");
  }
  Mat v(l.rows(), l.cols());
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    double x = l(i);
    // softplus(x) - x*y, evaluated stably
    v(i) = std::max(x, 0.0) - x * y(i) + std::log1p(std::exp(-std::abs(x)));
  }
  Var out = push(std::move(v));
  int self = out.i, il = logits.i, iy = targets.i;
  nodes_[self].back = [self, il, iy](Tape& t) {
    const Mat& l = t.nodes_[il].value;
    const Mat& y = t.nodes_[iy].value;
    Mat s = (0.5 * (l * 0.5).array().tanh() + 0.5).matrix();
    t.accum(il, t.nodes_[self].grad.cwiseProduct(s - y));
  };
  return out;
}

void Tape::backward(Var root) {
  if (val(root).size() != 1) throw ShapeError("backward root must be scalar");
  nodes_[root.i].grad = Mat::Ones(1, 1);
  for (int i = root.i; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad.size() != 0) n.back(*this);
  }
}

double grad_global_norm(const GradBuffer& grads) {
  double sq = 0.0;
  for (const Mat& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

void Adam::step(ParamStore& params, GradBuffer& grads, double clip_norm) {
  if (m_.empty()) {
    for (int i = 0; i < params.size(); ++i) {
      m_.push_back(Mat::Zero(params.value(i).rows(), params.value(i).cols()));
      v_.push_back(Mat::Zero(params.value(i).rows(), params.value(i).cols()));
    }
  }
  double scale = 1.0;
  if (clip_norm > 0.0) {
    double norm = grad_global_norm(grads);
    if (norm > clip_norm) scale = clip_norm / norm;
  }
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (int i = 0; i < params.size(); ++i) {
    Mat g = grads[i] * scale;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    Mat mhat = m_[i] / bc1;
    Mat vhat = v_[i] / bc2;
    params.value(i).array() -=
        lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
  }
}

}  // namespace gawm::ad
