#include "gawm/nn.hpp"

#include <cmath>

#include "gawm/error.hpp"

namespace gawm::nn {

Mat xavier_uniform(int rows, int cols, Rng& rng) {
  double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = (2.0 * rng.uniform() - 1.0) * s;
  return w;
}

Linear::Linear(ParamStore& ps, Rng& rng, const std::string& prefix, int in_,
               int out_, bool zero_init)
    : in(in_), out(out_) {
  Mat wv = zero_init ? Mat::Zero(in_, out_) : xavier_uniform(in_, out_, rng);
  w = ps.add(prefix + ".w", std::move(wv));
  b = ps.add(prefix + ".b", Mat::Zero(1, out_));
}

Var Linear::operator()(Tape& t, Var x) const {
  return t.add_rowvec(t.matmul(x, t.param(w)), t.param(b));
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& prefix, int dim) {
  gain = ps.add(prefix + ".gain", Mat::Ones(1, dim));
  bias = ps.add(prefix + ".bias", Mat::Zero(1, dim));
}

Var LayerNorm::operator()(Tape& t, Var x) const {
  return t.add_rowvec(t.cmul_rowvec(t.norm_rows(x), t.param(gain)),
                      t.param(bias));
}

Mlp::Mlp(ParamStore& ps, Rng& rng, const std::string& prefix, int in,
         const std::vector<int>& hidden, int out, bool zero_init_out) {
  int d = in;
  for (size_t i = 0; i < hidden.size(); ++i) {
    std::string p = prefix + ".l" + std::to_string(i);
    layers.emplace_back(ps, rng, p, d, hidden[i]);
    norms.emplace_back(ps, p + ".ln", hidden[i]);
    d = hidden[i];
  }
  head = Linear(ps, rng, prefix + ".head", d, out, zero_init_out);
}

Var Mlp::operator()(Tape& t, Var x) const {
  Var h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = t.silu(norms[i](t, layers[i](t, h)));
  }
  return head(t, h);
}

GruCell::GruCell(ParamStore& ps, Rng& rng, const std::string& prefix, int in,
                 int dim_)
    : dim(dim_) {
  x_gates = Linear(ps, rng, prefix + ".x", in, 3 * dim_);
  h_gates = Linear(ps, rng, prefix + ".h", dim_, 3 * dim_);
}

Var GruCell::operator()(Tape& t, Var x, Var h) const {
  Var gx = x_gates(t, x);
  Var gh = h_gates(t, h);
  Var r = t.sigmoid(t.add(t.slice_cols(gx, 0, dim), t.slice_cols(gh, 0, dim)));
  Var u = t.sigmoid(
      t.add(t.slice_cols(gx, dim, dim), t.slice_cols(gh, dim, dim)));
  Var c = t.tanh(t.add(t.slice_cols(gx, 2 * dim, dim),
                       t.cmul(r, t.slice_cols(gh, 2 * dim, dim))));
  // h' = u*h + (1-u)*c keeps entries inside (-1, 1) once h starts there
  Var one_minus_u = t.add_scalar(t.neg(u), 1.0);
  return t.add(t.cmul(u, h), t.cmul(one_minus_u, c));
}

SelfAttention::SelfAttention(ParamStore& ps, Rng& rng,
                             const std::string& prefix, int dim_, int n_heads_)
    : dim(dim_), n_heads(n_heads_) {
  if (dim_ % n_heads_ != 0) throw ConfigError("attention dim not divisible by heads");
  ln = LayerNorm(ps, prefix + ".ln", dim_);
  q = Linear(ps, rng, prefix + ".q", dim_, dim_);
  k = Linear(ps, rng, prefix + ".k", dim_, dim_);
  v = Linear(ps, rng, prefix + ".v", dim_, dim_);
  out = Linear(ps, rng, prefix + ".out", dim_, dim_);
}

Var SelfAttention::operator()(Tape& t, Var tokens, bool self_only) const {
  Var x = ln(t, tokens);
  Var vv = v(t, x);
  Var mixed;
  if (self_only) {
    // attention restricted to the own token: softmax over one entry is 1
    mixed = vv;
  } else {
    Var qq = q(t, x);
    Var kk = k(t, x);
    int hd = dim / n_heads;
    double scl = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Var> heads;
    for (int h = 0; h < n_heads; ++h) {
      Var qh = t.slice_cols(qq, h * hd, hd);
      Var kh = t.slice_cols(kk, h * hd, hd);
      Var vh = t.slice_cols(vv, h * hd, hd);
      Var scores = t.scale(t.matmul(qh, t.transpose(kh)), scl);
      Var attn = t.softmax_rows(scores);
      heads.push_back(t.matmul(attn, vh));
    }
    mixed = heads[0];
    for (size_t h = 1; h < heads.size(); ++h) mixed = t.hcat(mixed, heads[h]);
  }
  return t.add(tokens, out(t, mixed));
}

TransformerBlock::TransformerBlock(ParamStore& ps, Rng& rng,
                                   const std::string& prefix, int dim,
                                   int n_heads) {
  attn = SelfAttention(ps, rng, prefix + ".attn", dim, n_heads);
  ln2 = LayerNorm(ps, prefix + ".ln2", dim);
  ff1 = Linear(ps, rng, prefix + ".ff1", dim, 2 * dim);
  ff2 = Linear(ps, rng, prefix + ".ff2", 2 * dim, dim);
}

Var TransformerBlock::operator()(Tape& t, Var tokens, bool self_only) const {
  Var x = attn(t, tokens, self_only);
  Var f = ff2(t, t.silu(ff1(t, ln2(t, x))));
  return t.add(x, f);
}

}  // namespace gawm::nn
