#pragma once

#include <string>
#include <vector>

#include "gawm/autodiff.hpp"
#include "gawm/rng.hpp"

namespace gawm::nn {

using ad::Mat;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

Mat xavier_uniform(int rows, int cols, Rng& rng);

struct Linear {
  Linear() = default;
  Linear(ParamStore& ps, Rng& rng, const std::string& prefix, int in, int out,
         bool zero_init = false);
  Var operator()(Tape& t, Var x) const;
  int w = -1, b = -1;
  int in = 0, out = 0;
};

struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& prefix, int dim);
  Var operator()(Tape& t, Var x) const;
  int gain = -1, bias = -1;
};

// Linear -> LayerNorm -> SiLU stacks with a plain linear output layer.
struct Mlp {
  Mlp() = default;
  Mlp(ParamStore& ps, Rng& rng, const std::string& prefix, int in,
      const std::vector<int>& hidden, int out, bool zero_init_out = false);
  Var operator()(Tape& t, Var x) const;
  std::vector<Linear> layers;
  std::vector<LayerNorm> norms;
  Linear head;
};

// Shared-weight GRU applied per row (one row per agent).
struct GruCell {
  GruCell() = default;
  GruCell(ParamStore& ps, Rng& rng, const std::string& prefix, int in, int dim);
  Var operator()(Tape& t, Var x, Var h) const;
  Linear x_gates;  // in  -> 3*dim (reset, update, candidate)
  Linear h_gates;  // dim -> 3*dim
  int dim = 0;
};

// Pre-norm multi-head self-attention over agent tokens (rows). self_only
// restricts every token to attend to itself, which zeroes all cross-agent
// pathways while keeping parameter shapes identical.
struct SelfAttention {
  SelfAttention() = default;
  SelfAttention(ParamStore& ps, Rng& rng, const std::string& prefix, int dim,
                int n_heads);
  Var operator()(Tape& t, Var tokens, bool self_only) const;
  LayerNorm ln;
  Linear q, k, v, out;
  int dim = 0, n_heads = 0;
};

struct TransformerBlock {
  TransformerBlock() = default;
  TransformerBlock(ParamStore& ps, Rng& rng, const std::string& prefix, int dim,
                   int n_heads);
  Var operator()(Tape& t, Var tokens, bool self_only) const;
  SelfAttention attn;
  LayerNorm ln2;
  Linear ff1, ff2;
};

}  // namespace gawm::nn
