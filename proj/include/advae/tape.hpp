#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "advae/matrix.hpp"
#include "advae/rng.hpp"

namespace advae::nn {

using VarId = int32_t;

enum class MaskKind { none, causal };

// Reverse-mode tape over matrices. A tape is built per forward pass (one
// sentence), backward() runs once, then the tape is discarded. Parameter
// leaves point at external value/gradient storage so gradients accumulate
// across sentences without copying weights.
class Tape {
 public:
  explicit Tape(bool grads_enabled = true) : grads_enabled_(grads_enabled) { nodes_.reserve(256); }

  bool grads_enabled() const { return grads_enabled_; }

  // Leaves.
  VarId param(const Matrix* value, Matrix* grad_sink);
  VarId constant(Matrix value);

  // Elementwise / shape ops.
  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);
  VarId scale(VarId a, double s);
  VarId add_row_broadcast(VarId a, VarId bias);  // bias is 1 x cols
  VarId concat_cols(VarId a, VarId b);
  VarId concat_rows(VarId a, VarId b);
  VarId slice_rows(VarId a, int r0, int r1);
  VarId slice_cols(VarId a, int c0, int c1);
  VarId mean_rows(VarId a, const std::vector<uint8_t>& valid);  // -> 1 x cols

  // Linear algebra.
  VarId matmul(VarId a, VarId b);
  VarId matmul_nt(VarId a, VarId b);  // a * b^T
  VarId affine(VarId x, VarId w, VarId bias);  // x * w + bias (bias 1 x cols)

  // Fused scaled dot-product attention over n_heads column blocks of q/k/v.
  // Returns the n_q x d context; per-head weight matrices go to *capture
  // when requested.
  VarId multihead_attention(VarId q, VarId k, VarId v, int n_heads, double scale,
                            const std::vector<uint8_t>& key_valid, MaskKind mask,
                            std::vector<Matrix>* capture = nullptr);

  // Nonlinearities.
  VarId gelu(VarId a);
  VarId softplus_floor(VarId a, double floor);
  VarId layer_norm(VarId a, VarId gain, VarId bias, double eps = 1e-5);

  // Attention softmax over rows. key_valid (may be empty) marks usable key
  // columns; causal restricts row i to columns j <= i. Masked weights are 0.
  VarId softmax_rows(VarId scores, const std::vector<uint8_t>& key_valid, MaskKind mask = MaskKind::none);

  // Row gather from an embedding table; backward scatter-adds.
  VarId embedding(VarId table, std::span<const int> ids);

  // Inverted dropout; identity when p <= 0 or grads are not required for
  // training (still applied when p > 0 so eval code can opt in explicitly).
  VarId dropout(VarId a, double p, Rng& rng);

  // Scalar-producing reductions (1x1 results).
  VarId cross_entropy_sum(VarId logits, std::span<const int> targets);
  VarId kl_std_normal(VarId mu, VarId sigma);
  VarId kl_gaussians(VarId mu_q, VarId sigma_q, VarId mu_p, VarId sigma_p);

  const Matrix& val(VarId id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    return n.ext ? *n.ext : n.value;
  }

  // Valid after backward() for any grad-requiring var.
  const Matrix& grad_of(VarId id) const { return nodes_[static_cast<size_t>(id)].grad; }

  double scalar(VarId id) const { return val(id).at(0, 0); }

  void backward(VarId root);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* ext = nullptr;  // parameter leaves alias external storage
    Matrix* sink = nullptr;       // external gradient accumulator
    Matrix grad;
    bool needs_grad = false;
    std::function<void(Tape&, VarId)> back;
  };

  std::vector<Node> nodes_;
  bool grads_enabled_;

  VarId push(Matrix value, bool needs_grad, std::function<void(Tape&, VarId)> back);
  bool wants(VarId id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
  Matrix& g(VarId id) { return nodes_[static_cast<size_t>(id)].grad; }
};

}  // namespace advae::nn
