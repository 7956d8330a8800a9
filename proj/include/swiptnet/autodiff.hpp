#pragma once

#include <array>
#include <functional>
#include <vector>

#include "swiptnet/types.hpp"

namespace swiptnet::ad {

// Reverse-mode differentiation over complex f64 matrices. The differentiated
// quantity is always a real scalar; every complex entry is treated as an
// independent (real, imaginary) pair. For a node value z = x + iy the stored
// adjoint is dL/dx + i*dL/dy.
//
// Real-domain ops (log, relu, softmax, ...) require inputs with zero imaginary
// part and produce zero-imaginary outputs.

class Tape;

struct Var {
  Tape* tape = nullptr;
  int node = -1;

  const CMatrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool valid() const { return tape != nullptr && node >= 0; }
};

class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient (e.g. channel inputs).
  Var constant(CMatrix value);
  /// Leaf tracked for gradients (model parameters, oracle variables).
  Var parameter(CMatrix value);

  /// Accumulates dL/d(leaf) for every parameter reachable from `loss`.
  /// `loss` must be a real 1x1 value; a tape can only be consumed once.
  void backward(Var loss);

  /// Gradient of a leaf after backward(); zero matrix if the loss never
  /// touched it.
  CMatrix gradient(Var v) const;

  bool recording() const { return recording_; }
  size_t size() const { return nodes_.size(); }

  // --- internals shared with the free-function ops ---
  struct Node {
    CMatrix value;
    bool needs_grad = false;
    std::array<int, 3> parents{{-1, -1, -1}};
    // Reads grad_[self], accumulates into the parents' gradient buffers.
    std::function<void(Tape&, int self)> backprop;
  };

  Var emit(CMatrix value, std::initializer_list<Var> parents,
           std::function<void(Tape&, int)> backprop);
  const CMatrix& value_of(int node) const { return nodes_[node].value; }
  const CMatrix& grad_of(int node) const { return grads_[node]; }
  bool has_grad(int node) const { return grads_[node].size() > 0; }
  bool needs_grad(int node) const { return nodes_[node].needs_grad; }
  // Zero-initialised gradient buffer for accumulation.
  CMatrix& grad_buffer(int node);

 private:
  std::vector<Node> nodes_;
  std::vector<CMatrix> grads_;
  bool recording_ = true;
  bool consumed_ = false;

  friend struct Var;
};

inline const CMatrix& Var::value() const { return tape->value_of(node); }

// ---------------------------------------------------------------------------
// Primitive operations. Shapes are validated; mismatches throw with the
// offending dimensions in the message.
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b);                       // a * b
Var matmul_nt(Var a, Var b);                    // a * b^T
Var matmul_nh(Var a, Var b);                    // a * b^H
Var block_matmul_nh(Var a, Var b, Index block); // per row-block: a_k * b_k^H
Var transpose(Var a);
Var ctranspose(Var a);                          // conjugate transpose
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var affine(Var a, double m, double c);          // m*a + c, elementwise
Var cmul(Var a, Var b);                         // elementwise complex product
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, Index first, Index count);
Var reshape_rows(Var a, Index pieces);          // split each row into `pieces` rows

Var abs2(Var a);                                // |z|^2 -> real
Var real_part(Var a);                           // Re(z) -> real
Var leaky_relu(Var a, double slope);            // re/im channels separately
Var selu(Var a);                                // re/im channels separately

// real-domain elementwise
Var relu(Var a);
Var sigmoid(Var a);
Var log_e(Var a);                               // throws on entries <= 0
Var exp_e(Var a);
Var recip(Var a);
Var div_elem(Var a, Var b);
Var clamp(Var a, double lo, double hi);         // zero gradient when clamped

// reductions and structure
Var sum_all(Var a);                             // -> 1x1
Var row_sum(Var a);                             // -> R x 1
Var norm2(Var a);                               // Euclidean/Frobenius norm -> 1x1
Var softmax_col(Var a);                         // softmax of an n x 1 real vector

// graph-batch structure: rows are grouped in blocks of n nodes per graph.
Var block_diag_col(Var g, Index n);             // (B*n)xn -> (B*n)x1, entry (b,i) = g[(b,i), i]
Var pair_sum(Var p, Var q, Index n);            // (B*n)xC -> (B*n^2)xC, row (b,i,j) = p[(b,i)] + q[(b,j)]
Var head_dots(Var t, Var a);                    // t: R x (S*l), a: S x l -> R x S, Re(t_s . a_s)
Var head_softmax(Var e, Index n);               // e: (B*n^2) x S, softmax over j != i per (b,i,s)
Var attn_aggregate(Var alpha, Var q, Index n);  // alpha: (B*n^2) x S, q: (B*n) x (S*l)
Var neighbor_mean(Var q, Index n);              // mean over the other n-1 rows of each block
Var power_scale_blocks(Var w, double p_max, Index n);
Var channel_affine(Var x, const CMatrix& scl, const CMatrix& sft);  // per column, re/im separately

// Batch normalisation over all rows, per column, re/im channels separately.
// Training statistics (biased variance) are returned through the out-pointers.
Var batch_norm_train(Var x, Var gamma, Var beta, double eps,
                     CMatrix* batch_mean, CMatrix* batch_var);

}  // namespace swiptnet::ad
