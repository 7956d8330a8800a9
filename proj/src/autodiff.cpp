#include "swiptnet/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace swiptnet::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const CMatrix& a, const CMatrix& b) {
  std::ostringstream msg;
  msg << op << ": incompatible operand shapes " << a.rows() << "x" << a.cols()
      << " and " << b.rows() << "x" << b.cols();
  throw std::invalid_argument(msg.str());
}

[[noreturn]] void op_error(const char* op, const std::string& what) {
  throw std::invalid_argument(std::string(op) + ": " + what);
}

void require_same_tape(const char* op, Var a, Var b) {
  if (a.tape != b.tape) op_error(op, "operands belong to different tapes");
}

void require_real(const char* op, const CMatrix& v) {
  if ((v.imag().array() != 0.0).any())
    op_error(op, "operand must have zero imaginary part");
}

void require_block(const char* op, Index rows, Index block) {
  if (block < 1 || rows % block != 0)
    op_error(op, "row count " + std::to_string(rows) +
                     " is not a multiple of the block size " + std::to_string(block));
}

constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

}  // namespace

Var Tape::emit(CMatrix value, std::initializer_list<Var> parents,
               std::function<void(Tape&, int)> backprop) {
  Node node;
  node.value = std::move(value);
  if (recording_) {
    int i = 0;
    for (Var p : parents) {
      node.parents[i++] = p.node;
      node.needs_grad = node.needs_grad || nodes_[p.node].needs_grad;
    }
    if (node.needs_grad) node.backprop = std::move(backprop);
  }
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(CMatrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::parameter(CMatrix value) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = recording_;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

CMatrix& Tape::grad_buffer(int node) {
  CMatrix& g = grads_[node];
  if (g.size() == 0) g = CMatrix::Zero(nodes_[node].value.rows(), nodes_[node].value.cols());
  return g;
}

void Tape::backward(Var loss) {
  if (consumed_) throw std::logic_error("backward: tape already consumed");
  if (!recording_) throw std::logic_error("backward: tape is not recording");
  if (loss.tape != this) throw std::logic_error("backward: loss from another tape");
  const CMatrix& lv = nodes_[loss.node].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw std::invalid_argument("backward: loss must be a 1x1 scalar");
  if (lv(0, 0).imag() != 0.0)
    throw std::invalid_argument("backward: loss must be real");
  if (!std::isfinite(lv(0, 0).real()))
    throw std::runtime_error("backward: loss is not finite");
  consumed_ = true;
  grads_.assign(nodes_.size(), CMatrix());
  grads_[loss.node] = CMatrix::Constant(1, 1, Complex(1.0, 0.0));
  for (int i = loss.node; i >= 0; --i) {
    if (grads_[i].size() == 0) continue;
    if (nodes_[i].backprop) nodes_[i].backprop(*this, i);
  }
}

CMatrix Tape::gradient(Var v) const {
  if (v.tape != this) throw std::logic_error("gradient: var from another tape");
  if (grads_.empty())
    throw std::logic_error("gradient: backward() has not been run");
  const CMatrix& g = grads_[v.node];
  if (g.size() == 0)
    return CMatrix::Zero(nodes_[v.node].value.rows(), nodes_[v.node].value.cols());
  return g;
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  const CMatrix& av = a.value();
  const CMatrix& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  CMatrix out = av * bv;
  const int pa = a.node, pb = b.node;
  return a.tape->emit(std::move(out), {a, b}, [pa, pb](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    if (t.needs_grad(pa)) t.grad_buffer(pa).noalias() += g * t.value_of(pb).adjoint();
    if (t.needs_grad(pb)) t.grad_buffer(pb).noalias() += t.value_of(pa).adjoint() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape("matmul_nt", a, b);
  const CMatrix& av = a.value();
  const CMatrix& bv = b.value();
  if (av.cols() != bv.cols()) shape_error("matmul_nt", av, bv);
  CMatrix out = av * bv.transpose();
  const int pa = a.node, pb = b.node;
  return a.tape->emit(std::move(out), {a, b}, [pa, pb](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    if (t.needs_grad(pa)) t.grad_buffer(pa).noalias() += g * t.value_of(pb).conjugate();
    if (t.needs_grad(pb))
      t.grad_buffer(pb).noalias() += g.transpose() * t.value_of(pa).conjugate();
  });
}

Var matmul_nh(Var a, Var b) {
  require_same_tape("matmul_nh", a, b);
  const CMatrix& av = a.value();
  const CMatrix& bv = b.value();
  if (av.cols() != bv.cols()) shape_error("matmul_nh", av, bv);
  CMatrix out = av * bv.adjoint();
  const int pa = a.node, pb = b.node;
  return a.tape->emit(std::move(out), {a, b}, [pa, pb](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    if (t.needs_grad(pa)) t.grad_buffer(pa).noalias() += g * t.value_of(pb);
    if (t.needs_grad(pb)) t.grad_buffer(pb).noalias() += g.adjoint() * t.value_of(pa);
  });
}

Var block_matmul_nh(Var a, Var b, Index block) {
  require_same_tape("block_matmul_nh", a, b);
  const CMatrix& av = a.value();
  const CMatrix& bv = b.value();
  if (av.cols() != bv.cols() || av.rows() != bv.rows()) shape_error("block_matmul_nh", av, bv);
  require_block("block_matmul_nh", av.rows(), block);
  const Index nblocks = av.rows() / block;
  CMatrix out(av.rows(), block);
  for (Index k = 0; k < nblocks; ++k)
    out.middleRows(k * block, block).noalias() =
        av.middleRows(k * block, block) * bv.middleRows(k * block, block).adjoint();
  const int pa = a.node, pb = b.node;
  return a.tape->emit(std::move(out), {a, b}, [pa, pb, block, nblocks](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    for (Index k = 0; k < nblocks; ++k) {
      auto gk = g.middleRows(k * block, block);
      if (t.needs_grad(pa))
        t.grad_buffer(pa).middleRows(k * block, block).noalias() +=
            gk * t.value_of(pb).middleRows(k * block, block);
      if (t.needs_grad(pb))
        t.grad_buffer(pb).middleRows(k * block, block).noalias() +=
            gk.adjoint() * t.value_of(pa).middleRows(k * block, block);
    }
  });
}

Var transpose(Var a) {
  const int pa = a.node;
  return a.tape->emit(a.value().transpose(), {a}, [pa](Tape& t, int self) {
    t.grad_buffer(pa) += t.grad_of(self).transpose();
  });
}

Var ctranspose(Var a) {
  const int pa = a.node;
  return a.tape->emit(a.value().adjoint(), {a}, [pa](Tape& t, int self) {
    t.grad_buffer(pa) += t.grad_of(self).adjoint();
  });
}

Var add(Var a, Var b) {
  require_same_tape("add", a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a.value(), b.value());
  const int pa = a.node, pb = b.node;
  return a.tape->emit(a.value() + b.value(), {a, b}, [pa, pb](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    if (t.needs_grad(pa)) t.grad_buffer(pa) += g;
    if (t.needs_grad(pb)) t.grad_buffer(pb) += g;
  });
}

Var sub(Var a, Var b) {
  require_same_tape("sub", a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("sub", a.value(), b.value());
  const int pa = a.node, pb = b.node;
  return a.tape->emit(a.value() - b.value(), {a, b}, [pa, pb](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    if (t.needs_grad(pa)) t.grad_buffer(pa) += g;
    if (t.needs_grad(pb)) t.grad_buffer(pb) -= g;
  });
}

Var scale(Var a, double s) {
  const int pa = a.node;
  return a.tape->emit(a.value() * s, {a}, [pa, s](Tape& t, int self) {
    t.grad_buffer(pa) += s * t.grad_of(self);
  });
}

Var affine(Var a, double m, double c) {
  const int pa = a.node;
  CMatrix out = a.value() * m;
  out.array() += Complex(c, 0.0);
  return a.tape->emit(std::move(out), {a}, [pa, m](Tape& t, int self) {
    t.grad_buffer(pa) += m * t.grad_of(self);
  });
}

Var cmul(Var a, Var b) {
  require_same_tape("cmul", a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("cmul", a.value(), b.value());
  const int pa = a.node, pb = b.node;
  return a.tape->emit(a.value().cwiseProduct(b.value()), {a, b}, [pa, pb](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    if (t.needs_grad(pa)) t.grad_buffer(pa) += g.cwiseProduct(t.value_of(pb).conjugate());
    if (t.needs_grad(pb)) t.grad_buffer(pb) += g.cwiseProduct(t.value_of(pa).conjugate());
  });
}

Var concat_cols(Var a, Var b) {
  require_same_tape("concat_cols", a, b);
  if (a.rows() != b.rows()) shape_error("concat_cols", a.value(), b.value());
  CMatrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  const int pa = a.node, pb = b.node;
  const Index ca = a.cols(), cb = b.cols();
  return a.tape->emit(std::move(out), {a, b}, [pa, pb, ca, cb](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    if (t.needs_grad(pa)) t.grad_buffer(pa) += g.leftCols(ca);
    if (t.needs_grad(pb)) t.grad_buffer(pb) += g.rightCols(cb);
  });
}

Var slice_cols(Var a, Index first, Index count) {
  if (first < 0 || count < 0 || first + count > a.cols())
    op_error("slice_cols", "slice out of range");
  const int pa = a.node;
  return a.tape->emit(a.value().middleCols(first, count), {a},
                      [pa, first, count](Tape& t, int self) {
                        t.grad_buffer(pa).middleCols(first, count) += t.grad_of(self);
                      });
}

Var reshape_rows(Var a, Index pieces) {
  const CMatrix& v = a.value();
  if (pieces < 1 || v.cols() % pieces != 0)
    op_error("reshape_rows", "column count not divisible by piece count");
  const Index c = v.cols() / pieces;
  CMatrix out(v.rows() * pieces, c);
  for (Index r = 0; r < v.rows(); ++r)
    for (Index p = 0; p < pieces; ++p)
      out.row(r * pieces + p) = v.row(r).segment(p * c, c);
  const int pa = a.node;
  const Index rows = v.rows();
  return a.tape->emit(std::move(out), {a}, [pa, pieces, c, rows](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    CMatrix& gb = t.grad_buffer(pa);
    for (Index r = 0; r < rows; ++r)
      for (Index p = 0; p < pieces; ++p)
        gb.row(r).segment(p * c, c) += g.row(r * pieces + p);
  });
}

// ---------------------------------------------------------------------------
// complex -> real and channel-separate nonlinearities
// ---------------------------------------------------------------------------

Var abs2(Var a) {
  const CMatrix& v = a.value();
  CMatrix out(v.rows(), v.cols());
  out.real() = v.cwiseAbs2();
  out.imag().setZero();
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa](Tape& t, int self) {
    t.grad_buffer(pa) +=
        (2.0 * t.grad_of(self).real().array()).matrix().cast<Complex>().cwiseProduct(
            t.value_of(pa));
  });
}

Var real_part(Var a) {
  const CMatrix& v = a.value();
  CMatrix out(v.rows(), v.cols());
  out.real() = v.real();
  out.imag().setZero();
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa](Tape& t, int self) {
    t.grad_buffer(pa) += t.grad_of(self).real().cast<Complex>();
  });
}

Var leaky_relu(Var a, double slope) {
  const CMatrix& v = a.value();
  CMatrix out(v.rows(), v.cols());
  out.real() = (v.real().array() > 0.0).select(v.real(), slope * v.real());
  out.imag() = (v.imag().array() > 0.0).select(v.imag(), slope * v.imag());
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa, slope](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    const CMatrix& x = t.value_of(pa);
    CMatrix& gb = t.grad_buffer(pa);
    gb.real() += (x.real().array() > 0.0).select(g.real(), slope * g.real());
    gb.imag() += (x.imag().array() > 0.0).select(g.imag(), slope * g.imag());
  });
}

namespace {
inline double selu_fwd(double t) {
  return t > 0.0 ? kSeluLambda * t : kSeluLambda * kSeluAlpha * std::expm1(t);
}
inline double selu_bwd(double t) {
  return t > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(t);
}
}  // namespace

Var selu(Var a) {
  const CMatrix& v = a.value();
  CMatrix out(v.rows(), v.cols());
  out.real() = v.real().unaryExpr([](double t) { return selu_fwd(t); });
  out.imag() = v.imag().unaryExpr([](double t) { return selu_fwd(t); });
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    const CMatrix& x = t.value_of(pa);
    CMatrix& gb = t.grad_buffer(pa);
    gb.real() += g.real().cwiseProduct(x.real().unaryExpr([](double u) { return selu_bwd(u); }));
    gb.imag() += g.imag().cwiseProduct(x.imag().unaryExpr([](double u) { return selu_bwd(u); }));
  });
}

// ---------------------------------------------------------------------------
// real-domain elementwise ops
// ---------------------------------------------------------------------------

Var relu(Var a) {
  require_real("relu", a.value());
  const CMatrix& v = a.value();
  CMatrix out(v.rows(), v.cols());
  out.real() = v.real().cwiseMax(0.0);
  out.imag().setZero();
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa](Tape& t, int self) {
    const CMatrix& x = t.value_of(pa);
    CMatrix& gb = t.grad_buffer(pa);
    gb.real() += (x.real().array() > 0.0)
                     .select(t.grad_of(self).real(), RMatrix::Zero(x.rows(), x.cols()));
  });
}

Var sigmoid(Var a) {
  require_real("sigmoid", a.value());
  const CMatrix& v = a.value();
  CMatrix out(v.rows(), v.cols());
  out.real() = v.real().unaryExpr([](double t) { return 1.0 / (1.0 + std::exp(-t)); });
  out.imag().setZero();
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa](Tape& t, int self) {
    const RMatrix s = t.value_of(self).real();
    t.grad_buffer(pa).real() +=
        t.grad_of(self).real().cwiseProduct(s.cwiseProduct(RMatrix::Ones(s.rows(), s.cols()) - s));
  });
}

Var log_e(Var a) {
  require_real("log_e", a.value());
  const CMatrix& v = a.value();
  if ((v.real().array() <= 0.0).any())
    op_error("log_e", "operand has non-positive entries");
  CMatrix out(v.rows(), v.cols());
  out.real() = v.real().array().log().matrix();
  out.imag().setZero();
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa](Tape& t, int self) {
    t.grad_buffer(pa).real() +=
        t.grad_of(self).real().cwiseQuotient(t.value_of(pa).real());
  });
}

Var exp_e(Var a) {
  require_real("exp_e", a.value());
  const CMatrix& v = a.value();
  CMatrix out(v.rows(), v.cols());
  out.real() = v.real().array().exp().matrix();
  out.imag().setZero();
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa](Tape& t, int self) {
    t.grad_buffer(pa).real() += t.grad_of(self).real().cwiseProduct(t.value_of(self).real());
  });
}

Var recip(Var a) {
  require_real("recip", a.value());
  const CMatrix& v = a.value();
  if ((v.real().array() == 0.0).any()) op_error("recip", "division by zero");
  CMatrix out(v.rows(), v.cols());
  out.real() = v.real().cwiseInverse();
  out.imag().setZero();
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa](Tape& t, int self) {
    const RMatrix y = t.value_of(self).real();
    t.grad_buffer(pa).real() -= t.grad_of(self).real().cwiseProduct(y.cwiseProduct(y));
  });
}

Var div_elem(Var a, Var b) {
  require_same_tape("div_elem", a, b);
  require_real("div_elem", a.value());
  require_real("div_elem", b.value());
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("div_elem", a.value(), b.value());
  if ((b.value().real().array() == 0.0).any()) op_error("div_elem", "division by zero");
  CMatrix out(a.rows(), a.cols());
  out.real() = a.value().real().cwiseQuotient(b.value().real());
  out.imag().setZero();
  const int pa = a.node, pb = b.node;
  return a.tape->emit(std::move(out), {a, b}, [pa, pb](Tape& t, int self) {
    const RMatrix g = t.grad_of(self).real();
    const RMatrix bd = t.value_of(pb).real();
    if (t.needs_grad(pa)) t.grad_buffer(pa).real() += g.cwiseQuotient(bd);
    if (t.needs_grad(pb))
      t.grad_buffer(pb).real() -=
          g.cwiseProduct(t.value_of(self).real()).cwiseQuotient(bd);
  });
}

Var clamp(Var a, double lo, double hi) {
  require_real("clamp", a.value());
  const CMatrix& v = a.value();
  CMatrix out(v.rows(), v.cols());
  out.real() = v.real().cwiseMax(lo).cwiseMin(hi);
  out.imag().setZero();
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa, lo, hi](Tape& t, int self) {
    const RMatrix x = t.value_of(pa).real();
    const RMatrix g = t.grad_of(self).real();
    t.grad_buffer(pa).real() +=
        ((x.array() > lo && x.array() < hi).select(g, RMatrix::Zero(x.rows(), x.cols())));
  });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Var sum_all(Var a) {
  CMatrix out = CMatrix::Constant(1, 1, a.value().sum());
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa](Tape& t, int self) {
    t.grad_buffer(pa).array() += t.grad_of(self)(0, 0);
  });
}

Var row_sum(Var a) {
  CMatrix out = a.value().rowwise().sum();
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa](Tape& t, int self) {
    t.grad_buffer(pa).colwise() += t.grad_of(self).col(0);
  });
}

Var norm2(Var a) {
  const double n = a.value().norm();
  CMatrix out = CMatrix::Constant(1, 1, Complex(n, 0.0));
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa, n](Tape& t, int self) {
    if (n == 0.0) return;
    const double g = t.grad_of(self)(0, 0).real();
    t.grad_buffer(pa) += (g / n) * t.value_of(pa);
  });
}

Var softmax_col(Var a) {
  require_real("softmax_col", a.value());
  if (a.cols() != 1) op_error("softmax_col", "operand must be a column vector");
  const RVector x = a.value().real();
  const double m = x.maxCoeff();
  RVector e = (x.array() - m).exp();
  RVector y = e / e.sum();
  CMatrix out(a.rows(), 1);
  out.real() = y;
  out.imag().setZero();
  const int pa = a.node;
  return a.tape->emit(std::move(out), {a}, [pa](Tape& t, int self) {
    const RVector y = t.value_of(self).real();
    const RVector g = t.grad_of(self).real();
    const double dot = y.dot(g);
    t.grad_buffer(pa).real() += y.cwiseProduct((g.array() - dot).matrix());
  });
}

// ---------------------------------------------------------------------------
// graph-batch structured ops (rows grouped in blocks of n nodes per graph)
// ---------------------------------------------------------------------------

Var block_diag_col(Var g, Index n) {
  const CMatrix& v = g.value();
  require_block("block_diag_col", v.rows(), n);
  if (v.cols() != n) op_error("block_diag_col", "column count must equal the block size");
  CMatrix out(v.rows(), 1);
  for (Index r = 0; r < v.rows(); ++r) out(r, 0) = v(r, r % n);
  const int pa = g.node;
  return g.tape->emit(std::move(out), {g}, [pa, n](Tape& t, int self) {
    const CMatrix& gr = t.grad_of(self);
    CMatrix& gb = t.grad_buffer(pa);
    for (Index r = 0; r < gr.rows(); ++r) gb(r, r % n) += gr(r, 0);
  });
}

Var pair_sum(Var p, Var q, Index n) {
  require_same_tape("pair_sum", p, q);
  const CMatrix& pv = p.value();
  const CMatrix& qv = q.value();
  if (pv.rows() != qv.rows() || pv.cols() != qv.cols()) shape_error("pair_sum", pv, qv);
  require_block("pair_sum", pv.rows(), n);
  const Index nblocks = pv.rows() / n;
  CMatrix out(nblocks * n * n, pv.cols());
  for (Index b = 0; b < nblocks; ++b)
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        out.row((b * n + i) * n + j) = pv.row(b * n + i) + qv.row(b * n + j);
  const int pp = p.node, pq = q.node;
  return p.tape->emit(std::move(out), {p, q}, [pp, pq, n, nblocks](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    for (Index b = 0; b < nblocks; ++b)
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
          const auto row = g.row((b * n + i) * n + j);
          if (t.needs_grad(pp)) t.grad_buffer(pp).row(b * n + i) += row;
          if (t.needs_grad(pq)) t.grad_buffer(pq).row(b * n + j) += row;
        }
  });
}

Var head_dots(Var t0, Var a0) {
  require_same_tape("head_dots", t0, a0);
  const CMatrix& tv = t0.value();
  const CMatrix& av = a0.value();
  const Index heads = av.rows();
  const Index l = av.cols();
  if (tv.cols() != heads * l) shape_error("head_dots", tv, av);
  CMatrix out(tv.rows(), heads);
  for (Index s = 0; s < heads; ++s) {
    // Re(t_s . a_s), plain transpose product (no conjugation)
    out.col(s).real() = (tv.middleCols(s * l, l) * av.row(s).transpose()).real();
  }
  out.imag().setZero();
  const int pt = t0.node, pa = a0.node;
  return t0.tape->emit(std::move(out), {t0, a0}, [pt, pa, heads, l](Tape& t, int self) {
    const RMatrix g = t.grad_of(self).real();
    for (Index s = 0; s < heads; ++s) {
      if (t.needs_grad(pt))
        t.grad_buffer(pt).middleCols(s * l, l).noalias() +=
            g.col(s).cast<Complex>() * t.value_of(pa).row(s).conjugate();
      if (t.needs_grad(pa))
        t.grad_buffer(pa).row(s).noalias() +=
            g.col(s).cast<Complex>().transpose() * t.value_of(pt).middleCols(s * l, l).conjugate();
    }
  });
}

Var head_softmax(Var e, Index n) {
  require_real("head_softmax", e.value());
  if (n < 2) op_error("head_softmax", "graphs need at least two nodes to attend over");
  const CMatrix& ev = e.value();
  require_block("head_softmax", ev.rows(), n * n);
  const Index nblocks = ev.rows() / (n * n);
  const Index heads = ev.cols();
  CMatrix out = CMatrix::Zero(ev.rows(), heads);
  for (Index b = 0; b < nblocks; ++b)
    for (Index i = 0; i < n; ++i) {
      const Index base = (b * n + i) * n;
      for (Index s = 0; s < heads; ++s) {
        double m = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < n; ++j)
          if (j != i) m = std::max(m, ev(base + j, s).real());
        double z = 0.0;
        for (Index j = 0; j < n; ++j)
          if (j != i) z += std::exp(ev(base + j, s).real() - m);
        for (Index j = 0; j < n; ++j)
          if (j != i) out(base + j, s) = std::exp(ev(base + j, s).real() - m) / z;
      }
    }
  const int pe = e.node;
  return e.tape->emit(std::move(out), {e}, [pe, n, nblocks](Tape& t, int self) {
    const CMatrix& av = t.value_of(self);
    const RMatrix g = t.grad_of(self).real();
    CMatrix& gb = t.grad_buffer(pe);
    const Index heads = av.cols();
    for (Index b = 0; b < nblocks; ++b)
      for (Index i = 0; i < n; ++i) {
        const Index base = (b * n + i) * n;
        for (Index s = 0; s < heads; ++s) {
          double dot = 0.0;
          for (Index j = 0; j < n; ++j)
            if (j != i) dot += av(base + j, s).real() * g(base + j, s);
          for (Index j = 0; j < n; ++j)
            if (j != i)
              gb(base + j, s) += av(base + j, s).real() * (g(base + j, s) - dot);
        }
      }
  });
}

Var attn_aggregate(Var alpha, Var q, Index n) {
  require_same_tape("attn_aggregate", alpha, q);
  require_real("attn_aggregate", alpha.value());
  const CMatrix& av = alpha.value();
  const CMatrix& qv = q.value();
  require_block("attn_aggregate", qv.rows(), n);
  const Index nblocks = qv.rows() / n;
  if (av.rows() != nblocks * n * n) shape_error("attn_aggregate", av, qv);
  const Index heads = av.cols();
  if (qv.cols() % heads != 0) shape_error("attn_aggregate", av, qv);
  const Index l = qv.cols() / heads;
  CMatrix out = CMatrix::Zero(qv.rows(), qv.cols());
  for (Index b = 0; b < nblocks; ++b)
    for (Index s = 0; s < heads; ++s) {
      // gather this block/head's coefficient matrix (n x n) and aggregate
      RMatrix w(n, n);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) w(i, j) = av((b * n + i) * n + j, s).real();
      out.block(b * n, s * l, n, l).noalias() =
          w.cast<Complex>() * qv.block(b * n, s * l, n, l);
    }
  const int pal = alpha.node, pq = q.node;
  return alpha.tape->emit(std::move(out), {alpha, q},
                          [pal, pq, n, nblocks, heads, l](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    const CMatrix& av = t.value_of(pal);
    const CMatrix& qv = t.value_of(pq);
    for (Index b = 0; b < nblocks; ++b)
      for (Index s = 0; s < heads; ++s) {
        const auto gblk = g.block(b * n, s * l, n, l);
        if (t.needs_grad(pal)) {
          const RMatrix ga = (gblk * qv.block(b * n, s * l, n, l).adjoint()).real();
          CMatrix& gb = t.grad_buffer(pal);
          for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) gb((b * n + i) * n + j, s) += ga(i, j);
        }
        if (t.needs_grad(pq)) {
          RMatrix w(n, n);
          for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) w(i, j) = av((b * n + i) * n + j, s).real();
          t.grad_buffer(pq).block(b * n, s * l, n, l).noalias() +=
              w.transpose().cast<Complex>() * gblk;
        }
      }
  });
}

Var neighbor_mean(Var q, Index n) {
  if (n < 2) op_error("neighbor_mean", "graphs need at least two nodes to attend over");
  const CMatrix& qv = q.value();
  require_block("neighbor_mean", qv.rows(), n);
  const Index nblocks = qv.rows() / n;
  CMatrix out(qv.rows(), qv.cols());
  for (Index b = 0; b < nblocks; ++b) {
    const auto blk = qv.middleRows(b * n, n);
    const CMatrix colsum = blk.colwise().sum();
    for (Index i = 0; i < n; ++i)
      out.row(b * n + i) = (colsum.row(0) - blk.row(i)) / double(n - 1);
  }
  const int pq = q.node;
  return q.tape->emit(std::move(out), {q}, [pq, n, nblocks](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    CMatrix& gb = t.grad_buffer(pq);
    for (Index b = 0; b < nblocks; ++b) {
      const auto gblk = g.middleRows(b * n, n);
      const CMatrix colsum = gblk.colwise().sum();
      for (Index j = 0; j < n; ++j)
        gb.row(b * n + j) += (colsum.row(0) - gblk.row(j)) / double(n - 1);
    }
  });
}

Var power_scale_blocks(Var w, double p_max, Index n) {
  if (p_max <= 0.0) op_error("power_scale_blocks", "power budget must be positive");
  const CMatrix& wv = w.value();
  require_block("power_scale_blocks", wv.rows(), n);
  const Index nblocks = wv.rows() / n;
  CMatrix out(wv.rows(), wv.cols());
  std::vector<double> power(nblocks);
  for (Index b = 0; b < nblocks; ++b) {
    const auto blk = wv.middleRows(b * n, n);
    power[b] = blk.squaredNorm();
    const double c = std::sqrt(p_max / std::max(p_max, power[b]));
    out.middleRows(b * n, n) = c * blk;
  }
  const int pw = w.node;
  return w.tape->emit(std::move(out), {w},
                      [pw, p_max, n, nblocks, power = std::move(power)](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    const CMatrix& wv = t.value_of(pw);
    CMatrix& gb = t.grad_buffer(pw);
    for (Index b = 0; b < nblocks; ++b) {
      const auto gblk = g.middleRows(b * n, n);
      const auto wblk = wv.middleRows(b * n, n);
      const double s = power[b];
      if (s <= p_max) {
        gb.middleRows(b * n, n) += gblk;
      } else {
        const double c = std::sqrt(p_max / s);
        const double dc_ds = -0.5 * std::sqrt(p_max) * std::pow(s, -1.5);
        const double sg = (gblk.real().cwiseProduct(wblk.real()) +
                           gblk.imag().cwiseProduct(wblk.imag()))
                              .sum();
        gb.middleRows(b * n, n) += c * gblk + (2.0 * dc_ds * sg) * wblk;
      }
    }
  });
}

Var channel_affine(Var x, const CMatrix& scl, const CMatrix& sft) {
  const CMatrix& v = x.value();
  if (scl.rows() != 1 || sft.rows() != 1 || scl.cols() != v.cols() || sft.cols() != v.cols())
    op_error("channel_affine", "scale/shift must be 1 x cols rows");
  const RMatrix re =
      ((v.real().array().rowwise() * scl.real().row(0).array()).rowwise() +
       sft.real().row(0).array())
          .matrix();
  const RMatrix im =
      ((v.imag().array().rowwise() * scl.imag().row(0).array()).rowwise() +
       sft.imag().row(0).array())
          .matrix();
  CMatrix out(v.rows(), v.cols());
  out.real() = re;
  out.imag() = im;
  const int px = x.node;
  return x.tape->emit(std::move(out), {x}, [px, scl](Tape& t, int self) {
    const CMatrix& g = t.grad_of(self);
    CMatrix& gb = t.grad_buffer(px);
    gb.real() += (g.real().array().rowwise() * scl.real().row(0).array()).matrix();
    gb.imag() += (g.imag().array().rowwise() * scl.imag().row(0).array()).matrix();
  });
}

Var batch_norm_train(Var x, Var gamma, Var beta, double eps,
                     CMatrix* batch_mean, CMatrix* batch_var) {
  require_same_tape("batch_norm_train", x, gamma);
  require_same_tape("batch_norm_train", x, beta);
  const CMatrix& v = x.value();
  const Index rows = v.rows(), cols = v.cols();
  if (gamma.rows() != 1 || gamma.cols() != cols || beta.rows() != 1 || beta.cols() != cols)
    op_error("batch_norm_train", "gamma/beta must be 1 x cols");
  if (rows < 1) op_error("batch_norm_train", "empty batch");

  const RMatrix vr = v.real(), vi = v.imag();
  const Eigen::RowVectorXd mean_r = vr.colwise().mean();
  const Eigen::RowVectorXd mean_i = vi.colwise().mean();
  const RMatrix cr = vr.rowwise() - mean_r;
  const RMatrix ci = vi.rowwise() - mean_i;
  const Eigen::RowVectorXd var_r = cr.array().square().colwise().mean();
  const Eigen::RowVectorXd var_i = ci.array().square().colwise().mean();
  CMatrix mean(1, cols), var(1, cols);
  mean.real() = mean_r;
  mean.imag() = mean_i;
  var.real() = var_r;
  var.imag() = var_i;
  if (batch_mean) *batch_mean = mean;
  if (batch_var) *batch_var = var;

  const Eigen::RowVectorXd istd_r = (var_r.array() + eps).rsqrt();
  const Eigen::RowVectorXd istd_i = (var_i.array() + eps).rsqrt();
  CMatrix inv_std(1, cols);
  inv_std.real() = istd_r;
  inv_std.imag() = istd_i;

  CMatrix xhat(rows, cols);
  xhat.real() = (cr.array().rowwise() * istd_r.array()).matrix();
  xhat.imag() = (ci.array().rowwise() * istd_i.array()).matrix();

  const CMatrix& gv = gamma.value();
  const CMatrix& bv = beta.value();
  CMatrix out(rows, cols);
  out.real() = ((xhat.real().array().rowwise() * gv.real().row(0).array()).rowwise() +
                bv.real().row(0).array())
                   .matrix();
  out.imag() = ((xhat.imag().array().rowwise() * gv.imag().row(0).array()).rowwise() +
                bv.imag().row(0).array())
                   .matrix();

  const int px = x.node, pg = gamma.node, pb = beta.node;
  return x.tape->emit(
      std::move(out), {x, gamma, beta},
      [px, pg, pb, xhat = std::move(xhat), inv_std = std::move(inv_std), rows](Tape& t, int self) {
        const CMatrix& g = t.grad_of(self);
        const CMatrix& gv = t.value_of(pg);
        if (t.needs_grad(pb)) {
          CMatrix& gb = t.grad_buffer(pb);
          gb.real() += g.real().colwise().sum();
          gb.imag() += g.imag().colwise().sum();
        }
        if (t.needs_grad(pg)) {
          CMatrix& gg = t.grad_buffer(pg);
          gg.real() += g.real().cwiseProduct(xhat.real()).colwise().sum();
          gg.imag() += g.imag().cwiseProduct(xhat.imag()).colwise().sum();
        }
        if (t.needs_grad(px)) {
          // dL/dx = gamma * inv_std * (g - mean(g) - xhat * mean(g .* xhat))
          const double m = double(rows);
          CMatrix& gx = t.grad_buffer(px);
          const Eigen::ArrayXXd gr = g.real().array();
          const Eigen::ArrayXXd gi = g.imag().array();
          const Eigen::Array<double, 1, Eigen::Dynamic> mg_r = gr.colwise().sum() / m;
          const Eigen::Array<double, 1, Eigen::Dynamic> mg_i = gi.colwise().sum() / m;
          const Eigen::Array<double, 1, Eigen::Dynamic> mgx_r =
              (gr * xhat.real().array()).colwise().sum() / m;
          const Eigen::Array<double, 1, Eigen::Dynamic> mgx_i =
              (gi * xhat.imag().array()).colwise().sum() / m;
          gx.real() += (((gr.rowwise() - mg_r) - xhat.real().array().rowwise() * mgx_r).rowwise() *
                        (gv.real().row(0).array() * inv_std.real().row(0).array()))
                           .matrix();
          gx.imag() += (((gi.rowwise() - mg_i) - xhat.imag().array().rowwise() * mgx_i).rowwise() *
                        (gv.imag().row(0).array() * inv_std.imag().row(0).array()))
                           .matrix();
        }
      });
}

}  // namespace swiptnet::ad
