#include "swiptnet/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "swiptnet/rng.hpp"

namespace swiptnet {

void AdamState::reset(const std::vector<CMatrix>& params) {
  step = 0;
  m.clear();
  v.clear();
  m.reserve(params.size());
  v.reserve(params.size());
  for (const CMatrix& p : params) {
    m.push_back(CMatrix::Zero(p.rows(), p.cols()));
    v.push_back(CMatrix::Zero(p.rows(), p.cols()));
  }
}

void adam_step(std::vector<CMatrix>& params, const std::vector<CMatrix>& grads,
               AdamState& state, double lr) {
  if (lr <= 0.0) throw std::invalid_argument("adam_step: learning rate must be positive");
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  if (!state.initialized()) state.reset(params);
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state does not match parameter count");

  for (size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i].rows() || grads[i].cols() != params[i].cols())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    if (!grads[i].allFinite())
      throw std::runtime_error("adam_step: non-finite gradient encountered");
  }

  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2, eps = state.epsilon;
  const double bc1 = 1.0 - std::pow(b1, double(state.step));
  const double bc2 = 1.0 - std::pow(b2, double(state.step));

  auto channel_update = [&](double& p, double& m, double& v, double g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    p -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
  };

  for (size_t i = 0; i < params.size(); ++i) {
    Complex* p = params[i].data();
    Complex* m = state.m[i].data();
    Complex* v = state.v[i].data();
    const Complex* g = grads[i].data();
    const Index count = params[i].size();
    for (Index k = 0; k < count; ++k) {
      double pr = p[k].real(), pi = p[k].imag();
      double mr = m[k].real(), mi = m[k].imag();
      double vr = v[k].real(), vi = v[k].imag();
      channel_update(pr, mr, vr, g[k].real());
      channel_update(pi, mi, vi, g[k].imag());
      p[k] = Complex(pr, pi);
      m[k] = Complex(mr, mi);
      v[k] = Complex(vr, vi);
    }
  }
}

CMatrix xavier_init(Index rows, Index cols, Index fan_in, Index fan_out, uint64_t seed) {
  if (fan_in < 1 || fan_out < 1)
    throw std::invalid_argument("xavier_init: fan_in and fan_out must be >= 1");
  const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
  Prng rng(seed);
  CMatrix out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const double re = rng.uniform(-bound, bound);
      const double im = rng.uniform(-bound, bound);
      out(r, c) = Complex(re, im);
    }
  return out;
}

}  // namespace swiptnet
