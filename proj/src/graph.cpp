#include "swiptnet/graph.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <stdexcept>

#include "swiptnet/rng.hpp"

namespace swiptnet {

namespace {
constexpr double kClusterTol = 1e-8;
constexpr double kSignTol = 1e-12;
constexpr uint64_t kSeedBasisSeed = 0x5eedba5e5eedba5eULL;

RMatrix seed_basis(Index n) {
  Prng rng(kSeedBasisSeed);
  RMatrix s(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) s(r, c) = rng.gaussian();
  return s;
}

void fix_sign(Eigen::Ref<RMatrix> cols) {
  for (Index c = 0; c < cols.cols(); ++c) {
    for (Index r = 0; r < cols.rows(); ++r) {
      if (std::abs(cols(r, c)) > kSignTol) {
        if (cols(r, c) < 0.0) cols.col(c) = -cols.col(c);
        break;
      }
    }
  }
}
}  // namespace

RMatrix laplacian(int n) {
  if (n < 1) throw std::invalid_argument("laplacian: n must be >= 1");
  RMatrix l = RMatrix::Constant(n, n, -1.0);
  l.diagonal().setConstant(double(n - 1));
  return l;
}

LaplacianBasis eigendecompose(const RMatrix& l) {
  if (l.rows() != l.cols()) throw std::invalid_argument("eigendecompose: matrix must be square");
  if ((l - l.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, l.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("eigendecompose: matrix must be symmetric");

  Eigen::SelfAdjointEigenSolver<RMatrix> solver(l);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigendecompose: solver did not converge");

  LaplacianBasis basis;
  basis.eigenvalues = solver.eigenvalues();  // ascending
  basis.u = solver.eigenvectors();

  const Index n = l.rows();
  const double scale = std::max(1.0, basis.eigenvalues.cwiseAbs().maxCoeff());
  const RMatrix seeds = seed_basis(n);

  Index begin = 0;
  while (begin < n) {
    Index end = begin + 1;
    while (end < n &&
           basis.eigenvalues(end) - basis.eigenvalues(end - 1) <= kClusterTol * scale)
      ++end;
    const Index k = end - begin;
    if (k > 1) {
      // project the seed basis onto the cluster subspace and re-orthonormalize
      const auto v = basis.u.middleCols(begin, k);
      const RMatrix projected = v * (v.transpose() * seeds.leftCols(k));
      Eigen::HouseholderQR<RMatrix> qr(projected);
      RMatrix q = qr.householderQ() * RMatrix::Identity(n, k);
      basis.u.middleCols(begin, k) = q;
    }
    fix_sign(basis.u.middleCols(begin, k));
    begin = end;
  }
  return basis;
}

CMatrix enhance_features(const CMatrix& h, const LaplacianBasis& basis, int l_pe) {
  const Index n = h.rows();
  if (basis.u.rows() != n || basis.u.cols() != n)
    throw std::invalid_argument("enhance_features: basis does not match UE count");
  if (n > l_pe)
    throw std::invalid_argument("enhance_features: UE count exceeds configured positional-encoding width");
  CMatrix out = CMatrix::Zero(n, h.cols() + l_pe);
  out.leftCols(h.cols()) = h;
  for (Index i = 0; i < n; ++i)
    for (Index r = 0; r < n; ++r)
      out(i, h.cols() + r) = Complex(basis.u(r, i), basis.u(r, i));
  return out;
}

}  // namespace swiptnet
