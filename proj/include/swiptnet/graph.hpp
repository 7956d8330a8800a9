#pragma once

#include "swiptnet/types.hpp"

namespace swiptnet {

/// Eigendecomposition of the complete-graph Laplacian with a canonical,
/// platform-independent eigenvector basis (the eigenvalue N carries
/// multiplicity N-1, so raw solver output is not reproducible).
struct LaplacianBasis {
  RVector eigenvalues;  // ascending
  RMatrix u;            // orthogonal, columns are eigenvectors
};

/// Laplacian of the complete graph on n nodes: diagonal n-1, off-diagonal -1.
RMatrix laplacian(int n);

/// Symmetric eigendecomposition with deterministic degenerate-subspace
/// canonicalization: per eigenvalue cluster (tolerance 1e-8) a fixed seed
/// basis is projected onto the cluster subspace and re-orthonormalized, then
/// each column's sign is fixed so its first entry above 1e-12 is positive.
/// Throws on non-symmetric input.
LaplacianBasis eigendecompose(const RMatrix& l);

/// Node features enhanced with Laplacian positional encoding: row i is
/// concat(h_i, pe_i) where pe_i holds column i of U as complex entries with
/// equal real and imaginary parts, zero-padded to width l_pe.
/// Throws when the UE count exceeds l_pe.
CMatrix enhance_features(const CMatrix& h, const LaplacianBasis& basis, int l_pe);

}  // namespace swiptnet
