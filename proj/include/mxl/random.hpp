#pragma once

#include "mxl/spectral.hpp"

#include <cstdint>
#include <random>

namespace mxl {

using Rng = std::mt19937_64;

/// Derives the seed of stream `index` from a master seed (SplitMix64 finalizer).
/// Parallel workers and independent random streams of one run are seeded this way.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index);

inline Rng make_rng(std::uint64_t master, std::uint64_t index) {
  return Rng(split_seed(master, index));
}

double standard_normal(Rng& rng);
double uniform01(Rng& rng);

/// Hermitian Gaussian matrix with E|Z_jk|^2 = variance for every entry:
/// real N(0, variance) diagonal, complex off-diagonal with independent parts.
HermitianMatrix gaussian_hermitian(int dim, double variance, Rng& rng);

/// Square complex Gaussian matrix with E|G_jk|^2 = variance (not Hermitian).
CMatrix gaussian_complex(int dim, double variance, Rng& rng);

/// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
CMatrix haar_unitary(int dim, Rng& rng);

/// Random point of the spectrahedron: flat-Dirichlet weights over the dim+1
/// slots (eigenvalues plus slack) and Haar eigenbases, block by block.
HermitianMatrix random_spectrahedron_point(const Spectrahedron& domain, Rng& rng);

/// Random Hermitian direction respecting the block structure, unit Frobenius norm.
HermitianMatrix random_direction(const Spectrahedron& domain, Rng& rng);

}  // namespace mxl
