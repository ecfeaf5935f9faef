#pragma once

#include "mxl/random.hpp"
#include "mxl/spectral.hpp"

namespace testing {

// Random Hermitian matrix with nuclear norm drawn uniformly in [0, max_nuclear].
inline mxl::HermitianMatrix random_hermitian(int dim, double max_nuclear, mxl::Rng& rng) {
  mxl::HermitianMatrix h = mxl::gaussian_hermitian(dim, 1.0, rng);
  const double n = mxl::nuclear_norm(h);
  return n > 0.0 ? h * (max_nuclear * mxl::uniform01(rng) / n) : h;
}

inline double max_abs_diff(const mxl::HermitianMatrix& a, const mxl::HermitianMatrix& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

}  // namespace testing
