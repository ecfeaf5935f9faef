#include "mxl/random.hpp"

#include <cmath>

namespace mxl {

std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double standard_normal(Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(rng);
}

double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  return d(rng);
}

HermitianMatrix gaussian_hermitian(int dim, double variance, Rng& rng) {
  const double sd = std::sqrt(variance);
  const double half = std::sqrt(variance / 2.0);
  CMatrix z(dim, dim);
  for (int j = 0; j < dim; ++j) {
    z(j, j) = Complex(sd * standard_normal(rng), 0.0);
    for (int k = j + 1; k < dim; ++k) {
      const double re = half * standard_normal(rng);
      const double im = half * standard_normal(rng);
      z(j, k) = Complex(re, im);
      z(k, j) = Complex(re, -im);
    }
  }
  return HermitianMatrix::from_trusted(std::move(z));
}

CMatrix gaussian_complex(int dim, double variance, Rng& rng) {
  const double half = std::sqrt(variance / 2.0);
  CMatrix g(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int k = 0; k < dim; ++k)
      g(j, k) = Complex(half * standard_normal(rng), half * standard_normal(rng));
  return g;
}

CMatrix haar_unitary(int dim, Rng& rng) {
  const CMatrix g = gaussian_complex(dim, 1.0, rng);
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    const double a = std::abs(r(j, j));
    if (a > 0.0) q.col(j) *= r(j, j) / a;
  }
  return q;
}

HermitianMatrix random_spectrahedron_point(const Spectrahedron& domain, Rng& rng) {
  const int n = domain.dim();
  std::exponential_distribution<double> expo(1.0);
  RVector w(n + 1);
  for (int j = 0; j <= n; ++j) w(j) = expo(rng);
  const RVector lambda = w.head(n) * (domain.trace_bound() / w.sum());

  CMatrix x = CMatrix::Zero(n, n);
  int off = 0;
  for (int b : domain.block_sizes()) {
    const CMatrix u = haar_unitary(b, rng);
    x.block(off, off, b, b) = u * lambda.segment(off, b).cast<Complex>().asDiagonal() * u.adjoint();
    off += b;
  }
  return hermitize(x);
}

HermitianMatrix random_direction(const Spectrahedron& domain, Rng& rng) {
  CMatrix z = CMatrix::Zero(domain.dim(), domain.dim());
  int off = 0;
  for (int b : domain.block_sizes()) {
    z.block(off, off, b, b) = gaussian_hermitian(b, 1.0, rng).matrix();
    off += b;
  }
  const double nrm = z.norm();
  if (nrm > 0.0) z /= nrm;
  return hermitize(z);
}

}  // namespace mxl
