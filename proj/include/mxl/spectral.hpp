#pragma once

// Hermitian linear algebra on trace-bounded spectrahedra: the matrix
// exponential, the modified von Neumann entropy and its conjugate, the
// exponential mirror map, and the divergences built from them.

#include <Eigen/Dense>

#include <complex>
#include <span>
#include <vector>

namespace mxl {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

/// Tolerance on |A(j,k) - conj(A(k,j))|, relative to max(1, max |A(j,k)|).
inline constexpr double kHermitianTol = 1e-12;

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns).
struct EigenPairs {
  RVector values;
  CMatrix vectors;
};

/// Dense complex Hermitian matrix. Construction checks Hermiticity; use
/// hermitize() to project an arbitrary square matrix instead.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(CMatrix entries);

  static HermitianMatrix zero(int dim);
  static HermitianMatrix identity(int dim);
  static HermitianMatrix diagonal(const RVector& diag);
  static HermitianMatrix scalar(double value) { return diagonal(RVector::Constant(1, value)); }

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }
  Complex operator()(int j, int k) const { return m_(j, k); }

  double trace() const { return m_.trace().real(); }
  EigenPairs eigen() const;
  RVector eigenvalues() const;
  double max_eigenvalue() const;
  bool all_finite() const { return m_.allFinite(); }

  HermitianMatrix& operator+=(const HermitianMatrix& other);
  HermitianMatrix& operator-=(const HermitianMatrix& other);
  HermitianMatrix& operator*=(double s);

  friend HermitianMatrix operator+(HermitianMatrix a, const HermitianMatrix& b) { return a += b; }
  friend HermitianMatrix operator-(HermitianMatrix a, const HermitianMatrix& b) { return a -= b; }
  friend HermitianMatrix operator*(HermitianMatrix a, double s) { return a *= s; }
  friend HermitianMatrix operator*(double s, HermitianMatrix a) { return a *= s; }

  // Wraps a matrix the caller guarantees to be exactly Hermitian.
  static HermitianMatrix from_trusted(CMatrix entries);

 private:
  CMatrix m_;
};

/// Feasible set {X >= 0, ||X||_1 <= trace_bound}, optionally restricted to a
/// block-diagonal structure whose block sizes sum to dim.
class Spectrahedron {
 public:
  static constexpr double kPsdTol = 1e-10;
  static constexpr double kTraceTol = 1e-10;
  static constexpr double kOffBlockTol = 1e-12;

  Spectrahedron(int dim, double trace_bound, std::vector<int> blocks = {});

  int dim() const { return dim_; }
  double trace_bound() const { return trace_bound_; }
  const std::vector<int>& blocks() const { return blocks_; }
  bool has_blocks() const { return !blocks_.empty(); }
  /// Block sizes; a single block of size dim when unstructured.
  std::vector<int> block_sizes() const;

  bool contains(const HermitianMatrix& x) const;
  /// Frobenius norm of the entries outside the diagonal blocks.
  double off_block_mass(const HermitianMatrix& x) const;

 private:
  int dim_;
  double trace_bound_;
  std::vector<int> blocks_;
};

/// (A + A^dagger)/2.
HermitianMatrix hermitize(const CMatrix& a);

/// exp(H) through the eigendecomposition H = U diag(l) U^dagger.
HermitianMatrix herm_expm(const HermitianMatrix& h);

/// Principal logarithm of a positive-definite matrix.
HermitianMatrix herm_logm(const HermitianMatrix& x);

double nuclear_norm(const HermitianMatrix& h);
double dual_norm(const HermitianMatrix& h);
/// Re tr(A B).
double trace_inner(const HermitianMatrix& a, const HermitianMatrix& b);

/// h(X) = tr(X log X) + (1 - tr X) log(1 - tr X), evaluated on X / trace_bound.
double von_neumann_entropy(const HermitianMatrix& x, const Spectrahedron& domain);

/// Gradient of the entropy at an interior point: log X - log(1 - tr X) I (on X / trace_bound).
HermitianMatrix entropy_gradient(const HermitianMatrix& x, const Spectrahedron& domain);

/// h*(Y) = log(1 + tr exp Y), evaluated with a max-eigenvalue shift.
double entropy_conjugate(const HermitianMatrix& y);

/// trace_bound * exp(Y') / (exp(-s) + tr exp(Y')), Y' = Y - s I, s = max(lambda_max(Y), 0).
/// Block-structured domains are exponentiated block by block.
HermitianMatrix mirror_map(const HermitianMatrix& y, const Spectrahedron& domain);

/// tr(Xref (log Xref - log X)), with 0 log 0 = 0 on the null space of Xref.
/// Returns +infinity when X is singular on the support of Xref.
double quantum_kl(const HermitianMatrix& xref, const HermitianMatrix& x);

/// Bregman divergence of the modified entropy on the normalized spectrahedron:
/// quantum_kl of the lifted matrices diag(X, 1 - tr X). Nonnegative on the domain,
/// and equal to the Fenchel coupling F(Xref, Y) whenever X = mirror_map(Y).
double bregman_divergence(const HermitianMatrix& xref, const HermitianMatrix& x,
                          const Spectrahedron& domain);

/// F(X, Y) = h(X) + h*(Y) - tr(Y X) on X / trace_bound.
double fenchel_coupling(const HermitianMatrix& x, const HermitianMatrix& y,
                        const Spectrahedron& domain);

/// Euclidean projection onto the spectrahedron (block by block when structured).
HermitianMatrix project_to_spectrahedron(const HermitianMatrix& x, const Spectrahedron& domain);

/// Projection of a real vector onto {v >= 0, sum v <= bound}.
RVector project_capped_simplex(const RVector& v, double bound);

}  // namespace mxl
