#include "mxl/spectral.hpp"

#include "mxl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mxl {

namespace {

double max_abs_entry(const CMatrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

void require_finite(const CMatrix& a, const char* what) {
  if (!a.allFinite()) throw DomainError(std::string(what) + ": non-finite entries");
}

CMatrix symmetrized(const CMatrix& a) {
  CMatrix s = (a + a.adjoint()) * 0.5;
  for (int j = 0; j < s.rows(); ++j) s(j, j) = Complex(s(j, j).real(), 0.0);
  return s;
}

// Reconstructs U diag(f) U^dagger.
CMatrix reconstruct(const CMatrix& u, const RVector& f) {
  return u * f.asDiagonal() * u.adjoint();
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

struct BlockRange {
  int offset;
  int size;
};

std::vector<BlockRange> block_ranges(const Spectrahedron& domain) {
  std::vector<BlockRange> out;
  int off = 0;
  for (int b : domain.block_sizes()) {
    out.push_back({off, b});
    off += b;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// HermitianMatrix

HermitianMatrix::HermitianMatrix(CMatrix entries) {
  if (entries.rows() != entries.cols()) {
    throw ShapeError("HermitianMatrix: matrix is " + std::to_string(entries.rows()) + "x" +
                     std::to_string(entries.cols()));
  }
  require_finite(entries, "HermitianMatrix");
  const double scale = std::max(1.0, max_abs_entry(entries));
  const double skew = max_abs_entry(entries - entries.adjoint());
  if (skew > kHermitianTol * scale) {
    throw DomainError("HermitianMatrix: not Hermitian (max |A - A^H| = " + std::to_string(skew) +
                      ")");
  }
  m_ = symmetrized(entries);
}

HermitianMatrix HermitianMatrix::from_trusted(CMatrix entries) {
  HermitianMatrix h;
  h.m_ = std::move(entries);
  return h;
}

HermitianMatrix HermitianMatrix::zero(int dim) { return from_trusted(CMatrix::Zero(dim, dim)); }

HermitianMatrix HermitianMatrix::identity(int dim) {
  return from_trusted(CMatrix::Identity(dim, dim));
}

HermitianMatrix HermitianMatrix::diagonal(const RVector& diag) {
  if (!diag.allFinite()) throw DomainError("HermitianMatrix::diagonal: non-finite entries");
  return from_trusted(diag.cast<Complex>().asDiagonal());
}

EigenPairs HermitianMatrix::eigen() const {
  const int n = dim();
  if (n == 1) {
    return {RVector::Constant(1, m_(0, 0).real()), CMatrix::Identity(1, 1)};
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m_);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

RVector HermitianMatrix::eigenvalues() const {
  if (dim() == 1) return RVector::Constant(1, m_(0, 0).real());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  return es.eigenvalues();
}

double HermitianMatrix::max_eigenvalue() const { return eigenvalues().maxCoeff(); }

HermitianMatrix& HermitianMatrix::operator+=(const HermitianMatrix& other) {
  if (other.dim() != dim()) throw ShapeError("HermitianMatrix: dimension mismatch in +");
  m_ += other.m_;
  return *this;
}

HermitianMatrix& HermitianMatrix::operator-=(const HermitianMatrix& other) {
  if (other.dim() != dim()) throw ShapeError("HermitianMatrix: dimension mismatch in -");
  m_ -= other.m_;
  return *this;
}

HermitianMatrix& HermitianMatrix::operator*=(double s) {
  m_ *= s;
  return *this;
}

// ---------------------------------------------------------------------------
// Spectrahedron

Spectrahedron::Spectrahedron(int dim, double trace_bound, std::vector<int> blocks)
    : dim_(dim), trace_bound_(trace_bound), blocks_(std::move(blocks)) {
  if (dim_ < 1) throw ConfigError("Spectrahedron: dim must be positive");
  if (!(trace_bound_ > 0.0) || !std::isfinite(trace_bound_)) {
    throw ConfigError("Spectrahedron: trace bound must be positive and finite");
  }
  if (!blocks_.empty()) {
    if (std::any_of(blocks_.begin(), blocks_.end(), [](int b) { return b < 1; })) {
      throw ConfigError("Spectrahedron: block sizes must be positive");
    }
    if (std::accumulate(blocks_.begin(), blocks_.end(), 0) != dim_) {
      throw ConfigError("Spectrahedron: block sizes must sum to dim");
    }
  }
}

std::vector<int> Spectrahedron::block_sizes() const {
  return blocks_.empty() ? std::vector<int>{dim_} : blocks_;
}

double Spectrahedron::off_block_mass(const HermitianMatrix& x) const {
  if (blocks_.empty()) return 0.0;
  CMatrix off = x.matrix();
  for (const auto& r : block_ranges(*this)) off.block(r.offset, r.offset, r.size, r.size).setZero();
  return off.norm();
}

bool Spectrahedron::contains(const HermitianMatrix& x) const {
  if (x.dim() != dim_ || !x.all_finite()) return false;
  const RVector ev = x.eigenvalues();
  if (ev.minCoeff() < -kPsdTol) return false;
  if (ev.cwiseAbs().sum() > trace_bound_ + kTraceTol) return false;
  return off_block_mass(x) <= kOffBlockTol;
}

// ---------------------------------------------------------------------------
// Matrix functions and norms

HermitianMatrix hermitize(const CMatrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("hermitize: matrix is not square");
  require_finite(a, "hermitize");
  return HermitianMatrix::from_trusted(symmetrized(a));
}

HermitianMatrix herm_expm(const HermitianMatrix& h) {
  if (!h.all_finite()) throw DomainError("herm_expm: non-finite entries");
  const EigenPairs ep = h.eigen();
  const RVector f = ep.values.array().exp();
  if (!f.allFinite()) throw DomainError("herm_expm: exponential overflows");
  return HermitianMatrix::from_trusted(symmetrized(reconstruct(ep.vectors, f)));
}

HermitianMatrix herm_logm(const HermitianMatrix& x) {
  const EigenPairs ep = x.eigen();
  if (ep.values.minCoeff() <= 0.0) throw DomainError("herm_logm: matrix is not positive definite");
  const RVector f = ep.values.array().log();
  return HermitianMatrix::from_trusted(symmetrized(reconstruct(ep.vectors, f)));
}

double nuclear_norm(const HermitianMatrix& h) { return h.eigenvalues().cwiseAbs().sum(); }

double dual_norm(const HermitianMatrix& h) { return h.eigenvalues().cwiseAbs().maxCoeff(); }

double trace_inner(const HermitianMatrix& a, const HermitianMatrix& b) {
  if (a.dim() != b.dim()) throw ShapeError("trace_inner: dimension mismatch");
  // Re tr(AB) = sum_jk Re(A_jk B_kj) = sum_jk Re(A_jk conj(B_jk)) for Hermitian B.
  return (a.matrix().array() * b.matrix().conjugate().array()).real().sum();
}

// ---------------------------------------------------------------------------
// Entropy machinery

namespace {

// Eigenvalues of X / A, checked against the unit spectrahedron.
RVector normalized_spectrum(const HermitianMatrix& x, const Spectrahedron& domain,
                            const char* what) {
  if (x.dim() != domain.dim()) throw ShapeError(std::string(what) + ": dimension mismatch");
  if (!x.all_finite()) throw DomainError(std::string(what) + ": non-finite entries");
  RVector ev = x.eigenvalues() / domain.trace_bound();
  if (ev.minCoeff() < -Spectrahedron::kPsdTol || ev.sum() > 1.0 + Spectrahedron::kTraceTol) {
    throw DomainError(std::string(what) + ": matrix lies outside the spectrahedron");
  }
  return ev.cwiseMax(0.0);
}

}  // namespace

double von_neumann_entropy(const HermitianMatrix& x, const Spectrahedron& domain) {
  const RVector ev = normalized_spectrum(x, domain, "von_neumann_entropy");
  double h = 0.0;
  for (double l : ev) h += xlogx(std::min(l, 1.0));
  const double slack = std::clamp(1.0 - ev.sum(), 0.0, 1.0);
  return h + xlogx(slack);
}

HermitianMatrix entropy_gradient(const HermitianMatrix& x, const Spectrahedron& domain) {
  const RVector ev = normalized_spectrum(x, domain, "entropy_gradient");
  const double slack = 1.0 - ev.sum();
  if (ev.minCoeff() <= 0.0 || slack <= 0.0) {
    throw DomainError("entropy_gradient: point is not interior");
  }
  HermitianMatrix g = herm_logm(x * (1.0 / domain.trace_bound()));
  g -= HermitianMatrix::identity(x.dim()) * std::log(slack);
  return g;
}

double entropy_conjugate(const HermitianMatrix& y) {
  if (!y.all_finite()) throw DomainError("entropy_conjugate: non-finite entries");
  const RVector ev = y.eigenvalues();
  const double s = std::max(ev.maxCoeff(), 0.0);
  return s + std::log(std::exp(-s) + (ev.array() - s).exp().sum());
}

HermitianMatrix mirror_map(const HermitianMatrix& y, const Spectrahedron& domain) {
  if (y.dim() != domain.dim()) throw ShapeError("mirror_map: dimension mismatch");
  if (!y.all_finite()) throw DomainError("mirror_map: non-finite entries");
  const auto ranges = block_ranges(domain);
  if (domain.has_blocks() && domain.off_block_mass(y) > Spectrahedron::kOffBlockTol) {
    throw DomainError("mirror_map: score matrix is not block diagonal");
  }

  if (y.dim() == 1) {
    const double v = y(0, 0).real();
    const double s = std::max(v, 0.0);
    const double e = std::exp(v - s);
    return HermitianMatrix::scalar(domain.trace_bound() * e / (std::exp(-s) + e));
  }

  std::vector<EigenPairs> parts;
  parts.reserve(ranges.size());
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& r : ranges) {
    const CMatrix blk = y.matrix().block(r.offset, r.offset, r.size, r.size);
    EigenPairs ep = HermitianMatrix::from_trusted(blk).eigen();
    top = std::max(top, ep.values.maxCoeff());
    parts.push_back(std::move(ep));
  }
  const double s = std::max(top, 0.0);
  double denom = std::exp(-s);
  CMatrix out = CMatrix::Zero(y.dim(), y.dim());
  for (std::size_t b = 0; b < ranges.size(); ++b) {
    const RVector w = (parts[b].values.array() - s).exp();
    denom += w.sum();
    out.block(ranges[b].offset, ranges[b].offset, ranges[b].size, ranges[b].size) =
        reconstruct(parts[b].vectors, w);
  }
  out *= domain.trace_bound() / denom;
  return HermitianMatrix::from_trusted(symmetrized(out));
}

double quantum_kl(const HermitianMatrix& xref, const HermitianMatrix& x) {
  if (xref.dim() != x.dim()) throw ShapeError("quantum_kl: dimension mismatch");
  if (!xref.all_finite() || !x.all_finite()) throw DomainError("quantum_kl: non-finite entries");
  const RVector p = xref.eigenvalues();
  const double scale = std::max(p.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (p.minCoeff() < -Spectrahedron::kPsdTol * std::max(1.0, scale)) {
    throw DomainError("quantum_kl: reference matrix is not positive semidefinite");
  }
  double self = 0.0;
  for (double v : p) self += xlogx(v);

  const EigenPairs ex = x.eigen();
  double cross = 0.0;
  const double mass_floor = 1e-14 * std::max(1.0, xref.trace());
  for (int j = 0; j < ex.values.size(); ++j) {
    const auto v = ex.vectors.col(j);
    const double mass = (v.adjoint() * xref.matrix() * v)(0, 0).real();
    if (mass <= mass_floor) continue;
    if (ex.values(j) <= 1e-300) return std::numeric_limits<double>::infinity();
    cross += mass * std::log(ex.values(j));
  }
  return self - cross;
}

double bregman_divergence(const HermitianMatrix& xref, const HermitianMatrix& x,
                          const Spectrahedron& domain) {
  const double a = domain.trace_bound();
  const RVector pr = normalized_spectrum(xref, domain, "bregman_divergence");
  const RVector px = normalized_spectrum(x, domain, "bregman_divergence");
  const double slack_ref = std::clamp(1.0 - pr.sum(), 0.0, 1.0);
  const double slack_x = std::clamp(1.0 - px.sum(), 0.0, 1.0);
  double d = quantum_kl(xref * (1.0 / a), x * (1.0 / a));
  if (slack_ref > 1e-14) {
    if (slack_x <= 1e-300) return std::numeric_limits<double>::infinity();
    d += slack_ref * (std::log(slack_ref) - std::log(slack_x));
  }
  return d;
}

double fenchel_coupling(const HermitianMatrix& x, const HermitianMatrix& y,
                        const Spectrahedron& domain) {
  if (y.dim() != domain.dim()) throw ShapeError("fenchel_coupling: dimension mismatch");
  return von_neumann_entropy(x, domain) + entropy_conjugate(y) -
         trace_inner(y, x) / domain.trace_bound();
}

// ---------------------------------------------------------------------------
// Projection

RVector project_capped_simplex(const RVector& v, double bound) {
  RVector clipped = v.cwiseMax(0.0);
  if (clipped.sum() <= bound) return clipped;
  // Project onto {w >= 0, sum w = bound}.
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double t = (cum - bound) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0);
}

HermitianMatrix project_to_spectrahedron(const HermitianMatrix& x, const Spectrahedron& domain) {
  if (x.dim() != domain.dim()) throw ShapeError("project_to_spectrahedron: dimension mismatch");
  const auto ranges = block_ranges(domain);
  std::vector<EigenPairs> parts;
  RVector all(domain.dim());
  for (const auto& r : ranges) {
    parts.push_back(
        HermitianMatrix::from_trusted(x.matrix().block(r.offset, r.offset, r.size, r.size)).eigen());
    all.segment(r.offset, r.size) = parts.back().values;
  }
  const RVector proj = project_capped_simplex(all, domain.trace_bound());
  CMatrix out = CMatrix::Zero(domain.dim(), domain.dim());
  for (std::size_t b = 0; b < ranges.size(); ++b) {
    out.block(ranges[b].offset, ranges[b].offset, ranges[b].size, ranges[b].size) =
        reconstruct(parts[b].vectors, proj.segment(ranges[b].offset, ranges[b].size));
  }
  return HermitianMatrix::from_trusted(symmetrized(out));
}

}  // namespace mxl
