#include "doctest.h"

#include "../helpers.hpp"
#include "../oracles.hpp"
#include "mxl/errors.hpp"

#include <cmath>

using namespace mxl;

namespace {

HermitianMatrix diag2(double a, double b) { return HermitianMatrix::diagonal(RVector{{a, b}}); }

// Random matrix with flat-Dirichlet eigenvalues (trace < 1) and a Haar basis.
HermitianMatrix interior_point(int dim, Rng& rng) {
  return random_spectrahedron_point(Spectrahedron(dim, 1.0), rng);
}

}  // namespace

TEST_CASE("hermitian matrix construction") {
  CMatrix a(2, 2);
  a << 1.0, Complex(0, 1), Complex(0, -1), 2.0;
  CHECK_NOTHROW(HermitianMatrix{a});
  a(0, 1) = Complex(0.5, 1);
  CHECK_THROWS_AS(HermitianMatrix{a}, DomainError);
  CHECK_THROWS_AS(HermitianMatrix{CMatrix::Zero(2, 3)}, ShapeError);
  CHECK_THROWS_AS(HermitianMatrix::diagonal(RVector{{1.0, NAN}}), DomainError);
  a = CMatrix::Identity(2, 2);
  a(0, 1) = 1e-14;
  CHECK_NOTHROW(HermitianMatrix{a});
}

TEST_CASE("spectrahedron membership") {
  Spectrahedron d(2, 1.0);
  CHECK(d.contains(diag2(0.5, 0.5)));
  CHECK(d.contains(diag2(-5e-11, 1.0)));
  CHECK_FALSE(d.contains(diag2(-1e-9, 0.5)));
  CHECK_FALSE(d.contains(diag2(0.6, 0.6)));
  CHECK(d.contains(diag2(0.5, 0.5 + 5e-11)));

  Spectrahedron blocks(4, 1.0, {2, 2});
  CMatrix x = CMatrix::Identity(4, 4) * 0.2;
  CHECK(blocks.contains(HermitianMatrix(x)));
  x(0, 3) = x(3, 0) = 1e-3;
  CHECK_FALSE(blocks.contains(HermitianMatrix(x)));
  CHECK(blocks.off_block_mass(HermitianMatrix(x)) == doctest::Approx(std::sqrt(2.0) * 1e-3));
  CHECK_THROWS_AS(Spectrahedron(4, 1.0, {2, 1}), ConfigError);
  CHECK_THROWS_AS(Spectrahedron(2, 0.0), ConfigError);
}

TEST_CASE("herm_expm") {
  CHECK(testing::max_abs_diff(herm_expm(HermitianMatrix::zero(2)), HermitianMatrix::identity(2)) < 1e-15);
  const auto e = herm_expm(diag2(std::log(2.0), std::log(3.0)));
  CHECK(e(0, 0).real() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(e(1, 1).real() == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(std::abs(e(0, 1)) < 1e-15);

  Rng rng = make_rng(101, 0);
  for (int t = 0; t < 50; ++t) {
    const HermitianMatrix h = gaussian_hermitian(4, 1.0, rng);
    CHECK(oracle::frobenius_rel(herm_expm(h).matrix(), oracle::series_expm(h.matrix())) < 1e-10);
  }
  CMatrix bad = CMatrix::Identity(2, 2);
  bad(0, 0) = INFINITY;
  CHECK_THROWS_AS(herm_expm(HermitianMatrix::from_trusted(bad)), DomainError);
}

TEST_CASE("herm_logm inverts herm_expm") {
  Rng rng = make_rng(102, 0);
  for (int t = 0; t < 20; ++t) {
    const HermitianMatrix h = gaussian_hermitian(3, 1.0, rng);
    CHECK(testing::max_abs_diff(herm_logm(herm_expm(h)), h) < 1e-12);
  }
  CHECK_THROWS_AS(herm_logm(diag2(1.0, 0.0)), DomainError);
}

TEST_CASE("hermitize") {
  Rng rng = make_rng(103, 0);
  const HermitianMatrix h = gaussian_hermitian(3, 1.0, rng);
  CHECK(testing::max_abs_diff(hermitize(h.matrix()), h) == 0.0);
  CMatrix a(2, 2);
  a << 0, 1, 0, 0;
  const auto s = hermitize(a);
  CHECK(s(0, 1).real() == 0.5);
  CHECK(s(1, 0).real() == 0.5);
  CHECK(s(0, 0).real() == 0.0);
  const CMatrix g = gaussian_complex(3, 1.0, rng);
  const CMatrix f = gaussian_complex(3, 1.0, rng);
  CHECK(testing::max_abs_diff(hermitize(g + f), hermitize(g) + hermitize(f)) < 1e-15);
  CHECK_THROWS_AS(hermitize(CMatrix::Zero(2, 3)), ShapeError);
}

TEST_CASE("von Neumann entropy") {
  Spectrahedron d2(2, 1.0), d3(3, 1.0);
  CHECK(von_neumann_entropy(HermitianMatrix::identity(2) * (1.0 / 3.0), d2) ==
        doctest::Approx(-std::log(3.0)).epsilon(1e-14));
  CHECK(von_neumann_entropy(diag2(1.0, 0.0), d2) == 0.0);
  Rng rng = make_rng(104, 0);
  for (int t = 0; t < 200; ++t) {
    const HermitianMatrix x = interior_point(3, rng);
    const double h = von_neumann_entropy(x, d3);
    CHECK(h >= -std::log(4.0) - 1e-12);
    CHECK(h == doctest::Approx(oracle::entropy_from_eigenvalues(x.matrix())).epsilon(1e-10));
  }
  CHECK_THROWS_AS(von_neumann_entropy(diag2(0.8, 0.8), d2), DomainError);

  // Trace bound A rescales: h(X) is evaluated on X / A.
  Spectrahedron scaled(2, 4.0);
  const auto x = diag2(1.0, 2.0);
  CHECK(von_neumann_entropy(x, scaled) == doctest::Approx(von_neumann_entropy(x * 0.25, d2)));
}

TEST_CASE("entropy conjugate") {
  CHECK(entropy_conjugate(HermitianMatrix::zero(2)) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  const double big = entropy_conjugate(diag2(1000.0, 0.0));
  CHECK(std::isfinite(big));
  // log(e^1000 + 2) = 1000 + log(1 + 2 e^-1000), which is 1000 to double precision.
  CHECK(big == 1000.0);

  // Fenchel-Young: h*(Y) >= tr(YX) - h(X).
  Spectrahedron d(3, 1.0);
  Rng rng = make_rng(105, 0);
  int violations = 0;
  for (int t = 0; t < 10000; ++t) {
    const HermitianMatrix x = interior_point(3, rng);
    const HermitianMatrix y = testing::random_hermitian(3, 10.0, rng);
    if (entropy_conjugate(y) < trace_inner(y, x) - von_neumann_entropy(x, d) - 1e-12) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("mirror map") {
  Spectrahedron d(2, 1.0);
  CHECK(testing::max_abs_diff(mirror_map(HermitianMatrix::zero(2), d), HermitianMatrix::identity(2) * (1.0 / 3.0)) <
        1e-15);

  const auto m = mirror_map(diag2(50.0, 0.0), d);
  CHECK(m.all_finite());
  CHECK(m(0, 0).real() >= 1.0 - 1e-20);
  // e^0 / (1 + e^0 + e^50) in extended precision.
  const long double tail = 1.0L / (2.0L + std::exp(50.0L));
  CHECK(m(1, 1).real() == doctest::Approx(static_cast<double>(tail)).epsilon(1e-12));

  Rng rng = make_rng(106, 0);
  for (int dim = 1; dim <= 4; ++dim) {
    Spectrahedron dd(dim, 1.0);
    for (int t = 0; t < 100; ++t) {
      const HermitianMatrix y = testing::random_hermitian(dim, 30.0, rng);
      CHECK(oracle::frobenius_rel(mirror_map(y, dd).matrix(), oracle::naive_mirror(y.matrix(), 1.0)) < 1e-12);
    }
  }

  // Shifting the scores by cI is not an invariance because of the slack term.
  const auto shifted = mirror_map(HermitianMatrix::identity(2) * 1.0, d);
  CHECK(std::abs(shifted.trace() - mirror_map(HermitianMatrix::zero(2), d).trace()) > 0.1);

  // Scalar case is the logistic map.
  Spectrahedron unit(1, 1.0);
  for (double y : {-30.0, -2.0, 0.0, 0.7, 25.0}) {
    CHECK(mirror_map(HermitianMatrix::scalar(y), unit)(0, 0).real() ==
          doctest::Approx(1.0 / (1.0 + std::exp(-y))).epsilon(1e-14));
  }

  // General trace bound scales the output.
  Spectrahedron big(2, 3.0);
  CHECK(testing::max_abs_diff(mirror_map(diag2(0.3, -0.2), big), mirror_map(diag2(0.3, -0.2), d) * 3.0) < 1e-14);

  CHECK_THROWS_AS(mirror_map(HermitianMatrix::zero(3), d), ShapeError);
}

TEST_CASE("mirror map feasibility and overflow immunity") {
  Rng rng = make_rng(107, 0);
  int bad = 0;
  for (int dim = 1; dim <= 6; ++dim) {
    Spectrahedron d(dim, 1.0);
    for (int t = 0; t < 300; ++t) {
      const double scale = std::pow(10.0, 3.0 * uniform01(rng));
      const HermitianMatrix y = testing::random_hermitian(dim, scale, rng);
      const HermitianMatrix x = mirror_map(y, d);
      if (!x.all_finite() || !d.contains(x)) ++bad;
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("mirror map preserves block structure") {
  Spectrahedron d(4, 1.0, {2, 2});
  Rng rng = make_rng(108, 0);
  for (int t = 0; t < 100; ++t) {
    CMatrix y = CMatrix::Zero(4, 4);
    y.block(0, 0, 2, 2) = testing::random_hermitian(2, 20.0, rng).matrix();
    y.block(2, 2, 2, 2) = testing::random_hermitian(2, 20.0, rng).matrix();
    const HermitianMatrix x = mirror_map(HermitianMatrix(y), d);
    CHECK(d.off_block_mass(x) < 1e-14);
    CHECK(d.contains(x));
  }
  CMatrix leak = CMatrix::Zero(4, 4);
  leak(0, 3) = leak(3, 0) = 1.0;
  CHECK_THROWS_AS(mirror_map(HermitianMatrix(leak), d), DomainError);
}

TEST_CASE("score ray recovers full trace") {
  Spectrahedron d(3, 2.0);
  const HermitianMatrix dir = HermitianMatrix::diagonal(RVector{{1.0, 0.2, -0.5}});
  double last = 0.0;
  for (double t : {1.0, 3.0, 10.0, 30.0}) {
    const double tr = mirror_map(dir * t, d).trace();
    CHECK(tr > last);
    last = tr;
  }
  CHECK(last < 2.0);
  last = mirror_map(dir * 1e4, d).trace();
  CHECK(last == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("quantum KL") {
  Rng rng = make_rng(109, 0);
  for (int t = 0; t < 20; ++t) {
    const HermitianMatrix x = interior_point(3, rng);
    CHECK(std::abs(quantum_kl(x, x)) < 1e-12);
  }
  const double eps = 0.1;
  CHECK(quantum_kl(diag2(1.0, 0.0), diag2(1.0 - eps, eps)) == doctest::Approx(-std::log(1.0 - eps)).epsilon(1e-12));
  CHECK(quantum_kl(diag2(0.2, 0.7), diag2(0.4, 0.5)) ==
        doctest::Approx(oracle::classical_kl({0.2, 0.7}, {0.4, 0.5})).epsilon(1e-12));
  CHECK(std::isinf(quantum_kl(diag2(0.5, 0.5), diag2(1.0, 0.0))));
  CHECK(quantum_kl(diag2(1.0, 0.0), diag2(1.0, 0.0)) == doctest::Approx(0.0));

  // Klein: nonnegative on density matrices of equal trace.
  int negative = 0;
  for (int t = 0; t < 2000; ++t) {
    HermitianMatrix a = interior_point(3, rng), b = interior_point(3, rng);
    a *= 1.0 / a.trace();
    b *= 1.0 / b.trace();
    if (quantum_kl(a, b) < -1e-10) ++negative;
  }
  CHECK(negative == 0);
}

TEST_CASE("Bregman divergence of the modified entropy") {
  Spectrahedron d(3, 1.0);
  Rng rng = make_rng(110, 0);
  int negative = 0;
  for (int t = 0; t < 2000; ++t) {
    const HermitianMatrix a = interior_point(3, rng), b = interior_point(3, rng);
    const double D = bregman_divergence(a, b, d);
    if (D < -1e-10) ++negative;
    // D(a, b) = h(a) - h(b) - tr(grad h(b) (a - b)).
    const double direct = von_neumann_entropy(a, d) - von_neumann_entropy(b, d) -
                          trace_inner(entropy_gradient(b, d), a - b);
    CHECK(D == doctest::Approx(direct).epsilon(1e-8).scale(1.0));
  }
  CHECK(negative == 0);
}

TEST_CASE("Fenchel coupling") {
  Spectrahedron d(2, 1.0);
  Rng rng = make_rng(111, 0);
  for (int t = 0; t < 50; ++t) {
    const HermitianMatrix x = interior_point(2, rng);
    CHECK(std::abs(fenchel_coupling(x, entropy_gradient(x, d), d)) < 1e-10);
  }
  CHECK(std::abs(fenchel_coupling(HermitianMatrix::identity(2) * (1.0 / 3.0), HermitianMatrix::zero(2), d)) < 1e-14);

  Spectrahedron d3(3, 1.0);
  int mismatch = 0;
  for (int t = 0; t < 10000; ++t) {
    const HermitianMatrix x = interior_point(3, rng);
    const HermitianMatrix y = testing::random_hermitian(3, 10.0, rng);
    const double f = fenchel_coupling(x, y, d3);
    const double b = bregman_divergence(x, mirror_map(y, d3), d3);
    if (std::abs(f - b) > 1e-9 || f < -1e-9) ++mismatch;
  }
  CHECK(mismatch == 0);
}

TEST_CASE("Fenchel coupling approximation inequality") {
  // F(X, Y + Z) <= F(X, Y) + tr(Z (mirror_map(Y) - X)) + ||Z||^2 in the spectral norm.
  Rng rng = make_rng(113, 0);
  int violations = 0;
  for (int t = 0; t < 10000; ++t) {
    const int dim = 1 + t % 4;
    const Spectrahedron d(dim, 1.0);
    const HermitianMatrix x = random_spectrahedron_point(d, rng);
    const HermitianMatrix y = testing::random_hermitian(dim, 10.0, rng);
    const HermitianMatrix z = testing::random_hermitian(dim, 10.0, rng);
    const double rhs = fenchel_coupling(x, y, d) + trace_inner(z, mirror_map(y, d) - x) + dual_norm(z) * dual_norm(z);
    if (fenchel_coupling(x, y + z, d) > rhs + 1e-9) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("norms") {
  const auto h = diag2(1.0, -2.0);
  CHECK(nuclear_norm(h) == doctest::Approx(3.0));
  CHECK(dual_norm(h) == doctest::Approx(2.0));
  Rng rng = make_rng(112, 0);
  for (int t = 0; t < 100; ++t) {
    const HermitianMatrix x = interior_point(3, rng);
    CHECK(nuclear_norm(x) == doctest::Approx(x.trace()).epsilon(1e-12));
    const HermitianMatrix a = gaussian_hermitian(3, 1.0, rng), b = gaussian_hermitian(3, 1.0, rng);
    CHECK(std::abs(trace_inner(a, b)) <= nuclear_norm(a) * dual_norm(b) + 1e-12);
  }
}

TEST_CASE("projection onto the spectrahedron") {
  CHECK(project_capped_simplex(RVector{{0.2, 0.3}}, 1.0).isApprox(RVector{{0.2, 0.3}}));
  const RVector p = project_capped_simplex(RVector{{2.0, 1.0, -1.0}}, 1.0);
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(p(1) == doctest::Approx(0.0));
  CHECK(p(2) == doctest::Approx(0.0));

  Spectrahedron d(3, 1.0);
  Rng rng = make_rng(113, 0);
  for (int t = 0; t < 100; ++t) {
    const HermitianMatrix h = gaussian_hermitian(3, 1.0, rng);
    const HermitianMatrix p3 = project_to_spectrahedron(h, d);
    CHECK(d.contains(p3));
    // Variational characterization: tr((h - p)(z - p)) <= 0 for feasible z.
    const HermitianMatrix z = interior_point(3, rng);
    CHECK(trace_inner(h - p3, z - p3) <= 1e-10);
  }
}
