#include "doctest.h"

#include "mxl/errors.hpp"
#include "mxl/parallel.hpp"
#include "mxl/random.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <vector>

using namespace mxl;

TEST_CASE("seed splitting") {
  CHECK(split_seed(1, 0) == split_seed(1, 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 20; ++m)
    for (std::uint64_t i = 0; i < 20; ++i) seen.insert(split_seed(m, i));
  CHECK(seen.size() == 400);
  Rng a = make_rng(7, 3), b = make_rng(7, 3);
  for (int k = 0; k < 10; ++k) CHECK(a() == b());
}

TEST_CASE("gaussian hermitian entries") {
  Rng rng = make_rng(201, 0);
  const int dim = 3, draws = 20000;
  const double variance = 0.7;
  CMatrix mean = CMatrix::Zero(dim, dim);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(dim, dim);
  for (int t = 0; t < draws; ++t) {
    const HermitianMatrix z = gaussian_hermitian(dim, variance, rng);
    mean += z.matrix();
    second += z.matrix().cwiseAbs2();
  }
  mean /= draws;
  second /= draws;
  const double se = std::sqrt(variance / draws);
  for (int j = 0; j < dim; ++j)
    for (int k = 0; k < dim; ++k) {
      CHECK(std::abs(mean(j, k)) < 4.0 * se * std::sqrt(2.0));
      CHECK(second(j, k) == doctest::Approx(variance).epsilon(0.05));
    }
}

TEST_CASE("haar unitary") {
  Rng rng = make_rng(202, 0);
  for (int t = 0; t < 20; ++t) {
    const CMatrix u = haar_unitary(4, rng);
    CHECK((u.adjoint() * u - CMatrix::Identity(4, 4)).norm() < 1e-12);
  }
  // First-row moduli of a Haar unitary have E|u_11|^2 = 1/dim.
  double acc = 0.0;
  for (int t = 0; t < 20000; ++t) acc += std::norm(haar_unitary(3, rng)(0, 0));
  CHECK(acc / 20000 == doctest::Approx(1.0 / 3.0).epsilon(0.03));
}

TEST_CASE("random spectrahedron points and directions") {
  Rng rng = make_rng(203, 0);
  Spectrahedron plain(3, 2.0), blocks(4, 1.0, {2, 2});
  double trace_sum = 0.0;
  for (int t = 0; t < 4000; ++t) {
    const HermitianMatrix x = random_spectrahedron_point(plain, rng);
    CHECK(plain.contains(x));
    trace_sum += x.trace();
    const HermitianMatrix y = random_spectrahedron_point(blocks, rng);
    CHECK(blocks.contains(y));
    const HermitianMatrix z = random_direction(blocks, rng);
    CHECK(z.matrix().norm() == doctest::Approx(1.0));
    CHECK(blocks.off_block_mass(z) == 0.0);
  }
  // Flat Dirichlet over dim + 1 slots: E tr X = A dim / (dim + 1).
  CHECK(trace_sum / 4000 == doctest::Approx(2.0 * 3.0 / 4.0).epsilon(0.02));
}

TEST_CASE("parallel_for covers every index once") {
  for (unsigned workers : {1u, 2u, 4u}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; }, workers);
    bool once = true;
    for (auto& h : hits) once = once && h.load() == 1;
    CHECK(once);
  }
  CHECK_THROWS_AS(parallel_for(
                      10,
                      [](std::size_t i) {
                        if (i == 7) throw NumericError("boom");
                      },
                      3),
                  NumericError);
  parallel_for(0, [](std::size_t) { throw std::logic_error("never"); });
  CHECK(default_workers() >= 1);
}
