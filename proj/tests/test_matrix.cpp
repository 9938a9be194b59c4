#include <doctest.h>

#include <stdexcept>

#include "rsq/matrix.hpp"
#include "rsq/rng.hpp"
#include "test_util.hpp"

using namespace rsq;
using namespace rsq::testing;

TEST_SUITE("matrix") {

TEST_CASE("matmul identity and hand arithmetic") {
  Rng rng(11);
  const Matrix b = random_matrix(2, 3, rng);
  CHECK(max_abs_diff(matmul(Matrix::identity(2), b), b) == 0.0);

  const Matrix a(2, 2, {1, 2, 3, 4});
  const Matrix v(2, 1, {1, 1});
  const Matrix prod = matmul(a, v);
  CHECK(prod.at(0, 0) == doctest::Approx(3.0));
  CHECK(prod.at(1, 0) == doctest::Approx(7.0));

  const Matrix z(3, 2);
  CHECK(max_abs(matmul(z, b)) == 0.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Matrix a(2, 3);
  const Matrix b(2, 3);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("2x3"), std::invalid_argument);
}

TEST_CASE("matmul associativity on random triples") {
  Rng rng(7);
  for (int it = 0; it < 20; ++it) {
    const int m = 1 + static_cast<int>(rng.uniform_int(6));
    const int k = 1 + static_cast<int>(rng.uniform_int(6));
    const int n = 1 + static_cast<int>(rng.uniform_int(6));
    const int p = 1 + static_cast<int>(rng.uniform_int(6));
    const Matrix a = random_matrix(m, k, rng);
    const Matrix b = random_matrix(k, n, rng);
    const Matrix c = random_matrix(n, p, rng);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    CHECK(rel_dev(left, right) < 1e-9);
  }
}

TEST_CASE("matmul_nt matches explicit transpose") {
  Rng rng(3);
  const Matrix a = random_matrix(4, 5, rng);
  const Matrix b = random_matrix(3, 5, rng);
  CHECK(max_abs_diff(matmul_nt(a, b), matmul(a, transpose(b))) < 1e-12);
}

TEST_CASE("cholesky_inverse on fixed instances") {
  CHECK(max_abs_diff(cholesky_inverse(Matrix::identity(3)), Matrix::identity(3)) == 0.0);

  const Matrix d(2, 2, {4, 0, 0, 2});
  const Matrix dinv = cholesky_inverse(d);
  CHECK(dinv.at(0, 0) == doctest::Approx(0.25));
  CHECK(dinv.at(1, 1) == doctest::Approx(0.5));
  CHECK(dinv.at(0, 1) == doctest::Approx(0.0));

  // det = 4, analytic inverse [[0.5, -0.5], [-0.5, 1.0]]
  const Matrix h(2, 2, {4, 2, 2, 2});
  const Matrix hinv = cholesky_inverse(h);
  CHECK(hinv.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(hinv.at(0, 1) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(hinv.at(1, 0) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(hinv.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cholesky failure names the pivot") {
  const Matrix bad(2, 2, {1, 2, 2, 1});  // indefinite, fails at pivot 1
  CHECK_THROWS_WITH_AS(cholesky_lower(bad), doctest::Contains("not positive definite at pivot 1"),
                       std::runtime_error);
}

TEST_CASE("cholesky_inverse property: A * inv(A) = I for 100 random SPD") {
  Rng rng(2024);
  for (int it = 0; it < 100; ++it) {
    const int dim = 1 + static_cast<int>(rng.uniform_int(32));
    const Matrix a = random_spd(dim, rng);
    const Matrix inv = cholesky_inverse(a);
    CHECK(max_abs_diff(matmul(a, inv), Matrix::identity(dim)) < 1e-8);
  }
}

TEST_CASE("upper cholesky of inverse reproduces H^{-1} = U^T U") {
  Rng rng(5);
  for (int it = 0; it < 20; ++it) {
    const int dim = 2 + static_cast<int>(rng.uniform_int(10));
    const Matrix h = random_spd(dim, rng);
    const Matrix u = upper_cholesky_of_inverse(h);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < i; ++j) CHECK(u.at(i, j) == 0.0);  // upper triangular
    }
    const Matrix recon = matmul(transpose(u), u);
    CHECK(rel_dev(recon, cholesky_inverse(h)) < 1e-9);
  }
}

}  // TEST_SUITE
