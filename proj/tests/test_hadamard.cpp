#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "rsq/hadamard.hpp"
#include "rsq/matrix.hpp"

using namespace rsq;

TEST_SUITE("hadamard") {

TEST_CASE("dim 1 is a sign") {
  for (std::uint64_t seed : {0ull, 1ull, 42ull}) {
    const Matrix q = hadamard_matrix(1, seed);
    CHECK(std::fabs(q.at(0, 0)) == doctest::Approx(1.0));
  }
}

TEST_CASE("dim 2 Sylvester construction with fixed signs") {
  RandomizedHadamard rh;
  rh.dim = 2;
  rh.signs = {1, 1};
  const Matrix q = hadamard_matrix(rh);
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(q.at(0, 0) == doctest::Approx(s));
  CHECK(q.at(0, 1) == doctest::Approx(s));
  CHECK(q.at(1, 0) == doctest::Approx(s));
  CHECK(q.at(1, 1) == doctest::Approx(-s));
}

TEST_CASE("signs are plus or minus one and seeded") {
  const auto a = sample_hadamard_signs(64, 9);
  const auto b = sample_hadamard_signs(64, 9);
  CHECK(a.signs == b.signs);
  for (int s : a.signs) CHECK((s == 1 || s == -1));
  const auto c = sample_hadamard_signs(64, 10);
  CHECK(a.signs != c.signs);
}

TEST_CASE("orthogonality within 1e-12") {
  for (int dim : {1, 2, 4, 8, 16, 64}) {
    for (std::uint64_t seed : {7ull, 8ull}) {
      const Matrix q = hadamard_matrix(dim, seed);
      CHECK(max_abs_diff(matmul_nt(q, q), Matrix::identity(dim)) < 1e-12);
      CHECK(max_abs_diff(matmul(transpose(q), q), Matrix::identity(dim)) < 1e-12);
    }
  }
}

TEST_CASE("non power of two is rejected") {
  CHECK_THROWS_WITH_AS(hadamard_matrix(12, 0), doctest::Contains("unsupported dimension"),
                       std::invalid_argument);
  CHECK_THROWS_AS(hadamard_matrix(0, 0), std::invalid_argument);
  CHECK_THROWS_AS(hadamard_matrix(-4, 0), std::invalid_argument);
}

}  // TEST_SUITE
