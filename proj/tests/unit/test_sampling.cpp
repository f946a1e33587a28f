#include <doctest.h>

#include <krondpp/dpp_model.hpp>
#include <krondpp/kron_linalg.hpp>
#include <krondpp/rng.hpp>
#include <krondpp/sampling.hpp>
#include <krondpp/types.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "test_helpers.hpp"

using namespace krondpp;
using krondpp::test::max_abs_diff;
using krondpp::test::random_spd;

namespace {

unsigned subset_mask(const Subset& y) {
  unsigned mask = 0;
  for (Index i : y) mask |= 1u << i;
  return mask;
}

// Total variation distance between the empirical distribution of `draws`
// subsets and an exact distribution indexed by bitmask.
template <typename DrawFn>
double empirical_tv(const std::vector<double>& exact, Index draws, DrawFn&& draw) {
  std::vector<double> counts(exact.size(), 0.0);
  for (Index d = 0; d < draws; ++d) counts[subset_mask(draw())] += 1.0;
  double tv = 0.0;
  for (std::size_t m = 0; m < exact.size(); ++m)
    tv += std::abs(counts[m] / static_cast<double>(draws) - exact[m]);
  return 0.5 * tv;
}

}  // namespace

TEST_CASE("select_elementary respects clamping and ordering") {
  RngStream rng(81);
  Vector values(3);
  values << 0.0, 1e-16, 2.5;
  const std::vector<Index> picked = select_elementary(values, rng);
  for (Index i : picked) CHECK(i == 2);  // only the genuine eigenvalue can win

  Vector negative(1);
  negative << -1e-10;
  CHECK_THROWS_AS(select_elementary(negative, rng), NumericalError);

  Vector empty(0);
  CHECK(select_elementary(empty, rng).empty());
}

TEST_CASE("select_elementary consumes one uniform per eigenvalue") {
  // Clamped and kept positions alike must cost exactly one draw, so streams
  // stay aligned across kernels with equal spectra.
  Vector values(4);
  values << 0.0, 3.0, 1e-16, 0.7;
  RngStream used(82);
  select_elementary(values, used);
  RngStream reference(82);
  for (int i = 0; i < 4; ++i) reference.uniform();
  CHECK(used.uniform() == reference.uniform());
}

TEST_CASE("select_elementary keeps with probability lambda/(1+lambda)") {
  RngStream rng(83);
  Vector values(2);
  values << 1.0, 3.0;
  const Index trials = 20000;
  Index kept0 = 0, kept1 = 0;
  for (Index t = 0; t < trials; ++t) {
    for (Index i : select_elementary(values, rng)) {
      if (i == 0) ++kept0;
      if (i == 1) ++kept1;
    }
  }
  // Expected rates 0.5 and 0.75; 4-sigma windows at 20000 trials.
  CHECK(std::abs(kept0 / static_cast<double>(trials) - 0.50) < 0.015);
  CHECK(std::abs(kept1 / static_cast<double>(trials) - 0.75) < 0.013);
}

TEST_CASE("sample_dense on the identity kernel is uniform over subsets") {
  const EigenSystem eig = sym_eig(Matrix::Identity(2, 2));
  RngStream rng(84);
  const std::vector<double> exact(4, 0.25);
  const double tv = empirical_tv(exact, 50000, [&] { return sample_dense(eig, rng).subset; });
  CHECK(tv < 0.02);
}

TEST_CASE("sample_dense matches the enumerated distribution") {
  RngStream setup(85);
  const Matrix l = 0.7 * random_spd(6, setup, 0.2);
  const std::vector<double> exact = enumerate_distribution_dense(l);
  const EigenSystem eig = sym_eig(l);
  RngStream rng(86);
  const double tv = empirical_tv(exact, 50000, [&] { return sample_dense(eig, rng).subset; });
  CHECK(tv < 0.02);
}

TEST_CASE("sample_kron matches the enumerated distribution") {
  RngStream setup(87);
  const KronKernel k({SpdMatrix::checked(Matrix(0.8 * random_spd(2, setup, 0.3))),
                      SpdMatrix::checked(Matrix(0.8 * random_spd(3, setup, 0.3)))});
  const std::vector<double> exact = enumerate_distribution(k);
  RngStream rng(88);
  const double tv = empirical_tv(exact, 50000, [&] { return sample_kron(k, rng).subset; });
  CHECK(tv < 0.02);
}

TEST_CASE("three-factor sampling matches enumeration") {
  RngStream setup(89);
  const KronKernel k({SpdMatrix::checked(Matrix(0.9 * random_spd(2, setup, 0.3))),
                      SpdMatrix::checked(Matrix(0.9 * random_spd(2, setup, 0.3))),
                      SpdMatrix::checked(Matrix(0.9 * random_spd(2, setup, 0.3)))});
  const std::vector<double> exact = enumerate_distribution(k);
  RngStream rng(90);
  const double tv = empirical_tv(exact, 50000, [&] { return sample_kron(k, rng).subset; });
  CHECK(tv < 0.02);
}

TEST_CASE("factored and dense samplers draw identical subsets") {
  RngStream setup(91);
  const KronKernel k({SpdMatrix::checked(random_spd(3, setup)),
                      SpdMatrix::checked(random_spd(4, setup))});
  const EigenSystem dense_sys = materialize_sorted(kron_eig(k.factors()));
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    RngStream ra(seed), rb(seed);
    const SampleReport kron_draw = sample_kron(k, ra);
    const SampleReport dense_draw = sample_dense(dense_sys, rb);
    CHECK(kron_draw.subset == dense_draw.subset);
    CHECK(kron_draw.elementary == dense_draw.elementary);
  }
}

TEST_CASE("sampling is deterministic for a fixed seed") {
  RngStream setup(92);
  const KronKernel k({SpdMatrix::checked(random_spd(3, setup)),
                      SpdMatrix::checked(random_spd(3, setup))});
  RngStream ra(7), rb(7);
  for (int draw = 0; draw < 10; ++draw)
    CHECK(sample_kron(k, ra).subset == sample_kron(k, rb).subset);
}

TEST_CASE("sample subsets are sorted and within range") {
  RngStream setup(93);
  const KronKernel k({SpdMatrix::checked(random_spd(3, setup)),
                      SpdMatrix::checked(random_spd(5, setup))});
  RngStream rng(94);
  for (int draw = 0; draw < 50; ++draw) {
    const SampleReport rep = sample_kron(k, rng);
    CHECK(rep.subset.size() == rep.elementary.size());
    for (std::size_t i = 0; i < rep.subset.size(); ++i) {
      CHECK(rep.subset[i] >= 0);
      CHECK(rep.subset[i] < 15);
      if (i > 0) CHECK(rep.subset[i] > rep.subset[i - 1]);
    }
  }
}

TEST_CASE("enumerate_distribution on exactly solvable kernels") {
  SUBCASE("identity, two items: uniform") {
    const KronKernel k({SpdMatrix::checked(Matrix::Identity(2, 2))});
    const std::vector<double> p = enumerate_distribution(k);
    REQUIRE(p.size() == 4);
    for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("single item with weight 3") {
    Matrix m(1, 1);
    m << 3.0;
    const KronKernel k({SpdMatrix::checked(m)});
    const std::vector<double> p = enumerate_distribution(k);
    REQUIRE(p.size() == 2);
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-14));
  }
}

TEST_CASE("enumerate_distribution sums to one and matches subset_prob") {
  RngStream setup(95);
  const KronKernel k({SpdMatrix::checked(random_spd(2, setup)),
                      SpdMatrix::checked(random_spd(4, setup))});
  const std::vector<double> p = enumerate_distribution(k);
  double total = 0.0;
  for (double v : p) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));

  CHECK(p[0] == doctest::Approx(subset_prob(k, {})).epsilon(1e-12));
  CHECK(p[0b101] == doctest::Approx(subset_prob(k, {0, 2})).epsilon(1e-12));
  CHECK(p[0b11000001] == doctest::Approx(subset_prob(k, {0, 6, 7})).epsilon(1e-12));

  const std::vector<double> dense = enumerate_distribution_dense(k.materialize());
  REQUIRE(dense.size() == p.size());
  for (std::size_t m = 0; m < p.size(); ++m)
    CHECK(p[m] == doctest::Approx(dense[m]).epsilon(1e-9));
}

TEST_CASE("enumerate_distribution rejects oversized ground sets") {
  const KronKernel k({SpdMatrix::checked(Matrix::Identity(5, 5)),
                      SpdMatrix::checked(Matrix::Identity(5, 5))});
  CHECK_THROWS_AS(enumerate_distribution(k), DimensionError);
}

TEST_CASE("expected_sample_size formula and empirical mean agree") {
  Vector values(2);
  values << 1.0, 1.0;
  CHECK(expected_sample_size(values) == doctest::Approx(1.0).epsilon(1e-14));

  RngStream setup(96);
  const KronKernel k({SpdMatrix::checked(random_spd(2, setup)),
                      SpdMatrix::checked(random_spd(3, setup))});
  const EigenSystem joint = materialize_sorted(kron_eig(k.factors()));
  const double expected = expected_sample_size(joint.values);

  RngStream rng(97);
  const Index draws = 20000;
  double total = 0.0;
  for (Index d = 0; d < draws; ++d)
    total += static_cast<double>(sample_kron(k, rng).subset.size());
  const double mean = total / static_cast<double>(draws);
  // 4-sigma window; per-draw size variance is at most N/4 per eigenvalue.
  CHECK(std::abs(mean - expected) < 0.1);
}
