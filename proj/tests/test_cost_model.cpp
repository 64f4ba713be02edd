#include <doctest.h>

#include <vector>

#include "tvc/cost_model.hpp"
#include "tvc/error.hpp"
#include "tvc/hopm.hpp"

using namespace tvc;
using namespace tvc::cost;

TEST_CASE("sequential touched memory") {
  CHECK(m_seq(2, 3) == 24);
  CHECK(m_seq(3, 979) == 940236495.0);
  CHECK(m_seq(3, 1) == 9);
  CHECK(m_seq(3, 4) == 120);
  CHECK_THROWS_AS(m_seq(1, 4), ConfigError);
}

TEST_CASE("per-iteration distributed terms") {
  const CostQuery q{3, 4, 2, 2};
  const Term js = m_par(q, 2);
  CHECK(js.exact == 64);
  CHECK(js.approx == 64);
  for (index_t s = 0; s < 3; ++s) {
    for (index_t j = 0; j < 3; ++j) {
      const Term one = m_par(CostQuery{3, 5, 1, s}, j);
      CHECK(one.exact == m_seq(3, 5));
      CHECK(one.approx == m_seq(3, 5));
    }
  }
  CHECK_THROWS_AS(m_par(q, 3), ConfigError);
}

TEST_CASE("bracketed and approximate forms agree when p divides n") {
  for (index_t d = 2; d <= 7; ++d) {
    for (index_t n : {2, 4, 6, 8}) {
      for (index_t p = 1; p <= n; ++p) {
        if (n % p) continue;
        for (index_t s = 0; s < d; ++s) {
          double sum = 0;
          for (index_t j = 0; j < d; ++j) {
            const Term t = m_par(CostQuery{d, n, p, s}, j);
            CHECK(t.exact == doctest::Approx(t.approx).epsilon(1e-14));
            sum += t.exact;
          }
          CHECK(sum == doctest::Approx(M_par(d, n, p, s).total).epsilon(1e-14));
        }
      }
    }
  }
}

TEST_CASE("ceiling division models rank 0 on uneven splits") {
  const CostQuery q{3, 5, 2, 1, DivisionMode::ceiling};
  // n/p rounds up to 3 on rank 0: [n^3/p] = 75, [n^2/p] = 15, [n/p] = 3.
  CHECK(m_par(q, 1).exact == 75 + 2 * 15 + 4 * 3 + 2 * 5);
}

TEST_CASE("closed-form totals") {
  const MPar m = M_par(3, 4, 2, 2);
  CHECK(m.total == 204);
  CHECK(m.minimum == 204);
  for (index_t d = 2; d <= 6; ++d) {
    for (index_t s = 0; s < d; ++s) {
      CHECK(M_par(d, 6, 1, s).total == d * m_seq(d, 6));
      CHECK(M_par(d, 6, 3, s).total >= M_par(d, 6, 3, s).minimum);
    }
    CHECK(M_par(d, 6, 3, d - 1).total == M_par(d, 6, 3, d - 1).minimum);
  }
  CHECK_THROWS_AS(M_par(3, 4, 5, 0), ConfigError);
  CHECK_THROWS_AS(M_par(3, 4, 2, 3), ConfigError);
}

TEST_CASE("recursion residual vanishes") {
  for (index_t d = 2; d <= 10; ++d) {
    for (index_t n = 1; n <= 8; ++n) {
      for (index_t p = 1; p <= n; ++p) {
        for (index_t s = 1; s < d; ++s) CHECK(M_par_recursive_residual(d, n, p, s) == 0.0);
      }
    }
  }
  CHECK_THROWS_AS(M_par_recursive_residual(3, 4, 2, 0), ConfigError);
}

TEST_CASE("ratios") {
  for (index_t s = 0; s < 4; ++s) CHECK(ratios(4, 6, 1, s).eta_inv == 1.0);
  for (index_t s = 0; s < 4; ++s) {
    double prev = 0;
    for (index_t p = 1; p <= 8; ++p) {
      const double eta = ratios(4, 8, p, s).eta_inv;
      CHECK(eta >= prev);
      prev = eta;
    }
  }
  CHECK(ratios(3, 16, 2, 1).H_inv > 1.0);
}

TEST_CASE("ring overhead") {
  CHECK(ring_overhead(4, 1) == 0);
  CHECK(ring_overhead(4, 2) == 8);
  const index_t n = 1 << 16;
  CHECK(ring_overhead(n, n) / M_par(2, n, n, 0).minimum == doctest::Approx(4.0 / 7.0).epsilon(1e-3));
}

TEST_CASE("symbolic sweep") {
  // Classical schedule with regular division is the closed form.
  for (index_t d = 2; d <= 6; ++d) {
    for (index_t s = 0; s < d; ++s) {
      const auto shape = Shape::hypersquare(6, d);
      CHECK(simulate_sweep(shape, s, 6.0 / 3.0, false) == doctest::Approx(M_par(d, 6, 3, s).total).epsilon(1e-14));
      CHECK(simulate_sweep(shape, s, 6.0, false) == d * m_seq(d, 6));
      if (d >= 3) CHECK(simulate_sweep(shape, s, 2.0, true) < simulate_sweep(shape, s, 2.0, false));
    }
  }
  CHECK_THROWS_AS(simulate_sweep(Shape{4}, 0, 4.0, true), ConfigError);
}

TEST_CASE("measured counters match the model") {
  for (index_t d = 2; d <= 4; ++d) {
    const auto shape = Shape::hypersquare(4, d);
    const Tensor<double> a(shape, 1.0);
    const auto x0 = initial_vectors<double, double>(shape);
    const auto canon = hopm_canonical<double, double>(a, x0);
    CHECK(canon.kernel.front().touched_elements() == d * m_seq(d, 4));
    for (index_t s = 0; s < d; ++s) {
      HopmOptions opts;
      opts.policy.vl = 1;
      for (bool reuse : {false, true}) {
        opts.reuse = reuse;
        const auto r = dhopm3<double, double>(distribute(a, s, 2, 1), x0, opts);
        const double expected = reuse ? simulate_sweep(shape, s, 2.0, true) : M_par(d, 4, 2, s).total;
        for (const auto& k : r.kernel) CHECK(k.touched_elements() == expected);
      }
    }
  }
}

TEST_CASE("report") {
  const CostReport r = evaluate(CostQuery{3, 4, 2, 1});
  CHECK(r.m_par.size() == 3);
  CHECK(r.M_seq == 3 * r.m_seq);
  CHECK(r.M_par == doctest::Approx(r.M_par_exact));
  CHECK(r.M_par >= r.M_par_min);
  CHECK(r.ring_overhead == 8);
  CHECK(r.H_inv == doctest::Approx(r.M_par / r.M_dhopm3));
  CHECK_THROWS_AS(evaluate(CostQuery{1, 4, 1, 0}), ConfigError);
  CHECK_THROWS_AS(evaluate(CostQuery{10, 1u << 11, 1, 0}), ConfigError);
  CHECK_NOTHROW(evaluate(CostQuery{10, 8, 8, 9}));
}
