#include <doctest.h>

#include <cmath>
#include <vector>

#include "support.hpp"
#include "tvc/error.hpp"
#include "tvc/hopm.hpp"

using namespace tvc;
using tvc::testing::integer_tensor;

namespace {

double max_rel_diff(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double worst = 0;
  for (index_t j = 0; j < a.size(); ++j) {
    double diff = 0, ref = 0;
    for (index_t i = 0; i < a[j].size(); ++i) {
      diff = std::max(diff, std::fabs(a[j][i] - b[j][i]));
      ref = std::max(ref, std::fabs(b[j][i]));
    }
    worst = std::max(worst, diff / ref);
  }
  return worst;
}

}  // namespace

TEST_CASE("loop indices") {
  CHECK(hopm_indices(0, 3).lambda == 1);
  CHECK(hopm_indices(0, 3).mu == 1);
  CHECK(hopm_indices(0, 3).nu == 2);
  CHECK(hopm_indices(1, 3).lambda == 0);
  CHECK(hopm_indices(1, 3).mu == 1);
  CHECK(hopm_indices(2, 3).mu == 2);
  CHECK(hopm_indices(2, 3).nu == 1);
  CHECK(hopm_indices(1, 2).nu == 0);
}

TEST_CASE("mode remapping") {
  const std::vector<index_t> done{0, 2};
  CHECK(mode_remap(1, done) == 0);
  CHECK(mode_remap(3, done) == 1);
  CHECK(mode_remap(4, std::vector<index_t>{}) == 4);
  CHECK_THROWS_AS(mode_remap(2, done), ContractError);
}

TEST_CASE("contraction counts per sweep") {
  for (index_t d = 2; d <= 10; ++d) {
    CHECK(hopm_tvc_count(d, true) == (d - 1) * (d + 2) / 2);
    CHECK(hopm_tvc_count(d, false) == d * (d - 1));
    CHECK(hopm_tvc_count(d, false) - hopm_tvc_count(d, true) == (d - 1) * (d - 2) / 2);
  }
}

TEST_CASE("initial vectors have unit norm") {
  const Shape shape{3, 5, 4};
  for (auto kind : {InitKind::ones, InitKind::random}) {
    const auto x = initial_vectors<double, double>(shape, kind, 4);
    REQUIRE(x.size() == 3);
    for (index_t j = 0; j < 3; ++j) {
      CHECK(x[j].size() == shape[j]);
      double sq = 0;
      for (double v : x[j]) sq += v * v;
      CHECK(sq == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
  CHECK(initial_vectors<double, double>(shape, InitKind::random, 1) ==
        initial_vectors<double, double>(shape, InitKind::random, 1));
}

TEST_CASE("three-buffer HOPM reproduces the canonical method") {
  for (const Shape shape : {Shape{5, 4}, Shape{4, 3, 5}, Shape{3, 4, 2, 3}, Shape::hypersquare(3, 5)}) {
    const auto a = integer_tensor(shape, shape.size());
    const auto x0 = initial_vectors<double, double>(shape, InitKind::random, 2);
    HopmOptions opts;
    opts.sweeps = 3;
    const auto canonical = hopm_canonical<double, double>(a, x0, opts);
    for (index_t s = 0; s < shape.order(); ++s) {
      const auto one = dhopm3<double, double>(distribute(a, s, 1, 1), x0, opts);
      CHECK(one.x == canonical.x);
      const auto two = dhopm3<double, double>(distribute(a, s, 2, 1), x0, opts);
      CHECK(max_rel_diff(two.x, canonical.x) < 1e-12);
      opts.reuse = false;
      const auto classical = dhopm3<double, double>(distribute(a, s, 2, 1), x0, opts);
      CHECK(max_rel_diff(classical.x, canonical.x) < 1e-12);
      opts.reuse = true;
    }
  }
}

TEST_CASE("order-2 HOPM converges to the dominant singular pair") {
  const Shape shape{6, 5};
  const auto a = integer_tensor(shape, 17);
  // Power iteration on A^T A for the right singular vector.
  std::vector<double> v(5, 1.0);
  for (int it = 0; it < 200; ++it) {
    std::vector<double> av(6, 0.0), atav(5, 0.0);
    for (index_t i = 0; i < 6; ++i) {
      for (index_t j = 0; j < 5; ++j) av[i] += a[i * 5 + j] * v[j];
    }
    for (index_t j = 0; j < 5; ++j) {
      for (index_t i = 0; i < 6; ++i) atav[j] += a[i * 5 + j] * av[i];
    }
    double nrm = 0;
    for (double e : atav) nrm += e * e;
    nrm = std::sqrt(nrm);
    for (index_t j = 0; j < 5; ++j) v[j] = atav[j] / nrm;
  }
  HopmOptions opts;
  opts.sweeps = 100;
  const auto result = dhopm3<double, double>(distribute(a, 0, 2, 1), initial_vectors<double, double>(shape), opts);
  for (index_t j = 0; j < 5; ++j) CHECK(result.x[1][j] == doctest::Approx(v[j]).epsilon(1e-10));
}

TEST_CASE("per-sweep kernel call counts") {
  for (index_t d = 2; d <= 6; ++d) {
    const auto shape = Shape::hypersquare(2, d);
    const Tensor<double> a(shape, 1.0);
    HopmOptions opts;
    opts.sweeps = 2;
    const auto x0 = initial_vectors<double, double>(shape);
    const auto r = dhopm3<double, double>(distribute(a, d - 1, 2, 1), x0, opts);
    for (const auto& k : r.kernel) CHECK(k.tvc_calls == 2 * hopm_tvc_count(d, true));
    opts.reuse = false;
    const auto c = dhopm3<double, double>(distribute(a, 0, 2, 1), x0, opts);
    for (const auto& k : c.kernel) CHECK(k.tvc_calls == 2 * hopm_tvc_count(d, false));
    const auto canon = hopm_canonical<double, double>(a, x0, opts);
    CHECK(canon.kernel.front().tvc_calls == 2 * hopm_tvc_count(d, false));
  }
}

TEST_CASE("early stop and recorded norms") {
  const Tensor<double> a(Shape{4, 4, 4}, 1.0);
  HopmOptions opts;
  opts.sweeps = 50;
  opts.tolerance = 1e-12;
  const auto r = dhopm3<double, double>(distribute(a, 1, 2, 1), initial_vectors<double, double>(a.shape()), opts);
  CHECK(r.sweeps_run < 50);
  REQUIRE(r.norms.size() == r.sweeps_run);
  CHECK(r.norms.back()[2] == doctest::Approx(8.0));
}

TEST_CASE("a vanishing iterate is reported") {
  const Tensor<double> a(Shape{3, 3}, 0.0);
  auto run = [&] { return dhopm3<double, double>(distribute(a, 0, 1, 1), initial_vectors<double, double>(a.shape())); };
  CHECK_THROWS_AS(run(), ConvergenceError);
  const auto good = distribute(Tensor<double>(Shape{3, 3}, 1.0), 0, 1, 1);
  auto short_x = [&] { return dhopm3<double, double>(good, {std::vector<double>(3, 1.0)}); };
  CHECK_THROWS(short_x());
}

TEST_CASE("mixed storage HOPM tracks the double result") {
  const Shape shape{6, 5, 4};
  const auto a = integer_tensor(shape, 5);
  Tensor<float> af(shape);
  for (index_t i = 0; i < a.size(); ++i) af[i] = static_cast<float>(a[i]);
  HopmOptions opts;
  opts.sweeps = 3;
  const auto ref = dhopm3<double, double>(distribute(a, 1, 2, 1), initial_vectors<double, double>(shape), opts);
  const auto mixed = dhopm3<float, double>(distribute(af, 1, 2, 1), initial_vectors<float, double>(shape), opts);
  for (index_t j = 0; j < 3; ++j) {
    for (index_t i = 0; i < shape[j]; ++i) CHECK(mixed.x[j][i] == doctest::Approx(ref.x[j][i]).epsilon(1e-5));
  }
}
