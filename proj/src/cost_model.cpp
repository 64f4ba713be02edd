#include "tvc/cost_model.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "tvc/error.hpp"

namespace tvc::cost {

namespace {

using wide = __int128;

wide ipow(index_t n, index_t k) {
  wide r = 1;
  for (index_t i = 0; i < k; ++i) r *= static_cast<wide>(n);
  return r;
}

// sum_{k=lo}^{hi} n^k, zero when the range is empty.
wide power_sum(index_t n, index_t lo, index_t hi) {
  wide r = 0;
  for (index_t k = lo; k <= hi; ++k) r += ipow(n, k);
  return r;
}

double as_double(wide v) { return static_cast<double>(v); }

void check_size(index_t d, index_t n) {
  if (d >= 2 && n > 1 && static_cast<double>(d) * std::log2(static_cast<double>(n)) > 100.0) {
    throw ConfigError(fmt::format("n^d too large for the cost model (d={}, n={})", d, n));
  }
}

// p * m_seq
wide m_seq_wide(index_t d, index_t n) {
  return ipow(n, d) + 2 * power_sum(n, 2, d - 1) + static_cast<wide>(d + 3) * n;
}

// Upper limit d-s-l of the intermediate overhead sum for j != s.
index_t overhead_limit(index_t d, index_t s, index_t j) {
  const index_t l = j < s ? 0 : 1;
  return d - s - l;
}

// p * M_par from the closed form.
wide M_par_scaled(index_t d, index_t n, index_t p, index_t s) {
  const wide pm1 = static_cast<wide>(p) - 1;
  const wide tail = static_cast<wide>(s) * 2 * power_sum(n, 2, d - s) +
                    static_cast<wide>(d - s - 1) * 2 * (d - s >= 1 ? power_sum(n, 2, d - s - 1) : 0);
  return static_cast<wide>(d) * m_seq_wide(d, n) + pm1 * static_cast<wide>(d - 1) * (d + 3) * n + pm1 * tail;
}

}  // namespace

void CostQuery::validate() const {
  if (d < 2) throw ConfigError("cost model requires d >= 2");
  if (n < 1) throw ConfigError("cost model requires n >= 1");
  if (p < 1 || p > n) throw ConfigError(fmt::format("cost model requires 1 <= p <= n (p={}, n={})", p, n));
  if (s >= d) throw ConfigError(fmt::format("split dimension {} out of range for d={}", s, d));
  check_size(d, n);
}

double m_seq(index_t d, index_t n) {
  if (d < 2) throw ConfigError("m_seq requires d >= 2");
  check_size(d, n);
  return as_double(m_seq_wide(d, n));
}

Term m_par(const CostQuery& q, index_t j) {
  q.validate();
  if (j >= q.d) throw ConfigError(fmt::format("external iteration {} out of range for d={}", j, q.d));
  const index_t d = q.d;
  const index_t n = q.n;
  const wide p = q.p;

  // [n^k / p]: rank 0's share of an order-k tensor split along one mode.
  const double share = q.division == DivisionMode::exact ? static_cast<double>(n) / static_cast<double>(q.p)
                                                         : static_cast<double>((n + q.p - 1) / q.p);
  auto bracket = [&](index_t k) {
    if (q.division == DivisionMode::exact) return as_double(ipow(n, k)) / static_cast<double>(q.p);
    return as_double(ipow(n, k - 1)) * share;
  };

  Term t;
  if (j == q.s) {
    t.exact = bracket(d) + 4 * bracket(1) + static_cast<double>((d - 1) * n);
    for (index_t k = 2; k < d; ++k) t.exact += 2 * bracket(k);
    t.approx = as_double(m_seq_wide(d, n) + (p - 1) * static_cast<wide>(d - 1) * n) / static_cast<double>(q.p);
    return t;
  }

  const index_t r = overhead_limit(d, q.s, j);
  t.exact = bracket(d) + bracket(1) + static_cast<double>((d + 2) * n) + 2 * as_double(power_sum(n, 2, r));
  for (index_t k = r + 1; k < d; ++k) t.exact += 2 * bracket(k);
  t.approx = as_double(m_seq_wide(d, n) + (p - 1) * (2 * power_sum(n, 2, r) + static_cast<wide>(d + 2) * n)) /
             static_cast<double>(q.p);
  return t;
}

MPar M_par(index_t d, index_t n, index_t p, index_t s) {
  CostQuery{d, n, p, s}.validate();
  const wide scaled = M_par_scaled(d, n, p, s);
  const wide min_scaled =
      static_cast<wide>(d) * m_seq_wide(d, n) + (static_cast<wide>(p) - 1) * static_cast<wide>(d - 1) * (d + 3) * n;
  return {as_double(scaled) / static_cast<double>(p), as_double(min_scaled) / static_cast<double>(p)};
}

double M_par_recursive_residual(index_t d, index_t n, index_t p, index_t s) {
  if (s < 1 || s >= d) throw ConfigError("recursion check needs 1 <= s <= d-1");
  CostQuery{d, n, p, s}.validate();
  const wide lhs = M_par_scaled(d, n, p, s - 1) - M_par_scaled(d, n, p, s);
  const wide rhs = (static_cast<wide>(p) - 1) * (static_cast<wide>(d - s - 1) * 2 * ipow(n, d - s) +
                                                 (static_cast<wide>(s) - 1) * 2 * ipow(n, d - s + 1));
  return as_double(lhs - rhs) / static_cast<double>(p);
}

double ring_overhead(index_t n, index_t p) {
  if (p < 1) throw ConfigError("ring overhead requires p >= 1");
  return 4.0 * static_cast<double>(n) * static_cast<double>(p - 1) / static_cast<double>(p);
}

double simulate_sweep(const Shape& shape, index_t s, double local_extent, bool reuse) {
  const index_t d = shape.order();
  if (d < 2) throw ConfigError("simulation requires order >= 2");
  if (s >= d) throw ConfigError("split dimension out of range");

  // A tensor in flight is described by its set of contracted original modes;
  // it is a partial sum once s is in that set, a slice along s before.
  using Modes = std::set<index_t>;
  auto local_size = [&](const Modes& done) {
    const bool partial = done.count(s) > 0;
    double size = 1;
    for (index_t m = 0; m < d; ++m) {
      if (done.count(m)) continue;
      size *= (m == s && !partial) ? local_extent : static_cast<double>(shape[m]);
    }
    return size;
  };

  double total = 0;
  auto tvc = [&](const Modes& in, index_t mode) {
    Modes out = in;
    out.insert(mode);
    const double x = (mode == s && !in.count(s)) ? local_extent : static_cast<double>(shape[mode]);
    total += local_size(in) + x + local_size(out);
    return out;
  };

  Modes w;
  for (index_t j = 0; j < d; ++j) {
    if (reuse) {
      const index_t lambda = j > 0 ? 0 : 1;
      const index_t mu = std::max(lambda, j);
      const index_t nu = j + 1 < d ? d - 1 : d - 2;
      w = j < 2 ? tvc({}, lambda) : tvc(w, mu - 1);
      Modes cur = w;
      for (index_t k = mu + 1; k <= nu; ++k) cur = tvc(cur, k);
    } else {
      Modes cur;
      for (index_t k = 0; k < d; ++k) {
        if (k != j) cur = tvc(cur, k);
      }
    }
    // Normalization: the classical scheme normalizes the owned slice when
    // j = s; everything else normalizes the full vector on every rank.
    total += 3.0 * ((j == s && !reuse) ? local_extent : static_cast<double>(shape[j]));
  }
  return total;
}

Ratios ratios(index_t d, index_t n, index_t p, index_t s) {
  const MPar classical = M_par(d, n, p, s);
  const double three_buffer =
      simulate_sweep(Shape::hypersquare(n, d), s, static_cast<double>(n) / static_cast<double>(p), true);
  return {static_cast<double>(p) * classical.total / (static_cast<double>(d) * m_seq(d, n)),
          classical.total / three_buffer};
}

CostReport evaluate(const CostQuery& q) {
  q.validate();
  CostReport r;
  r.query = q;
  r.m_seq = m_seq(q.d, q.n);
  r.M_seq = static_cast<double>(q.d) * r.m_seq;
  for (index_t j = 0; j < q.d; ++j) {
    r.m_par.push_back(m_par(q, j));
    r.M_par_exact += r.m_par.back().exact;
  }
  const MPar totals = M_par(q.d, q.n, q.p, q.s);
  r.M_par = totals.total;
  r.M_par_min = totals.minimum;
  const double extent = q.division == DivisionMode::exact ? static_cast<double>(q.n) / static_cast<double>(q.p)
                                                          : static_cast<double>((q.n + q.p - 1) / q.p);
  r.M_dhopm3 = simulate_sweep(Shape::hypersquare(q.n, q.d), q.s, extent, true);
  const Ratios ratio = ratios(q.d, q.n, q.p, q.s);
  r.eta_inv = ratio.eta_inv;
  r.H_inv = ratio.H_inv;
  r.ring_overhead = ring_overhead(q.n, q.p);
  return r;
}

}  // namespace tvc::cost
