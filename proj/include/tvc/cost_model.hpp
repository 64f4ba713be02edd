#pragma once

#include <vector>

#include "tvc/shape.hpp"

namespace tvc::cost {

/// How bracketed per-rank quantities [x/p] are evaluated.
enum class DivisionMode {
  exact,    ///< x / p as a real number
  ceiling,  ///< rank 0's share: n^(k-1) * ceil(n / p)
};

/// Hypersquare query: order d, extent n, p ranks, split dimension s.
struct CostQuery {
  index_t d = 2;
  index_t n = 1;
  index_t p = 1;
  index_t s = 0;
  DivisionMode division = DivisionMode::exact;

  void validate() const;
};

/// Both forms of a per-rank, per-external-iteration touched-memory term.
struct Term {
  double exact = 0;   ///< bracketed form
  double approx = 0;  ///< regular-division approximation
};

/// All quantities are element counts.
struct CostReport {
  CostQuery query;
  double m_seq = 0;
  double M_seq = 0;
  std::vector<Term> m_par;  ///< per external iteration j
  double M_par = 0;         ///< closed form of the classical distributed HOPM
  double M_par_exact = 0;   ///< sum of the bracketed per-iteration terms
  double M_par_min = 0;
  double M_dhopm3 = 0;      ///< symbolic simulation of the three-buffer scheme, per rank
  double eta_inv = 0;
  double H_inv = 0;
  double ring_overhead = 0;
};

/// Sequential HOPM touched memory per external iteration:
/// n^d + 2 sum_{k=2}^{d-1} n^k + (d+3) n.
double m_seq(index_t d, index_t n);

/// Per-rank touched memory of external iteration j of the classical
/// distributed HOPM (j = s and j != s cases).
Term m_par(const CostQuery& q, index_t j);

struct MPar {
  double total = 0;
  double minimum = 0;
};

/// Closed-form per-rank total over the d external iterations and its
/// split-independent minimum.
MPar M_par(index_t d, index_t n, index_t p, index_t s);

/// Residual of the recursion linking the totals at s-1 and s:
/// M(s-1) - M(s) - (p-1)/p ((d-s-1) 2 n^(d-s) + (s-1) 2 n^(d-s+1)).
/// Evaluated in exact integer arithmetic; zero when the closed form holds.
double M_par_recursive_residual(index_t d, index_t n, index_t p, index_t s);

/// Extra per-rank touched memory of a ring allreduce: 4 n (p-1) / p.
double ring_overhead(index_t n, index_t p);

/// Per-rank touched elements of one HOPM sweep, obtained by walking the
/// contraction schedule symbolically. `local_extent` is the rank's extent
/// along the split dimension (fractional values model regular division).
/// reuse = true walks the three-buffer schedule, false the classical one.
double simulate_sweep(const Shape& shape, index_t s, double local_extent, bool reuse);

struct Ratios {
  double eta_inv = 0;  ///< p * M_par / M_seq
  double H_inv = 0;    ///< M_par(classical) / M(three-buffer)
};

Ratios ratios(index_t d, index_t n, index_t p, index_t s);

CostReport evaluate(const CostQuery& q);

}  // namespace tvc::cost
