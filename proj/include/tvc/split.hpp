#pragma once

#include <cstddef>
#include <vector>

#include "tvc/tensor.hpp"

namespace tvc {

/// Half-open interval [start, end) along one tensor dimension.
struct Range {
  index_t start = 0;
  index_t end = 0;

  index_t extent() const noexcept { return end - start; }
  friend bool operator==(const Range&, const Range&) = default;
};

struct Division {
  index_t chunk = 1;    ///< per-rank extent q
  index_t workers = 1;  ///< effective worker count, ceil(n / q)

  friend bool operator==(const Division&, const Division&) = default;
};

/// Ceiling division of n over p, with the quotient promoted to the next
/// multiple of the vector length when n >= vl (capped at n). The effective
/// worker count can come out lower than p.
Division optimal_division(index_t n, index_t p, index_t vl);

/// One-dimensional partition of a tensor along dimension `dim`.
///
/// Every rank but the last covers `chunk` indices; the last covers the
/// remainder in [1, chunk].
struct SplitPlan {
  Shape global;
  index_t dim = 0;
  index_t requested = 1;
  index_t workers = 1;
  index_t chunk = 1;
  std::vector<Range> ranges;

  Shape local_shape(index_t rank) const { return global.with_extent(dim, ranges.at(rank).extent()); }

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

SplitPlan make_split_plan(const Shape& shape, index_t dim, index_t p, index_t vl);

/// Plan for a given chunk size (the effective count is derived from it).
SplitPlan make_split_plan_with_chunk(const Shape& shape, index_t dim, index_t requested, index_t chunk);

template <class S>
struct SplitResult {
  std::vector<Tensor<S>> parts;
  SplitPlan plan;
};

/// Cuts t along dimension `dim` into owned subtensors.
template <class S>
SplitResult<S> split(const Tensor<S>& t, index_t dim, index_t p, index_t vl = 8);

/// Copies the slice [range) of dimension `dim` out of t.
template <class S>
Tensor<S> extract_slab(const Tensor<S>& t, index_t dim, Range range);

enum class AssemblyStrategy { interleave, gather_copy };

/// Message and local-copy accounting of one reassembly.
struct AssemblyStats {
  /// Logical messages each rank contributes.
  std::vector<index_t> messages_per_rank;
  /// Elements gathered into the destination (or staging) buffer.
  index_t gathered_elements = 0;
  /// Extra element moves inside local memory (gather-copy only).
  index_t local_moved_elements = 0;
};

/// Interleave message count per rank: prod_{i=0}^{dim-2} n_i for dim >= 1,
/// and one for dim = 0.
index_t interleave_messages(const Shape& shape, index_t dim);

/// Rebuilds the global tensor from its parts. Both strategies produce
/// bit-identical results.
template <class S>
Tensor<S> reassemble(const std::vector<Tensor<S>>& parts, const SplitPlan& plan, AssemblyStrategy strategy,
                     AssemblyStats* stats = nullptr);

}  // namespace tvc
