#pragma once

#include <chrono>
#include <span>
#include <vector>

#include "tvc/group.hpp"
#include "tvc/kernels.hpp"
#include "tvc/split.hpp"

namespace tvc {

/// How the per-rank parts of a distributed tensor combine into the global one.
enum class PartKind {
  disjoint,     ///< slices along one dimension; their disjoint union is the tensor
  partial_sum,  ///< full-shape parts whose elementwise sum is the tensor
  replicated,   ///< every rank holds the whole tensor
};

/// Where one rank's part sits inside the logical global tensor.
struct PartLayout {
  Shape global;
  PartKind kind = PartKind::disjoint;
  index_t dim = 0;  ///< split dimension (disjoint only)
  Range range;      ///< owned range along dim (disjoint only)

  Shape local_shape() const {
    return kind == PartKind::disjoint ? global.with_extent(dim, range.extent()) : global;
  }

  /// Layout after contracting mode k of the current global shape.
  PartLayout contracted(index_t k) const;

  /// Part of x (length n_k) this rank contracts against.
  Range vector_range(index_t k) const;
};

/// Contracts a rank-local part against x along mode k into `out`, which must
/// hold exactly the contracted layout's local size. Never communicates.
template <class S, class C>
PartLayout local_contract(const PartLayout& in, std::span<const S> in_data, std::span<const S> x, index_t k,
                          std::span<S> out, const ExecPolicy& policy = {}, KernelCounters* counters = nullptr);

/// Per-rank parts of a tensor split along one dimension. For disjoint
/// tensors `plan.global` is the global shape and `plan.dim` the (possibly
/// shifted) split dimension; other kinds keep the ranges for bookkeeping.
template <class S>
struct DistributedTensor {
  SplitPlan plan;
  std::vector<Tensor<S>> parts;
  PartKind kind = PartKind::disjoint;

  index_t ranks() const noexcept { return parts.size(); }
  PartLayout layout(index_t rank) const;

  /// Throws ContractError when the parts do not match `kind` and `plan`.
  void validate() const;
};

template <class S>
DistributedTensor<S> distribute(const Tensor<S>& t, index_t dim, index_t p, index_t vl = 8);

/// Global tensor: disjoint union, the single replica, or the rank-ordered
/// sum of partial parts (accumulated in C, demoted once).
template <class S, class C>
Tensor<S> assemble(const DistributedTensor<S>& dt, AssemblyStrategy strategy = AssemblyStrategy::interleave,
                   AssemblyStats* stats = nullptr);

struct DistributedRun {
  std::vector<KernelCounters> kernel;  ///< per rank
  std::vector<CommCounters> comm;      ///< per rank
};

/// Distributed TVC.
///
/// k != split: every rank contracts its slice with the full x; the result
/// stays disjoint along the shifted split dimension, no communication.
/// k == split: every rank contracts its slice with its own piece of x and
/// produces a full-shape partial tensor. With `defer` the partial sums are
/// returned as is; otherwise they are all-reduced into a replicated result.
/// Partial-sum and replicated inputs contract with the full x.
template <class S, class C>
DistributedTensor<S> dtvc(const DistributedTensor<S>& dt, std::span<const S> x, index_t k, bool defer,
                          const ExecPolicy& policy = {}, DistributedRun* run = nullptr,
                          std::chrono::milliseconds timeout = std::chrono::seconds(30));

}  // namespace tvc
