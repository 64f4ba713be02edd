#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tvc/precision.hpp"
#include "tvc/split.hpp"
#include "tvc/tensor.hpp"

namespace tvc {

/// Streamed-memory accounting of kernel invocations.
///
/// Counts are logical: one read per input element and one write per output
/// element of each invocation, independent of caching or task splitting.
struct KernelCounters {
  std::uint64_t elements_read = 0;
  std::uint64_t elements_written = 0;
  std::uint64_t bytes_touched = 0;
  std::uint64_t tvc_calls = 0;

  void record(std::uint64_t read, std::uint64_t written, std::size_t width) noexcept {
    elements_read += read;
    elements_written += written;
    bytes_touched += (read + written) * width;
  }
  std::uint64_t touched_elements() const noexcept { return elements_read + elements_written; }

  KernelCounters& operator+=(const KernelCounters& o) noexcept {
    elements_read += o.elements_read;
    elements_written += o.elements_written;
    bytes_touched += o.bytes_touched;
    tvc_calls += o.tvc_calls;
    return *this;
  }
  friend bool operator==(const KernelCounters&, const KernelCounters&) = default;
};

/// Execution knobs of the task-parallel kernels.
struct ExecPolicy {
  index_t threads = 1;  ///< worker threads per kernel call
  index_t tasks = 0;    ///< task count per call; 0 picks 4 * threads
  index_t vl = 8;       ///< vector length in elements (axpby cache block is vl * vl)

  index_t task_count() const noexcept { return tasks ? tasks : 4 * (threads ? threads : 1); }
};

enum class Trans { matvec, vecmat };

/// Non-standard BLAS-2 kernel on a row-major matrix view.
///
///   matvec: y := alpha * A * x + beta * y     (A is m x n, len x = n, len y = m)
///   vecmat: y := alpha * x^T * A + beta * y   (A is m x n, len x = m, len y = n)
///
/// Dot products accumulate in C; only the final store demotes to S. With
/// beta = 0, y is write-only.
template <class S, class C>
void getvc(Trans trans, index_t m, index_t n, C alpha, std::span<const S> a, index_t lda, std::span<const S> x,
           C beta, std::span<S> y, KernelCounters* counters = nullptr);

/// One unit of TVC work: columns [cols) of output slab `slab`.
struct TvcTask {
  index_t slab = 0;
  Range cols;
};

/// Disjoint output partition of a mode-k TVC. For k = d-1 the output is a
/// single slab of u rows; otherwise u slabs of v columns each.
std::vector<TvcTask> partition_tvc(const MatricizedDims& md, bool last_mode, index_t tasks, index_t vl);

/// Runs fn(0..count-1) on up to `threads` threads.
void run_tasks(index_t count, index_t threads, const std::function<void(index_t)>& fn);

/// Mode-oblivious native TVC: y := alpha * (t x_k x) + beta * y.
template <class S, class C>
void tvc_native(TensorView<const S> t, std::span<const S> x, index_t k, C alpha, C beta, TensorView<S> y,
                const ExecPolicy& policy = {}, KernelCounters* counters = nullptr);

/// Convenience overload returning a fresh output (alpha = 1, beta = 0).
template <class S, class C>
Tensor<S> tvc_native(const Tensor<S>& t, std::span<const S> x, index_t k, const ExecPolicy& policy = {},
                     KernelCounters* counters = nullptr);

/// Reference contraction by plain nested loops over multi-indices.
template <class S, class C>
Tensor<S> tvc_looped_oracle(const Tensor<S>& t, std::span<const S> x, index_t k);

/// y := demote(alpha * promote(x) + beta * promote(y)), computed through a
/// compute-precision cache block of vl * vl elements.
template <class S, class C>
void axpby(C alpha, std::span<const S> x, C beta, std::span<S> y, index_t vl = 8,
           KernelCounters* counters = nullptr);

/// Sum of squares accumulated in C (compensated, ascending index).
template <class S, class C>
C sum_squares(std::span<const S> x, KernelCounters* counters = nullptr);

template <class S, class C>
C norm2(std::span<const S> x, KernelCounters* counters = nullptr);

/// x := x / divisor.
template <class S, class C>
void scale_down(std::span<S> x, C divisor, KernelCounters* counters = nullptr);

/// x := x / ||x||; returns the norm before scaling. Throws
/// NormalizationError on a zero (or non-finite) norm.
template <class S, class C>
C normalize(std::span<S> x, KernelCounters* counters = nullptr);

}  // namespace tvc
