#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <vector>

#include "tvc/distributed.hpp"

namespace tvc {

/// Index of an original mode inside a tensor from which the modes in
/// `contracted` have already been removed. Throws ContractError when
/// `original` itself was contracted.
index_t mode_remap(index_t original, std::span<const index_t> contracted);

/// Loop indices of external iteration j of the three-buffer HOPM.
struct HopmIndices {
  index_t lambda = 0;  ///< first contraction mode when j < 2
  index_t mu = 0;
  index_t nu = 0;      ///< last mode contracted in this iteration
};

HopmIndices hopm_indices(index_t j, index_t d);

/// TVCs per sweep: three-buffer (d-1)(d+2)/2, canonical d(d-1).
index_t hopm_tvc_count(index_t d, bool reuse);

struct HopmOptions {
  index_t sweeps = 1;
  /// true: reuse the cached W buffer (three-buffer scheme).
  /// false: classical distributed HOPM, every iteration starts from A.
  bool reuse = true;
  /// Stop early once max_j ||x_j - x_j_prev|| < tolerance after a sweep (0 disables).
  double tolerance = 0.0;
  ExecPolicy policy;
  std::chrono::milliseconds timeout = std::chrono::seconds(30);
};

template <class S>
struct HopmResult {
  std::vector<std::vector<S>> x;
  index_t sweeps_run = 0;
  /// norms[i][j]: norm of the unnormalized x_j in sweep i.
  std::vector<std::vector<double>> norms;
  std::vector<KernelCounters> kernel;  ///< per rank, accumulated over all sweeps
  std::vector<CommCounters> comm;      ///< per rank
};

enum class InitKind { ones, random };

/// d starting vectors of unit norm: all-ones or seeded uniform in [0.5, 1.5).
template <class S, class C>
std::vector<std::vector<S>> initial_vectors(const Shape& shape, InitKind kind = InitKind::ones,
                                            std::uint64_t seed = 0);

/// Sequential two-buffer reference: for every j, contract A with all x_k,
/// k != j, in ascending k, then normalize.
template <class S, class C>
HopmResult<S> hopm_canonical(const Tensor<S>& a, std::vector<std::vector<S>> x0, const HopmOptions& options = {});

/// Rank-local body of the distributed HOPM; call from inside WorkerGroup::run.
/// `a` is this rank's disjoint slice of the input tensor. Returns the global
/// vectors (identical on all ranks); norms are appended to `norms` if given.
template <class S, class C>
std::vector<std::vector<S>> dhopm3_rank(Communicator& comm, const SplitPlan& plan, std::span<const S> a,
                                        std::vector<std::vector<S>> x, const HopmOptions& options,
                                        KernelCounters* counters = nullptr,
                                        std::vector<std::vector<double>>* norms = nullptr,
                                        index_t* sweeps_run = nullptr);

/// Distributed three-buffer higher-order power method over a disjoint tensor.
template <class S, class C>
HopmResult<S> dhopm3(const DistributedTensor<S>& a, std::vector<std::vector<S>> x0, const HopmOptions& options = {});

}  // namespace tvc
