#include "tvc/hopm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace tvc {

index_t mode_remap(index_t original, std::span<const index_t> contracted) {
  index_t before = 0;
  for (index_t c : contracted) {
    if (c == original) throw ContractError(fmt::format("mode {} has already been contracted", original));
    if (c < original) ++before;
  }
  return original - before;
}

HopmIndices hopm_indices(index_t j, index_t d) {
  HopmIndices h;
  h.lambda = j > 0 ? 0 : 1;
  h.mu = std::max(h.lambda, j);
  h.nu = j + 1 < d ? d - 1 : d - 2;
  return h;
}

index_t hopm_tvc_count(index_t d, bool reuse) { return reuse ? (d - 1) * (d + 2) / 2 : d * (d - 1); }

namespace {

// A tensor in flight: its layout, the original modes already contracted
// away, and the buffer slot holding it (-1 for the input tensor).
struct Stage {
  PartLayout layout;
  std::vector<index_t> contracted;
  int slot = -1;
};

// Walks one external iteration j, calling contract(in, original_mode, slot)
// for every TVC. `w` carries the cached buffer between iterations.
template <class Contract>
Stage walk_iteration(index_t j, index_t d, bool reuse, const Stage& a, Stage& w, Contract&& contract) {
  auto free_slot = [](int busy0, int busy1) {
    for (int s = 0; s < 3; ++s) {
      if (s != busy0 && s != busy1) return s;
    }
    return 0;
  };

  if (!reuse) {
    Stage cur = a;
    for (index_t k = 0; k < d; ++k) {
      if (k == j) continue;
      cur = contract(cur, k, cur.slot == 0 ? 1 : 0);
    }
    return cur;
  }

  const HopmIndices h = hopm_indices(j, d);
  // TVC(1/3): the result is both W_j and the first Y buffer.
  const int w_slot = w.slot < 0 ? 0 : (w.slot + 1) % 3;
  if (j < 2) w = contract(a, h.lambda, w_slot);
  else w = contract(w, h.mu - 1, w_slot);
  Stage cur = w;
  // TVC(2/3) and TVC(3/3) ping-pong between the two buffers W does not use.
  for (index_t k = h.mu + 1; k <= h.nu; ++k) cur = contract(cur, k, free_slot(w.slot, cur.slot));
  return cur;
}

template <class S>
double to_double(S v) {
  if constexpr (std::is_same_v<S, Half>) return half_to_float(v);
  else if constexpr (std::is_same_v<S, BFloat16>) return bfloat16_to_float(v);
  else return static_cast<double>(v);
}

template <class S, class C>
double max_change(const std::vector<std::vector<S>>& a, const std::vector<std::vector<S>>& b) {
  double worst = 0;
  for (index_t j = 0; j < a.size(); ++j) {
    double sum = 0;
    for (index_t i = 0; i < a[j].size(); ++i) {
      const double diff = to_double(a[j][i]) - to_double(b[j][i]);
      sum += diff * diff;
    }
    worst = std::max(worst, std::sqrt(sum));
  }
  return worst;
}

void check_vectors(const Shape& shape, const auto& x) {
  if (x.size() != shape.order()) {
    throw ContractError(fmt::format("expected {} starting vectors, got {}", shape.order(), x.size()));
  }
  for (index_t j = 0; j < x.size(); ++j) {
    if (x[j].size() != shape[j]) {
      throw ContractError(fmt::format("starting vector {} has length {}, expected {}", j, x[j].size(), shape[j]));
    }
  }
}

template <class S, class C>
C normalize_or_fail(std::span<S> x, index_t j, KernelCounters* counters) {
  try {
    return normalize<S, C>(x, counters);
  } catch (const NormalizationError& e) {
    throw ConvergenceError(fmt::format("x_{} vanished: {}", j, e.what()));
  }
}

}  // namespace

template <class S, class C>
std::vector<std::vector<S>> initial_vectors(const Shape& shape, InitKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  std::vector<std::vector<S>> x(shape.order());
  for (index_t j = 0; j < shape.order(); ++j) {
    x[j].resize(shape[j]);
    for (auto& v : x[j]) v = demote<S, C>(static_cast<C>(kind == InitKind::ones ? 1.0 : dist(rng)));
    normalize<S, C>(std::span<S>(x[j]));
  }
  return x;
}

template <class S, class C>
HopmResult<S> hopm_canonical(const Tensor<S>& a, std::vector<std::vector<S>> x0, const HopmOptions& options) {
  const index_t d = a.order();
  if (d < 2) throw ContractError("HOPM requires a tensor of order >= 2");
  check_vectors(a.shape(), x0);

  HopmResult<S> result;
  result.kernel.resize(1);
  result.comm.resize(1);
  result.x = std::move(x0);
  KernelCounters* counters = &result.kernel[0];

  for (index_t i = 0; i < options.sweeps; ++i) {
    const auto previous = result.x;
    result.norms.emplace_back(d);
    for (index_t j = 0; j < d; ++j) {
      Tensor<S> cur;
      const Tensor<S>* in = &a;
      std::vector<index_t> contracted;
      for (index_t k = 0; k < d; ++k) {
        if (k == j) continue;
        cur = tvc_native<S, C>(*in, result.x[k], mode_remap(k, contracted), options.policy, counters);
        contracted.push_back(k);
        in = &cur;
      }
      result.x[j] = cur.buffer();
      result.norms.back()[j] = static_cast<double>(normalize_or_fail<S, C>(std::span<S>(result.x[j]), j, counters));
    }
    result.sweeps_run = i + 1;
    if (options.tolerance > 0 && max_change<S, C>(result.x, previous) < options.tolerance) break;
  }
  return result;
}

template <class S, class C>
std::vector<std::vector<S>> dhopm3_rank(Communicator& comm, const SplitPlan& plan, std::span<const S> a,
                                        std::vector<std::vector<S>> x, const HopmOptions& options,
                                        KernelCounters* counters, std::vector<std::vector<double>>* norms,
                                        index_t* sweeps_run) {
  const index_t d = plan.global.order();
  const index_t s = plan.dim;
  const index_t r = comm.rank();
  if (d < 2) throw ContractError("HOPM requires a tensor of order >= 2");
  if (plan.workers != comm.size()) {
    throw ContractError(fmt::format("plan has {} ranks but the group has {}", plan.workers, comm.size()));
  }
  check_vectors(plan.global, x);

  Stage input;
  input.layout = PartLayout{plan.global, PartKind::disjoint, s, plan.ranges[r]};
  if (a.size() != input.layout.local_shape().size()) throw ContractError("local tensor size does not match plan");

  // Size the three buffers once from a dry run of one sweep.
  index_t capacity = 1;
  {
    Stage w;
    auto dry = [&](const Stage& in, index_t orig, int slot) {
      Stage out{in.layout.contracted(mode_remap(orig, in.contracted)), in.contracted, slot};
      out.contracted.push_back(orig);
      capacity = std::max(capacity, out.layout.local_shape().size());
      return out;
    };
    for (index_t j = 0; j < d; ++j) walk_iteration(j, d, options.reuse, input, w, dry);
  }
  std::array<std::vector<S>, 3> buffers;
  for (auto& b : buffers) b.resize(capacity);

  auto data_of = [&](const Stage& st) -> std::span<const S> {
    if (st.slot < 0) return a;
    return std::span<const S>(buffers[static_cast<std::size_t>(st.slot)]).first(st.layout.local_shape().size());
  };
  auto contract = [&](const Stage& in, index_t orig, int slot) {
    Stage out;
    out.slot = slot;
    out.contracted = in.contracted;
    out.contracted.push_back(orig);
    const index_t k = mode_remap(orig, in.contracted);
    const index_t size = in.layout.contracted(k).local_shape().size();
    auto dst = std::span<S>(buffers[static_cast<std::size_t>(slot)]).first(size);
    out.layout = local_contract<S, C>(in.layout, data_of(in), std::span<const S>(x[orig]), k, dst, options.policy,
                                      counters);
    return out;
  };

  const SplitPlan vector_plan = make_split_plan_with_chunk(Shape{plan.global[s]}, 0, plan.requested, plan.chunk);

  Stage w;
  index_t done = 0;
  for (index_t i = 0; i < options.sweeps; ++i) {
    const auto previous = x;
    if (norms) norms->emplace_back(d);
    for (index_t j = 0; j < d; ++j) {
      const Stage result = walk_iteration(j, d, options.reuse, input, w, contract);
      const auto local = data_of(result);
      C norm;
      if (j != s) {
        if (result.layout.kind != PartKind::partial_sum) {
          throw ContractError(fmt::format("iteration {} expected partial sums, split dimension survived", j));
        }
        x[j].assign(local.begin(), local.end());
        all_reduce_sum_mixed<S, C>(comm, std::span<S>(x[j]));
        norm = normalize_or_fail<S, C>(std::span<S>(x[j]), j, counters);
      } else {
        if (result.layout.kind != PartKind::disjoint || result.layout.dim != 0) {
          throw ContractError(fmt::format("iteration {} = split dimension but the result is not a disjoint slice", j));
        }
        if (options.reuse) {
          x[j] = all_gather<S>(comm, local, vector_plan);
          norm = normalize_or_fail<S, C>(std::span<S>(x[j]), j, counters);
        } else {
          // Classical path: normalize the owned slice with a global norm, then gather.
          std::vector<S> slice(local.begin(), local.end());
          std::vector<C> sq{sum_squares<S, C>(std::span<const S>(slice), counters)};
          all_reduce_sum<C>(comm, std::span<C>(sq));
          norm = std::sqrt(sq[0]);
          if (!(norm > C(0)) || !std::isfinite(norm)) {
            throw ConvergenceError(fmt::format("x_{} vanished: norm {}", j, static_cast<double>(norm)));
          }
          scale_down<S, C>(std::span<S>(slice), norm, counters);
          x[j] = all_gather<S>(comm, std::span<const S>(slice), vector_plan);
        }
      }
      if (norms) norms->back()[j] = static_cast<double>(norm);
    }
    done = i + 1;
    if (options.tolerance > 0 && max_change<S, C>(x, previous) < options.tolerance) break;
  }
  if (sweeps_run) *sweeps_run = done;
  return x;
}

template <class S, class C>
HopmResult<S> dhopm3(const DistributedTensor<S>& a, std::vector<std::vector<S>> x0, const HopmOptions& options) {
  a.validate();
  if (a.kind != PartKind::disjoint) throw ContractError("dhopm3 needs a disjoint input tensor");
  check_vectors(a.plan.global, x0);

  const index_t p = a.ranks();
  HopmResult<S> result;
  result.kernel.resize(p);
  std::vector<std::vector<std::vector<S>>> per_rank(p);

  WorkerGroup group(p, options.timeout);
  group.run([&](Communicator& comm) {
    const index_t r = comm.rank();
    per_rank[r] = dhopm3_rank<S, C>(comm, a.plan, a.parts[r].data(), x0, options, &result.kernel[r],
                                    r == 0 ? &result.norms : nullptr, r == 0 ? &result.sweeps_run : nullptr);
  });

  result.x = std::move(per_rank[0]);
  for (index_t r = 0; r < p; ++r) result.comm.push_back(group.counters(r));
  return result;
}

#define TVC_INSTANTIATE_HOPM(S, C)                                                                                 \
  template std::vector<std::vector<S>> initial_vectors<S, C>(const Shape&, InitKind, std::uint64_t);               \
  template HopmResult<S> hopm_canonical<S, C>(const Tensor<S>&, std::vector<std::vector<S>>, const HopmOptions&);  \
  template std::vector<std::vector<S>> dhopm3_rank<S, C>(Communicator&, const SplitPlan&, std::span<const S>,      \
                                                         std::vector<std::vector<S>>, const HopmOptions&,          \
                                                         KernelCounters*, std::vector<std::vector<double>>*,       \
                                                         index_t*);                                                \
  template HopmResult<S> dhopm3<S, C>(const DistributedTensor<S>&, std::vector<std::vector<S>>, const HopmOptions&);

TVC_INSTANTIATE_HOPM(double, double)
TVC_INSTANTIATE_HOPM(float, float)
TVC_INSTANTIATE_HOPM(float, double)
TVC_INSTANTIATE_HOPM(Half, float)
TVC_INSTANTIATE_HOPM(BFloat16, float)

#undef TVC_INSTANTIATE_HOPM

}  // namespace tvc
