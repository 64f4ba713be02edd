#include "tvc/distributed.hpp"

#include <fmt/format.h>

namespace tvc {

PartLayout PartLayout::contracted(index_t k) const {
  if (k >= global.order()) throw ModeError(fmt::format("mode {} out of range for order {}", k, global.order()));
  if (global.order() < 2) throw ContractError("cannot contract an order-1 tensor");
  PartLayout out;
  out.global = global.without_mode(k);
  out.range = range;
  switch (kind) {
    case PartKind::disjoint:
      if (k == dim) {
        out.kind = PartKind::partial_sum;
      } else {
        out.kind = PartKind::disjoint;
        out.dim = dim < k ? dim : dim - 1;
      }
      break;
    case PartKind::partial_sum:
    case PartKind::replicated:
      out.kind = kind;
      break;
  }
  return out;
}

Range PartLayout::vector_range(index_t k) const {
  if (kind == PartKind::disjoint && k == dim) return range;
  return {0, global[k]};
}

template <class S, class C>
PartLayout local_contract(const PartLayout& in, std::span<const S> in_data, std::span<const S> x, index_t k,
                          std::span<S> out, const ExecPolicy& policy, KernelCounters* counters) {
  const PartLayout next = in.contracted(k);
  if (x.size() != in.global[k]) {
    throw KernelError(fmt::format("dtvc: len(x) = {} but n_{} = {}", x.size(), k, in.global[k]));
  }
  const Range xr = in.vector_range(k);
  tvc_native<S, C>(TensorView<const S>(in.local_shape(), in_data), x.subspan(xr.start, xr.extent()), k, C(1), C(0),
                   TensorView<S>(next.local_shape(), out), policy, counters);
  return next;
}

template <class S>
PartLayout DistributedTensor<S>::layout(index_t rank) const {
  PartLayout l;
  l.global = plan.global;
  l.kind = kind;
  l.dim = plan.dim;
  l.range = plan.ranges.at(rank);
  return l;
}

template <class S>
void DistributedTensor<S>::validate() const {
  if (parts.size() != plan.workers || plan.ranges.size() != plan.workers) {
    throw ContractError(fmt::format("distributed tensor has {} parts for a plan of {} ranks", parts.size(),
                                    plan.workers));
  }
  for (index_t r = 0; r < parts.size(); ++r) {
    const Shape expected = layout(r).local_shape();
    if (parts[r].shape() != expected) {
      throw ContractError(fmt::format("part {} has shape {} but a {} tensor expects {}", r,
                                      parts[r].shape().to_string(),
                                      kind == PartKind::disjoint ? "disjoint" : "full-shape", expected.to_string()));
    }
  }
}

template <class S>
DistributedTensor<S> distribute(const Tensor<S>& t, index_t dim, index_t p, index_t vl) {
  auto s = split(t, dim, p, vl);
  return {std::move(s.plan), std::move(s.parts), PartKind::disjoint};
}

template <class S, class C>
Tensor<S> assemble(const DistributedTensor<S>& dt, AssemblyStrategy strategy, AssemblyStats* stats) {
  dt.validate();
  switch (dt.kind) {
    case PartKind::disjoint:
      return reassemble(dt.parts, dt.plan, strategy, stats);
    case PartKind::replicated:
      return dt.parts.front();
    case PartKind::partial_sum: {
      Tensor<S> out(dt.plan.global);
      for (index_t i = 0; i < out.size(); ++i) {
        C acc = promote<S, C>(dt.parts[0][i]);
        for (index_t r = 1; r < dt.parts.size(); ++r) acc += promote<S, C>(dt.parts[r][i]);
        out[i] = demote<S, C>(acc);
      }
      return out;
    }
  }
  throw ContractError("unknown part kind");
}

template <class S, class C>
DistributedTensor<S> dtvc(const DistributedTensor<S>& dt, std::span<const S> x, index_t k, bool defer,
                          const ExecPolicy& policy, DistributedRun* run, std::chrono::milliseconds timeout) {
  dt.validate();
  const index_t p = dt.ranks();
  if (k >= dt.plan.global.order()) {
    throw ModeError(fmt::format("mode {} out of range for order {}", k, dt.plan.global.order()));
  }
  if (x.size() != dt.plan.global[k]) {
    throw KernelError(fmt::format("dtvc: len(x) = {} but n_{} = {}", x.size(), k, dt.plan.global[k]));
  }

  const PartLayout next = dt.layout(0).contracted(k);
  DistributedTensor<S> out;
  out.plan = dt.plan;
  out.plan.global = next.global;
  out.plan.dim = next.kind == PartKind::disjoint ? next.dim : 0;
  out.kind = next.kind;
  out.parts.resize(p);

  const bool reduce = next.kind == PartKind::partial_sum && !defer;
  if (reduce) out.kind = PartKind::replicated;

  std::vector<KernelCounters> kernel(p);
  WorkerGroup group(p, timeout);
  group.run([&](Communicator& comm) {
    const index_t r = comm.rank();
    const PartLayout in = dt.layout(r);
    Tensor<S> y(in.contracted(k).local_shape());
    local_contract<S, C>(in, dt.parts[r].data(), x, k, y.data(), policy, &kernel[r]);
    if (reduce) all_reduce_sum_mixed<S, C>(comm, y.data());
    out.parts[r] = std::move(y);
  });

  if (run) {
    run->kernel = std::move(kernel);
    run->comm.clear();
    for (index_t r = 0; r < p; ++r) run->comm.push_back(group.counters(r));
  }
  return out;
}

template struct DistributedTensor<double>;
template struct DistributedTensor<float>;
template struct DistributedTensor<Half>;
template struct DistributedTensor<BFloat16>;

template DistributedTensor<double> distribute<double>(const Tensor<double>&, index_t, index_t, index_t);
template DistributedTensor<float> distribute<float>(const Tensor<float>&, index_t, index_t, index_t);
template DistributedTensor<Half> distribute<Half>(const Tensor<Half>&, index_t, index_t, index_t);
template DistributedTensor<BFloat16> distribute<BFloat16>(const Tensor<BFloat16>&, index_t, index_t, index_t);

#define TVC_INSTANTIATE_DISTRIBUTED(S, C)                                                                       \
  template PartLayout local_contract<S, C>(const PartLayout&, std::span<const S>, std::span<const S>, index_t,  \
                                           std::span<S>, const ExecPolicy&, KernelCounters*);                   \
  template Tensor<S> assemble<S, C>(const DistributedTensor<S>&, AssemblyStrategy, AssemblyStats*);             \
  template DistributedTensor<S> dtvc<S, C>(const DistributedTensor<S>&, std::span<const S>, index_t, bool,      \
                                           const ExecPolicy&, DistributedRun*, std::chrono::milliseconds);

TVC_INSTANTIATE_DISTRIBUTED(double, double)
TVC_INSTANTIATE_DISTRIBUTED(float, float)
TVC_INSTANTIATE_DISTRIBUTED(float, double)
TVC_INSTANTIATE_DISTRIBUTED(Half, float)
TVC_INSTANTIATE_DISTRIBUTED(BFloat16, float)

#undef TVC_INSTANTIATE_DISTRIBUTED

}  // namespace tvc
