#include "tvc/split.hpp"

#include <algorithm>
#include <cstring>

#include <fmt/format.h>

namespace tvc {

namespace {

index_t ceil_div(index_t a, index_t b) { return (a + b - 1) / b; }

// Copies `blocks` runs of `run` elements with the given source/destination strides.
template <class S>
void copy_runs(const S* src, index_t src_stride, S* dst, index_t dst_stride, index_t blocks, index_t run) {
  for (index_t b = 0; b < blocks; ++b) {
    std::copy_n(src + b * src_stride, run, dst + b * dst_stride);
  }
}

void check_parts(const SplitPlan& plan, index_t count, const auto& shape_of) {
  if (count != plan.workers || plan.ranges.size() != plan.workers) {
    throw AssemblyError(fmt::format("plan expects {} parts, got {}", plan.workers, count));
  }
  for (index_t r = 0; r < count; ++r) {
    if (shape_of(r) != plan.local_shape(r)) {
      throw AssemblyError(fmt::format("part {} has shape {}, plan expects {}", r, shape_of(r).to_string(),
                                      plan.local_shape(r).to_string()));
    }
  }
}

}  // namespace

Division optimal_division(index_t n, index_t p, index_t vl) {
  if (n == 0 || p == 0 || vl == 0) throw ConfigError("optimal_division requires n, p, vl >= 1");
  index_t q = ceil_div(n, p);
  if (n >= vl) q = std::min(vl * ceil_div(q, vl), n);
  return {q, ceil_div(n, q)};
}

SplitPlan make_split_plan_with_chunk(const Shape& shape, index_t dim, index_t requested, index_t chunk) {
  if (dim >= shape.order()) {
    throw ModeError(fmt::format("split dimension {} out of range for order {}", dim, shape.order()));
  }
  if (chunk == 0) throw ConfigError("split chunk must be >= 1");
  SplitPlan plan;
  plan.global = shape;
  plan.dim = dim;
  plan.requested = requested;
  plan.chunk = chunk;
  plan.workers = ceil_div(shape[dim], chunk);
  for (index_t r = 0; r < plan.workers; ++r) {
    plan.ranges.push_back({r * chunk, std::min((r + 1) * chunk, shape[dim])});
  }
  return plan;
}

SplitPlan make_split_plan(const Shape& shape, index_t dim, index_t p, index_t vl) {
  if (dim >= shape.order()) {
    throw ModeError(fmt::format("split dimension {} out of range for order {}", dim, shape.order()));
  }
  const Division div = optimal_division(shape[dim], p, vl);
  return make_split_plan_with_chunk(shape, dim, p, div.chunk);
}

template <class S>
Tensor<S> extract_slab(const Tensor<S>& t, index_t dim, Range range) {
  const Shape& g = t.shape();
  const index_t outer = g.product(0, dim);
  const index_t inner = g.product(dim + 1, g.order());
  Tensor<S> part(g.with_extent(dim, range.extent()));
  // One contiguous block when dim = 0 (outer = 1); strided gather otherwise.
  copy_runs(t.data().data() + range.start * inner, g[dim] * inner, part.data().data(), range.extent() * inner,
            outer, range.extent() * inner);
  return part;
}

template <class S>
SplitResult<S> split(const Tensor<S>& t, index_t dim, index_t p, index_t vl) {
  SplitResult<S> out;
  out.plan = make_split_plan(t.shape(), dim, p, vl);
  out.parts.reserve(out.plan.workers);
  for (const Range& r : out.plan.ranges) out.parts.push_back(extract_slab(t, dim, r));
  return out;
}

index_t interleave_messages(const Shape& shape, index_t dim) {
  if (dim == 0) return 1;
  return shape.product(0, dim - 1);
}

template <class S>
Tensor<S> reassemble(const std::vector<Tensor<S>>& parts, const SplitPlan& plan, AssemblyStrategy strategy,
                     AssemblyStats* stats) {
  check_parts(plan, parts.size(), [&](index_t r) { return parts[r].shape(); });

  const Shape& g = plan.global;
  const index_t dim = plan.dim;
  const index_t outer = g.product(0, dim);
  const index_t inner = g.product(dim + 1, g.order());
  const index_t row = g[dim] * inner;

  Tensor<S> global(g);
  AssemblyStats local;
  local.messages_per_rank.assign(parts.size(), 0);

  if (strategy == AssemblyStrategy::interleave) {
    // Each message covers one prefix (i_0..i_{dim-2}) and carries n_{dim-1}
    // strided runs; dim = 0 degenerates to a single contiguous message.
    const index_t messages = interleave_messages(g, dim);
    const index_t runs_per_message = outer / messages;
    for (index_t r = 0; r < parts.size(); ++r) {
      const Range range = plan.ranges[r];
      const index_t run = range.extent() * inner;
      for (index_t m = 0; m < messages; ++m) {
        const index_t first = m * runs_per_message;
        copy_runs(parts[r].data().data() + first * run, run, global.data().data() + first * row + range.start * inner,
                  row, runs_per_message, run);
        ++local.messages_per_rank[r];
      }
      local.gathered_elements += parts[r].size();
    }
  } else {
    // Stage every part back to back, then compose the joint tensor by
    // copying column groups out of the staging buffer.
    std::vector<S> staging(g.size());
    std::vector<index_t> offsets(parts.size());
    index_t pos = 0;
    for (index_t r = 0; r < parts.size(); ++r) {
      offsets[r] = pos;
      std::copy(parts[r].data().begin(), parts[r].data().end(), staging.begin() + static_cast<std::ptrdiff_t>(pos));
      pos += parts[r].size();
      local.messages_per_rank[r] = 1;
    }
    local.gathered_elements = pos;
    for (index_t r = 0; r < parts.size(); ++r) {
      const Range range = plan.ranges[r];
      const index_t run = range.extent() * inner;
      copy_runs(staging.data() + offsets[r], run, global.data().data() + range.start * inner, row, outer, run);
    }
    local.local_moved_elements = g.size();
  }

  if (stats) *stats = std::move(local);
  return global;
}

#define TVC_INSTANTIATE_SPLIT(S)                                                                          \
  template Tensor<S> extract_slab<S>(const Tensor<S>&, index_t, Range);                                   \
  template SplitResult<S> split<S>(const Tensor<S>&, index_t, index_t, index_t);                          \
  template Tensor<S> reassemble<S>(const std::vector<Tensor<S>>&, const SplitPlan&, AssemblyStrategy, \
                                   AssemblyStats*);

TVC_INSTANTIATE_SPLIT(double)
TVC_INSTANTIATE_SPLIT(float)
TVC_INSTANTIATE_SPLIT(Half)
TVC_INSTANTIATE_SPLIT(BFloat16)

#undef TVC_INSTANTIATE_SPLIT

}  // namespace tvc
