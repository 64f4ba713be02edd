#include "tvc/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

namespace tvc {

namespace {

index_t ceil_div(index_t a, index_t b) { return (a + b - 1) / b; }

template <class S, class C>
S store(C alpha, C acc, C beta, S old) {
  if (beta == C(0)) return demote<S, C>(alpha * acc);
  return demote<S, C>(alpha * acc + beta * promote<S, C>(old));
}

}  // namespace

template <class S, class C>
void getvc(Trans trans, index_t m, index_t n, C alpha, std::span<const S> a, index_t lda, std::span<const S> x,
           C beta, std::span<S> y, KernelCounters* counters) {
  const index_t xlen = trans == Trans::matvec ? n : m;
  const index_t ylen = trans == Trans::matvec ? m : n;
  if (x.size() != xlen || y.size() != ylen) {
    throw KernelError(fmt::format("getvc: got len(x)={} len(y)={}, expected {} and {}", x.size(), y.size(), xlen,
                                  ylen));
  }
  if (lda < n) throw KernelError(fmt::format("getvc: lda {} < n {}", lda, n));
  if (m > 0 && n > 0 && a.size() < (m - 1) * lda + n) throw KernelError("getvc: matrix view too short");

  if (trans == Trans::matvec) {
    for (index_t i = 0; i < m; ++i) {
      const S* row = a.data() + i * lda;
      C acc = 0;
      for (index_t j = 0; j < n; ++j) acc += promote<S, C>(row[j]) * promote<S, C>(x[j]);
      y[i] = store(alpha, acc, beta, y[i]);
    }
  } else {
    std::vector<C> acc(n, C(0));
    for (index_t i = 0; i < m; ++i) {
      const C xi = promote<S, C>(x[i]);
      const S* row = a.data() + i * lda;
      for (index_t j = 0; j < n; ++j) acc[j] += xi * promote<S, C>(row[j]);
    }
    for (index_t j = 0; j < n; ++j) y[j] = store(alpha, acc[j], beta, y[j]);
  }

  if (counters) {
    counters->record(m * n + xlen + (beta != C(0) ? ylen : 0), ylen, storage_width<S>);
  }
}

std::vector<TvcTask> partition_tvc(const MatricizedDims& md, bool last_mode, index_t tasks, index_t vl) {
  tasks = std::max<index_t>(tasks, 1);
  vl = std::max<index_t>(vl, 1);
  std::vector<TvcTask> out;
  if (last_mode) {
    // Row blocks of the single u x n_k matrix.
    const index_t blocks = std::min(tasks, md.u);
    const index_t rows = ceil_div(md.u, blocks);
    for (index_t r = 0; r < md.u; r += rows) out.push_back({0, {r, std::min(r + rows, md.u)}});
    return out;
  }
  // Column blocks inside each of the u slabs.
  const index_t per_slab = std::clamp<index_t>(ceil_div(tasks, md.u), 1, ceil_div(md.v, vl));
  const index_t cols = ceil_div(md.v, per_slab);
  for (index_t s = 0; s < md.u; ++s) {
    for (index_t c = 0; c < md.v; c += cols) out.push_back({s, {c, std::min(c + cols, md.v)}});
  }
  return out;
}

void run_tasks(index_t count, index_t threads, const std::function<void(index_t)>& fn) {
  threads = std::min(std::max<index_t>(threads, 1), count);
  if (threads <= 1) {
    for (index_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<index_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (index_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (index_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
}

template <class S, class C>
void tvc_native(TensorView<const S> t, std::span<const S> x, index_t k, C alpha, C beta, TensorView<S> y,
                const ExecPolicy& policy, KernelCounters* counters) {
  const Shape& shape = t.shape;
  if (k >= shape.order()) throw ModeError(fmt::format("mode {} out of range for order {}", k, shape.order()));
  if (shape.order() < 2) throw KernelError("tvc requires a tensor of order >= 2");
  if (x.size() != shape[k]) {
    throw KernelError(fmt::format("tvc: len(x) = {} but n_{} = {}", x.size(), k, shape[k]));
  }
  if (y.shape != shape.without_mode(k)) {
    throw KernelError(fmt::format("tvc: output shape {} does not match {}", y.shape.to_string(),
                                  shape.without_mode(k).to_string()));
  }

  const MatricizedDims md = matricize_dims(shape, k);
  const bool last = k + 1 == shape.order();
  const auto tasks = partition_tvc(md, last, policy.task_count(), policy.vl);

  run_tasks(tasks.size(), policy.threads, [&](index_t i) {
    const TvcTask& task = tasks[i];
    if (last) {
      // One matrix-vector product; this task owns rows [cols).
      const index_t rows = task.cols.extent();
      getvc<S, C>(Trans::matvec, rows, md.nk, alpha, t.data.subspan(task.cols.start * md.nk, rows * md.nk), md.nk,
                  x, beta, y.data.subspan(task.cols.start, rows));
    } else {
      // Vector-matrix product on slab `task.slab`, restricted to its columns.
      const index_t width = task.cols.extent();
      const index_t base = task.slab * md.nk * md.v + task.cols.start;
      getvc<S, C>(Trans::vecmat, md.nk, width, alpha, t.data.subspan(base, (md.nk - 1) * md.v + width), md.v, x,
                  beta, y.data.subspan(task.slab * md.v + task.cols.start, width));
    }
  });

  if (counters) {
    const index_t out = md.u * md.v;
    counters->record(shape.size() + md.nk + (beta != C(0) ? out : 0), out, storage_width<S>);
    ++counters->tvc_calls;
  }
}

template <class S, class C>
Tensor<S> tvc_native(const Tensor<S>& t, std::span<const S> x, index_t k, const ExecPolicy& policy,
                     KernelCounters* counters) {
  if (k >= t.order()) throw ModeError(fmt::format("mode {} out of range for order {}", k, t.order()));
  if (t.order() < 2) throw KernelError("tvc requires a tensor of order >= 2");
  Tensor<S> y(t.shape().without_mode(k));
  tvc_native<S, C>(t.view(), x, k, C(1), C(0), y.view(), policy, counters);
  return y;
}

template <class S, class C>
Tensor<S> tvc_looped_oracle(const Tensor<S>& t, std::span<const S> x, index_t k) {
  const Shape& shape = t.shape();
  if (k >= shape.order()) throw ModeError(fmt::format("mode {} out of range for order {}", k, shape.order()));
  if (shape.order() < 2) throw KernelError("tvc requires a tensor of order >= 2");
  if (x.size() != shape[k]) throw KernelError("tvc oracle: len(x) != n_k");

  Tensor<S> y(shape.without_mode(k));
  std::vector<index_t> full(shape.order());
  for (index_t o = 0; o < y.size(); ++o) {
    const auto out_idx = multi_index(y.shape(), o);
    for (index_t j = 0, m = 0; j < shape.order(); ++j) {
      if (j != k) full[j] = out_idx[m++];
    }
    C acc = 0;
    for (index_t i = 0; i < shape[k]; ++i) {
      full[k] = i;
      acc += promote<S, C>(t(full)) * promote<S, C>(x[i]);
    }
    y[o] = demote<S, C>(acc);
  }
  return y;
}

template <class S, class C>
void axpby(C alpha, std::span<const S> x, C beta, std::span<S> y, index_t vl, KernelCounters* counters) {
  if (x.size() != y.size()) {
    throw KernelError(fmt::format("axpby: len(x) = {} but len(y) = {}", x.size(), y.size()));
  }
  const index_t n = x.size();
  const index_t block = std::max<index_t>(vl, 1) * std::max<index_t>(vl, 1);
  const index_t whole = n - n % block;
  const bool read_y = beta != C(0);

  std::vector<C> wrk(block);
  const S* px = x.data();
  S* py = y.data();
  for (index_t ui = 0; ui != whole; ui += block) {
    if (read_y) {
      for (index_t ri = 0; ri != block; ++ri) wrk[ri] = alpha * promote<S, C>(px[ri]) + beta * promote<S, C>(py[ri]);
    } else {
      for (index_t ri = 0; ri != block; ++ri) wrk[ri] = alpha * promote<S, C>(px[ri]);
    }
    for (index_t ri = 0; ri != block; ++ri) py[ri] = demote<S, C>(wrk[ri]);
    px += block;
    py += block;
  }
  for (index_t i = whole; i < n; ++i) {
    const C v = read_y ? alpha * promote<S, C>(x[i]) + beta * promote<S, C>(y[i]) : alpha * promote<S, C>(x[i]);
    y[i] = demote<S, C>(v);
  }

  if (counters) counters->record(read_y ? 2 * n : n, n, storage_width<S>);
}

template <class S, class C>
C sum_squares(std::span<const S> x, KernelCounters* counters) {
  // Neumaier compensated summation in ascending index order.
  C sum = 0;
  C comp = 0;
  for (const S& s : x) {
    const C v = promote<S, C>(s);
    const C term = v * v;
    const C t = sum + term;
    if (std::abs(sum) >= std::abs(term)) comp += (sum - t) + term;
    else comp += (term - t) + sum;
    sum = t;
  }
  if (counters) counters->record(x.size(), 0, storage_width<S>);
  return sum + comp;
}

template <class S, class C>
C norm2(std::span<const S> x, KernelCounters* counters) {
  return std::sqrt(sum_squares<S, C>(x, counters));
}

template <class S, class C>
void scale_down(std::span<S> x, C divisor, KernelCounters* counters) {
  for (S& v : x) v = demote<S, C>(promote<S, C>(v) / divisor);
  if (counters) counters->record(x.size(), x.size(), storage_width<S>);
}

template <class S, class C>
C normalize(std::span<S> x, KernelCounters* counters) {
  const C norm = norm2<S, C>(std::span<const S>(x), counters);
  if (!(norm > C(0)) || !std::isfinite(norm)) {
    throw NormalizationError(fmt::format("cannot normalize a vector with norm {}", static_cast<double>(norm)));
  }
  scale_down<S, C>(x, norm, counters);
  return norm;
}

#define TVC_INSTANTIATE_KERNELS(S, C)                                                                            \
  template void getvc<S, C>(Trans, index_t, index_t, C, std::span<const S>, index_t, std::span<const S>, C,      \
                            std::span<S>, KernelCounters*);                                                      \
  template void tvc_native<S, C>(TensorView<const S>, std::span<const S>, index_t, C, C, TensorView<S>,          \
                                 const ExecPolicy&, KernelCounters*);                                            \
  template Tensor<S> tvc_native<S, C>(const Tensor<S>&, std::span<const S>, index_t, const ExecPolicy&,          \
                                      KernelCounters*);                                                          \
  template Tensor<S> tvc_looped_oracle<S, C>(const Tensor<S>&, std::span<const S>, index_t);                     \
  template void axpby<S, C>(C, std::span<const S>, C, std::span<S>, index_t, KernelCounters*);                   \
  template C sum_squares<S, C>(std::span<const S>, KernelCounters*);                                             \
  template C norm2<S, C>(std::span<const S>, KernelCounters*);                                                   \
  template void scale_down<S, C>(std::span<S>, C, KernelCounters*);                                              \
  template C normalize<S, C>(std::span<S>, KernelCounters*);

TVC_INSTANTIATE_KERNELS(double, double)
TVC_INSTANTIATE_KERNELS(float, float)
TVC_INSTANTIATE_KERNELS(float, double)
TVC_INSTANTIATE_KERNELS(Half, float)
TVC_INSTANTIATE_KERNELS(BFloat16, float)

#undef TVC_INSTANTIATE_KERNELS

}  // namespace tvc
