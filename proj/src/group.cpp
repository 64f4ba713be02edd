#include "tvc/group.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <utility>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "tvc/error.hpp"

namespace tvc {

namespace {

constexpr std::uint64_t tag_base(std::uint64_t sequence) { return (sequence + 1) << 20; }
constexpr std::uint64_t kGatherPhase = std::uint64_t{1} << 16;

}  // namespace

index_t Communicator::size() const noexcept { return group_->p_; }

CommCounters& Communicator::counters() noexcept { return group_->counters_[rank_]; }

void Communicator::post(index_t dst, std::uint64_t tag, std::any payload) {
  if (dst >= group_->p_) throw CollectiveError(fmt::format("send to rank {} outside group of {}", dst, group_->p_));
  auto& box = group_->mailboxes_[dst];
  {
    std::lock_guard lock(box.mutex);
    box.queue.push_back({rank_, tag, std::move(payload)});
  }
  box.cv.notify_all();
}

std::any Communicator::take(index_t src, std::uint64_t tag) {
  auto& box = group_->mailboxes_[rank_];
  std::unique_lock lock(box.mutex);
  auto match = [&] {
    return std::find_if(box.queue.begin(), box.queue.end(),
                        [&](const WorkerGroup::Message& m) { return m.src == src && m.tag == tag; });
  };
  auto it = match();
  if (it == box.queue.end()) {
    const bool arrived = box.cv.wait_for(lock, group_->timeout_, [&] {
      it = match();
      return it != box.queue.end() || group_->aborted_;
    });
    if (arrived && it == box.queue.end()) {
      throw CollectiveError(fmt::format("rank {} abandoned a receive: rank {} failed", rank_, group_->failed_rank_));
    }
    if (!arrived) {
      throw CollectiveError(
          fmt::format("rank {} timed out after {} ms waiting for rank {}", rank_, group_->timeout_.count(), src));
    }
  }
  std::any payload = std::move(it->payload);
  box.queue.erase(it);
  return payload;
}

std::uint64_t Communicator::enter_collective(std::uint64_t signature, bool ok, const char* what) {
  const std::uint64_t seq = next_collective_++;
  auto& g = *group_;
  ++counters().collective_calls;

  std::unique_lock lock(g.entry_mutex_);
  auto& entry = g.entries_[seq];
  if (entry.joined.empty()) {
    entry.joined.assign(g.p_, false);
    entry.signature.assign(g.p_, 0);
    entry.ok.assign(g.p_, false);
  }
  entry.joined[rank_] = true;
  entry.signature[rank_] = signature;
  entry.ok[rank_] = ok;
  ++entry.joined_count;
  g.entry_cv_.notify_all();

  const bool complete = g.entry_cv_.wait_for(
      lock, g.timeout_, [&] { return g.entries_[seq].joined_count == g.p_ || g.aborted_; });
  auto& done = g.entries_[seq];
  if (complete && done.joined_count != g.p_) {
    throw CollectiveError(fmt::format("{} #{} abandoned: rank {} failed", what, seq, g.failed_rank_));
  }
  if (!complete) {
    std::vector<index_t> absent;
    for (index_t r = 0; r < g.p_; ++r) {
      if (!done.joined[r]) absent.push_back(r);
    }
    throw CollectiveError(fmt::format("{} #{}: ranks {} did not join within {} ms", what, seq, absent,
                                      g.timeout_.count()));
  }

  const bool agree = std::all_of(done.signature.begin(), done.signature.end(),
                                 [&](std::uint64_t s) { return s == done.signature.front(); });
  std::vector<index_t> bad;
  for (index_t r = 0; r < g.p_; ++r) {
    if (!done.ok[r]) bad.push_back(r);
  }
  const auto signatures = done.signature;
  if (++done.released == g.p_) g.entries_.erase(seq);
  lock.unlock();

  if (!agree) throw CollectiveError(fmt::format("{} #{}: ranks disagree on length {}", what, seq, signatures));
  if (!bad.empty()) throw CollectiveError(fmt::format("{} #{}: ranks {} supplied inconsistent buffers", what, seq, bad));
  return tag_base(seq);
}

WorkerGroup::WorkerGroup(index_t p, std::chrono::milliseconds timeout)
    : p_(p), timeout_(timeout), mailboxes_(p), counters_(p) {
  if (p == 0) throw ConfigError("worker group needs at least one rank");
}

void WorkerGroup::run(const std::function<void(Communicator&)>& body) {
  {
    std::vector<std::jthread> ranks;
    ranks.reserve(p_);
    for (index_t r = 0; r < p_; ++r) {
      ranks.emplace_back([&, r] {
        Communicator comm(*this, r);
        try {
          body(comm);
        } catch (...) {
          abort(r, std::current_exception());
        }
      });
    }
  }
  // Drop anything left behind by a failed run so the next one starts clean.
  for (auto& box : mailboxes_) box.queue.clear();
  entries_.clear();
  aborted_ = false;
  if (auto failure = std::exchange(first_failure_, nullptr)) std::rethrow_exception(failure);
}

void WorkerGroup::abort(index_t rank, std::exception_ptr failure) {
  {
    std::lock_guard lock(failure_mutex_);
    if (first_failure_) return;
    first_failure_ = std::move(failure);
    failed_rank_ = rank;
  }
  // Take each lock before notifying so a waiter cannot miss the flag.
  {
    std::lock_guard lock(entry_mutex_);
    aborted_ = true;
  }
  entry_cv_.notify_all();
  for (auto& box : mailboxes_) {
    { std::lock_guard lock(box.mutex); }
    box.cv.notify_all();
  }
}

CommCounters WorkerGroup::total_counters() const {
  CommCounters total;
  for (const auto& c : counters_) total += c;
  return total;
}

void WorkerGroup::reset_counters() { std::fill(counters_.begin(), counters_.end(), CommCounters{}); }

void barrier(Communicator& comm) { comm.enter_collective(0, true, "barrier"); }

std::uint64_t ring_touched(index_t n, index_t p, index_t r) {
  if (p <= 1) return 0;
  const index_t own = ring_chunk(n, p, r).extent();
  const index_t next = ring_chunk(n, p, (r + 1) % p).extent();
  // reduce-scatter: send every chunk but our own, receive p-1 copies of ours;
  // allgather: send everything but the right neighbour's chunk, receive everything but ours.
  return (n - own) + (p - 1) * own + (n - next) + (n - own);
}

Range ring_chunk(index_t n, index_t p, index_t c) {
  const index_t size = (n + p - 1) / p;
  const index_t start = std::min(c * size, n);
  return {start, std::min(start + size, n)};
}

template <class S, class C>
void all_reduce_sum_mixed(Communicator& comm, std::span<S> buf) {
  const index_t p = comm.size();
  const index_t r = comm.rank();
  const index_t n = buf.size();
  const std::uint64_t tag = comm.enter_collective(n, true, "all_reduce_sum");
  if (p == 1) return;

  auto chunk_copy = [&](index_t c) {
    const Range range = ring_chunk(n, p, c);
    return std::vector<S>(buf.begin() + static_cast<std::ptrdiff_t>(range.start),
                          buf.begin() + static_cast<std::ptrdiff_t>(range.end));
  };

  // Reduce-scatter: p - 1 shifted exchanges of raw contributions.
  std::vector<std::vector<S>> contributions(p);
  contributions[r] = chunk_copy(r);
  for (index_t t = 1; t < p; ++t) {
    const index_t dst = (r + t) % p;
    const index_t src = (r + p - t) % p;
    auto outgoing = chunk_copy(dst);
    comm.counters().sent(outgoing.size());
    comm.send(dst, tag + t, std::move(outgoing));
    contributions[src] = comm.recv<S>(src, tag + t);
    comm.counters().received(contributions[src].size());
  }

  const Range mine = ring_chunk(n, p, r);
  for (index_t i = 0; i < mine.extent(); ++i) {
    C acc = promote<S, C>(contributions[0][i]);
    for (index_t q = 1; q < p; ++q) acc += promote<S, C>(contributions[q][i]);
    buf[mine.start + i] = demote<S, C>(acc);
  }

  // Ring allgather of the reduced chunks.
  const index_t right = (r + 1) % p;
  const index_t left = (r + p - 1) % p;
  for (index_t t = 0; t + 1 < p; ++t) {
    auto outgoing = chunk_copy((r + p - t) % p);
    comm.counters().sent(outgoing.size());
    comm.send(right, tag + kGatherPhase + t, std::move(outgoing));
    auto incoming = comm.recv<S>(left, tag + kGatherPhase + t);
    comm.counters().received(incoming.size());
    const Range range = ring_chunk(n, p, (left + p - t) % p);
    std::copy(incoming.begin(), incoming.end(), buf.begin() + static_cast<std::ptrdiff_t>(range.start));
  }
}

template <class S>
std::vector<S> all_gather(Communicator& comm, std::span<const S> local, const SplitPlan& plan) {
  const index_t p = comm.size();
  const index_t r = comm.rank();
  const bool ok = plan.ranges.size() == p && local.size() == plan.ranges[r].extent();
  const index_t n = plan.global[plan.dim];
  const std::uint64_t tag = comm.enter_collective(n, ok, "all_gather");

  std::vector<S> global(n);
  std::copy(local.begin(), local.end(), global.begin() + static_cast<std::ptrdiff_t>(plan.ranges[r].start));
  const index_t right = (r + 1) % p;
  const index_t left = (r + p - 1) % p;
  for (index_t t = 0; t + 1 < p; ++t) {
    const Range out = plan.ranges[(r + p - t) % p];
    std::vector<S> outgoing(global.begin() + static_cast<std::ptrdiff_t>(out.start),
                            global.begin() + static_cast<std::ptrdiff_t>(out.end));
    comm.counters().sent(outgoing.size());
    comm.send(right, tag + t, std::move(outgoing));
    auto incoming = comm.recv<S>(left, tag + t);
    comm.counters().received(incoming.size());
    const Range in = plan.ranges[(left + p - t) % p];
    if (incoming.size() != in.extent()) throw CollectiveError("all_gather: slice length does not match plan");
    std::copy(incoming.begin(), incoming.end(), global.begin() + static_cast<std::ptrdiff_t>(in.start));
  }
  return global;
}

template void all_reduce_sum_mixed<double, double>(Communicator&, std::span<double>);
template void all_reduce_sum_mixed<float, float>(Communicator&, std::span<float>);
template void all_reduce_sum_mixed<float, double>(Communicator&, std::span<float>);
template void all_reduce_sum_mixed<Half, float>(Communicator&, std::span<Half>);
template void all_reduce_sum_mixed<BFloat16, float>(Communicator&, std::span<BFloat16>);

template std::vector<double> all_gather<double>(Communicator&, std::span<const double>, const SplitPlan&);
template std::vector<float> all_gather<float>(Communicator&, std::span<const float>, const SplitPlan&);
template std::vector<Half> all_gather<Half>(Communicator&, std::span<const Half>, const SplitPlan&);
template std::vector<BFloat16> all_gather<BFloat16>(Communicator&, std::span<const BFloat16>, const SplitPlan&);

}  // namespace tvc
