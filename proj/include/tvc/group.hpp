#pragma once

#include <any>
#include <atomic>
#include <exception>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "tvc/precision.hpp"
#include "tvc/split.hpp"

namespace tvc {

/// Per-rank communication accounting. touched_elements counts one read at
/// the sender and one write at the receiver for every transferred element.
struct CommCounters {
  std::uint64_t elements_sent = 0;
  std::uint64_t elements_received = 0;
  std::uint64_t collective_calls = 0;
  std::uint64_t touched_elements = 0;

  void sent(std::uint64_t n) noexcept {
    elements_sent += n;
    touched_elements += n;
  }
  void received(std::uint64_t n) noexcept {
    elements_received += n;
    touched_elements += n;
  }
  CommCounters& operator+=(const CommCounters& o) noexcept {
    elements_sent += o.elements_sent;
    elements_received += o.elements_received;
    collective_calls += o.collective_calls;
    touched_elements += o.touched_elements;
    return *this;
  }
  friend bool operator==(const CommCounters&, const CommCounters&) = default;
};

class WorkerGroup;

/// A rank's handle on its group: point-to-point messaging with ownership
/// transfer, plus the bookkeeping collectives need.
class Communicator {
 public:
  Communicator(WorkerGroup& group, index_t rank) : group_(&group), rank_(rank) {}

  index_t rank() const noexcept { return rank_; }
  index_t size() const noexcept;
  CommCounters& counters() noexcept;

  template <class T>
  void send(index_t dst, std::uint64_t tag, std::vector<T> payload);

  template <class T>
  std::vector<T> recv(index_t src, std::uint64_t tag);

  /// Joins collective number `sequence()` and checks that every rank agrees
  /// on `signature` and reports `ok`. Returns the collective's tag base.
  std::uint64_t enter_collective(std::uint64_t signature, bool ok, const char* what);

 private:
  void post(index_t dst, std::uint64_t tag, std::any payload);
  std::any take(index_t src, std::uint64_t tag);

  WorkerGroup* group_;
  index_t rank_;
  std::uint64_t next_collective_ = 0;
};

/// p virtual ranks running as threads of one process. Ranks share nothing
/// but their mailboxes; a payload handed to send() is owned by the receiver.
class WorkerGroup {
 public:
  explicit WorkerGroup(index_t p, std::chrono::milliseconds timeout = std::chrono::seconds(30));

  index_t size() const noexcept { return p_; }
  std::chrono::milliseconds timeout() const noexcept { return timeout_; }

  /// Runs body on every rank concurrently and rethrows the first failure.
  /// A failing rank aborts the run: peers blocked in a receive or a
  /// collective stop waiting instead of running into the timeout.
  void run(const std::function<void(Communicator&)>& body);

  const CommCounters& counters(index_t rank) const { return counters_.at(rank); }
  CommCounters total_counters() const;
  void reset_counters();

 private:
  friend class Communicator;

  struct Message {
    index_t src;
    std::uint64_t tag;
    std::any payload;
  };
  struct Mailbox {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<Message> queue;
  };
  struct Entry {
    std::vector<bool> joined;
    std::vector<std::uint64_t> signature;
    std::vector<bool> ok;
    index_t joined_count = 0;
    index_t released = 0;
  };

  index_t p_;
  std::chrono::milliseconds timeout_;
  std::vector<Mailbox> mailboxes_;
  std::vector<CommCounters> counters_;

  std::mutex entry_mutex_;
  std::condition_variable entry_cv_;
  std::map<std::uint64_t, Entry> entries_;

  void abort(index_t rank, std::exception_ptr failure);

  std::mutex failure_mutex_;
  std::exception_ptr first_failure_;
  std::atomic<bool> aborted_{false};
  index_t failed_rank_ = 0;
};

template <class T>
void Communicator::send(index_t dst, std::uint64_t tag, std::vector<T> payload) {
  post(dst, tag, std::any(std::move(payload)));
}

template <class T>
std::vector<T> Communicator::recv(index_t src, std::uint64_t tag) {
  return std::any_cast<std::vector<T>>(take(src, tag));
}

/// Blocks until every rank of the group has called barrier().
void barrier(Communicator& comm);

/// Element range of ring chunk c when n elements are cut into chunks of
/// ceil(n / p); trailing chunks may be short or empty.
Range ring_chunk(index_t n, index_t p, index_t c);

/// In-place elementwise global sum over all ranks; every rank ends with the
/// same bits.
///
/// Reduce-scatter runs p-1 exchange steps (at step t rank r ships its raw
/// chunk r+t to that chunk's owner); each owner then folds the p
/// contributions of its chunk in ascending rank order in C and demotes once.
/// A ring allgather (p-1 neighbour steps) redistributes the reduced chunks.
/// Transfers stay in storage precision S.
template <class S, class C>
void all_reduce_sum_mixed(Communicator& comm, std::span<S> buf);

template <class T>
void all_reduce_sum(Communicator& comm, std::span<T> buf) {
  all_reduce_sum_mixed<T, T>(comm, buf);
}

/// Elements rank r sends plus receives in all_reduce_sum of n elements.
std::uint64_t ring_touched(index_t n, index_t p, index_t r);

/// Ring allgather of per-rank slices laid out by `plan` (one range per rank).
template <class S>
std::vector<S> all_gather(Communicator& comm, std::span<const S> local, const SplitPlan& plan);

}  // namespace tvc
