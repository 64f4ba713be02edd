#include "tvc/bench.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <new>
#include <ostream>
#include <random>
#include <string>

#include "tvc/distributed.hpp"
#include "tvc/error.hpp"
#include "tvc/group.hpp"
#include "tvc/hopm.hpp"
#include "tvc/kernels.hpp"

namespace tvc::bench {

namespace {

using Clock = std::chrono::steady_clock;

const std::map<index_t, index_t> kPaperExtents{{2, 30623}, {3, 979}, {4, 175}, {5, 63}, {6, 31},
                                               {7, 19},    {8, 13},  {9, 10},  {10, 8}};
const std::map<index_t, index_t> kDeskExtents{{2, 512}, {3, 64}, {4, 24}, {5, 12}, {6, 8},
                                              {7, 6},   {8, 5},  {9, 4},  {10, 4}};

index_t preset_extent(const std::map<index_t, index_t>& table, index_t d, const char* name) {
  const auto it = table.find(d);
  if (it == table.end()) throw ConfigError(fmt::format("no {} preset for order {} (available: 2..10)", name, d));
  return it->second;
}

template <class S, class C>
std::vector<S> make_fill(index_t n, FillKind kind, std::uint64_t seed) {
  std::vector<S> out(n);
  switch (kind) {
    case FillKind::ones:
      std::fill(out.begin(), out.end(), demote<S, C>(C(1)));
      break;
    case FillKind::ramp:
      for (index_t i = 0; i < n; ++i) out[i] = demote<S, C>(static_cast<C>(i % 1024));
      break;
    case FillKind::random: {
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> dist(1, 97);
      for (auto& v : out) v = demote<S, C>(static_cast<C>(dist(rng)));
      break;
    }
  }
  return out;
}

/// Per-iteration wall times of `body` until the budget is spent.
template <class Fn>
std::vector<double> timed_loop(const BenchConfig& cfg, Fn&& body) {
  std::vector<double> times;
  double total = 0;
  while (true) {
    const auto t0 = Clock::now();
    body();
    const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
    times.push_back(dt);
    total += dt;
    if (cfg.iterations > 0 ? times.size() >= cfg.iterations : total >= cfg.seconds) break;
  }
  return times;
}

void finish(BenchResult& r, const BenchConfig& cfg, const std::vector<double>& times, std::size_t width) {
  r.iterations = times.size();
  r.deterministic = cfg.deterministic;
  for (double t : times) r.elapsed += t;
  const Stats st = sample_stats(times);
  r.stddev_pct = st.mean > 0 ? 100.0 * st.stddev / st.mean : 0.0;
  if (r.elapsed > 0) {
    r.it_s = static_cast<double>(r.iterations) / r.elapsed;
    r.bytes_s = r.touched_measured * static_cast<double>(width) * static_cast<double>(r.iterations) / r.elapsed;
  }
  r.it_sp = r.it_s / static_cast<double>(r.p_effective);
  if (cfg.peak_bandwidth) r.normalized_bandwidth = 100.0 * r.bytes_s / *cfg.peak_bandwidth;
}

BenchResult base_result(const BenchConfig& cfg) {
  BenchResult r;
  r.subcommand = cfg.subcommand;
  r.dims = cfg.dims;
  r.mode = cfg.mode;
  r.split = cfg.split;
  r.p_requested = cfg.workers;
  r.precision = cfg.precision;
  return r;
}

template <class S, class C>
BenchResult run_tvc(const BenchConfig& cfg) {
  BenchResult r = base_result(cfg);
  const Tensor<S> a(cfg.dims, make_fill<S, C>(cfg.dims.size(), cfg.fill, cfg.seed));
  const auto x = make_fill<S, C>(cfg.dims[cfg.mode], cfg.fill, cfg.seed + 1);
  Tensor<S> y(cfg.dims.without_mode(cfg.mode));
  const ExecPolicy policy{cfg.threads, cfg.tasks, cfg.vl};

  KernelCounters warm;
  tvc_native<S, C>(a, x, cfg.mode, C(1), C(0), y.view(), policy, &warm);
  r.touched_measured = static_cast<double>(warm.touched_elements());
  r.touched_predicted = static_cast<double>(a.size() + x.size() + y.size());

  const auto times = timed_loop(cfg, [&] { tvc_native<S, C>(a, x, cfg.mode, C(1), C(0), y.view(), policy); });
  finish(r, cfg, times, sizeof(S));
  return r;
}

template <class S, class C>
BenchResult run_dtvc(const BenchConfig& cfg) {
  BenchResult r = base_result(cfg);
  const Tensor<S> a(cfg.dims, make_fill<S, C>(cfg.dims.size(), cfg.fill, cfg.seed));
  const auto x = make_fill<S, C>(cfg.dims[cfg.mode], cfg.fill, cfg.seed + 1);
  const auto dt = distribute<S>(a, cfg.split, cfg.workers, cfg.vl);
  r.p_effective = dt.ranks();
  const ExecPolicy policy{cfg.threads, cfg.tasks, cfg.vl};

  double predicted = 0;
  for (index_t rank = 0; rank < dt.ranks(); ++rank) {
    const PartLayout in = dt.layout(rank);
    const PartLayout out = in.contracted(cfg.mode);
    predicted += static_cast<double>(in.local_shape().size() + in.vector_range(cfg.mode).extent());
    predicted += static_cast<double>(out.local_shape().size());
  }
  r.touched_predicted = predicted;

  auto iteration = [&](DistributedRun* run) {
    auto out = dtvc<S, C>(dt, x, cfg.mode, cfg.defer, policy, run);
    if (cfg.assemble) (void)assemble<S, C>(out, cfg.assembly);
  };
  DistributedRun warm;
  iteration(&warm);
  double measured = 0;
  for (const auto& k : warm.kernel) measured += static_cast<double>(k.touched_elements());
  r.touched_measured = measured;

  const auto times = timed_loop(cfg, [&] { iteration(nullptr); });
  finish(r, cfg, times, sizeof(S));
  return r;
}

template <class S, class C>
BenchResult run_hopm(const BenchConfig& cfg) {
  BenchResult r = base_result(cfg);
  const Tensor<S> a(cfg.dims, make_fill<S, C>(cfg.dims.size(), cfg.fill, cfg.seed));
  const auto dt = distribute<S>(a, cfg.split, cfg.workers, cfg.vl);
  const index_t p = dt.ranks();
  r.p_effective = p;
  const bool reuse = !cfg.classical_hopm;

  double predicted = 0;
  for (index_t rank = 0; rank < p; ++rank) {
    predicted += cost::simulate_sweep(cfg.dims, cfg.split, static_cast<double>(dt.plan.ranges[rank].extent()), reuse);
  }
  r.touched_predicted = predicted * static_cast<double>(cfg.sweeps);

  HopmOptions options;
  options.sweeps = cfg.sweeps;
  options.reuse = reuse;
  options.policy = ExecPolicy{cfg.threads, cfg.tasks, cfg.vl};
  const auto x0 = initial_vectors<S, C>(cfg.dims, InitKind::ones);

  // One group for warm-up and the timed loop; rank 0 decides when to stop
  // and every rank learns the decision through a scalar all-reduce.
  std::vector<KernelCounters> warm(p);
  std::vector<double> times;
  WorkerGroup group(p);
  group.run([&](Communicator& comm) {
    const index_t rank = comm.rank();
    std::span<const S> part(dt.parts[rank].data());
    auto x = dhopm3_rank<S, C>(comm, dt.plan, part, x0, options, &warm[rank]);
    double total = 0;
    index_t done = 0;
    while (true) {
      barrier(comm);
      const auto t0 = Clock::now();
      x = dhopm3_rank<S, C>(comm, dt.plan, part, std::move(x), options);
      barrier(comm);
      const double dt_s = std::chrono::duration<double>(Clock::now() - t0).count();
      ++done;
      if (rank == 0) {
        times.push_back(dt_s);
        total += dt_s;
      }
      double stop = 0;
      if (rank == 0) stop = (cfg.iterations > 0 ? done >= cfg.iterations : total >= cfg.seconds) ? 1.0 : 0.0;
      all_reduce_sum<double>(comm, std::span<double>(&stop, 1));
      if (stop > 0) break;
    }
  });

  double measured = 0;
  for (const auto& k : warm) measured += static_cast<double>(k.touched_elements());
  r.touched_measured = measured;
  finish(r, cfg, times, sizeof(S));
  return r;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

std::string to_string(Subcommand s) {
  switch (s) {
    case Subcommand::tvc: return "tvc";
    case Subcommand::dtvc: return "dtvc";
    case Subcommand::hopm: return "hopm";
    case Subcommand::cost: return "cost";
    case Subcommand::triad: return "triad";
  }
  return "?";
}

FillKind parse_fill(std::string_view text) {
  if (text == "ones") return FillKind::ones;
  if (text == "ramp") return FillKind::ramp;
  if (text == "random") return FillKind::random;
  throw ConfigError(fmt::format("unknown fill '{}' (ones|ramp|random)", text));
}

AssemblyStrategy parse_assembly(std::string_view text) {
  if (text == "interleave") return AssemblyStrategy::interleave;
  if (text == "gather-copy") return AssemblyStrategy::gather_copy;
  throw ConfigError(fmt::format("unknown assembly '{}' (interleave|gather-copy)", text));
}

index_t paper_extent(index_t d) { return preset_extent(kPaperExtents, d, "paper"); }
index_t desk_extent(index_t d) { return preset_extent(kDeskExtents, d, "desk"); }

Shape resolve_dims(std::string_view text) {
  for (const auto& [prefix, fn] : {std::pair{std::string_view("paper:d"), &paper_extent},
                                   std::pair{std::string_view("desk:d"), &desk_extent}}) {
    if (text.starts_with(prefix)) {
      const std::string digits(text.substr(prefix.size()));
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(fmt::format("bad preset '{}'", text));
      }
      const index_t d = std::stoul(digits);
      return Shape::hypersquare(fn(d), d);
    }
  }
  return parse_shape(text);
}

void BenchConfig::validate() const {
  if (!precision.valid()) throw ConfigError("invalid precision mode");
  if (iterations == 0 && !(seconds > 0)) throw ConfigError("either --seconds > 0 or --iters > 0 is required");
  if (deterministic && iterations == 0) throw ConfigError("--deterministic needs a fixed --iters count");
  if (peak_bandwidth && !(*peak_bandwidth > 0)) throw ConfigError("--peak must be positive");
  if (vl == 0) throw ConfigError("--vl must be positive");
  if (workers == 0) throw ConfigError("--workers must be positive");
  if (threads == 0) throw ConfigError("--threads must be positive");
  if (subcommand == Subcommand::cost || subcommand == Subcommand::triad) return;
  const index_t d = dims.order();
  if (d < 2) throw ConfigError("contractions need order >= 2");
  if (subcommand != Subcommand::hopm && mode >= d) {
    throw ConfigError(fmt::format("contraction mode {} out of range for order {}", mode, d));
  }
  if (subcommand == Subcommand::tvc) {
    if (workers != 1) throw ConfigError("tvc is sequential; use dtvc for --workers > 1");
    return;
  }
  if (split >= d) throw ConfigError(fmt::format("split dimension {} out of range for order {}", split, d));
  if (subcommand == Subcommand::hopm) {
    if (d < 2) throw ConfigError("hopm needs order >= 2");
    if (sweeps == 0) throw ConfigError("--sweeps must be positive");
  }
  if (workers > dims[split]) {
    const index_t max_p = optimal_division(dims[split], dims[split], vl).workers;
    throw ConfigError(fmt::format("{} workers exceed extent {} of split dimension {}; at most {} effective workers",
                                  workers, dims[split], split, max_p));
  }
}

BenchResult run_bench(const BenchConfig& cfg) {
  cfg.validate();
  switch (cfg.subcommand) {
    case Subcommand::tvc:
      return dispatch_precision(cfg.precision, [&]<class S, class C>() { return run_tvc<S, C>(cfg); });
    case Subcommand::dtvc:
      return dispatch_precision(cfg.precision, [&]<class S, class C>() { return run_dtvc<S, C>(cfg); });
    case Subcommand::hopm:
      return dispatch_precision(cfg.precision, [&]<class S, class C>() { return run_hopm<S, C>(cfg); });
    case Subcommand::triad: {
      const index_t n = cfg.dims.size();
      const TriadResult t = stream_triad(n, cfg.seconds, 3.0, nullptr, cfg.iterations);
      BenchResult r = base_result(cfg);
      r.precision = PrecisionMode{};
      r.touched_predicted = r.touched_measured = static_cast<double>(t.touched_per_pass);
      r.iterations = t.passes;
      r.elapsed = t.elapsed;
      r.it_s = t.elapsed > 0 ? static_cast<double>(t.passes) / t.elapsed : 0;
      r.it_sp = r.it_s;
      r.bytes_s = t.bandwidth;
      r.deterministic = cfg.deterministic;
      if (cfg.peak_bandwidth) r.normalized_bandwidth = 100.0 * r.bytes_s / *cfg.peak_bandwidth;
      return r;
    }
    case Subcommand::cost:
      break;
  }
  throw ConfigError("the cost subcommand has no timed benchmark; use emit_cost_csv");
}

TriadResult stream_triad(index_t n, double seconds, double scalar, std::vector<double>* a_out, index_t max_passes) {
  if (n == 0) throw ConfigError("triad length must be positive");
  if (max_passes == 0 && !(seconds > 0)) throw ConfigError("triad needs a time budget or a pass count");
  std::vector<double> a, b, c;
  try {
    a.assign(n, 0.0);
    b.assign(n, 1.0);
    c.assign(n, 2.0);
  } catch (const std::bad_alloc&) {
    throw ResourceError(fmt::format("cannot allocate three buffers of {} doubles", n));
  }
  TriadResult r;
  r.touched_per_pass = 3 * static_cast<std::uint64_t>(n);
  const auto start = Clock::now();
  while (true) {
    double* __restrict pa = a.data();
    const double* __restrict pb = b.data();
    const double* __restrict pc = c.data();
    for (index_t i = 0; i < n; ++i) pa[i] = pb[i] + scalar * pc[i];
    ++r.passes;
    r.elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (max_passes > 0 ? r.passes >= max_passes : r.elapsed >= seconds) break;
  }
  if (r.elapsed > 0) {
    r.bandwidth = static_cast<double>(r.touched_per_pass) * sizeof(double) * static_cast<double>(r.passes) / r.elapsed;
  }
  if (a_out) *a_out = std::move(a);
  return r;
}

Stats sample_stats(const std::vector<double>& values) {
  Stats s;
  if (values.empty()) return s;
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return s;
  double sq = 0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return s;
}

void emit_csv(const std::vector<BenchResult>& results, std::ostream& out) {
  if (results.empty()) throw ConfigError("no results to write");
  out << kCsvHeader << '\n';
  for (const auto& r : results) {
    const bool timed = !r.deterministic;
    auto timing = [&](double v) { return timed ? num(v) : std::string("NA"); };
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", to_string(r.subcommand),
                       r.dims.order(), r.dims.to_string(), r.mode, r.split, r.p_requested, r.p_effective,
                       r.precision.name(), r.iterations, timing(r.elapsed), timing(r.it_s), timing(r.it_sp),
                       timing(r.bytes_s),
                       (timed && r.normalized_bandwidth) ? num(*r.normalized_bandwidth) : std::string("NA"),
                       num(r.touched_predicted), num(r.touched_measured), timing(r.stddev_pct));
  }
}

void emit_csv(const std::vector<BenchResult>& results, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError(fmt::format("cannot open '{}' for writing", path));
  emit_csv(results, out);
  out.flush();
  if (!out) throw ResourceError(fmt::format("write to '{}' failed", path));
}

SweepSummary sweep(const BenchConfig& tmpl, SweepAxis axis) {
  tmpl.validate();
  SweepSummary summary;
  const index_t d = tmpl.dims.order();
  summary.order = d;
  const bool sweep_k = axis != SweepAxis::split && tmpl.subcommand != Subcommand::hopm;
  const bool sweep_s = axis != SweepAxis::mode && tmpl.subcommand != Subcommand::tvc;
  std::vector<double> values;
  for (index_t s = 0; s < (sweep_s ? d : 1); ++s) {
    for (index_t k = 0; k < (sweep_k ? d : 1); ++k) {
      BenchConfig cfg = tmpl;
      if (sweep_s) cfg.split = s;
      if (sweep_k) cfg.mode = k;
      summary.runs.push_back(run_bench(cfg));
      const auto& r = summary.runs.back();
      values.push_back(r.normalized_bandwidth ? *r.normalized_bandwidth : r.bytes_s);
    }
  }
  summary.bandwidth = sample_stats(values);
  return summary;
}

void emit_cost_csv(const std::vector<cost::CostReport>& reports, std::ostream& out) {
  out << kCostCsvHeader << '\n';
  for (const auto& r : reports) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.query.d, r.query.n, r.query.p, r.query.s, num(r.m_seq),
                       num(r.M_par), num(r.M_par_min), num(r.eta_inv), num(r.H_inv), num(r.ring_overhead));
  }
}

}  // namespace tvc::bench
