#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tvc/cost_model.hpp"
#include "tvc/precision.hpp"
#include "tvc/split.hpp"

namespace tvc::bench {

enum class Subcommand { tvc, dtvc, hopm, cost, triad };
enum class FillKind { ones, ramp, random };

std::string to_string(Subcommand s);
FillKind parse_fill(std::string_view text);
AssemblyStrategy parse_assembly(std::string_view text);

/// Shape presets: "paper:dN" (the 7.5 GB hypersquare suite) and "desk:dN"
/// (same orders, laptop-sized). Anything else is parsed as a shape literal.
Shape resolve_dims(std::string_view text);
index_t paper_extent(index_t d);
index_t desk_extent(index_t d);

struct BenchConfig {
  Subcommand subcommand = Subcommand::tvc;
  Shape dims{8, 8, 8};
  index_t mode = 0;
  index_t split = 0;
  index_t workers = 1;
  index_t vl = 8;
  PrecisionMode precision;
  double seconds = 5.0;
  index_t iterations = 0;  ///< fixed iteration count; overrides seconds when > 0
  index_t sweeps = 1;
  index_t tasks = 0;
  index_t threads = 1;
  AssemblyStrategy assembly = AssemblyStrategy::interleave;
  bool assemble = false;  ///< dtvc: include global assembly in every iteration
  FillKind fill = FillKind::random;
  std::uint64_t seed = 1;
  std::optional<double> peak_bandwidth;  ///< bytes/s
  bool deterministic = false;
  bool classical_hopm = false;
  bool defer = true;

  /// Throws ConfigError; `p > n_s` reports the largest usable worker count.
  void validate() const;
};

struct BenchResult {
  Subcommand subcommand = Subcommand::tvc;
  Shape dims{1};
  index_t mode = 0;
  index_t split = 0;
  index_t p_requested = 1;
  index_t p_effective = 1;
  PrecisionMode precision;
  index_t iterations = 0;
  double elapsed = 0;
  double it_s = 0;
  double it_sp = 0;
  double bytes_s = 0;
  std::optional<double> normalized_bandwidth;  ///< percent of peak
  double touched_predicted = 0;                ///< elements per iteration
  double touched_measured = 0;                 ///< elements per iteration
  double stddev_pct = 0;                       ///< unbiased sample stddev of iteration times, % of mean
  bool deterministic = false;
};

BenchResult run_bench(const BenchConfig& cfg);

struct TriadResult {
  double bandwidth = 0;  ///< bytes/s
  index_t passes = 0;
  double elapsed = 0;
  std::uint64_t touched_per_pass = 0;  ///< elements: two reads and one write per index
};

/// a[i] = b[i] + scalar * c[i] over three distinct buffers of n doubles.
TriadResult stream_triad(index_t n = index_t{1} << 25, double seconds = 1.0, double scalar = 3.0,
                         std::vector<double>* a_out = nullptr, index_t max_passes = 0);

/// Mean and unbiased sample standard deviation.
struct Stats {
  double mean = 0;
  double stddev = 0;
};
Stats sample_stats(const std::vector<double>& values);

/// Column order of the benchmark CSV.
inline constexpr std::string_view kCsvHeader =
    "subcommand,d,dims,k,s,p_req,p_eff,precision,iterations,elapsed_s,it_s,it_sp,bytes_s,norm_bw_pct,"
    "touched_pred,touched_meas,stddev_pct";

void emit_csv(const std::vector<BenchResult>& results, std::ostream& out);
void emit_csv(const std::vector<BenchResult>& results, const std::string& path);

struct SweepSummary {
  index_t order = 0;
  Stats bandwidth;  ///< over normalized bandwidth % (or bytes/s without a peak)
  std::vector<BenchResult> runs;
};

enum class SweepAxis { mode, split, both };

/// Runs the (k, s) grid of the template (or one axis of it) and aggregates
/// the normalized bandwidth with mean and unbiased sample stddev.
SweepSummary sweep(const BenchConfig& tmpl, SweepAxis axis = SweepAxis::both);

inline constexpr std::string_view kCostCsvHeader = "d,n,p,s,m_seq,M_par,M_par_min,eta_inv,H_inv,ring_overhead";

void emit_cost_csv(const std::vector<cost::CostReport>& reports, std::ostream& out);

}  // namespace tvc::bench
