#pragma once

// Config files, CSV emitters and gnuplot scripts for the mvp_oram tool.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mvp/leafdist.hpp"
#include "mvp/simulation.hpp"

namespace mvp::cli {

inline constexpr const char* kArtifactVersion = "1.0.0";

inline constexpr const char* kMetricsHeader =
    "round,client,op,req_bytes,resp_bytes,seq,stash_size,open_contexts";
inline constexpr const char* kStashHeader = "timestep,accesses_so_far,stash_size,c,alpha,Z,L,seed";
inline constexpr const char* kTvdHeader = "L,c,alpha,sigma,N,delta";

/// Reads `key=value` lines. Blank lines and lines starting with '#' are
/// skipped. Throws std::runtime_error on unreadable files or lines without '='.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

/// Turns config entries into `--key=value` arguments.
std::vector<std::string> config_arguments(const std::vector<std::pair<std::string, std::string>>& kv);

/// Shortest text that reads back as the same double.
std::string format_double(double v);

/// `artifact=mvp_oram version=... command=<command> <echo>`.
std::string metadata_line(const std::string& command, const std::string& echo);

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows, const std::string& meta);

struct StashRun {
  unsigned c = 1;
  double alpha = 1.0;
  unsigned Z = 4;
  unsigned L = 12;
  std::uint64_t seed = 1;
  std::vector<StashSample> samples;
};

void write_stash_csv(std::ostream& out, const std::vector<StashRun>& runs, const std::string& meta);
void write_tvd_csv(std::ostream& out, const std::vector<TvdCell>& cells, const std::string& meta);

/// Scripts that plot the CSVs above; `csv` is the path the script reads.
std::string stash_gnuplot(const std::string& csv, const std::vector<StashRun>& runs);
std::string tvd_gnuplot(const std::string& csv, const std::vector<TvdCell>& cells);

/// "behavior:replica" entries separated by ',' or ';'. Throws InvalidArgument.
std::vector<std::pair<unsigned, FaultBehavior>> parse_faults(const std::string& s);

/// "client@[round]R[:start|pm|ps]", e.g. "2@round50" or "1@40:pm". Throws InvalidArgument.
FreezeSpec parse_freeze(const std::string& s);

/// "c:alpha" pairs separated by ','. Throws InvalidArgument.
std::vector<std::pair<unsigned, double>> parse_stash_runs(const std::string& s);

}  // namespace mvp::cli
