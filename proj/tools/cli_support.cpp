#include "cli_support.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "mvp/error.hpp"

namespace mvp::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (seps.find(ch) != std::string::npos) {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

unsigned to_unsigned(const std::string& s, const std::string& what) {
  unsigned v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw InvalidArgument("bad " + what + ": " + s);
  return v;
}

double to_double(const std::string& s, const std::string& what) {
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw InvalidArgument("bad " + what + ": " + s);
  return v;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::vector<std::string> config_arguments(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::vector<std::string> out;
  for (const auto& [k, v] : kv) out.push_back("--" + k + "=" + v);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, p) : std::string("nan");
}

std::string metadata_line(const std::string& command, const std::string& echo) {
  return std::string("artifact=mvp_oram version=") + kArtifactVersion + " command=" + command +
         (echo.empty() ? "" : " " + echo);
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows, const std::string& meta) {
  out << "# " << meta << "\n" << kMetricsHeader << "\n";
  for (const auto& r : rows) {
    out << r.round << ',' << r.client << ',' << op_name(r.op) << ',' << r.req_bytes << ','
        << r.resp_bytes << ',' << r.seq << ',' << r.stash_size << ',' << r.open_contexts << '\n';
  }
}

void write_stash_csv(std::ostream& out, const std::vector<StashRun>& runs, const std::string& meta) {
  out << "# " << meta << "\n" << kStashHeader << "\n";
  for (const auto& run : runs) {
    const std::string tail = "," + std::to_string(run.c) + "," + format_double(run.alpha) + "," +
                             std::to_string(run.Z) + "," + std::to_string(run.L) + "," +
                             std::to_string(run.seed) + "\n";
    for (const auto& s : run.samples) {
      out << s.timestep << ',' << s.accesses_so_far << ',' << s.stash_size << tail;
    }
  }
}

void write_tvd_csv(std::ostream& out, const std::vector<TvdCell>& cells, const std::string& meta) {
  out << "# " << meta << "\n" << kTvdHeader << "\n";
  for (const auto& c : cells) {
    out << c.L << ',' << c.c << ',' << format_double(c.alpha) << ',' << c.sigma << ',' << c.N << ','
        << format_double(c.delta) << '\n';
  }
}

std::string stash_gnuplot(const std::string& csv, const std::vector<StashRun>& runs) {
  std::ostringstream g;
  g << "set datafile separator ','\n"
    << "set terminal pdfcairo size 5in,3.5in\n"
    << "set output 'stash.pdf'\n"
    << "set xlabel 'accesses'\nset ylabel 'stash size (blocks)'\nset key top left\n"
    << "plot \\\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    g << "  '" << csv << "' every ::1 using 2:(($4==" << r.c << " && $5==" << format_double(r.alpha)
      << ") ? $3 : 1/0) with lines title 'c=" << r.c << " alpha=" << format_double(r.alpha) << "'"
      << (i + 1 < runs.size() ? ", \\\n" : "\n");
  }
  return g.str();
}

std::string tvd_gnuplot(const std::string& csv, const std::vector<TvdCell>& cells) {
  std::set<std::tuple<unsigned, double, unsigned>> series;
  for (const auto& c : cells) series.insert({c.L, c.alpha, c.sigma});
  std::ostringstream g;
  g << "set datafile separator ','\n"
    << "set terminal pdfcairo size 5in,3.5in\n"
    << "set output 'tvd.pdf'\n"
    << "set xlabel 'concurrent clients c'\nset ylabel 'statistical distance'\n"
    << "set yrange [0:1]\nset key top left\n"
    << "plot \\\n";
  std::size_t i = 0;
  for (const auto& [L, alpha, sigma] : series) {
    g << "  '" << csv << "' every ::1 using 2:(($1==" << L << " && $3==" << format_double(alpha)
      << " && $4==" << sigma << ") ? $6 : 1/0) with linespoints title 'L=" << L
      << " alpha=" << format_double(alpha) << " sigma=" << sigma << "'"
      << (++i < series.size() ? ", \\\n" : "\n");
  }
  return g.str();
}

std::vector<std::pair<unsigned, FaultBehavior>> parse_faults(const std::string& s) {
  std::vector<std::pair<unsigned, FaultBehavior>> out;
  if (s.empty() || s == "none") return out;
  for (const auto& item : split(s, ",;")) {
    const auto colon = item.rfind(':');
    if (colon == std::string::npos) throw InvalidArgument("fault needs behavior:replica: " + item);
    const auto f = parse_fault(item.substr(0, colon));
    if (!f) throw InvalidArgument("unknown fault behavior: " + item.substr(0, colon));
    out.emplace_back(to_unsigned(item.substr(colon + 1), "replica"), *f);
  }
  return out;
}

FreezeSpec parse_freeze(const std::string& s) {
  const auto at = s.find('@');
  if (at == std::string::npos) throw InvalidArgument("freeze needs client@round: " + s);
  FreezeSpec f;
  f.client = to_unsigned(s.substr(0, at), "client");
  std::string rest = s.substr(at + 1);
  const auto colon = rest.find(':');
  if (colon != std::string::npos) {
    const auto point = rest.substr(colon + 1);
    if (point == "start") {
      f.point = FreezePoint::kBeforeAccess;
    } else if (point == "pm") {
      f.point = FreezePoint::kAfterGetPm;
    } else if (point == "ps") {
      f.point = FreezePoint::kAfterGetPs;
    } else {
      throw InvalidArgument("freeze point must be start, pm or ps: " + point);
    }
    rest = rest.substr(0, colon);
  }
  if (rest.rfind("round", 0) == 0) rest = rest.substr(5);
  f.round = to_unsigned(rest, "round");
  return f;
}

std::vector<std::pair<unsigned, double>> parse_stash_runs(const std::string& s) {
  std::vector<std::pair<unsigned, double>> out;
  for (const auto& item : split(s, ",;")) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw InvalidArgument("stash run needs c:alpha: " + item);
    out.emplace_back(to_unsigned(item.substr(0, colon), "c"), to_double(item.substr(colon + 1), "alpha"));
  }
  if (out.empty()) throw InvalidArgument("no stash runs given");
  return out;
}

}  // namespace mvp::cli
