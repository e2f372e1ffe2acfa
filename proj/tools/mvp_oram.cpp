// mvp_oram: experiment runner and plot-data emitter.
// Exit codes: 0 pass, 1 property violation, 2 usage error.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cli_support.hpp"
#include "mvp/history.hpp"
#include "mvp/leafdist.hpp"
#include "mvp/simulation.hpp"

namespace fs = std::filesystem;
using namespace mvp;
using namespace mvp::cli;

namespace {

constexpr int kPass = 0;
constexpr int kViolation = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    std::istringstream in(item);
    T v{};
    if (!(in >> v) || !in.eof()) throw UsageError(std::string("bad ") + what + " list entry: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

// Options every subcommand shares.
struct Common {
  std::string seeds = "1";
  std::string out = "out";
  std::string config;

  void add(CLI::App* sub) {
    sub->add_option("--seed", seeds, "Seed, or comma-separated seeds")->capture_default_str();
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    sub->add_option("--config", config, "key=value file; flags given on the command line win");
  }
  std::vector<std::uint64_t> seed_list() const { return parse_list<std::uint64_t>(seeds, "seed"); }
  fs::path dir() const {
    fs::create_directories(out);
    return fs::path(out);
  }
  std::string echo() const { return "seeds=" + seeds + " out=" + out; }
};

// ------------------------------------------------------------------ simulate

struct SimulateArgs {
  Common common;
  unsigned L = 10, Z = 4, block_size = 8;
  std::size_t N = 0;
  bool initialize = true;
  unsigned n = 4, t = 1, c = 5, c_max = 10, gamma = 64;
  bool strong = false;
  unsigned sigma = 0;
  std::uint64_t reclaim_after = 0;
  std::string schedule = "round-robin";
  std::uint64_t accesses = 10000;
  double alpha = 1.0, write_ratio = 0.5;
  long fixed_address = -1;
  std::string faults = "none";
  std::string freezes = "none";
  bool audit = false;
  bool admission_test = false;

  void add(CLI::App* s) {
    common.add(s);
    s->add_option("--L", L, "Tree height")->capture_default_str();
    s->add_option("--Z", Z, "Bucket size")->capture_default_str();
    s->add_option("--block-size", block_size, "Payload bytes per block")->capture_default_str();
    s->add_option("--N", N, "Blocks; 0 means 2^(L+1)-1")->capture_default_str();
    s->add_option("--initialize", initialize, "Start from an all-zero tree")->capture_default_str();
    s->add_option("--n", n, "Replicas")->capture_default_str();
    s->add_option("--t", t, "Tolerated Byzantine replicas")->capture_default_str();
    s->add_option("--c", c, "Concurrent clients")->capture_default_str();
    s->add_option("--c-max", c_max, "Admission limit")->capture_default_str();
    s->add_option("--gamma", gamma, "Compaction period")->capture_default_str();
    s->add_option("--strong", strong, "Strong mode")->capture_default_str();
    s->add_option("--sigma", sigma, "Dummy accesses per real access")->capture_default_str();
    s->add_option("--reclaim-after", reclaim_after, "Reclaim idle contexts after this many log ops; 0 off")
        ->capture_default_str();
    s->add_option("--schedule", schedule, "round-robin, random or adversarial")->capture_default_str();
    s->add_option("--accesses", accesses, "Total accesses")->capture_default_str();
    s->add_option("--alpha", alpha, "Zipf parameter")->capture_default_str();
    s->add_option("--write-ratio", write_ratio, "Fraction of writes")->capture_default_str();
    s->add_option("--fixed-address", fixed_address, "Every access targets this address; -1 off")
        ->capture_default_str();
    s->add_option("--faults", faults, "behavior:replica list, e.g. corrupt-replies:1")->capture_default_str();
    s->add_option("--freeze-client", freezes, "client@roundR[:start|pm|ps] list")->capture_default_str();
    s->add_option("--audit", audit, "Shadow-map audit after every access")->capture_default_str();
    s->add_option("--admission-test", admission_test, "Allow c > c_max")->capture_default_str();
  }

  SimConfig config(std::uint64_t seed) const {
    SimConfig cfg;
    cfg.geom = TreeGeometry{L, Z, block_size};
    cfg.num_blocks = N;
    cfg.initialize = initialize;
    cfg.n = n;
    cfg.t = t;
    cfg.clients = c;
    cfg.c_max = c_max;
    cfg.gamma = gamma;
    cfg.strong = strong;
    cfg.sigma = sigma;
    if (reclaim_after) cfg.reclaim_after = reclaim_after;
    const auto p = parse_schedule(schedule);
    if (!p) throw UsageError("unknown schedule: " + schedule);
    cfg.policy = *p;
    cfg.accesses = accesses;
    cfg.seed = seed;
    cfg.workload.alpha = alpha;
    cfg.workload.write_ratio = write_ratio;
    if (fixed_address >= 0) cfg.workload.fixed_address = static_cast<Address>(fixed_address);
    cfg.faults = parse_faults(faults);
    if (freezes != "none" && !freezes.empty()) {
      for (const auto& f : split_list(freezes)) cfg.freezes.push_back(parse_freeze(f));
    }
    cfg.record_metrics = true;
    cfg.check_replicas = true;
    cfg.audit = audit;
    if (c > c_max && !admission_test) throw UsageError("c > c_max needs --admission-test 1");
    cfg.validate();
    return cfg;
  }
};

using AccessKey = std::tuple<ClientId, std::uint64_t, OpType, Address, Bytes>;

std::vector<AccessKey> access_keys(const SimResult& r) {
  std::vector<AccessKey> out;
  for (const auto& a : r.accesses) out.emplace_back(a.client, a.index, a.op, a.addr, a.value);
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_simulate(const SimulateArgs& a) {
  const auto seeds = a.common.seed_list();
  std::vector<SimConfig> configs;
  struct Plan {
    std::size_t main, fault_free = SIZE_MAX, unfrozen = SIZE_MAX;
  };
  std::vector<Plan> plans;
  for (auto seed : seeds) {
    Plan p;
    const auto cfg = a.config(seed);
    p.main = configs.size();
    configs.push_back(cfg);
    if (!cfg.faults.empty()) {
      auto twin = cfg;
      twin.faults.clear();
      twin.record_metrics = false;
      p.fault_free = configs.size();
      configs.push_back(twin);
    }
    if (!cfg.freezes.empty()) {
      auto twin = cfg;
      twin.freezes.clear();
      twin.record_metrics = false;
      p.unfrozen = configs.size();
      configs.push_back(twin);
    }
    plans.push_back(p);
  }
  const auto dir = a.common.dir();
  const auto results = run_simulations(configs);

  bool ok = true;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& cfg = configs[plans[i].main];
    const auto& r = results[plans[i].main];
    const auto verdict = check_history(r.history, r.initial_value_digest);
    std::ostringstream line;
    line << "seed=" << cfg.seed << " verdict=" << (verdict.legal ? "legal" : "illegal")
         << " operations=" << verdict.operations << " server_ops=" << r.server_ops
         << " busy_retries=" << r.busy_retries << " fallbacks=" << r.fallbacks
         << " replicas=" << (r.replicas_agree ? "agree" : "diverged");
    bool run_ok = verdict.legal && r.replicas_agree;
    if (cfg.audit) {
      line << " audit_mismatches=" << r.audit.mismatches;
      run_ok = run_ok && r.audit.mismatches == 0;
    }
    if (plans[i].fault_free != SIZE_MAX) {
      const bool same = access_keys(r) == access_keys(results[plans[i].fault_free]);
      line << " fault_free_pair=" << (same ? "match" : "differ");
      run_ok = run_ok && same;
    }
    if (plans[i].unfrozen != SIZE_MAX) {
      std::set<ClientId> frozen;
      for (const auto& f : cfg.freezes) frozen.insert(f.client);
      std::vector<std::uint64_t> mine(cfg.clients), base(cfg.clients);
      for (const auto& x : r.accesses) ++mine[x.client];
      for (const auto& x : results[plans[i].unfrozen].accesses) ++base[x.client];
      bool same = true;
      for (ClientId c = 0; c < cfg.clients; ++c)
        if (!frozen.count(c) && mine[c] != base[c]) same = false;
      line << " unfrozen_pair=" << (same ? "match" : "differ");
      run_ok = run_ok && same;
    }
    if (!verdict.legal) line << " witness=\"" << verdict.witness << "\"";
    std::cout << line.str() << "\n";
    ok = ok && run_ok;

    const std::string meta =
        metadata_line("simulate", cfg.describe() + " audit=" + std::to_string(cfg.audit) +
                                      " initial_value=" + r.initial_value_digest + " " + a.common.echo());
    const std::string tag = "seed" + std::to_string(cfg.seed);
    auto h = open_out(dir / ("history_" + tag + ".csv"));
    write_history_csv(h, r.history, meta);
    auto m = open_out(dir / ("metrics_" + tag + ".csv"));
    write_metrics_csv(m, r.metrics, meta);
  }
  return ok ? kPass : kViolation;
}

// --------------------------------------------------------------------- stash

struct StashArgs {
  Common common;
  unsigned L = 12, Z = 4;
  std::uint64_t accesses = 100000;
  std::string runs = "15:1e-6,15:1.0,15:2.0,10:1.0,1:1.0";
  bool plot_script = false;

  void add(CLI::App* s) {
    common.add(s);
    s->add_option("--L", L, "Tree height")->capture_default_str();
    s->add_option("--Z", Z, "Bucket size")->capture_default_str();
    s->add_option("--accesses", accesses, "Accesses per run")->capture_default_str();
    s->add_option("--runs", runs, "c:alpha list")->capture_default_str();
    s->add_option("--plot-script", plot_script, "Also write stash.gp")->capture_default_str();
  }
};

double mean_stash(const std::vector<StashSample>& s, std::size_t lo, std::size_t hi) {
  double sum = 0;
  for (std::size_t i = lo; i < hi; ++i) sum += static_cast<double>(s[i].stash_size);
  return hi > lo ? sum / static_cast<double>(hi - lo) : 0.0;
}

int cmd_stash(const StashArgs& a) {
  std::vector<std::pair<unsigned, double>> grid;
  try {
    grid = parse_stash_runs(a.runs);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const auto seeds = a.common.seed_list();
  std::vector<SimConfig> configs;
  std::vector<StashRun> runs;
  for (auto seed : seeds)
    for (auto [c, alpha] : grid) {
      auto cfg = stash_config(a.L, a.Z, c, alpha, a.accesses, seed);
      cfg.validate();
      configs.push_back(cfg);
      runs.push_back({c, alpha, a.Z, a.L, seed, {}});
    }
  const auto dir = a.common.dir();
  const auto results = run_simulations(configs);

  const double log2n = std::log2(static_cast<double>((std::uint64_t{1} << (a.L + 1)) - 1));
  std::map<std::tuple<std::uint64_t, unsigned, double>, double> plateau;
  bool ok = true;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    runs[i].samples = results[i].stash;
    const auto& s = runs[i].samples;
    const double q3 = mean_stash(s, s.size() / 2, 3 * s.size() / 4);
    const double q4 = mean_stash(s, 3 * s.size() / 4, s.size());
    const double bound = runs[i].c * a.Z * log2n;
    const bool stable = std::abs(q4 - q3) <= 0.15 * q3 || q3 == q4;
    const bool bounded = q4 <= bound;
    ok = ok && stable && bounded;
    plateau[{runs[i].seed, runs[i].c, runs[i].alpha}] = q4;
    std::printf("seed=%llu c=%u alpha=%s q3_mean=%.3f q4_mean=%.3f bound=%.1f stable=%s bounded=%s\n",
                (unsigned long long)runs[i].seed, runs[i].c, format_double(runs[i].alpha).c_str(), q3,
                q4, bound, stable ? "yes" : "no", bounded ? "yes" : "no");
  }
  // Same seed and alpha: plateau grows with c. Same seed and c: shrinks with alpha.
  for (const auto& [k1, v1] : plateau)
    for (const auto& [k2, v2] : plateau) {
      const auto [s1, c1, a1] = k1;
      const auto [s2, c2, a2] = k2;
      if (s1 != s2) continue;
      bool bad = false;
      if (a1 == a2 && c1 < c2 && !(v1 < v2)) bad = true;
      if (c1 == c2 && a1 < a2 && !(v1 > v2)) bad = true;
      if (bad) {
        ok = false;
        std::printf("ordering violated: (c=%u alpha=%s) %.3f vs (c=%u alpha=%s) %.3f\n", c1,
                    format_double(a1).c_str(), v1, c2, format_double(a2).c_str(), v2);
      }
    }

  std::ostringstream echo;
  echo << "L=" << a.L << " Z=" << a.Z << " block_size=8 accesses=" << a.accesses
       << " schedule=adversarial n=1 t=0 runs=" << a.runs << " " << a.common.echo();
  auto out = open_out(dir / "stash.csv");
  write_stash_csv(out, runs, metadata_line("stash", echo.str()));
  if (a.plot_script) {
    auto g = open_out(dir / "stash.gp");
    g << stash_gnuplot("stash.csv", runs);
  }
  return ok ? kPass : kViolation;
}

// ----------------------------------------------------------------------- tvd

struct TvdArgs {
  Common common;
  std::string grid = "heights";
  std::string L = "17";
  std::string alpha = "1.0";
  std::string c = "1,5,10,15,20,25,30,35,40,45,50";
  std::string sigma = "0";
  std::uint64_t N = 0;
  bool serial = false;
  bool plot_script = false;

  void add(CLI::App* s) {
    common.add(s);
    s->add_option("--grid", grid, "heights, sigma or custom")->capture_default_str();
    s->add_option("--L", L, "Heights (custom grid)")->capture_default_str();
    s->add_option("--alpha", alpha, "Zipf parameters (custom grid)")->capture_default_str();
    s->add_option("--c", c, "Client counts")->capture_default_str();
    s->add_option("--sigma", sigma, "Dummy access counts (custom grid)")->capture_default_str();
    s->add_option("--N", N, "Blocks; 0 means 2^(L+1)-1")->capture_default_str();
    s->add_option("--serial", serial, "Use the serial kernel")->capture_default_str();
    s->add_option("--plot-script", plot_script, "Also write tvd_<grid>.gp")->capture_default_str();
  }
};

std::uint64_t blocks_for(unsigned L, std::uint64_t N) {
  return N ? N : (std::uint64_t{1} << (L + 1)) - 1;
}

int cmd_tvd(const TvdArgs& a) {
  const auto cs = parse_list<unsigned>(a.c, "c");
  std::vector<TvdCell> cells;
  // Height rows: per height, alphas sending 80/90/95/99% of accesses to 20/10/5/1% of blocks.
  const std::vector<std::pair<unsigned, std::vector<double>>> rows = {
      {17, {0.90436, 1.0945, 1.2353, 1.537}}, {25, {0.87683, 1.0251, 1.1237, 1.3101}}};
  if (a.grid == "heights") {
    for (const auto& [L, alphas] : rows)
      for (double al : alphas)
        for (unsigned c : cs) cells.push_back({L, c, al, 0, blocks_for(L, a.N)});
  } else if (a.grid == "sigma") {
    for (double al : {1e-7, 1.537})
      for (unsigned sg = 0; sg <= 50; sg += 10)
        for (unsigned c : cs) cells.push_back({17, c, al, sg, blocks_for(17, a.N)});
  } else if (a.grid == "custom") {
    for (unsigned L : parse_list<unsigned>(a.L, "L"))
      for (double al : parse_list<double>(a.alpha, "alpha"))
        for (unsigned sg : parse_list<unsigned>(a.sigma, "sigma"))
          for (unsigned c : cs) cells.push_back({L, c, al, sg, blocks_for(L, a.N)});
  } else {
    throw UsageError("unknown grid: " + a.grid);
  }
  for (const auto& cell : cells) {
    if (cell.L == 0 || cell.L > 40 || cell.c == 0 || cell.c > 60) throw UsageError("L or c out of range");
  }
  const auto dir = a.common.dir();
  if (a.serial) {
    compute_tvd_serial(cells);
  } else {
    compute_tvd_parallel(cells);
  }

  bool ok = true;
  std::size_t zero_cells = 0;
  for (const auto& cell : cells) {
    if (cell.c <= cell.sigma + 1) {
      ++zero_cells;
      if (cell.delta != 0.0) ok = false;
    }
  }
  std::printf("%zu cells; %zu with c <= sigma+1, mu = 0 on all: %s\n", cells.size(), zero_cells,
              ok ? "yes" : "no");
  if (a.grid == "heights") {
    std::map<std::tuple<unsigned, std::size_t, unsigned>, double> d;
    for (const auto& cell : cells) {
      const auto& alphas = cell.L == 17 ? rows[0].second : rows[1].second;
      const auto row = static_cast<std::size_t>(std::find(alphas.begin(), alphas.end(), cell.alpha) - alphas.begin());
      d[{cell.L, row, cell.c}] = cell.delta;
    }
    std::size_t alpha_breaks = 0, l_breaks = 0;
    for (unsigned c : cs)
      for (std::size_t row = 0; row < 4; ++row) {
        for (unsigned L : {17u, 25u})
          if (row + 1 < 4 && d[{L, row + 1, c}] > d[{L, row, c}] + 1e-12) ++alpha_breaks;
        if (d[{25u, row, c}] > d[{17u, row, c}] + 1e-12) ++l_breaks;
      }
    std::printf("alpha monotonicity breaks: %zu; height monotonicity breaks: %zu\n", alpha_breaks, l_breaks);
    ok = ok && alpha_breaks == 0 && l_breaks == 0;
  }

  std::ostringstream echo;
  echo << "grid=" << a.grid << " c=" << a.c;
  if (a.grid == "custom") echo << " L=" << a.L << " alpha=" << a.alpha << " sigma=" << a.sigma;
  echo << " N=" << a.N << " kernel=" << (a.serial ? "serial" : "parallel") << " " << a.common.echo();
  const std::string name = "tvd_" + a.grid;
  auto out = open_out(dir / (name + ".csv"));
  write_tvd_csv(out, cells, metadata_line("tvd", echo.str()));
  if (a.plot_script) {
    auto g = open_out(dir / (name + ".gp"));
    g << tvd_gnuplot(name + ".csv", cells);
  }
  return ok ? kPass : kViolation;
}

// --------------------------------------------------------------------- bench

struct BenchArgs {
  Common common;
  unsigned n = 4, t = 1, L = 10, Z = 4, block_size = 8;
  std::string clients = "1,5,10";
  std::string heights = "8,10,12";
  unsigned sweep_clients = 4;
  std::uint64_t accesses_per_client = 300;
  std::string schedule = "adversarial";

  void add(CLI::App* s) {
    common.add(s);
    s->add_option("--n", n, "Replicas")->capture_default_str();
    s->add_option("--t", t, "Tolerated Byzantine replicas")->capture_default_str();
    s->add_option("--L", L, "Tree height for the client sweep")->capture_default_str();
    s->add_option("--Z", Z, "Bucket size")->capture_default_str();
    s->add_option("--block-size", block_size, "Payload bytes per block")->capture_default_str();
    s->add_option("--clients", clients, "Client counts for the client sweep")->capture_default_str();
    s->add_option("--heights", heights, "Tree heights for the height sweep")->capture_default_str();
    s->add_option("--sweep-clients", sweep_clients, "Clients during the height sweep")->capture_default_str();
    s->add_option("--accesses-per-client", accesses_per_client, "Accesses per client")->capture_default_str();
    s->add_option("--schedule", schedule, "round-robin, random or adversarial")->capture_default_str();
  }
};

int cmd_bench(const BenchArgs& a) {
  const auto p = parse_schedule(a.schedule);
  if (!p) throw UsageError("unknown schedule: " + a.schedule);
  const auto cs = parse_list<unsigned>(a.clients, "clients");
  const auto Ls = parse_list<unsigned>(a.heights, "heights");
  const auto seed = a.common.seed_list().front();
  auto make = [&](unsigned L, unsigned c) {
    SimConfig cfg;
    cfg.geom = TreeGeometry{L, a.Z, a.block_size};
    cfg.n = a.n;
    cfg.t = a.t;
    cfg.clients = c;
    cfg.c_max = std::max(10u, c);
    cfg.policy = *p;
    cfg.accesses = a.accesses_per_client * c;
    cfg.seed = seed;
    cfg.record_metrics = true;
    cfg.validate();
    return cfg;
  };
  std::vector<SimConfig> configs;
  for (unsigned c : cs) configs.push_back(make(a.L, c));
  for (unsigned L : Ls) configs.push_back(make(L, a.sweep_clients));
  const auto dir = a.common.dir();
  const auto results = run_simulations(configs);

  std::vector<double> ps_mean;
  std::vector<std::set<std::size_t>> pm_req;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& cfg = configs[i];
    std::map<OpKind, std::pair<double, double>> sums;
    std::map<OpKind, std::size_t> counts;
    std::set<std::size_t> req;
    for (const auto& m : results[i].metrics) {
      sums[m.op].first += static_cast<double>(m.req_bytes);
      sums[m.op].second += static_cast<double>(m.resp_bytes);
      ++counts[m.op];
      if (m.op == OpKind::kGetPm) req.insert(m.req_bytes);
    }
    std::printf("L=%u c=%u", cfg.geom.height, cfg.clients);
    for (auto op : {OpKind::kGetPm, OpKind::kGetPs, OpKind::kEvict}) {
      const double k = counts[op] ? static_cast<double>(counts[op]) : 1.0;
      std::printf(" %s_req=%.1f %s_resp=%.1f", op_name(op), sums[op].first / k, op_name(op),
                  sums[op].second / k);
    }
    std::printf("\n");
    if (i < cs.size()) {
      ps_mean.push_back(sums[OpKind::kGetPs].second / std::max<double>(1, counts[OpKind::kGetPs]));
    } else {
      pm_req.push_back(req);
    }
    const std::string meta = metadata_line("bench", cfg.describe() + " " + a.common.echo());
    auto out = open_out(dir / ("bench_L" + std::to_string(cfg.geom.height) + "_c" +
                               std::to_string(cfg.clients) + ".csv"));
    write_metrics_csv(out, results[i].metrics, meta);
  }
  bool increasing = true;
  for (std::size_t i = 0; i + 1 < ps_mean.size(); ++i) {
    if (cs[i] < cs[i + 1] && !(ps_mean[i] < ps_mean[i + 1])) increasing = false;
  }
  bool flat = true;
  for (const auto& s : pm_req) flat = flat && s == pm_req.front();
  std::printf("getPS reply bytes increase with c: %s; getPM request bytes independent of N: %s\n",
              increasing ? "yes" : "no", flat ? "yes" : "no");
  return increasing && flat ? kPass : kViolation;
}

// --------------------------------------------------------------------- check

struct CheckArgs {
  Common common;
  std::string history;

  void add(CLI::App* s) {
    common.add(s);
    s->add_option("--history", history, "History CSV to verify")->required();
  }
};

int cmd_check(const CheckArgs& a) {
  std::ifstream in(a.history);
  if (!in) throw UsageError("cannot read " + a.history);
  Metadata meta;
  AccessHistory h;
  try {
    h = read_history_csv(in, &meta);
  } catch (const MalformedHistory& e) {
    throw UsageError(std::string("malformed history: ") + e.what());
  }
  std::string initial;
  if (meta.count("initial_value")) {
    initial = meta["initial_value"];
  } else {
    const std::size_t bs = meta.count("block_size") ? std::stoul(meta["block_size"]) : 8;
    initial = value_digest(Bytes(bs, 0));
  }
  Verdict v;
  try {
    v = check_history(h, initial);
  } catch (const MalformedHistory& e) {
    throw UsageError(std::string("malformed history: ") + e.what());
  }
  std::ostringstream line;
  line << "history=" << a.history << " verdict=" << (v.legal ? "legal" : "illegal")
       << " operations=" << v.operations << " dropped_incomplete=" << v.dropped_incomplete;
  if (!v.legal) line << " witness=\"" << v.witness << "\"";
  std::cout << line.str() << "\n";
  auto out = open_out(a.common.dir() / "check.txt");
  out << "# " << metadata_line("check", "history=" + a.history + " " + a.common.echo()) << "\n"
      << line.str() << "\n";
  return v.legal ? kPass : kViolation;
}

const std::set<std::string> kSubcommands = {"simulate", "stash", "tvd", "bench", "check"};

// Splices `--key=value` arguments from a --config file right after the
// subcommand; later command-line flags override them.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  if (args.size() < 2 || !kSubcommands.count(args[1])) return args;
  std::string path;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  auto extra = config_arguments(read_config_file(path));
  for (const auto& e : extra) {
    if (e.rfind("--config=", 0) == 0) throw UsageError("config files cannot include other config files");
  }
  args.insert(args.begin() + 2, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MVP-ORAM experiment runner"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  SimulateArgs sim;
  StashArgs stash;
  TvdArgs tvd;
  BenchArgs bench;
  CheckArgs check;
  sim.add(app.add_subcommand("simulate", "Run the replicated protocol and check the history"));
  stash.add(app.add_subcommand("stash", "Stash size over time"));
  tvd.add(app.add_subcommand("tvd", "Statistical distance grids"));
  bench.add(app.add_subcommand("bench", "Bytes per operation"));
  check.add(app.add_subcommand("check", "Re-verify a saved history CSV"));

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    args.pop_back();  // program name
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "simulate") return cmd_simulate(sim);
    if (name == "stash") return cmd_stash(stash);
    if (name == "tvd") return cmd_tvd(tvd);
    if (name == "bench") return cmd_bench(bench);
    return cmd_check(check);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kViolation;
  }
}
