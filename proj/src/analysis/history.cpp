#include "mvp/history.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "mvp/crypto.hpp"

namespace mvp {
namespace {

const char* kBottom = "\xE2\x8A\xA5";  // ⊥

struct Operation {
  ClientId client;
  OpType op;
  Address addr;
  std::string value;
  std::uint64_t pm;
  std::uint64_t ev;
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw MalformedHistory(std::string("bad ") + what + ": '" + s + "'");
  }
}

std::string describe(const Operation& o) {
  std::ostringstream s;
  s << (o.op == OpType::kWrite ? "write" : "read") << "(client " << o.client << ", addr " << o.addr
    << ", value " << o.value << ", [" << o.pm << ", " << o.ev << "])";
  return s.str();
}

}  // namespace

std::string value_digest(const Bytes& value) { return hex_digest(digest_of(value), 8); }

void write_history_csv(std::ostream& out, const AccessHistory& h, const std::string& metadata_line) {
  out << "# " << metadata_line << "\n";
  out << "event_idx,kind,client,op,addr_or_\xE2\x8A\xA5,value_digest,seq\n";
  std::size_t idx = 0;
  for (const auto& e : h.events) {
    out << idx++ << ',' << (e.kind == EventKind::kInv ? "inv" : "rep") << ',' << e.client << ','
        << (e.op == OpType::kWrite ? "write" : "read") << ',';
    if (e.addr) {
      out << *e.addr;
    } else {
      out << kBottom;
    }
    out << ',' << (e.value ? *e.value : std::string(kBottom)) << ',' << e.pos << '\n';
  }
}

AccessHistory read_history_csv(std::istream& in, Metadata* metadata) {
  AccessHistory h;
  std::string line;
  bool header = false;
  std::uint64_t expected_idx = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (metadata) {
        std::istringstream words(line.substr(1));
        std::string w;
        while (words >> w) {
          const auto eq = w.find('=');
          if (eq != std::string::npos) (*metadata)[w.substr(0, eq)] = w.substr(eq + 1);
        }
      }
      continue;
    }
    if (!header) {
      if (line.rfind("event_idx,", 0) != 0) throw MalformedHistory("missing column header");
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 7) throw MalformedHistory("expected 7 fields: " + line);
    if (parse_u64(f[0], "event index") != expected_idx++) throw MalformedHistory("event indices out of order");
    HistoryEvent e;
    if (f[1] == "inv") {
      e.kind = EventKind::kInv;
    } else if (f[1] == "rep") {
      e.kind = EventKind::kRep;
    } else {
      throw MalformedHistory("bad event kind: " + f[1]);
    }
    e.client = static_cast<ClientId>(parse_u64(f[2], "client"));
    if (f[3] == "read") {
      e.op = OpType::kRead;
    } else if (f[3] == "write") {
      e.op = OpType::kWrite;
    } else {
      throw MalformedHistory("bad op: " + f[3]);
    }
    if (f[4] != kBottom) e.addr = static_cast<Address>(parse_u64(f[4], "address"));
    if (f[5] != kBottom) e.value = f[5];
    e.pos = parse_u64(f[6], "seq");
    h.events.push_back(std::move(e));
  }
  if (!header) throw MalformedHistory("empty history file");
  return h;
}

Verdict check_history(const AccessHistory& h, const std::string& initial) {
  Verdict v;
  std::vector<Operation> ops;
  std::unordered_map<ClientId, HistoryEvent> open;
  std::uint64_t last_pos = 0;
  bool first = true;
  for (const auto& e : h.events) {
    if (!first && e.pos <= last_pos) throw MalformedHistory("positions must strictly increase");
    first = false;
    last_pos = e.pos;
    auto it = open.find(e.client);
    if (e.kind == EventKind::kInv) {
      if (it != open.end()) throw MalformedHistory("client invoked twice without a reply");
      if (!e.addr) throw MalformedHistory("invocation without an address");
      if (e.op == OpType::kWrite && !e.value) throw MalformedHistory("write without a value");
      open.emplace(e.client, e);
    } else {
      if (it == open.end()) throw MalformedHistory("reply without an invocation");
      const auto& inv = it->second;
      if (inv.op != e.op) throw MalformedHistory("reply op differs from its invocation");
      if (e.addr && *e.addr != *inv.addr) throw MalformedHistory("reply address differs from its invocation");
      if (!e.value) throw MalformedHistory("reply without a value");
      if (e.op == OpType::kWrite && *e.value != *inv.value) {
        throw MalformedHistory("write reply value differs from the written value");
      }
      ops.push_back({e.client, e.op, *inv.addr, *e.value, inv.pos, e.pos});
      open.erase(it);
    }
  }
  v.dropped_incomplete = open.size();
  v.operations = ops.size();

  // Per address: writes by getPM position, reads resolved by the seq rule.
  std::map<Address, std::vector<std::size_t>> writes, reads;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    (ops[i].op == OpType::kWrite ? writes : reads)[ops[i].addr].push_back(i);
  }
  std::vector<long> source(ops.size(), -1);  // index into writes[addr], -1 = initial
  for (auto& [addr, rs] : reads) {
    auto& ws = writes[addr];
    std::sort(ws.begin(), ws.end(), [&](auto a, auto b) { return ops[a].pm < ops[b].pm; });
    std::vector<std::size_t> by_ev(ws.size());
    for (std::size_t k = 0; k < ws.size(); ++k) by_ev[k] = k;
    std::sort(by_ev.begin(), by_ev.end(), [&](auto a, auto b) { return ops[ws[a]].ev < ops[ws[b]].ev; });
    std::sort(rs.begin(), rs.end(), [&](auto a, auto b) { return ops[a].pm < ops[b].pm; });
    std::size_t next = 0;
    long best = -1;
    for (auto r : rs) {
      while (next < by_ev.size() && ops[ws[by_ev[next]]].ev < ops[r].pm) {
        best = std::max<long>(best, static_cast<long>(by_ev[next]));
        ++next;
      }
      const std::string& expected = best < 0 ? initial : ops[ws[best]].value;
      if (ops[r].value != expected) {
        v.legal = false;
        std::ostringstream s;
        s << describe(ops[r]) << " should return "
          << (best < 0 ? "the initial value " + initial : describe(ops[ws[best]]));
        v.witness = s.str();
        return v;
      }
      source[r] = best;
    }
  }
  for (auto& [addr, ws] : writes) {
    std::sort(ws.begin(), ws.end(), [&](auto a, auto b) { return ops[a].pm < ops[b].pm; });
  }

  // Witness: reads at their getPM position; each write after everything its
  // predecessor's readers and predecessors need.
  struct Key {
    std::uint64_t point;
    int kind;  // reads before writes at the same point
    std::uint64_t rank;
    std::size_t op;
  };
  std::vector<Key> keys;
  keys.reserve(ops.size());
  for (auto& [addr, ws] : writes) {
    std::vector<std::uint64_t> last_reader(ws.size() + 1, 0);
    std::vector<bool> has_reader(ws.size() + 1, false);
    for (auto r : reads[addr]) {
      const auto k = static_cast<std::size_t>(source[r] + 1);
      last_reader[k] = std::max(last_reader[k], ops[r].pm);
      has_reader[k] = true;
    }
    std::uint64_t running = 0;
    for (std::size_t k = 0; k < ws.size(); ++k) {
      std::uint64_t point = std::max(ops[ws[k]].pm, running);
      if (has_reader[k]) point = std::max(point, last_reader[k]);
      running = point;
      keys.push_back({point, 1, k, ws[k]});
    }
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (ops[i].op == OpType::kRead) keys.push_back({ops[i].pm, 0, 0, i});
  }
  std::sort(keys.begin(), keys.end(), [&](const Key& a, const Key& b) {
    if (a.point != b.point) return a.point < b.point;
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.op < b.op;
  });

  std::unordered_map<Address, std::string> current;
  for (const auto& k : keys) {
    const auto& o = ops[k.op];
    if (o.op == OpType::kWrite) {
      current[o.addr] = o.value;
      continue;
    }
    auto it = current.find(o.addr);
    const std::string& now = it == current.end() ? initial : it->second;
    if (now != o.value) {
      v.legal = false;
      v.witness = "no legal sequential order places " + describe(o);
      return v;
    }
  }
  std::uint64_t min_ev_after = std::numeric_limits<std::uint64_t>::max();
  std::size_t min_op = 0;
  for (auto k = keys.rbegin(); k != keys.rend(); ++k) {
    const auto& o = ops[k->op];
    if (min_ev_after < o.pm) {
      v.legal = false;
      v.witness = describe(ops[min_op]) + " finished before " + describe(o) +
                  " started but is ordered after it";
      return v;
    }
    if (o.ev < min_ev_after) {
      min_ev_after = o.ev;
      min_op = k->op;
    }
  }
  return v;
}

}  // namespace mvp
