#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvp/client.hpp"
#include "mvp/error.hpp"

namespace mvp {

enum class EventKind : std::uint8_t { kInv, kRep };

/// One invocation or reply. `pos` is the log position of the getPM (inv) or
/// evict (rep) of the access's real round.
struct HistoryEvent {
  EventKind kind = EventKind::kInv;
  ClientId client = 0;
  OpType op = OpType::kRead;
  std::optional<Address> addr;
  std::optional<std::string> value;  // hex digest; write inv, rep
  std::uint64_t pos = 0;
};

struct AccessHistory {
  std::vector<HistoryEvent> events;
};

/// 16 hex characters of BLAKE2b over the payload.
std::string value_digest(const Bytes& value);

class MalformedHistory : public Error {
 public:
  using Error::Error;
};

using Metadata = std::map<std::string, std::string>;

/// First line "# key=value ..." then the column header, then one row per event.
void write_history_csv(std::ostream& out, const AccessHistory& h, const std::string& metadata_line);
/// Throws MalformedHistory.
AccessHistory read_history_csv(std::istream& in, Metadata* metadata = nullptr);

struct Verdict {
  bool legal = true;
  std::size_t operations = 0;
  std::size_t dropped_incomplete = 0;
  std::string witness;  // description of the first violation
};

/// Every read must return the write with the greatest getPM position among
/// writes to the same address whose evict precedes the read's getPM (the
/// initial value if there is none). A sequential witness that respects
/// real-time order is then built and checked. Incomplete accesses (no reply)
/// are ignored. Throws MalformedHistory for histories that are not well formed.
Verdict check_history(const AccessHistory& h, const std::string& initial_value_digest);

}  // namespace mvp
