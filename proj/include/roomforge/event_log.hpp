#pragma once

#include <cstdint>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "roomforge/json_util.hpp"

namespace roomforge::evalproto {

/// One line of the append-only log: {"seq", "kind", "payload", "checksum"}.
/// The checksum is the CRC-32 of the compact JSON of {"kind", "payload",
/// "seq"}, written as 8 lowercase hex digits. Sequence numbers start at 1.
struct Event {
  std::uint64_t seq = 0;
  std::string kind;
  Json payload;

  bool operator==(const Event&) const = default;
};

std::string event_checksum(const Event& event);
std::string encode_event(const Event& event);
/// Throws InputError on malformed JSON or a checksum mismatch.
Event decode_event(std::string_view line);

struct LogContents {
  std::vector<Event> events;
  std::size_t valid_bytes = 0;  // prefix holding complete, verified lines
  bool torn_tail = false;       // an unterminated last line was discarded
};

/// Parses a whole log. A final line with no newline that fails to decode is
/// treated as a torn write and dropped; any other bad line, or a gap in the
/// sequence, throws InputError naming the line.
LogContents parse_log(std::string_view text);

/// Thread-safe appender. With an empty path events are kept in memory only.
class EventLog {
 public:
  explicit EventLog(std::string path = {});

  /// Events already in the file (after dropping a torn tail), in order.
  const std::vector<Event>& recovered() const { return recovered_; }
  bool recovered_torn_tail() const { return torn_tail_; }

  /// Writes and flushes the event before returning its sequence number.
  std::uint64_t append(std::string kind, Json payload);
  std::vector<Event> events() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  mutable std::mutex mutex_;
  std::vector<Event> recovered_;
  std::vector<Event> events_;
  std::uint64_t next_seq_ = 1;
  bool torn_tail_ = false;
};

}  // namespace roomforge::evalproto
