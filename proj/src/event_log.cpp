#include "roomforge/event_log.hpp"

#include <filesystem>
#include <cstdio>

#include <zlib.h>

#include "roomforge/error.hpp"

namespace roomforge::evalproto {

std::string event_checksum(const Event& event) {
  const std::string body = dump_canonical(Json{{"kind", event.kind}, {"payload", event.payload}, {"seq", event.seq}});
  const uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08x", static_cast<unsigned>(crc));
  return hex;
}

std::string encode_event(const Event& event) {
  return dump_canonical(
      Json{{"seq", event.seq}, {"kind", event.kind}, {"payload", event.payload}, {"checksum", event_checksum(event)}});
}

Event decode_event(std::string_view line) {
  const Json doc = parse_json_strict(line, "event");
  Event e;
  std::string checksum;
  try {
    e.seq = doc.at("seq").get<std::uint64_t>();
    e.kind = doc.at("kind").get<std::string>();
    e.payload = doc.at("payload");
    checksum = doc.at("checksum").get<std::string>();
  } catch (const Json::exception& ex) {
    throw InputError(std::string("event: ") + ex.what());
  }
  if (checksum != event_checksum(e)) throw InputError("event " + std::to_string(e.seq) + ": checksum mismatch");
  return e;
}

LogContents parse_log(std::string_view text) {
  LogContents out;
  std::size_t pos = 0;
  std::size_t line_number = 0;
  while (pos < text.size()) {
    ++line_number;
    const std::size_t nl = text.find('\n', pos);
    const bool terminated = nl != std::string_view::npos;
    const std::string_view line = text.substr(pos, terminated ? nl - pos : std::string_view::npos);
    const std::size_t next = terminated ? nl + 1 : text.size();
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      pos = next;
      if (terminated) out.valid_bytes = pos;
      continue;
    }
    Event e;
    try {
      e = decode_event(line);
    } catch (const InputError& err) {
      if (!terminated) {
        out.torn_tail = true;
        break;
      }
      throw InputError("event log line " + std::to_string(line_number) + ": " + err.what());
    }
    if (e.seq != out.events.size() + 1) {
      throw InputError("event log line " + std::to_string(line_number) + ": expected seq " +
                       std::to_string(out.events.size() + 1) + ", found " + std::to_string(e.seq));
    }
    out.events.push_back(std::move(e));
    pos = next;
    // An unterminated but valid last line is kept; the appender adds the newline.
    out.valid_bytes = pos;
  }
  return out;
}

EventLog::EventLog(std::string path) : path_(std::move(path)) {
  if (path_.empty()) return;
  std::size_t keep = 0;
  bool needs_newline = false;
  if (std::filesystem::exists(path_)) {
    const std::string text = read_file(path_);
    LogContents contents = parse_log(text);
    recovered_ = std::move(contents.events);
    torn_tail_ = contents.torn_tail;
    keep = contents.valid_bytes;
    needs_newline = keep > 0 && text[keep - 1] != '\n';
    if (keep != text.size()) std::filesystem::resize_file(path_, keep);
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw InputError("cannot open event log " + path_ + " for appending");
  if (needs_newline) out_ << '\n' << std::flush;
  events_ = recovered_;
  next_seq_ = recovered_.size() + 1;
}

std::uint64_t EventLog::append(std::string kind, Json payload) {
  std::lock_guard lock(mutex_);
  Event e{next_seq_, std::move(kind), std::move(payload)};
  if (out_.is_open()) {
    out_ << encode_event(e) << '\n';
    out_.flush();
    if (!out_) throw Error("failed to write event log " + path_);
  }
  events_.push_back(std::move(e));
  return next_seq_++;
}

std::vector<Event> EventLog::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

}  // namespace roomforge::evalproto
