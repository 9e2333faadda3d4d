#include "roomforge/event_log.hpp"

#include <gtest/gtest.h>

#include <thread>
#include <zlib.h>

#include "roomforge/error.hpp"
#include "test_support.hpp"

namespace roomforge::evalproto {
namespace {

TEST(EventCodec, ChecksumIsCrcOfCanonicalBody) {
  const Event e{3, "judgment", {{"b", 1}, {"a", "x"}}};
  const std::string body = R"({"kind":"judgment","payload":{"a":"x","b":1},"seq":3})";
  char expected[9];
  std::snprintf(expected, sizeof expected, "%08lx",
                crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
  EXPECT_EQ(event_checksum(e), expected);
  EXPECT_EQ(decode_event(encode_event(e)), e);
}

TEST(EventCodec, DetectsTampering) {
  std::string line = encode_event({1, "session_closed", {{"session_id", "s1"}}});
  line.replace(line.find("s1"), 2, "s2");
  EXPECT_THROW(decode_event(line), InputError);
  EXPECT_THROW(decode_event("not json"), InputError);
}

TEST(ParseLog, TornTailIsDropped) {
  const std::string a = encode_event({1, "k", {{"v", 1}}}) + "\n";
  const std::string b = encode_event({2, "k", {{"v", 2}}}) + "\n";
  const std::string torn = b.substr(0, b.size() / 2);
  const LogContents c = parse_log(a + torn);
  EXPECT_EQ(c.events.size(), 1u);
  EXPECT_TRUE(c.torn_tail);
  EXPECT_EQ(c.valid_bytes, a.size());

  const LogContents whole = parse_log(a + b);
  EXPECT_EQ(whole.events.size(), 2u);
  EXPECT_FALSE(whole.torn_tail);
}

TEST(ParseLog, MidLogCorruptionAndGapsAreErrors) {
  const std::string a = encode_event({1, "k", {{"v", 1}}}) + "\n";
  const std::string c = encode_event({3, "k", {{"v", 3}}}) + "\n";
  EXPECT_THROW(parse_log(a + c), InputError);
  EXPECT_THROW(parse_log(a + "garbage\n" + a), InputError);
}

TEST(EventLogFile, AppendsRecoverAndTruncatesTornTail) {
  rftest::TempDir dir;
  const std::string path = dir.file("events.jsonl");
  {
    EventLog log(path);
    EXPECT_TRUE(log.recovered().empty());
    EXPECT_EQ(log.append("a", {{"n", 1}}), 1u);
    EXPECT_EQ(log.append("b", {{"n", 2}}), 2u);
  }
  {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << R"({"seq":3,"kind":"c","pay)";
  }
  {
    EventLog log(path);
    EXPECT_TRUE(log.recovered_torn_tail());
    ASSERT_EQ(log.recovered().size(), 2u);
    EXPECT_EQ(log.recovered()[1].kind, "b");
    EXPECT_EQ(log.append("c", {{"n", 3}}), 3u);
  }
  const LogContents c = parse_log(read_file(path));
  EXPECT_FALSE(c.torn_tail);
  ASSERT_EQ(c.events.size(), 3u);
  EXPECT_EQ(c.events[2].payload.at("n"), 3);
}

TEST(EventLogFile, ConcurrentAppendsKeepDenseSequence) {
  rftest::TempDir dir;
  const std::string path = dir.file("events.jsonl");
  {
    EventLog log(path);
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&log, t] {
        for (int i = 0; i < 50; ++i) log.append("t", {{"thread", t}, {"i", i}});
      });
    }
    for (auto& th : threads) th.join();
    EXPECT_EQ(log.events().size(), 400u);
  }
  const LogContents c = parse_log(read_file(path));
  ASSERT_EQ(c.events.size(), 400u);
  for (std::size_t i = 0; i < c.events.size(); ++i) EXPECT_EQ(c.events[i].seq, i + 1);
}

TEST(EventLogFile, MemoryOnly) {
  EventLog log;
  log.append("x", Json::object());
  EXPECT_EQ(log.events().size(), 1u);
  EXPECT_TRUE(log.path().empty());
}

}  // namespace
}  // namespace roomforge::evalproto
