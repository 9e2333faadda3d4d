// Acceptance suite: one PASS/FAIL line per criterion, each with its pinned
// tolerance and runtime budget. Exit status is the number of failures.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "roomforge/bucketing.hpp"
#include "roomforge/captioning.hpp"
#include "roomforge/curation.hpp"
#include "roomforge/event_log.hpp"
#include "roomforge/fusion.hpp"
#include "roomforge/gate.hpp"
#include "roomforge/gsb.hpp"
#include "roomforge/gsb_service.hpp"
#include "roomforge/metrics.hpp"
#include "roomforge/quality_filter.hpp"
#include "test_support.hpp"

namespace {

using namespace roomforge;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

// ---- dual gate -------------------------------------------------------------

metrics::MetricReport table_fixture(const std::string& name) {
  const std::string path = rftest::source_path("tests/fixtures/published/" + name + ".json");
  return metrics::MetricReport::from_json(parse_json_strict(read_file(path), path));
}

Outcome dual_gate_published() {
  Outcome o;
  const auto room = table_fixture("room");
  for (const char* base : {"sd", "epicrealism", "realistic_vision", "sdxl", "sdxl_refiner"}) {
    const auto g = evalproto::dual_gate(table_fixture(base), room);
    o.check(g.improved == 7 && g.total == 7 && g.pass, std::string("room vs ") + base + " improved " + std::to_string(g.improved));
  }
  const auto epic = evalproto::dual_gate(table_fixture("sd"), table_fixture("epicrealism"));
  o.check(epic.improved == 6 && epic.total == 7 && epic.pass, "epicrealism vs sd improved " + std::to_string(epic.improved));
  const auto same = evalproto::dual_gate(room, room);
  o.check(same.improved == 0 && !same.pass, "identical reports passed");
  if (o.pass) o.detail = "5 x 7/7 pass, 6/7 pass, 0/7 fail";
  return o;
}

// ---- FID --------------------------------------------------------------------

metrics::GaussianStats gaussian(std::vector<double> mean, std::vector<double> cov) {
  return {mean.size(), std::move(mean), std::move(cov)};
}

Outcome fid_numerics() {
  Outcome o;
  rftest::Draw d(20240);
  const auto spd = rftest::random_spd(d, 8);
  const auto g = gaussian(std::vector<double>(8, 0.25), spd);
  const double identity = metrics::frechet_distance(g, g);
  o.check(std::abs(identity) < 1e-9, "identity " + std::to_string(identity));
  const double one_d = metrics::frechet_distance(gaussian({0}, {1}), gaussian({1}, {1}));
  o.check(std::abs(one_d - 1.0) < 1e-9, "1-D " + std::to_string(one_d));
  const double diag = metrics::frechet_distance(gaussian({0, 0}, {1, 0, 0, 4}), gaussian({0, 0}, {4, 0, 0, 1}));
  o.check(std::abs(diag - 2.0) < 1e-9, "diagonal " + std::to_string(diag));
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> ma(8), mb(8);
    for (auto& v : ma) v = d.uniform(-1, 1);
    for (auto& v : mb) v = d.uniform(-1, 1);
    const auto ca = rftest::random_spd(d, 8), cb = rftest::random_spd(d, 8);
    const double got = metrics::frechet_distance(gaussian(ma, ca), gaussian(mb, cb));
    worst = std::max(worst, std::abs(got - rftest::fid_oracle(ma, ca, mb, cb)));
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "max |fid - newton_schulz| = %.2e over 100 SPD pairs", worst);
  o.check(worst < 1e-6, buf);
  if (o.pass) o.detail = buf;
  return o;
}

// ---- tokenizer ----------------------------------------------------------------

Outcome tokenizer_oracle() {
  Outcome o;
  const auto& vocab = rftest::clip_vocab();
  std::ifstream in(rftest::source_path("tests/data/clip_golden.jsonl"));
  std::string line;
  std::size_t rows = 0, mismatched = 0, oversized = 0, broken_spans = 0;
  while (std::getline(in, line)) {
    const Json row = Json::parse(line);
    const std::string text = row.at("text").get<std::string>();
    if (captioning::tokenize(vocab, text) != row.at("ids").get<std::vector<int>>()) ++mismatched;
    const auto plan = captioning::chunk_caption(vocab, text);
    std::string joined;
    for (const auto& c : plan.chunks) {
      if (c.ids.size() > captioning::kContextLength) ++oversized;
      joined += plan.normalized.substr(c.begin, c.end - c.begin);
    }
    if (joined != plan.normalized) ++broken_spans;
    ++rows;
  }
  o.check(rows == 1000, "golden rows " + std::to_string(rows));
  o.check(mismatched == 0, std::to_string(mismatched) + " mismatched token sequences");
  o.check(oversized == 0, std::to_string(oversized) + " chunks over 77 ids");
  o.check(broken_spans == 0, std::to_string(broken_spans) + " captions with broken spans");
  if (o.pass) o.detail = "1000 captions, 0 mismatches, all chunks <= 77, spans reconstruct";
  return o;
}

// ---- bucketing -----------------------------------------------------------------

int exhaustive_argmin(int w, int h, const bucketing::BucketPlan& plan) {
  const double la = std::log(static_cast<double>(w) / h);
  int best = -1;
  double best_d = 0;
  for (const auto& b : plan.buckets) {
    const double dist = std::abs(la - std::log(static_cast<double>(b.width) / b.height));
    const auto& cur = best < 0 ? b : plan.bucket(best);
    if (best < 0 || dist < best_d ||
        (dist == best_d && (b.area() > cur.area() || (b.area() == cur.area() && b.width < cur.width)))) {
      best = b.id;
      best_d = dist;
    }
  }
  return best;
}

Outcome bucketing_property() {
  Outcome o;
  rftest::Draw d(10000);
  std::size_t checked = 0;
  for (int p = 0; p < 20; ++p) {
    const int q = d.pick(std::vector<int>{8, 16, 32, 64});
    const int lo = q * d.between(4, 16);
    const int hi = lo + q * d.between(0, 16);
    const bucketing::BucketPlan plan =
        bucketing::generate_buckets({q, lo, hi, std::int64_t{lo} * lo + std::int64_t{q} * q * d.between(0, 400)});
    std::vector<bucketing::ImageDims> dims;
    for (int i = 0; i < 500; ++i) {
      const int w = d.between(1, 8192), h = d.between(1, 8192);
      dims.push_back({"img" + std::to_string(i), w, h});
      const auto a = bucketing::assign_bucket(w, h, plan);
      if (a.bucket_id != exhaustive_argmin(w, h, plan)) {
        o.check(false, "argmin mismatch at " + std::to_string(w) + "x" + std::to_string(h));
      }
      ++checked;
    }
    const auto assignments = bucketing::assign_buckets(dims, plan);
    const std::uint64_t seed = d.below(1u << 30);
    const std::size_t batch = d.between(1, 64);
    const auto schedule = bucketing::plan_epoch(assignments, plan, batch, seed);
    std::map<std::string, int> seen;
    for (const auto& it : schedule.iterations) {
      for (const auto& id : it.image_ids) ++seen[id];
    }
    bool once = seen.size() == dims.size();
    for (const auto& [id, n] : seen) once = once && n == 1;
    o.check(once, "schedule coverage broken for plan " + std::to_string(p));
    o.check(schedule.to_jsonl() == bucketing::plan_epoch(assignments, plan, batch, seed).to_jsonl(),
            "schedule not reproducible for plan " + std::to_string(p));
  }
  if (o.pass) o.detail = std::to_string(checked) + " dims over 20 plans match argmin; schedules cover once, reproducible";
  return o;
}

// ---- fusion --------------------------------------------------------------------

Outcome fusion_suite() {
  using namespace fusion;
  Outcome o;
  const std::string header = R"({"t":{"dtype":"F32","shape":[2],"data_offsets":[0,8]}})";
  std::vector<std::uint8_t> golden = {static_cast<std::uint8_t>(header.size()), 0, 0, 0, 0, 0, 0, 0};
  golden.insert(golden.end(), header.begin(), header.end());
  for (std::uint8_t b : {0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40}) golden.push_back(b);
  const TensorArchive parsed = read_tensor_archive(golden);
  o.check(parsed.tensors.size() == 1 && parsed.tensors.at("t").to_f32() == std::vector<float>{1.0f, 2.0f},
          "golden fixture content");

  rftest::Draw d(200);
  int identical = 0;
  for (int i = 0; i < 200; ++i) {
    TensorArchive a;
    for (int k = d.between(0, 5); k > 0; --k) {
      std::vector<float> v(d.between(0, 40));
      for (auto& x : v) x = static_cast<float>(d.uniform(-100, 100));
      Tensor t = Tensor::from_f32({static_cast<std::int64_t>(v.size())}, v);
      if (d.chance(0.3)) {
        t.dtype = DType::F16;
        t.data.clear();
        for (float x : v) {
          const auto h = float_to_half(x);
          t.data.push_back(static_cast<std::uint8_t>(h));
          t.data.push_back(static_cast<std::uint8_t>(h >> 8));
        }
      }
      a.tensors["k" + std::to_string(d.below(100000))] = t;
    }
    if (d.chance(0.5)) a.metadata["note"] = std::to_string(i);
    identical += read_tensor_archive(write_tensor_archive(a)) == a;
  }
  o.check(identical == 200, std::to_string(identical) + "/200 archives round-trip");

  TensorArchive x, y;
  x.tensors["w"] = Tensor::from_f32({2}, std::vector<float>{1, 2});
  y.tensors["w"] = Tensor::from_f32({2}, std::vector<float>{3, 4});
  const auto half = merge({{{"x", &x, 0.5}, {"y", &y, 0.5}}}).archive.tensors.at("w").to_f32();
  o.check(half == std::vector<float>{2, 3}, "0.5/0.5 merge not [2, 3]");

  std::vector<TensorArchive> three(3);
  for (auto& a : three) {
    std::vector<float> v(4096);
    for (auto& f : v) f = static_cast<float>(d.uniform(-1e3, 1e3));
    a.tensors["w"] = Tensor::from_f32({64, 64}, v);
  }
  const auto identity = merge({{{"a", &three[0], 1.0}, {"b", &three[1], 0.0}}}).archive;
  o.check(identity.tensors.at("w").data == three[0].tensors.at("w").data, "indicator weights not bitwise identity");

  const double w[] = {0.2, 0.3, 0.5};
  const auto mixed = merge({{{"a", &three[0], w[0]}, {"b", &three[1], w[1]}, {"c", &three[2], w[2]}}})
                         .archive.tensors.at("w")
                         .to_f32();
  double worst = 0;
  std::vector<std::vector<float>> src;
  for (const auto& a : three) src.push_back(a.tensors.at("w").to_f32());
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    double expected = 0;
    for (int j = 0; j < 3; ++j) expected += w[j] * src[j][i];
    worst = std::max(worst, std::abs(mixed[i] - expected) / std::max(1.0, std::abs(expected)));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max rel err %.2e", worst);
  o.check(worst <= 1e-6, buf);
  if (o.pass) o.detail = std::string("golden parses, 200/200 round-trip, [2,3] exact, identity bitwise, ") + buf;
  return o;
}

// ---- GSB -----------------------------------------------------------------------

Outcome gsb_protocol() {
  using namespace evalproto;
  Outcome o;
  using enum Choice;
  const std::vector<Choice> ggb = {good, good, bad}, gsb = {good, same, bad}, ggsb = {good, good, same, bad};
  o.check(aggregate_item("i", "d", ggb).outcome == good, "(good,good,bad) not good");
  o.check(!aggregate_item("i", "d", gsb).outcome, "(good,same,bad) not excluded");
  o.check(!aggregate_item("i", "d", ggsb).outcome, "(good,good,same,bad) not excluded");

  // 250 items judged unanimously: 140 good, 60 bad, 50 same.
  std::vector<PromptPair> prompts;
  for (int i = 0; i < 250; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "p%03d", i);
    prompts.push_back({id, "prompt", std::string(id) + "a", std::string(id) + "b"});
  }
  SessionConfig config;
  config.dimensions = {"aesthetic"};
  config.roster = {"e0", "e1", "e2"};
  config.seed = 70;
  SessionState state(create_session("w", prompts, config));
  for (const Assignment& a : state.assignments()) {
    const Choice want = a.item_index < 140 ? good : a.item_index < 200 ? bad : same;
    const RawChoice raw = want == same ? RawChoice::same
                          : (want == good) == (a.side == Side::a_left) ? RawChoice::left
                                                                        : RawChoice::right;
    record_judgment(state, a.evaluator, a.item_id, a.dimension, raw, 0);
  }
  const auto summary = state.summarize();
  const auto& dim = summary.dimensions.at(0);
  o.check(dim.good == 140 && dim.bad == 60 && dim.same == 50 && dim.win_rate == 0.7, "win rate not exactly 0.700");

  // Randomized traffic into a live store, then replay.
  GsbStore live;
  rftest::Draw d(1000);
  std::vector<std::string> sessions;
  std::size_t appended = 0;
  while (appended < 1000) {
    const auto roll = d.below(100);
    if (sessions.empty() || roll < 2) {
      SessionConfig c;
      c.dimensions = {"aesthetic", "layout"};
      for (int e = d.between(3, 6); e > 0; --e) c.roster.push_back("e" + std::to_string(e));
      c.seed = d.below(1000);
      std::vector<PromptPair> p(prompts.begin(), prompts.begin() + d.between(2, 12));
      sessions.push_back(live.create_session(create_session("", p, c)));
      ++appended;
      continue;
    }
    const std::string sid = d.pick(sessions);
    try {
      if (roll < 3) {
        live.close(sid);
        ++appended;
      } else {
        const Json info = live.session_info(sid);
        const std::string e = d.pick(info.at("roster").get<std::vector<std::string>>());
        const std::string dm = d.chance(0.5) ? "aesthetic" : "layout";
        const Json q = live.queue(sid, e, dm);
        const std::string item = q.at("done").get<bool>() || d.chance(0.1)
                                     ? prompts[d.below(info.at("items").get<std::size_t>())].prompt_id
                                     : q.at("item_id").get<std::string>();
        live.submit(sid, e, item, dm, std::vector<RawChoice>{RawChoice::left, RawChoice::right, RawChoice::same}[d.below(3)],
                    static_cast<std::int64_t>(appended));
        ++appended;
      }
    } catch (const GsbError&) {
    }
  }
  const auto events = live.events();
  o.check(events.size() == 1000, "log holds " + std::to_string(events.size()) + " events");
  o.check(GsbStore::replay(events)->snapshot() == live.snapshot(), "replay diverged from live state");

  // Blinding flip: mirrored presentation plus mirrored click gives the same judgment.
  bool symmetric = true;
  for (int i = 0; i < 10000; ++i) {
    const Side side = presented_side(d.below(1u << 30), "i" + std::to_string(d.below(5000)), "e" + std::to_string(d.below(50)));
    const Side flipped = side == Side::a_left ? Side::a_right : Side::a_left;
    const RawChoice raw = std::vector<RawChoice>{RawChoice::left, RawChoice::right, RawChoice::same}[d.below(3)];
    const RawChoice mirrored = raw == RawChoice::left ? RawChoice::right : raw == RawChoice::right ? RawChoice::left : raw;
    symmetric = symmetric && unblind(side, raw) == unblind(flipped, mirrored);
  }
  o.check(symmetric, "blinding flip asymmetry");
  if (o.pass) o.detail = "majority cases, 140/60/50 -> 0.7 exact, 1000-event replay identical, flip symmetric";
  return o;
}

// ---- curation ------------------------------------------------------------------

Outcome curation_suite() {
  using namespace curation;
  Outcome o;
  rftest::Draw d(1000);
  std::vector<RatedImage> rated;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t count = d.between(1, 5);
    double sum = 0;
    for (std::size_t k = 0; k < count; ++k) sum += d.between(1, 5);
    rated.push_back({"img" + std::to_string(d.below(1u << 30)) + "_" + std::to_string(i), count, sum / count, false});
  }
  std::vector<RatedImage> sorted = rated;
  std::sort(sorted.begin(), sorted.end(), [](const RatedImage& a, const RatedImage& b) {
    if (a.mean != b.mean) return a.mean > b.mean;
    if (a.count != b.count) return a.count > b.count;
    return a.image_id < b.image_id;
  });
  std::vector<std::string> expected;
  for (std::size_t i = 0; i < 100; ++i) expected.push_back(sorted[i].image_id);
  o.check(select_top_fraction(rated, 0.10) == expected, "top 10% differs from sort-and-slice");

  int configs = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const ManifestParse manifest =
        parse_manifest(rftest::synthetic_manifest(120, 500 + trial), LabelSchema::default_schema());
    std::vector<RatingBallot> ballots;
    for (const auto& r : manifest.records) {
      if (d.chance(0.5)) continue;
      for (int k = d.between(1, 4); k > 0; --k) ballots.push_back({r.id, "r" + std::to_string(k), d.between(1, 5)});
    }
    LayerConfig config;
    config.fraction = d.uniform(0.01, 1.0);
    config.premium_cap = d.between(1, 40);
    if (d.chance(0.5)) config.curated_cap = d.between(0, 60);
    const auto layers = build_layers(manifest, quality::default_rules(), quality::strict_rules(),
                                     aggregate_ratings(ballots), config);
    const std::set<std::string> screen(layers.screen.begin(), layers.screen.end());
    const std::set<std::string> curated(layers.curated.begin(), layers.curated.end());
    bool nested = true;
    for (const auto& id : layers.curated) nested = nested && screen.contains(id);
    for (const auto& id : layers.premium) nested = nested && curated.contains(id);
    o.check(nested, "tier nesting broken in trial " + std::to_string(trial));
    ++configs;
  }
  if (o.pass) o.detail = "top fraction equals oracle on 1000 ratings; nesting holds over " + std::to_string(configs) + " configs";
  return o;
}

// ---- end to end ----------------------------------------------------------------

// Runs the whole data path and writes each stage's output under `dir`.
std::map<std::string, std::string> end_to_end_run(const rftest::TempDir& dir, int threads) {
  omp_set_num_threads(threads);
  const std::string manifest_text = rftest::synthetic_manifest(500, 777);
  const auto& schema = LabelSchema::default_schema();
  const auto filtered = quality::filter_manifest(manifest_text, quality::default_rules(), schema);

  const auto plan = bucketing::generate_buckets({});
  std::vector<bucketing::ImageDims> dims;
  for (const auto& r : filtered.kept) dims.push_back({r.id, r.width, r.height});
  const auto schedule = bucketing::plan_epoch(bucketing::assign_buckets(dims, plan), plan, 16, 777);

  std::string chunks;
  for (const auto& r : filtered.kept) {
    const auto c = captioning::chunk_caption(rftest::clip_vocab(), captioning::compose_caption(r.caption));
    chunks += Json{{"image_id", r.id}, {"plan", c.to_json()}}.dump() + "\n";
  }

  const ManifestParse manifest = parse_manifest(manifest_text, schema);
  rftest::Draw d(777);
  std::vector<curation::RatingBallot> ballots;
  for (const auto& r : manifest.records) {
    for (int k = 0; k < 3; ++k) ballots.push_back({r.id, "designer" + std::to_string(k), d.between(1, 5)});
  }
  const auto layers = curation::build_layers(manifest, quality::default_rules(), quality::strict_rules(),
                                             curation::aggregate_ratings(ballots), {});

  std::map<std::string, std::string> files = {{"kept.jsonl", filtered.kept_jsonl()},
                                              {"report.json", filtered.report.to_json().dump()},
                                              {"schedule.jsonl", schedule.to_jsonl()},
                                              {"chunks.jsonl", chunks},
                                              {"tiers.jsonl", layers.to_jsonl()}};
  std::map<std::string, std::string> on_disk;
  for (const auto& [name, content] : files) {
    const std::string path = dir.file(name);
    write_file(path, content);
    on_disk[name] = read_file(path);
  }
  return on_disk;
}

Outcome end_to_end() {
  Outcome o;
  const int saved = omp_get_max_threads();
  rftest::TempDir first, second;
  const auto a = end_to_end_run(first, saved);
  const auto b = end_to_end_run(second, std::max(1, saved / 2 + 1));
  omp_set_num_threads(saved);
  for (const auto& [name, content] : a) {
    o.check(!content.empty(), name + " is empty");
    o.check(content == b.at(name), name + " differs between runs");
  }
  const auto kept = split_lines(a.at("kept.jsonl")).size();
  std::size_t scheduled = 0;
  for (const auto& line : split_lines(a.at("schedule.jsonl"))) scheduled += Json::parse(line.text).at("image_ids").size();
  o.check(scheduled == kept, "schedule covers " + std::to_string(scheduled) + " of " + std::to_string(kept));
  if (o.pass) {
    o.detail = "500 images -> " + std::to_string(kept) + " kept, " +
               std::to_string(split_lines(a.at("schedule.jsonl")).size()) + " iterations; 5 outputs byte-identical";
  }
  return o;
}

struct Criterion {
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"dual_gate_published", 1.0, dual_gate_published},
      {"fid_numerics", 5.0, fid_numerics},
      {"tokenizer_oracle", 10.0, tokenizer_oracle},
      {"bucketing_property", 10.0, bucketing_property},
      {"fusion_format_and_merge", 10.0, fusion_suite},
      {"gsb_protocol", 5.0, gsb_protocol},
      {"curation_selection_and_tiers", 5.0, curation_suite},
      {"end_to_end_determinism", 30.0, end_to_end},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > c.budget_seconds) outcome.check(false, "over runtime budget");
    failures += !outcome.pass;
    std::printf("%s %-30s %8.3fs / %4.0fs  %s\n", outcome.pass ? "PASS" : "FAIL", c.name, seconds, c.budget_seconds,
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
