// roomforge command-line entry point.
//
// Exit codes: 0 success, 1 validation or usage error, 2 unreadable or
// malformed input, 3 internal error. Logs go to stderr (level from
// ROOMFORGE_LOG); stdout carries the result summary, as JSON with --json.

#include <omp.h>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "roomforge/bucketing.hpp"
#include "roomforge/captioning.hpp"
#include "roomforge/curation.hpp"
#include "roomforge/error.hpp"
#include "roomforge/fusion.hpp"
#include "roomforge/gate.hpp"
#include "roomforge/gsb_service.hpp"
#include "roomforge/metrics.hpp"
#include "roomforge/quality_filter.hpp"

namespace {

using namespace roomforge;

struct Globals {
  bool json = false;
  int workers = 0;
};

void emit(const Globals& g, const Json& payload, const std::string& human) {
  if (g.json) {
    std::cout << payload.dump() << '\n';
  } else {
    std::cout << human << '\n';
  }
}

const LabelSchema& load_schema(const std::string& path, std::optional<LabelSchema>& storage) {
  if (path.empty()) return LabelSchema::default_schema();
  storage = LabelSchema::parse(read_file(path));
  return *storage;
}

quality::RuleSet load_rules(const std::string& path, const LabelSchema& schema, const quality::RuleSet& fallback) {
  if (path.empty()) return fallback;
  return quality::parse_rules(read_file(path), schema);
}

// ---- filter ---------------------------------------------------------------

struct FilterArgs {
  std::string rules, schema, in, out, report;
};

int run_filter(const Globals& g, const FilterArgs& a) {
  std::optional<LabelSchema> schema_storage;
  const LabelSchema& schema = load_schema(a.schema, schema_storage);
  const quality::RuleSet rules = load_rules(a.rules, schema, quality::default_rules());
  const quality::FilterResult result = quality::filter_manifest(read_file(a.in), rules, schema);
  for (const auto& m : result.report.malformed) spdlog::warn("line {}: {}", m.line_number, m.message);
  if (!a.out.empty()) write_file(a.out, result.kept_jsonl());
  const Json report = result.report.to_json();
  if (!a.report.empty()) write_file(a.report, report.dump(2) + "\n");
  emit(g, report,
       "kept " + std::to_string(result.report.kept) + ", dropped " + std::to_string(result.report.dropped) +
           ", malformed " + std::to_string(result.report.malformed.size()));
  return 0;
}

// ---- bucket ---------------------------------------------------------------

struct BucketPlanArgs {
  bucketing::BucketConstraints constraints;
  std::string out;
};

int run_bucket_plan(const Globals& g, const BucketPlanArgs& a) {
  const bucketing::BucketPlan plan = bucketing::generate_buckets(a.constraints);
  const Json doc = plan.to_json();
  if (!a.out.empty()) write_file(a.out, doc.dump(2) + "\n");
  emit(g, {{"buckets", plan.buckets.size()}, {"out", a.out}}, std::to_string(plan.buckets.size()) + " buckets");
  return 0;
}

struct ScheduleArgs {
  std::string plan, manifest, out;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  bool uniform = false;
};

int run_bucket_schedule(const Globals& g, const ScheduleArgs& a) {
  const bucketing::BucketPlan plan = bucketing::BucketPlan::from_json(parse_json_strict(read_file(a.plan), a.plan));
  const ManifestParse manifest = parse_manifest(read_file(a.manifest), LabelSchema::default_schema());
  for (const auto& m : manifest.malformed) spdlog::warn("line {}: {}", m.line_number, m.message);
  std::vector<bucketing::ImageDims> dims;
  for (const ImageRecord& r : manifest.records) dims.push_back({r.id, r.width, r.height});
  const auto assignments = bucketing::assign_buckets(dims, plan);
  const auto schedule = bucketing::plan_epoch(
      assignments, plan, a.batch, a.seed,
      a.uniform ? bucketing::BucketChoice::uniform : bucketing::BucketChoice::remaining_weighted);
  if (!a.out.empty()) write_file(a.out, schedule.to_jsonl());
  emit(g,
       {{"iterations", schedule.iterations.size()}, {"images", assignments.size()}, {"seed", a.seed},
        {"batch", a.batch}, {"malformed", manifest.malformed.size()}},
       std::to_string(schedule.iterations.size()) + " iterations over " + std::to_string(assignments.size()) +
           " images (seed " + std::to_string(a.seed) + ")");
  return 0;
}

// ---- caption --------------------------------------------------------------

struct CaptionArgs {
  std::string vocab, merges, in, out;
  std::size_t lookback = 20;
  bool hard_split = false;
};

std::string caption_of(const ImageRecord& r) {
  return r.caption_text ? *r.caption_text : captioning::compose_caption(r.caption);
}

int run_caption_compose(const Globals& g, const CaptionArgs& a) {
  const ManifestParse manifest = parse_manifest(read_file(a.in), LabelSchema::default_schema());
  for (const auto& m : manifest.malformed) spdlog::warn("line {}: {}", m.line_number, m.message);
  std::string out;
  for (const ImageRecord& r : manifest.records) {
    out += dump_canonical(Json{{"id", r.id}, {"caption", caption_of(r)}}) + "\n";
  }
  if (!a.out.empty()) write_file(a.out, out);
  emit(g, {{"captions", manifest.records.size()}, {"malformed", manifest.malformed.size()}},
       std::to_string(manifest.records.size()) + " captions");
  return 0;
}

int run_caption_chunk(const Globals& g, const CaptionArgs& a) {
  const auto vocab = captioning::BpeVocabulary::load_files(a.vocab, a.merges);
  const ManifestParse manifest = parse_manifest(read_file(a.in), LabelSchema::default_schema());
  for (const auto& m : manifest.malformed) spdlog::warn("line {}: {}", m.line_number, m.message);
  std::vector<std::string> lines(manifest.records.size());
  std::vector<std::string> errors(manifest.records.size());
  std::size_t chunks = 0;
  const auto n = static_cast<std::ptrdiff_t>(manifest.records.size());
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : chunks)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const ImageRecord& r = manifest.records[i];
    try {
      const auto plan = captioning::chunk_caption(vocab, caption_of(r), {a.lookback, a.hard_split});
      Json doc = plan.to_json();
      doc["id"] = r.id;
      lines[i] = dump_canonical(doc) + "\n";
      chunks += plan.chunks.size();
    } catch (const Error& e) {
      errors[i] = "record " + r.id + ": " + e.what();
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw InputError(e);
  }
  std::string out;
  for (const auto& line : lines) out += line;
  if (!a.out.empty()) write_file(a.out, out);
  emit(g, {{"captions", manifest.records.size()}, {"chunks", chunks}, {"malformed", manifest.malformed.size()}},
       std::to_string(manifest.records.size()) + " captions, " + std::to_string(chunks) + " chunks");
  return 0;
}

// ---- curate ---------------------------------------------------------------

struct CurateArgs {
  std::string manifest, rules, screen_rules, schema, ballots, out;
  double fraction = 0.10;
  std::size_t premium_cap = 5000;
  std::size_t min_ballots = 3;
  std::optional<std::size_t> curated_cap;
  bool no_premium = false;
};

int run_curate(const Globals& g, const CurateArgs& a) {
  std::optional<LabelSchema> schema_storage;
  const LabelSchema& schema = load_schema(a.schema, schema_storage);
  const quality::RuleSet screen = load_rules(a.screen_rules, schema, quality::default_rules());
  const quality::RuleSet strict = load_rules(a.rules, schema, quality::strict_rules());
  const ManifestParse manifest = parse_manifest(read_file(a.manifest), schema);
  for (const auto& m : manifest.malformed) spdlog::warn("line {}: {}", m.line_number, m.message);
  std::vector<curation::RatedImage> rated;
  if (!a.ballots.empty()) rated = curation::aggregate_ratings(curation::parse_ballots_jsonl(read_file(a.ballots)), a.min_ballots);

  curation::LayerConfig config;
  config.curated_cap = a.curated_cap;
  config.premium = !a.no_premium;
  config.fraction = a.fraction;
  config.premium_cap = a.premium_cap;
  const curation::LayeredDataset layers = curation::build_layers(manifest, screen, strict, rated, config);
  for (const auto& w : layers.warnings) spdlog::warn("{}", w);
  if (!a.out.empty()) write_file(a.out, layers.to_jsonl());
  emit(g, layers.summary(),
       "screen " + std::to_string(layers.screen.size()) + ", curated " + std::to_string(layers.curated.size()) +
           ", premium " + std::to_string(layers.premium.size()));
  return 0;
}

// ---- merge ----------------------------------------------------------------

struct MergeArgs {
  std::vector<std::string> inputs;
  std::string policy = "strict";
  bool allow_negative = false;
  std::string out;
};

int run_merge(const Globals& g, const MergeArgs& a) {
  std::vector<std::pair<std::string, double>> specs;
  for (const std::string& spec : a.inputs) {
    const auto colon = spec.rfind(':');
    if (colon == std::string::npos || colon == 0) throw ValidationError("--in expects PATH:WEIGHT, got \"" + spec + "\"");
    const std::string weight_text = spec.substr(colon + 1);
    std::size_t used = 0;
    double weight = 0.0;
    try {
      weight = std::stod(weight_text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != weight_text.size()) throw ValidationError("bad weight in \"" + spec + "\"");
    specs.emplace_back(spec.substr(0, colon), weight);
  }
  std::vector<fusion::TensorArchive> archives;
  archives.reserve(specs.size());
  for (const auto& [path, weight] : specs) archives.push_back(fusion::read_tensor_archive_file(path));

  fusion::MergeRecipe recipe;
  recipe.policy = fusion::parse_key_policy(a.policy);
  recipe.allow_negative = a.allow_negative;
  for (std::size_t i = 0; i < specs.size(); ++i) recipe.inputs.push_back({specs[i].first, &archives[i], specs[i].second});
  const fusion::MergeResult result = fusion::merge(recipe);
  for (const auto& w : result.warnings) spdlog::warn("{}", w);
  if (!a.out.empty()) fusion::write_tensor_archive_file(a.out, result.archive);
  emit(g, {{"tensors", result.archive.tensors.size()}, {"warnings", result.warnings}, {"out", a.out}},
       "merged " + std::to_string(result.archive.tensors.size()) + " tensors");
  return 0;
}

// ---- metrics --------------------------------------------------------------

struct MetricsArgs {
  std::string features_a, features_b, image_emb, text_emb, detections, expected, aesthetic, vocab, out;
  double clip_scale = 100.0;
};

std::vector<double> read_scores(const std::string& path) {
  const Json doc = [&] {
    const std::string text = read_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') return parse_json_strict(text, path);
    Json arr = Json::array();
    for (const JsonLine& line : split_lines(text)) arr.push_back(parse_json_strict(line.text, path));
    return arr;
  }();
  std::vector<double> scores;
  for (const Json& v : doc) {
    if (v.is_number()) {
      scores.push_back(v.get<double>());
    } else if (v.is_object() && v.contains("aesthetic")) {
      scores.push_back(v.at("aesthetic").get<double>());
    } else {
      throw InputError(path + ": aesthetic scores must be numbers or {\"aesthetic\": x} objects");
    }
  }
  return scores;
}

int run_metrics(const Globals& g, const MetricsArgs& a) {
  metrics::MetricInputs in;
  if (!a.vocab.empty()) in.vocabularies = metrics::Vocabularies::parse(read_file(a.vocab));
  if (!a.features_a.empty()) in.reference_features = metrics::read_feature_file(a.features_a);
  if (!a.features_b.empty()) in.generated_features = metrics::read_feature_file(a.features_b);
  if (!a.image_emb.empty()) in.image_embeddings = metrics::read_feature_file(a.image_emb);
  if (!a.text_emb.empty()) in.text_embeddings = metrics::read_feature_file(a.text_emb);
  if (!a.detections.empty()) in.detections = metrics::parse_detections_jsonl(read_file(a.detections));
  if (!a.expected.empty()) in.expectations = metrics::parse_expectations_jsonl(read_file(a.expected));
  if (!a.aesthetic.empty()) in.aesthetic_scores = read_scores(a.aesthetic);
  in.clip_scale = a.clip_scale;
  const metrics::MetricReport report = metrics::metric_report(in);
  const Json doc = report.to_json();
  if (!a.out.empty()) write_file(a.out, doc.dump(2) + "\n");
  std::string human;
  for (std::string_view name : metrics::kMetricNames) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s %.4f  ", std::string(name).c_str(), report.metrics.at(std::string(name)).value);
    human += buf;
  }
  emit(g, doc, human);
  return 0;
}

// ---- gate -----------------------------------------------------------------

struct GateArgs {
  std::string baseline, candidate, out;
  std::vector<std::string> directions;
  double threshold = 0.70;
  bool geq = false;
};

int run_gate(const Globals& g, const GateArgs& a) {
  const auto baseline = metrics::MetricReport::from_json(parse_json_strict(read_file(a.baseline), a.baseline));
  const auto candidate = metrics::MetricReport::from_json(parse_json_strict(read_file(a.candidate), a.candidate));
  evalproto::GateDecision decision;
  if (a.directions.empty()) {
    decision = evalproto::dual_gate(baseline, candidate, a.threshold, a.geq);
  } else {
    std::map<std::string, metrics::Direction> directions;
    for (const auto& [name, value] : baseline.metrics) directions[name] = value.direction;
    for (const std::string& spec : a.directions) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) throw ValidationError("--direction expects NAME=up|down, got \"" + spec + "\"");
      directions[spec.substr(0, eq)] = metrics::parse_direction(spec.substr(eq + 1));
    }
    decision = evalproto::dual_gate(baseline, candidate, directions, a.threshold, a.geq);
  }
  const Json doc = decision.to_json();
  if (!a.out.empty()) write_file(a.out, doc.dump(2) + "\n");
  emit(g, doc,
       std::string(decision.pass ? "pass" : "fail") + ": improved " + std::to_string(decision.improved) + "/" +
           std::to_string(decision.total));
  return 0;
}

// ---- gsb serve ------------------------------------------------------------

struct ServeArgs {
  std::string log, images, host = "127.0.0.1";
  int port = 8080;
};

evalproto::GsbService* g_service = nullptr;

int run_gsb_serve(const Globals& g, const ServeArgs& a) {
  evalproto::GsbStore store(a.log);
  if (store.recovered_torn_tail()) spdlog::warn("discarded a torn final line in {}", a.log);
  evalproto::GsbService service(store, {a.images, {}});
  if (!service.bind(a.host, a.port)) throw InputError("cannot bind " + a.host + ":" + std::to_string(a.port));
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  spdlog::info("serving GSB sessions on {}:{} (log {}, {} events replayed)", a.host, a.port, a.log, store.events().size());
  if (g.json) std::cout << Json{{"host", a.host}, {"port", a.port}, {"log", a.log}}.dump() << std::endl;
  service.listen_after_bind();
  g_service = nullptr;
  return 0;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("roomforge");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("ROOMFORGE_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"roomforge: data curation, bucketing, captioning, fusion, metrics and GSB evaluation"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  app.add_flag("--json", g.json, "Print the result summary as JSON on stdout");
  app.add_option("--workers", g.workers, "Worker threads for parallel stages (default: all cores)")->check(CLI::NonNegativeNumber);

  std::function<int()> action;

  FilterArgs filter;
  auto* filter_cmd = app.add_subcommand("filter", "Drop images whose quality labels fire the rules");
  filter_cmd->add_option("--rules", filter.rules, "Rules file (default: built-in 19-rule profile)");
  filter_cmd->add_option("--schema", filter.schema, "Label schema file (default: built-in)");
  filter_cmd->add_option("--in", filter.in, "Input manifest (JSONL)")->required();
  filter_cmd->add_option("--out", filter.out, "Kept records (JSONL)");
  filter_cmd->add_option("--report", filter.report, "Drop report (JSON)");
  filter_cmd->callback([&] { action = [&] { return run_filter(g, filter); }; });

  auto* bucket_cmd = app.add_subcommand("bucket", "Aspect-ratio buckets and epoch schedules");
  bucket_cmd->require_subcommand(1);
  BucketPlanArgs plan;
  auto* plan_cmd = bucket_cmd->add_subcommand("plan", "Generate the bucket set");
  plan_cmd->add_option("--quantum", plan.constraints.quantum)->capture_default_str();
  plan_cmd->add_option("--min-side", plan.constraints.min_side)->capture_default_str();
  plan_cmd->add_option("--max-side", plan.constraints.max_side)->capture_default_str();
  plan_cmd->add_option("--max-pixels", plan.constraints.max_pixels)->capture_default_str();
  plan_cmd->add_option("--out", plan.out, "Plan file (JSON)");
  plan_cmd->callback([&] { action = [&] { return run_bucket_plan(g, plan); }; });

  ScheduleArgs schedule;
  auto* schedule_cmd = bucket_cmd->add_subcommand("schedule", "Assign images to buckets and plan one epoch");
  schedule_cmd->add_option("--plan", schedule.plan, "Plan file")->required();
  schedule_cmd->add_option("--manifest", schedule.manifest, "Manifest (JSONL)")->required();
  schedule_cmd->add_option("--batch", schedule.batch)->capture_default_str()->check(CLI::PositiveNumber);
  schedule_cmd->add_option("--seed", schedule.seed)->capture_default_str();
  schedule_cmd->add_flag("--uniform", schedule.uniform, "Pick buckets uniformly instead of by remaining count");
  schedule_cmd->add_option("--out", schedule.out, "Schedule (JSONL)");
  schedule_cmd->callback([&] { action = [&] { return run_bucket_schedule(g, schedule); }; });

  auto* caption_cmd = app.add_subcommand("caption", "Caption composition and chunk planning");
  caption_cmd->require_subcommand(1);
  CaptionArgs caption;
  auto* compose_cmd = caption_cmd->add_subcommand("compose", "Compose template captions");
  compose_cmd->add_option("--in", caption.in, "Manifest (JSONL)")->required();
  compose_cmd->add_option("--out", caption.out, "Captions (JSONL)");
  compose_cmd->add_option("--vocab", caption.vocab, "Ignored; accepted for symmetry with chunk");
  compose_cmd->add_option("--merges", caption.merges, "Ignored; accepted for symmetry with chunk");
  compose_cmd->callback([&] { action = [&] { return run_caption_compose(g, caption); }; });
  auto* chunk_cmd = caption_cmd->add_subcommand("chunk", "Tokenize captions and split into 77-token chunks");
  chunk_cmd->add_option("--vocab", caption.vocab, "vocab.json")->required();
  chunk_cmd->add_option("--merges", caption.merges, "merges.txt")->required();
  chunk_cmd->add_option("--in", caption.in, "Manifest (JSONL)")->required();
  chunk_cmd->add_option("--out", caption.out, "Chunk plans (JSONL)");
  chunk_cmd->add_option("--lookback", caption.lookback, "Tokens searched for a separator")->capture_default_str();
  chunk_cmd->add_flag("--hard-split", caption.hard_split, "Always split at 75 content tokens");
  chunk_cmd->callback([&] { action = [&] { return run_caption_chunk(g, caption); }; });

  CurateArgs curate;
  auto* curate_cmd = app.add_subcommand("curate", "Build screen / curated / premium tiers");
  curate_cmd->add_option("--manifest", curate.manifest, "Manifest (JSONL)")->required();
  curate_cmd->add_option("--rules", curate.rules, "Strict rules for the curated tier (default: built-in)");
  curate_cmd->add_option("--screen-rules", curate.screen_rules, "Screening rules (default: built-in)");
  curate_cmd->add_option("--schema", curate.schema, "Label schema file (default: built-in)");
  curate_cmd->add_option("--ballots", curate.ballots, "Designer ballots (JSONL)");
  curate_cmd->add_option("--fraction", curate.fraction)->capture_default_str();
  curate_cmd->add_option("--premium-cap", curate.premium_cap)->capture_default_str();
  curate_cmd->add_option("--curated-cap", curate.curated_cap);
  curate_cmd->add_option("--min-ballots", curate.min_ballots)->capture_default_str();
  curate_cmd->add_flag("--no-premium", curate.no_premium, "Skip the premium tier");
  curate_cmd->add_option("--out", curate.out, "Tiers (JSONL)");
  curate_cmd->callback([&] { action = [&] { return run_curate(g, curate); }; });

  MergeArgs merge;
  auto* merge_cmd = app.add_subcommand("merge", "Weighted merge of tensor archives");
  merge_cmd->add_option("--in", merge.inputs, "PATH:WEIGHT, repeatable")->required();
  merge_cmd->add_option("--policy", merge.policy, "strict or intersect")->capture_default_str();
  merge_cmd->add_flag("--signed", merge.allow_negative, "Allow negative weights");
  merge_cmd->add_option("--out", merge.out, "Merged archive");
  merge_cmd->callback([&] { action = [&] { return run_merge(g, merge); }; });

  MetricsArgs metrics_args;
  auto* metrics_cmd = app.add_subcommand("metrics", "Compute AS, SFR, SA, HFR, FRR, FID and CS");
  metrics_cmd->add_option("--features-a", metrics_args.features_a, "Reference features (RFMX)");
  metrics_cmd->add_option("--features-b", metrics_args.features_b, "Generated features (RFMX)");
  metrics_cmd->add_option("--image-emb", metrics_args.image_emb, "Image embeddings (RFMX)");
  metrics_cmd->add_option("--text-emb", metrics_args.text_emb, "Text embeddings (RFMX)");
  metrics_cmd->add_option("--detections", metrics_args.detections, "Detections (JSONL)");
  metrics_cmd->add_option("--expected", metrics_args.expected, "Prompt expectations (JSONL)");
  metrics_cmd->add_option("--aesthetic", metrics_args.aesthetic, "Aesthetic scores (JSON array or JSONL)");
  metrics_cmd->add_option("--vocab", metrics_args.vocab, "Vocabularies (default: built-in)");
  metrics_cmd->add_option("--clip-scale", metrics_args.clip_scale)->capture_default_str();
  metrics_cmd->add_option("--out", metrics_args.out, "Report (JSON)");
  metrics_cmd->callback([&] { action = [&] { return run_metrics(g, metrics_args); }; });

  GateArgs gate;
  auto* gate_cmd = app.add_subcommand("gate", "Dual-gate comparison of two metric reports");
  gate_cmd->add_option("--baseline", gate.baseline, "Baseline report")->required();
  gate_cmd->add_option("--candidate", gate.candidate, "Candidate report")->required();
  gate_cmd->add_option("--threshold", gate.threshold)->capture_default_str();
  gate_cmd->add_flag("--gate-geq", gate.geq, "Pass on fraction >= threshold");
  gate_cmd->add_option("--direction", gate.directions, "NAME=up|down override, repeatable");
  gate_cmd->add_option("--out", gate.out, "Decision (JSON)");
  gate_cmd->callback([&] { action = [&] { return run_gate(g, gate); }; });

  auto* gsb_cmd = app.add_subcommand("gsb", "GSB human evaluation");
  gsb_cmd->require_subcommand(1);
  ServeArgs serve;
  auto* serve_cmd = gsb_cmd->add_subcommand("serve", "Run the judging HTTP service");
  serve_cmd->add_option("--log", serve.log, "Event log (JSONL), replayed on start")->required();
  serve_cmd->add_option("--images", serve.images, "Directory served under /images/");
  serve_cmd->add_option("--host", serve.host)->capture_default_str();
  serve_cmd->add_option("--port", serve.port)->capture_default_str();
  serve_cmd->callback([&] { action = [&] { return run_gsb_serve(g, serve); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  if (g.workers > 0) omp_set_num_threads(g.workers);
  try {
    return action();
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const Json::exception& e) {
    spdlog::error("malformed input: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return 3;
  }
}
