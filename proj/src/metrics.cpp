#include "roomforge/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include <Eigen/Dense>

#include "roomforge/error.hpp"

namespace roomforge::metrics {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr char kMagic[4] = {'R', 'F', 'M', 'X'};
constexpr std::size_t kHeaderSize = 16;

std::uint32_t load_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

Eigen::Map<const MatrixRM> as_matrix(std::span<const double> m, std::size_t d) {
  return {m.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)};
}

void check_stats(const GaussianStats& s, const char* which) {
  if (s.mean.size() != s.d || s.covariance.size() != s.d * s.d) {
    throw ValidationError(std::string(which) + ": mean/covariance sizes do not match dimension");
  }
  for (std::size_t i = 0; i < s.d; ++i) {
    for (std::size_t j = i + 1; j < s.d; ++j) {
      const double a = s.covariance[i * s.d + j];
      const double b = s.covariance[j * s.d + i];
      if (std::abs(a - b) > 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)))) {
        throw ValidationError(std::string(which) + ": covariance is not symmetric");
      }
    }
  }
}

struct Rate {
  double percent = 0.0;
  std::size_t count = 0;
};

Rate follow_rate_counted(std::span<const PromptExpectation> expectations,
                         const std::map<std::string, DetectionRecord>& detections, Decoration kind,
                         const std::set<std::string>& vocabulary) {
  std::size_t required = 0;
  std::size_t hits = 0;
  for (const PromptExpectation& e : expectations) {
    const std::set<std::string>& items = kind == Decoration::soft ? e.furniture : e.hard;
    if (items.empty()) continue;
    for (const auto& item : items) {
      if (!vocabulary.contains(item)) {
        throw ValidationError("image " + e.image_id + ": \"" + item + "\" is not in the vocabulary");
      }
    }
    auto it = detections.find(e.image_id);
    if (it == detections.end()) throw ValidationError("no detection record for image " + e.image_id);
    for (const auto& item : items) {
      const bool present = kind == Decoration::soft ? it->second.objects.contains(item) : it->second.hard.contains(item);
      hits += present ? 1 : 0;
    }
    required += items.size();
  }
  if (required == 0) throw ValidationError("follow rate: no required items");
  return {100.0 * static_cast<double>(hits) / static_cast<double>(required), required};
}

Rate style_accuracy_counted(std::span<const PromptExpectation> expectations,
                            const std::map<std::string, DetectionRecord>& detections,
                            const std::set<std::string>& styles) {
  if (expectations.empty()) throw ValidationError("style accuracy: no expectations");
  std::size_t matches = 0;
  for (const PromptExpectation& e : expectations) {
    if (!styles.contains(e.style)) throw ValidationError("unknown expected style \"" + e.style + "\"");
    auto it = detections.find(e.image_id);
    if (it == detections.end()) throw ValidationError("no detection record for image " + e.image_id);
    if (!styles.contains(it->second.style)) {
      throw ValidationError("unknown predicted style \"" + it->second.style + "\"");
    }
    matches += it->second.style == e.style ? 1 : 0;
  }
  return {100.0 * static_cast<double>(matches) / static_cast<double>(expectations.size()), expectations.size()};
}

std::set<std::string> string_set(const Json& doc, const char* field) {
  if (!doc.contains(field)) return {};
  return doc.at(field).get<std::set<std::string>>();
}

}  // namespace

FeatureSet read_feature_set(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw InputError("feature file shorter than its 16-byte header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw InputError("feature file lacks RFMX magic");
  FeatureSet f;
  f.n = load_u32(bytes.data() + 4);
  f.d = load_u32(bytes.data() + 8);
  const std::size_t expected = kHeaderSize + f.n * f.d * 4;
  if (bytes.size() != expected) {
    throw InputError("feature file size " + std::to_string(bytes.size()) + " does not match header (" +
                     std::to_string(expected) + ")");
  }
  f.values.resize(f.n * f.d);
  const std::uint8_t* p = bytes.data() + kHeaderSize;
  for (std::size_t i = 0; i < f.values.size(); ++i, p += 4) {
    const float v = std::bit_cast<float>(load_u32(p));
    if (!std::isfinite(v)) throw InputError("feature file holds a non-finite value at index " + std::to_string(i));
    f.values[i] = v;
  }
  return f;
}

FeatureSet read_feature_file(const std::string& path) {
  const std::string bytes = read_file(path);
  return read_feature_set({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
}

std::vector<std::uint8_t> write_feature_set(const FeatureSet& features) {
  if (features.values.size() != features.n * features.d) throw ValidationError("feature matrix size mismatch");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  store_u32(out, static_cast<std::uint32_t>(features.n));
  store_u32(out, static_cast<std::uint32_t>(features.d));
  store_u32(out, 0);
  for (double v : features.values) store_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

GaussianStats gaussian_stats(const FeatureSet& f) {
  if (f.n < 2) throw ValidationError("gaussian stats need at least 2 samples, got " + std::to_string(f.n));
  if (f.values.size() != f.n * f.d) throw ValidationError("feature matrix size mismatch");
  for (double v : f.values) {
    if (!std::isfinite(v)) throw ValidationError("feature matrix holds non-finite values");
  }
  const std::size_t n = f.n;
  const std::size_t d = f.d;
  GaussianStats s;
  s.d = d;
  s.mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += f.values[r * d + c];
  }
  for (double& m : s.mean) m /= static_cast<double>(n);

  // Centered columns stored contiguously so each covariance entry is one dot product.
  std::vector<double> columns(d * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) columns[c * n + r] = f.values[r * d + c] - s.mean[c];
  }
  s.covariance.assign(d * d, 0.0);
  const double denom = static_cast<double>(n - 1);
  const auto dd = static_cast<std::ptrdiff_t>(d);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < dd; ++i) {
    const double* ci = columns.data() + i * n;
    for (std::size_t j = static_cast<std::size_t>(i); j < d; ++j) {
      const double* cj = columns.data() + j * n;
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += ci[k] * cj[k];
      s.covariance[i * d + j] = acc / denom;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) s.covariance[i * d + j] = s.covariance[j * d + i];
  }
  return s;
}

std::vector<double> symmetric_sqrt(std::span<const double> matrix, std::size_t d) {
  if (matrix.size() != d * d) throw ValidationError("matrix size mismatch");
  const MatrixRM a = as_matrix(matrix, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (a + a.transpose()));
  if (solver.info() != Eigen::Success) throw Error("eigensolver failed to converge");
  Eigen::VectorXd lambda = solver.eigenvalues();
  const double largest = lambda.size() ? std::max(1.0, lambda.cwiseAbs().maxCoeff()) : 1.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < -1e-8 * largest) {
      throw ValidationError("matrix is not positive semi-definite (eigenvalue " + std::to_string(lambda[i]) + ")");
    }
    lambda[i] = std::sqrt(std::max(lambda[i], 0.0));
  }
  const Eigen::MatrixXd& v = solver.eigenvectors();
  MatrixRM root = v * lambda.asDiagonal() * v.transpose();
  root = 0.5 * (root + root.transpose()).eval();
  return {root.data(), root.data() + root.size()};
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.d != b.d) {
    throw ValidationError("dimension mismatch: " + std::to_string(a.d) + " vs " + std::to_string(b.d));
  }
  check_stats(a, "first distribution");
  check_stats(b, "second distribution");
  const std::size_t d = a.d;
  double mean_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a.mean[i] - b.mean[i];
    mean_term += diff * diff;
  }
  if (d == 0) return 0.0;

  const std::vector<double> root_a = symmetric_sqrt(a.covariance, d);
  const auto ra = as_matrix(root_a, d);
  const auto cb = as_matrix(b.covariance, d);
  MatrixRM product = ra * cb * ra;
  product = 0.5 * (product + product.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(product, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("eigensolver failed to converge");
  double trace_root = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) trace_root += std::sqrt(std::max(solver.eigenvalues()[i], 0.0));

  double trace_a = 0.0;
  double trace_b = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    trace_a += a.covariance[i * d + i];
    trace_b += b.covariance[i * d + i];
  }
  return std::max(0.0, mean_term + trace_a + trace_b - 2.0 * trace_root);
}

double clip_score(const FeatureSet& images, const FeatureSet& texts, double scale) {
  if (images.n != texts.n) throw ValidationError("clip score: image/text counts differ");
  if (images.d != texts.d) throw ValidationError("clip score: embedding dimensions differ");
  if (images.n == 0) throw ValidationError("clip score: no pairs");
  double total = 0.0;
  for (std::size_t i = 0; i < images.n; ++i) {
    const auto x = images.row(i);
    const auto y = texts.row(i);
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t k = 0; k < images.d; ++k) {
      dot += x[k] * y[k];
      nx += x[k] * x[k];
      ny += y[k] * y[k];
    }
    if (nx == 0.0 || ny == 0.0) throw ValidationError("clip score: zero-norm embedding at pair " + std::to_string(i));
    total += scale * std::max(dot / (std::sqrt(nx) * std::sqrt(ny)), 0.0);
  }
  return total / static_cast<double>(images.n);
}

double aesthetic_score(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("aesthetic score: no scores");
  // Neumaier summation.
  double sum = 0.0;
  double compensation = 0.0;
  for (double v : scores) {
    if (!std::isfinite(v) || v < 0.0 || v > 100.0) {
      throw ValidationError("aesthetic score " + std::to_string(v) + " outside [0, 100]");
    }
    const double t = sum + v;
    compensation += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return (sum + compensation) / static_cast<double>(scores.size());
}

Vocabularies Vocabularies::parse(std::string_view json_text) {
  const Json doc = parse_json_strict(json_text, "metric vocabularies");
  Vocabularies v;
  try {
    v.furniture = doc.at("furniture").get<std::set<std::string>>();
    v.styles = doc.at("styles").get<std::set<std::string>>();
    v.hard = doc.at("hard").get<std::set<std::string>>();
    if (doc.contains("singletons")) {
      v.singletons = doc.at("singletons").get<std::map<std::string, std::set<std::string>>>();
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("metric vocabularies: ") + e.what());
  }
  return v;
}

DetectionRecord parse_detection(const Json& doc) {
  DetectionRecord r;
  try {
    r.image_id = doc.at("image_id").get<std::string>();
    r.room = doc.value("room", "");
    if (doc.contains("objects")) r.objects = doc.at("objects").get<std::map<std::string, int>>();
    r.style = doc.value("style", "");
    r.hard = string_set(doc, "hard");
    if (doc.contains("aesthetic")) r.aesthetic = doc.at("aesthetic").get<double>();
  } catch (const Json::exception& e) {
    throw InputError(std::string("detection record: ") + e.what());
  }
  for (const auto& [cls, count] : r.objects) {
    if (count < 1) throw ValidationError("detection " + r.image_id + ": count for " + cls + " must be >= 1");
  }
  return r;
}

PromptExpectation parse_expectation(const Json& doc) {
  PromptExpectation e;
  try {
    e.image_id = doc.at("image_id").get<std::string>();
    e.furniture = string_set(doc, "furniture");
    e.style = doc.value("style", "");
    e.hard = string_set(doc, "hard");
  } catch (const Json::exception& ex) {
    throw InputError(std::string("expectation record: ") + ex.what());
  }
  return e;
}

std::map<std::string, DetectionRecord> parse_detections_jsonl(std::string_view text) {
  std::map<std::string, DetectionRecord> out;
  for (const JsonLine& line : split_lines(text)) {
    DetectionRecord r = parse_detection(parse_json_strict(line.text, "detections line " + std::to_string(line.line_number)));
    const std::string id = r.image_id;
    if (!out.emplace(id, std::move(r)).second) throw InputError("duplicate detection for image " + id);
  }
  return out;
}

std::vector<PromptExpectation> parse_expectations_jsonl(std::string_view text) {
  std::vector<PromptExpectation> out;
  std::set<std::string> seen;
  for (const JsonLine& line : split_lines(text)) {
    out.push_back(parse_expectation(parse_json_strict(line.text, "expectations line " + std::to_string(line.line_number))));
    if (!seen.insert(out.back().image_id).second) throw InputError("duplicate expectation for image " + out.back().image_id);
  }
  return out;
}

double follow_rate(std::span<const PromptExpectation> expectations,
                   const std::map<std::string, DetectionRecord>& detections, Decoration kind,
                   const std::set<std::string>& vocabulary) {
  return follow_rate_counted(expectations, detections, kind, vocabulary).percent;
}

double style_accuracy(std::span<const PromptExpectation> expectations,
                      const std::map<std::string, DetectionRecord>& detections, const std::set<std::string>& styles) {
  return style_accuracy_counted(expectations, detections, styles).percent;
}

RepetitionResult repetition_rate(std::span<const DetectionRecord> detections,
                                 const std::map<std::string, std::set<std::string>>& singletons, UnknownRoom policy) {
  RepetitionResult result;
  for (const DetectionRecord& d : detections) {
    auto rule = singletons.find(d.room);
    if (rule == singletons.end()) {
      if (policy == UnknownRoom::error) throw ValidationError("no singleton rule for room \"" + d.room + "\"");
      ++result.skipped;
      continue;
    }
    ++result.evaluated;
    for (const auto& cls : rule->second) {
      auto it = d.objects.find(cls);
      if (it != d.objects.end() && it->second >= 2) {
        ++result.repetitive;
        break;
      }
    }
  }
  if (result.evaluated == 0) throw ValidationError("repetition rate: no detection matched a room rule");
  result.rate = 100.0 * static_cast<double>(result.repetitive) / static_cast<double>(result.evaluated);
  return result;
}

std::string_view to_string(Direction direction) { return direction == Direction::up ? "up" : "down"; }

Direction parse_direction(std::string_view text) {
  if (text == "up") return Direction::up;
  if (text == "down") return Direction::down;
  throw ValidationError("direction must be \"up\" or \"down\", got \"" + std::string(text) + "\"");
}

Direction default_direction(std::string_view metric) {
  return (metric == "FRR" || metric == "FID") ? Direction::down : Direction::up;
}

Json MetricReport::to_json() const {
  Json doc = Json::object();
  for (const auto& [name, m] : metrics) {
    doc[name] = {{"value", m.value}, {"count", m.count}, {"direction", to_string(m.direction)}};
  }
  return doc;
}

MetricReport MetricReport::from_json(const Json& doc) {
  if (!doc.is_object()) throw InputError("metric report must be a JSON object");
  MetricReport report;
  try {
    for (const auto& [name, entry] : doc.items()) {
      MetricValue m;
      m.value = entry.at("value").get<double>();
      m.count = entry.value("count", std::size_t{0});
      m.direction = entry.contains("direction") ? parse_direction(entry.at("direction").get<std::string>())
                                                : default_direction(name);
      report.metrics.emplace(name, m);
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("metric report: ") + e.what());
  }
  return report;
}

void MetricReport::validate() const {
  for (const auto& [name, m] : metrics) {
    if (!std::isfinite(m.value)) throw ValidationError(name + " is not finite");
    const bool percent = name == "SFR" || name == "SA" || name == "HFR" || name == "FRR" || name == "AS";
    if (percent && (m.value < 0.0 || m.value > 100.0)) throw ValidationError(name + " outside [0, 100]");
    if (name == "FID" && m.value < 0.0) throw ValidationError("FID is negative");
  }
}

MetricReport metric_report(const MetricInputs& in) {
  std::vector<std::string> missing;
  if (!in.reference_features) missing.emplace_back("reference features (FID)");
  if (!in.generated_features) missing.emplace_back("generated features (FID)");
  if (!in.image_embeddings) missing.emplace_back("image embeddings (CS)");
  if (!in.text_embeddings) missing.emplace_back("text embeddings (CS)");
  if (!in.expectations) missing.emplace_back("expectations (SFR, SA, HFR)");
  if (!in.detections) missing.emplace_back("detections (SFR, SA, HFR, FRR)");
  const bool detections_scored =
      in.detections && !in.detections->empty() &&
      std::all_of(in.detections->begin(), in.detections->end(), [](const auto& kv) { return kv.second.aesthetic.has_value(); });
  if (!in.aesthetic_scores && !detections_scored) missing.emplace_back("aesthetic scores (AS)");
  if (!missing.empty()) {
    std::string message = "metric report is missing inputs:";
    for (const auto& m : missing) message += " " + m + ";";
    throw ValidationError(message);
  }

  MetricReport report;
  auto put = [&](const char* name, double value, std::size_t count) {
    report.metrics[name] = {value, count, default_direction(name)};
  };

  std::vector<double> scores;
  if (in.aesthetic_scores) {
    scores = *in.aesthetic_scores;
  } else {
    for (const auto& [id, d] : *in.detections) scores.push_back(*d.aesthetic);
  }
  put("AS", aesthetic_score(scores), scores.size());

  const auto& vocab = in.vocabularies;
  const Rate sfr = follow_rate_counted(*in.expectations, *in.detections, Decoration::soft, vocab.furniture);
  put("SFR", sfr.percent, sfr.count);
  const Rate sa = style_accuracy_counted(*in.expectations, *in.detections, vocab.styles);
  put("SA", sa.percent, sa.count);
  const Rate hfr = follow_rate_counted(*in.expectations, *in.detections, Decoration::hard, vocab.hard);
  put("HFR", hfr.percent, hfr.count);

  std::vector<DetectionRecord> detections;
  for (const auto& [id, d] : *in.detections) detections.push_back(d);
  const RepetitionResult frr = repetition_rate(detections, vocab.singletons);
  put("FRR", frr.rate, frr.evaluated);

  const GaussianStats a = gaussian_stats(*in.reference_features);
  const GaussianStats b = gaussian_stats(*in.generated_features);
  put("FID", frechet_distance(a, b), in.generated_features->n);
  put("CS", clip_score(*in.image_embeddings, *in.text_embeddings, in.clip_scale), in.image_embeddings->n);
  report.validate();
  return report;
}

}  // namespace roomforge::metrics
