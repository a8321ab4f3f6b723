#include "nest/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <vector>

#include "nest/error.hpp"
#include "nest/text.hpp"
#include "nest/trajectory.hpp"

namespace nest {

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Parses a real starting exactly at s[pos]; returns consumed length or 0.
std::size_t parse_real_at(std::string_view s, std::size_t pos, double& out) {
  if (pos >= s.size()) return 0;
  std::string buffer(s.substr(pos, 64));
  const char* begin = buffer.c_str();
  char* end = nullptr;
  double value = std::strtod(begin, &end);
  if (end == begin) return 0;
  out = value;
  return static_cast<std::size_t>(end - begin);
}

bool parse_full_real(std::string_view s, double& out) {
  std::string trimmed = text::trim(s);
  if (trimmed.empty()) return false;
  const char* begin = trimmed.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + trimmed.size();
}

// Splits "[a, b, ...]" contents on commas into fully-parsed reals.
std::optional<std::vector<double>> parse_bracket_tuple(std::string_view inner) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= inner.size()) {
    std::size_t comma = inner.find(',', start);
    std::string_view piece =
        comma == std::string_view::npos ? inner.substr(start) : inner.substr(start, comma - start);
    double value = 0.0;
    if (!parse_full_real(piece, value)) return std::nullopt;
    values.push_back(value);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return values;
}

std::optional<std::vector<double>> last_bracket_tuple(std::string_view s, std::size_t arity) {
  std::optional<std::vector<double>> found;
  std::size_t pos = 0;
  while ((pos = s.find('[', pos)) != std::string_view::npos) {
    std::size_t close = s.find(']', pos + 1);
    if (close == std::string_view::npos) break;
    auto tuple = parse_bracket_tuple(s.substr(pos + 1, close - pos - 1));
    if (tuple && tuple->size() == arity) found = std::move(tuple);
    pos = pos + 1;
  }
  return found;
}

}  // namespace

const char* metric_kind_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::AccExact: return "acc_exact";
    case MetricKind::TemporalIoU: return "temporal_iou";
    case MetricKind::SpatialIoU: return "spatial_iou";
    case MetricKind::Mse: return "mse";
    case MetricKind::Bleu: return "bleu";
    case MetricKind::LongTextJudge: return "long_text_judge";
  }
  return "acc_exact";
}

std::optional<MetricKind> metric_kind_from_name(std::string_view name) {
  if (name == "acc_exact") return MetricKind::AccExact;
  if (name == "temporal_iou") return MetricKind::TemporalIoU;
  if (name == "spatial_iou") return MetricKind::SpatialIoU;
  if (name == "mse") return MetricKind::Mse;
  if (name == "bleu") return MetricKind::Bleu;
  if (name == "long_text_judge") return MetricKind::LongTextJudge;
  return std::nullopt;
}

GroundTruth GroundTruth::exact(std::string value) { return {Exact{std::move(value)}}; }

GroundTruth GroundTruth::interval(double start_s, double end_s) {
  if (!(start_s < end_s))
    fail(ErrorCode::InvariantViolation, "interval requires start_s < end_s");
  return {Interval{start_s, end_s}};
}

GroundTruth GroundTruth::box(double x1, double y1, double x2, double y2) {
  if (!(x1 < x2 && y1 < y2))
    fail(ErrorCode::InvariantViolation, "box requires x1 < x2 and y1 < y2");
  if (x1 < 0.0 || y1 < 0.0 || x2 > 1.0 || y2 > 1.0)
    fail(ErrorCode::InvariantViolation, "box coordinates must be normalized to [0, 1]");
  return {Box{x1, y1, x2, y2}};
}

GroundTruth GroundTruth::scalar(double value, double scale) {
  if (!(scale > 0.0)) fail(ErrorCode::InvariantViolation, "scalar scale must be > 0");
  return {Scalar{value, scale}};
}

GroundTruth GroundTruth::reference(std::string value) { return {Reference{std::move(value)}}; }
GroundTruth GroundTruth::rubric(std::string value) { return {Rubric{std::move(value)}}; }

double temporal_iou(const Interval& a, const Interval& b) {
  double inter = std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s);
  if (inter < 0.0) inter = 0.0;
  double len_a = a.end_s - a.start_s;
  double len_b = b.end_s - b.start_s;
  double uni = len_a + len_b - inter;
  if (uni <= 0.0) return 0.0;
  return clamp01(inter / uni);
}

double spatial_iou(const Box& a, const Box& b) {
  double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return clamp01(inter / uni);
}

double mse_reward(double pred, const Scalar& gt) {
  double err = pred - gt.value;
  return 1.0 / (1.0 + (err * err) / gt.scale);
}

double bleu(std::string_view candidate, std::string_view reference) {
  std::vector<std::string> cand, ref;
  {
    std::string c = text::collapse_ws(text::trim(candidate));
    std::string r = text::collapse_ws(text::trim(reference));
    std::size_t pos = 0;
    while (pos < c.size()) {
      std::size_t sp = c.find(' ', pos);
      if (sp == std::string::npos) sp = c.size();
      cand.push_back(c.substr(pos, sp - pos));
      pos = sp + 1;
    }
    pos = 0;
    while (pos < r.size()) {
      std::size_t sp = r.find(' ', pos);
      if (sp == std::string::npos) sp = r.size();
      ref.push_back(r.substr(pos, sp - pos));
      pos = sp + 1;
    }
  }
  if (cand.empty()) return 0.0;

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, std::size_t> cand_counts, ref_counts;
    if (cand.size() >= n)
      for (std::size_t i = 0; i + n <= cand.size(); ++i)
        ++cand_counts[std::vector<std::string>(cand.begin() + static_cast<std::ptrdiff_t>(i),
                                               cand.begin() + static_cast<std::ptrdiff_t>(i + n))];
    if (ref.size() >= n)
      for (std::size_t i = 0; i + n <= ref.size(); ++i)
        ++ref_counts[std::vector<std::string>(ref.begin() + static_cast<std::ptrdiff_t>(i),
                                              ref.begin() + static_cast<std::ptrdiff_t>(i + n))];
    std::size_t total = 0, matched = 0;
    for (const auto& [gram, count] : cand_counts) {
      total += count;
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    // add-one smoothing keeps every order defined, including empty ones
    double precision = (static_cast<double>(matched) + 1.0) / (static_cast<double>(total) + 1.0);
    log_sum += std::log(precision);
  }
  double geo_mean = std::exp(log_sum / 4.0);

  double bp = 1.0;
  if (cand.size() < ref.size())
    bp = std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size()));
  return clamp01(bp * geo_mean);
}

double exact_match(std::string_view pred, std::string_view gt) {
  return text::normalize_match(pred) == text::normalize_match(gt) ? 1.0 : 0.0;
}

std::pair<std::string, std::string> split_prefix_child(std::string_view trajectory_text) {
  std::size_t last_header = std::string_view::npos;
  std::size_t line_start = 0;
  while (line_start < trajectory_text.size()) {
    if (trajectory_text.substr(line_start).rfind("# Turn ", 0) == 0)
      last_header = line_start;
    std::size_t nl = trajectory_text.find('\n', line_start);
    if (nl == std::string_view::npos) break;
    line_start = nl + 1;
  }
  if (last_header == std::string_view::npos)
    return {std::string(), std::string(trajectory_text)};
  return {std::string(trajectory_text.substr(0, last_header)),
          std::string(trajectory_text.substr(last_header))};
}

std::pair<double, double> process_rewards(const std::string& trajectory_text,
                                          PolicyOracle& judge) {
  if (!traj::validate(trajectory_text).valid) return {0.0, 0.0};
  auto [prefix, child] = split_prefix_child(trajectory_text);
  double r_nest =
      prefix.empty() ? 0.0 : clamp_score(judge.judge(prefix), 0.0, 1.0, "judge");
  double r_child = clamp_score(judge.judge(child), 0.0, 1.0, "judge");
  return {r_nest, r_child};
}

double format_reward(std::string_view text_in) {
  return traj::validate(text_in).valid ? 0.0 : -1.0;
}

RewardBreakdown compose(double r_outcome, double r_nest, double r_child, double r_format) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(r_outcome))
    fail(ErrorCode::ComponentOutOfRange, "r_outcome must lie in [0, 1]");
  if (!in_unit(r_nest))
    fail(ErrorCode::ComponentOutOfRange, "r_nest must lie in [0, 1]");
  if (!in_unit(r_child))
    fail(ErrorCode::ComponentOutOfRange, "r_child must lie in [0, 1]");
  if (r_format != 0.0 && r_format != -1.0)
    fail(ErrorCode::ComponentOutOfRange, "r_format must be 0 or -1");
  RewardBreakdown breakdown{r_outcome, r_nest, r_child, r_format, 0.0};
  breakdown.r_total = r_outcome * (1.0 + r_nest + r_child) + r_format;
  return breakdown;
}

std::optional<Interval> extract_interval(std::string_view answer_text) {
  auto tuple = last_bracket_tuple(answer_text, 2);
  if (!tuple) return std::nullopt;
  return Interval{(*tuple)[0], (*tuple)[1]};
}

std::optional<Box> extract_box(std::string_view answer_text) {
  auto tuple = last_bracket_tuple(answer_text, 4);
  if (!tuple) return std::nullopt;
  return Box{(*tuple)[0], (*tuple)[1], (*tuple)[2], (*tuple)[3]};
}

std::optional<double> extract_number(std::string_view answer_text) {
  std::optional<double> found;
  std::size_t pos = 0;
  while (pos < answer_text.size()) {
    char prev = pos == 0 ? ' ' : answer_text[pos - 1];
    bool boundary = !(std::isalnum(static_cast<unsigned char>(prev)) || prev == '_' || prev == '.');
    double value = 0.0;
    std::size_t used = boundary ? parse_real_at(answer_text, pos, value) : 0;
    if (used > 0) {
      found = value;
      pos += used;
    } else {
      ++pos;
    }
  }
  return found;
}

OutcomeResult outcome_reward(const std::string& prediction, const GroundTruth& gt,
                             MetricKind metric, PolicyOracle* judge) {
  OutcomeResult result;
  auto parse_failure = [&result](std::string flag) {
    result.reward = 0.0;
    result.parse_ok = false;
    result.flag = std::move(flag);
    return result;
  };

  switch (metric) {
    case MetricKind::AccExact: {
      const Exact* expected = std::get_if<Exact>(&gt.value);
      if (!expected) return parse_failure("gt-mismatch: acc_exact needs exact text");
      result.reward = exact_match(prediction, expected->text);
      return result;
    }
    case MetricKind::TemporalIoU: {
      const Interval* expected = std::get_if<Interval>(&gt.value);
      if (!expected) return parse_failure("gt-mismatch: temporal_iou needs an interval");
      auto predicted = extract_interval(prediction);
      if (!predicted) return parse_failure("parse-failure: no [start, end] pair in prediction");
      if (predicted->start_s > predicted->end_s)
        return parse_failure("parse-failure: predicted interval is inverted");
      result.reward = temporal_iou(*predicted, *expected);
      return result;
    }
    case MetricKind::SpatialIoU: {
      const Box* expected = std::get_if<Box>(&gt.value);
      if (!expected) return parse_failure("gt-mismatch: spatial_iou needs a box");
      auto predicted = extract_box(prediction);
      if (!predicted) return parse_failure("parse-failure: no [x1, y1, x2, y2] box in prediction");
      if (predicted->x1 > predicted->x2 || predicted->y1 > predicted->y2)
        return parse_failure("parse-failure: predicted box is inverted");
      result.reward = spatial_iou(*predicted, *expected);
      return result;
    }
    case MetricKind::Mse: {
      const Scalar* expected = std::get_if<Scalar>(&gt.value);
      if (!expected) return parse_failure("gt-mismatch: mse needs a scalar");
      auto predicted = extract_number(prediction);
      if (!predicted) return parse_failure("parse-failure: no numeric literal in prediction");
      result.reward = clamp01(mse_reward(*predicted, *expected));
      return result;
    }
    case MetricKind::Bleu: {
      const Reference* expected = std::get_if<Reference>(&gt.value);
      if (!expected) return parse_failure("gt-mismatch: bleu needs a reference");
      result.reward = bleu(prediction, expected->text);
      return result;
    }
    case MetricKind::LongTextJudge: {
      const Rubric* expected = std::get_if<Rubric>(&gt.value);
      if (!expected) return parse_failure("gt-mismatch: long_text_judge needs a rubric");
      if (!judge) return parse_failure("no-judge: long_text_judge requires a judge oracle");
      std::string judged = "rubric:\n" + expected->text + "\nresponse:\n" + prediction;
      result.reward = clamp_score(judge->judge(judged), 0.0, 1.0, "judge");
      return result;
    }
  }
  return parse_failure("unknown metric");
}

}  // namespace nest
