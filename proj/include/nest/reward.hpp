#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include "nest/oracle.hpp"

// Outcome, process, and format reward models plus their composition
//   r_total = r_outcome * (1 + r_nest + r_child) + r_format
// with r_outcome, r_nest, r_child in [0, 1] and r_format in {0, -1}.

namespace nest {

enum class MetricKind { AccExact, TemporalIoU, SpatialIoU, Mse, Bleu, LongTextJudge };

const char* metric_kind_name(MetricKind kind);
std::optional<MetricKind> metric_kind_from_name(std::string_view name);

struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
};

struct Scalar {
  double value = 0.0;
  double scale = 1.0;  // > 0
};

struct Exact { std::string text; };
struct Reference { std::string text; };
struct Rubric { std::string text; };

struct GroundTruth {
  std::variant<Exact, Interval, Box, Scalar, Reference, Rubric> value;

  static GroundTruth exact(std::string text);
  static GroundTruth interval(double start_s, double end_s);     // start < end
  static GroundTruth box(double x1, double y1, double x2, double y2);  // x1<x2, y1<y2, in [0,1]
  static GroundTruth scalar(double value, double scale);         // scale > 0
  static GroundTruth reference(std::string text);
  static GroundTruth rubric(std::string text);
};

struct RewardBreakdown {
  double r_outcome = 0.0;
  double r_nest = 0.0;
  double r_child = 0.0;
  double r_format = 0.0;
  double r_total = 0.0;
};

// Outcome scoring never throws on bad predictions: a prediction that does not
// contain the metric's operand yields reward 0 with parse_ok=false and a flag.
struct OutcomeResult {
  double reward = 0.0;
  bool parse_ok = true;
  std::string flag;
};

// Dispatches to the metric's primitive. `judge` is consulted only for
// LongTextJudge; when it is absent that metric scores 0 with a "no-judge" flag.
OutcomeResult outcome_reward(const std::string& prediction, const GroundTruth& gt,
                             MetricKind metric, PolicyOracle* judge = nullptr);

double temporal_iou(const Interval& a, const Interval& b);
double spatial_iou(const Box& a, const Box& b);

// 1 / (1 + (pred - value)^2 / scale)
double mse_reward(double pred, const Scalar& gt);

// Sentence-level BLEU on whitespace tokens: n-grams up to 4, add-one smoothed
// modified precisions, geometric mean, brevity penalty exp(1 - r/c) when
// c < r. An empty candidate scores 0.
double bleu(std::string_view candidate, std::string_view reference);

// 1.0 iff both sides normalize identically (trim, casefold, collapse
// whitespace runs, strip one trailing '.', ',', '!' or '?').
double exact_match(std::string_view pred, std::string_view gt);

// Judge-scored process rewards over a serialized trajectory: r_nest scores the
// prefix (all turns except the last), r_child the final turn. Invalid text
// scores (0, 0) without consulting the judge; judge outputs are clamped.
std::pair<double, double> process_rewards(const std::string& trajectory_text,
                                          PolicyOracle& judge);

// Raw-text split used by process_rewards: (prefix, final turn + answer).
// Requires text that validates; with zero or one turn the prefix is empty.
std::pair<std::string, std::string> split_prefix_child(std::string_view trajectory_text);

// 0 when the text validates under the trajectory grammar, else -1.
double format_reward(std::string_view text);

// Throws Error(ComponentOutOfRange) when a component leaves its range.
RewardBreakdown compose(double r_outcome, double r_nest, double r_child, double r_format);

// Deterministic operand extraction from free-form answer text: the last
// "[a, b]" pair, the last "[x1, y1, x2, y2]" quadruple, the last real literal.
std::optional<Interval> extract_interval(std::string_view answer_text);
std::optional<Box> extract_box(std::string_view answer_text);
std::optional<double> extract_number(std::string_view answer_text);

}  // namespace nest
