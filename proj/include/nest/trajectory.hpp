#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// The hierarchical reasoning-trace syntax. One construct per line, UTF-8, LF:
//
//   doc        := turn* answer? ;          (at least one turn or an answer)
//   turn       := header select? expand* action observation? back? ;
//   header     := "# Turn " INT NL ;
//   select     := "## Select: Turn " INT NL ;
//   expand     := "## Expand: " LINE NL ;
//   action     := "## Action: " SKILL "(" LINE ")" NL ;
//   observation:= "## Observation" NL BODY "## Score: " INT NL ;
//   back       := "## Back: Turn " INT NL ;
//   answer     := "# Answer" NL BODY ;
//   BODY       := one or more lines not beginning with "#" ;
//
// Serialization is byte-exact: canonical integers, no trailing whitespace on
// any line, LF endings, final newline. The parser accepts exactly what the
// serializer can emit, so parse and serialize are inverses on the valid set.

namespace nest::traj {

struct TurnBlock {
  int index = 0;
  std::optional<int> select_ref;
  std::vector<std::string> expansions;
  std::string skill;
  std::string argument;
  std::optional<std::string> observation;  // '\n'-joined body lines
  std::optional<int> score;                // present iff observation present
  std::optional<int> back_ref;

  bool operator==(const TurnBlock&) const = default;
};

struct TrajectoryDoc {
  std::vector<TurnBlock> turns;  // indices exactly 1..n
  std::optional<std::string> answer;

  bool operator==(const TrajectoryDoc&) const = default;
};

enum class ViolationCode {
  BadHeader,
  OutOfOrder,
  UnknownTag,
  MissingScore,
  ScoreRange,
  DanglingRef,
  DuplicateAnswer,
  TrailingGarbage,
};

const char* violation_code_name(ViolationCode code);

struct Violation {
  int line = 0;  // 1-based; line_count+1 marks end-of-input detections
  ViolationCode code = ViolationCode::BadHeader;
  std::string message;
};

struct FormatReport {
  bool valid = true;
  std::vector<Violation> violations;
};

class FormatError : public std::runtime_error {
public:
  explicit FormatError(Violation v)
      : std::runtime_error("line " + std::to_string(v.line) + ": " +
                           violation_code_name(v.code) + ": " + v.message),
        violation_(std::move(v)) {}

  const Violation& violation() const { return violation_; }
  int line() const { return violation_.line; }
  ViolationCode code() const { return violation_.code; }

private:
  Violation violation_;
};

// Throws nest::Error(InvariantViolation) when the doc breaks its invariants.
std::string serialize(const TrajectoryDoc& doc);

// Strict parse; throws FormatError carrying the first violation.
TrajectoryDoc parse(std::string_view text);

// Collects every violation it can attribute; valid <=> violations empty.
FormatReport validate(std::string_view text);

// A bare simulation-reply fragment: optional leading chatter, then
// "## Observation" NL BODY "## Score: " INT NL, optionally followed by
// "# Answer" NL BODY. Used as the wire shape for solver replies.
struct ObservationBlock {
  std::string observation;
  int score = 0;
  std::optional<std::string> answer;
};

// Throws nest::Error(ParseError) on shape violations and
// nest::Error(RangeError) when the score is outside [0, 100].
ObservationBlock parse_observation_block(std::string_view text);

}  // namespace nest::traj
