#include "nest/trajectory.hpp"

#include <charconv>

#include "nest/error.hpp"
#include "nest/text.hpp"

namespace nest::traj {

namespace {

constexpr std::string_view kTurnPrefix = "# Turn ";
constexpr std::string_view kAnswerHeader = "# Answer";
constexpr std::string_view kSelectPrefix = "## Select: Turn ";
constexpr std::string_view kExpandPrefix = "## Expand: ";
constexpr std::string_view kActionPrefix = "## Action: ";
constexpr std::string_view kObservationTag = "## Observation";
constexpr std::string_view kScorePrefix = "## Score: ";
constexpr std::string_view kBackPrefix = "## Back: Turn ";

// Canonical decimal: no sign, no leading zeros, at most 9 digits.
std::optional<int> parse_canonical_int(std::string_view s) {
  if (s.empty() || s.size() > 9) return std::nullopt;
  if (s.size() > 1 && s[0] == '0') return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Splits into lines keeping empty pieces, so "" -> [""] and "a\n" -> ["a", ""].
std::vector<std::string> body_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (;;) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(s.substr(start));
      return lines;
    }
    lines.emplace_back(s.substr(start, nl - start));
    start = nl + 1;
  }
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

void check_single_line(const std::string& value, const std::string& what) {
  if (value.find('\n') != std::string::npos || value.find('\r') != std::string::npos)
    fail(ErrorCode::InvariantViolation, what + " must be a single line");
  if (text::has_trailing_ws(value))
    fail(ErrorCode::InvariantViolation, what + " must not carry trailing whitespace");
}

void check_body_text(const std::string& value, const std::string& what) {
  for (const std::string& line : body_lines(value)) {
    if (!line.empty() && line[0] == '#')
      fail(ErrorCode::InvariantViolation, what + " lines must not begin with '#'");
    if (text::has_trailing_ws(line))
      fail(ErrorCode::InvariantViolation, what + " lines must not carry trailing whitespace");
  }
}

// --------------------------------------------------------------------------
// Parser / validator state machine
// --------------------------------------------------------------------------

struct Machine {
  bool collect_all = false;
  std::vector<Violation> violations;
  TrajectoryDoc doc;

  enum class Scope { Top, Turn, ObsBody, AnswerBody, Done };
  enum class Phase { PreAction, AfterAction, AfterObservation, AfterBack };

  Scope scope = Scope::Top;
  Phase phase = Phase::PreAction;
  TurnBlock cur;
  bool seen_select = false;
  std::vector<std::string> body;

  void report(int line, ViolationCode code, std::string message) {
    Violation v{line, code, std::move(message)};
    if (!collect_all) throw FormatError(std::move(v));
    violations.push_back(std::move(v));
  }

  void close_turn(int line) {
    if (phase == Phase::PreAction)
      report(line, ViolationCode::OutOfOrder,
             "turn " + std::to_string(cur.index) + " has no action line");
    doc.turns.push_back(std::move(cur));
    cur = TurnBlock{};
    seen_select = false;
    scope = Scope::Top;
  }

  void open_turn(int line, int claimed_index) {
    int expected = static_cast<int>(doc.turns.size()) + 1;
    if (claimed_index != expected)
      report(line, ViolationCode::OutOfOrder,
             "expected turn " + std::to_string(expected) + ", found turn " +
                 std::to_string(claimed_index));
    cur = TurnBlock{};
    cur.index = claimed_index;
    seen_select = false;
    phase = Phase::PreAction;
    scope = Scope::Turn;
  }

  void handle_header(int line, const std::string& text_line) {
    if (text_line == kAnswerHeader) {
      body.clear();
      scope = Scope::AnswerBody;
      return;
    }
    if (text_line.rfind(kTurnPrefix, 0) == 0) {
      auto idx = parse_canonical_int(std::string_view(text_line).substr(kTurnPrefix.size()));
      if (!idx || *idx < 1) {
        report(line, ViolationCode::BadHeader, "malformed turn header");
        return;
      }
      open_turn(line, *idx);
      return;
    }
    report(line, ViolationCode::BadHeader, "unrecognized header line");
  }

  void handle_ref_tag(int line, std::string_view payload, ViolationCode bad_tag_code,
                      const char* what, std::optional<int>& slot) {
    auto ref = parse_canonical_int(payload);
    if (!ref) {
      report(line, bad_tag_code, std::string("malformed ") + what + " reference");
      return;
    }
    if (*ref < 1 || *ref >= cur.index) {
      report(line, ViolationCode::DanglingRef,
             std::string(what) + " reference must name an earlier turn");
      return;
    }
    slot = *ref;
  }

  void handle_turn_tag(int line, const std::string& text_line) {
    std::string_view sv(text_line);
    if (sv.rfind(kSelectPrefix, 0) == 0) {
      if (phase != Phase::PreAction || seen_select || !cur.expansions.empty()) {
        report(line, ViolationCode::OutOfOrder, "select must open the turn");
        return;
      }
      seen_select = true;
      handle_ref_tag(line, sv.substr(kSelectPrefix.size()), ViolationCode::UnknownTag,
                     "select", cur.select_ref);
      return;
    }
    if (sv.rfind(kExpandPrefix, 0) == 0) {
      if (phase != Phase::PreAction) {
        report(line, ViolationCode::OutOfOrder, "expand must precede the action");
        return;
      }
      cur.expansions.emplace_back(sv.substr(kExpandPrefix.size()));
      return;
    }
    if (sv.rfind(kActionPrefix, 0) == 0) {
      if (phase != Phase::PreAction) {
        report(line, ViolationCode::OutOfOrder, "turn already has an action");
        return;
      }
      std::string_view payload = sv.substr(kActionPrefix.size());
      std::size_t lparen = payload.find('(');
      if (lparen == std::string_view::npos || payload.empty() || payload.back() != ')') {
        report(line, ViolationCode::UnknownTag, "malformed action line");
        return;
      }
      std::string_view skill = payload.substr(0, lparen);
      if (!text::is_snake_ident(skill)) {
        report(line, ViolationCode::UnknownTag, "action skill must be lowercase snake_case");
        return;
      }
      cur.skill = std::string(skill);
      cur.argument = std::string(payload.substr(lparen + 1, payload.size() - lparen - 2));
      phase = Phase::AfterAction;
      return;
    }
    if (sv == kObservationTag) {
      if (phase == Phase::PreAction) {
        report(line, ViolationCode::OutOfOrder, "observation before action");
      } else if (phase != Phase::AfterAction) {
        report(line, ViolationCode::OutOfOrder, "turn already closed its observation");
      } else {
        body.clear();
        scope = Scope::ObsBody;
      }
      return;
    }
    if (sv.rfind(kScorePrefix, 0) == 0) {
      report(line, ViolationCode::OutOfOrder, "score outside an observation block");
      return;
    }
    if (sv.rfind(kBackPrefix, 0) == 0) {
      if (phase == Phase::PreAction) {
        report(line, ViolationCode::OutOfOrder, "back before action");
        return;
      }
      if (phase == Phase::AfterBack) {
        report(line, ViolationCode::OutOfOrder, "turn already has a back line");
        return;
      }
      handle_ref_tag(line, sv.substr(kBackPrefix.size()), ViolationCode::UnknownTag,
                     "back", cur.back_ref);
      phase = Phase::AfterBack;
      return;
    }
    report(line, ViolationCode::UnknownTag, "unknown tag line");
  }

  // Returns true when the line was consumed; false asks the caller to
  // reprocess it in the enclosing scope (body closed by a non-score line).
  bool handle_obs_body(int line, const std::string& text_line) {
    if (text_line.empty() || text_line[0] != '#') {
      body.push_back(text_line);
      return true;
    }
    std::string_view sv(text_line);
    if (sv.rfind(kScorePrefix, 0) == 0) {
      if (body.empty())
        report(line, ViolationCode::OutOfOrder,
               "observation body must contain at least one line");
      auto score = parse_canonical_int(sv.substr(kScorePrefix.size()));
      if (!score) {
        report(line, ViolationCode::UnknownTag, "malformed score line");
      } else if (*score < 0 || *score > 100) {
        report(line, ViolationCode::ScoreRange, "score must lie in [0, 100]");
      } else {
        cur.score = *score;
      }
      cur.observation = join_lines(body);
      scope = Scope::Turn;
      phase = Phase::AfterObservation;
      return true;
    }
    report(line, ViolationCode::MissingScore, "observation not closed by a score line");
    cur.observation = join_lines(body);
    scope = Scope::Turn;
    phase = Phase::AfterObservation;
    return false;
  }

  bool handle_answer_body(int line, const std::string& text_line) {
    if (text_line.empty() || text_line[0] != '#') {
      body.push_back(text_line);
      return true;
    }
    if (body.empty())
      report(line, ViolationCode::OutOfOrder, "answer body must contain at least one line");
    doc.answer = join_lines(body);
    if (text_line == kAnswerHeader)
      report(line, ViolationCode::DuplicateAnswer, "document already has an answer");
    else
      report(line, ViolationCode::TrailingGarbage, "content after the answer block");
    scope = Scope::Done;
    return true;
  }

  void run(std::string_view input) {
    std::vector<std::string> lines = text::split_lines(input);
    if (!input.empty() && !text::ends_with_newline(input))
      report(static_cast<int>(lines.size()), ViolationCode::TrailingGarbage,
             "missing final newline");

    for (std::size_t i = 0; i < lines.size(); ++i) {
      int line = static_cast<int>(i) + 1;
      std::string text_line = lines[i];
      if (text_line.find('\r') != std::string::npos) {
        report(line, ViolationCode::TrailingGarbage, "carriage return in line");
        std::erase(text_line, '\r');
      }
      if (text::has_trailing_ws(text_line)) {
        report(line, ViolationCode::TrailingGarbage, "trailing whitespace");
        while (text::has_trailing_ws(text_line)) text_line.pop_back();
      }

      bool reprocess = true;
      while (reprocess) {
        reprocess = false;
        switch (scope) {
          case Scope::Top:
            if (!text_line.empty() && text_line[0] == '#') {
              if (text_line.rfind("##", 0) == 0)
                report(line, ViolationCode::OutOfOrder, "tag outside of a turn");
              else
                handle_header(line, text_line);
            } else {
              report(line, ViolationCode::TrailingGarbage, "unexpected text line");
            }
            break;
          case Scope::Turn:
            if (!text_line.empty() && text_line[0] == '#') {
              if (text_line.rfind("##", 0) == 0) {
                handle_turn_tag(line, text_line);
              } else {
                close_turn(line);
                handle_header(line, text_line);
              }
            } else {
              report(line, ViolationCode::TrailingGarbage, "unexpected text line in turn");
            }
            break;
          case Scope::ObsBody:
            reprocess = !handle_obs_body(line, text_line);
            break;
          case Scope::AnswerBody:
            handle_answer_body(line, text_line);
            break;
          case Scope::Done:
            break;  // first offender already reported; swallow the rest
        }
      }
    }

    int eof_line = static_cast<int>(lines.size()) + 1;
    switch (scope) {
      case Scope::ObsBody:
        report(eof_line, ViolationCode::MissingScore, "observation not closed by a score line");
        cur.observation = join_lines(body);
        close_turn(eof_line);
        break;
      case Scope::Turn:
        close_turn(eof_line);
        break;
      case Scope::AnswerBody:
        if (body.empty())
          report(eof_line, ViolationCode::OutOfOrder,
                 "answer body must contain at least one line");
        else
          doc.answer = join_lines(body);
        break;
      case Scope::Top:
      case Scope::Done:
        break;
    }

    if (violations.empty() && doc.turns.empty() && !doc.answer)
      report(1, ViolationCode::BadHeader, "empty document");
  }
};

}  // namespace

const char* violation_code_name(ViolationCode code) {
  switch (code) {
    case ViolationCode::BadHeader: return "BadHeader";
    case ViolationCode::OutOfOrder: return "OutOfOrder";
    case ViolationCode::UnknownTag: return "UnknownTag";
    case ViolationCode::MissingScore: return "MissingScore";
    case ViolationCode::ScoreRange: return "ScoreRange";
    case ViolationCode::DanglingRef: return "DanglingRef";
    case ViolationCode::DuplicateAnswer: return "DuplicateAnswer";
    case ViolationCode::TrailingGarbage: return "TrailingGarbage";
  }
  return "Unknown";
}

std::string serialize(const TrajectoryDoc& doc) {
  if (doc.turns.empty() && !doc.answer)
    fail(ErrorCode::InvariantViolation, "document must contain at least one turn or an answer");

  std::string out;
  for (std::size_t i = 0; i < doc.turns.size(); ++i) {
    const TurnBlock& turn = doc.turns[i];
    int expected = static_cast<int>(i) + 1;
    if (turn.index != expected)
      fail(ErrorCode::InvariantViolation,
           "turn indices must run 1..n, found " + std::to_string(turn.index) +
               " at position " + std::to_string(expected));
    if (!text::is_snake_ident(turn.skill))
      fail(ErrorCode::InvariantViolation, "skill must be non-empty lowercase snake_case");
    check_single_line(turn.argument, "action argument");
    if (turn.select_ref && (*turn.select_ref < 1 || *turn.select_ref >= turn.index))
      fail(ErrorCode::InvariantViolation, "select reference must name an earlier turn");
    if (turn.back_ref && (*turn.back_ref < 1 || *turn.back_ref >= turn.index))
      fail(ErrorCode::InvariantViolation, "back reference must name an earlier turn");
    if (turn.observation.has_value() != turn.score.has_value())
      fail(ErrorCode::InvariantViolation, "observation and score must appear together");
    if (turn.score && (*turn.score < 0 || *turn.score > 100))
      fail(ErrorCode::InvariantViolation, "score must lie in [0, 100]");
    if (turn.observation) check_body_text(*turn.observation, "observation");
    for (const std::string& expansion : turn.expansions) {
      if (expansion.empty())
        fail(ErrorCode::InvariantViolation, "expansion text must be non-empty");
      check_single_line(expansion, "expansion");
    }

    out += "# Turn ";
    out += std::to_string(turn.index);
    out += '\n';
    if (turn.select_ref) {
      out += "## Select: Turn ";
      out += std::to_string(*turn.select_ref);
      out += '\n';
    }
    for (const std::string& expansion : turn.expansions) {
      out += "## Expand: ";
      out += expansion;
      out += '\n';
    }
    out += "## Action: ";
    out += turn.skill;
    out += '(';
    out += turn.argument;
    out += ")\n";
    if (turn.observation) {
      out += "## Observation\n";
      for (const std::string& line : body_lines(*turn.observation)) {
        out += line;
        out += '\n';
      }
      out += "## Score: ";
      out += std::to_string(*turn.score);
      out += '\n';
    }
    if (turn.back_ref) {
      out += "## Back: Turn ";
      out += std::to_string(*turn.back_ref);
      out += '\n';
    }
  }

  if (doc.answer) {
    check_body_text(*doc.answer, "answer");
    out += "# Answer\n";
    for (const std::string& line : body_lines(*doc.answer)) {
      out += line;
      out += '\n';
    }
  }
  return out;
}

TrajectoryDoc parse(std::string_view input) {
  Machine machine;
  machine.collect_all = false;
  machine.run(input);
  return std::move(machine.doc);
}

FormatReport validate(std::string_view input) {
  Machine machine;
  machine.collect_all = true;
  machine.run(input);
  FormatReport report;
  report.violations = std::move(machine.violations);
  report.valid = report.violations.empty();
  return report;
}

ObservationBlock parse_observation_block(std::string_view input) {
  // Lenient fragment parser for solver replies: leading chatter is skipped,
  // per-line trailing whitespace and CR are tolerated.
  std::string lf;
  lf.reserve(input.size());
  for (char c : input)
    if (c != '\r') lf.push_back(c);
  std::vector<std::string> lines = text::split_lines(lf);
  for (std::string& line : lines)
    while (text::has_trailing_ws(line)) line.pop_back();

  std::size_t i = 0;
  while (i < lines.size() && lines[i] != kObservationTag) ++i;
  if (i == lines.size())
    fail(ErrorCode::ParseError, "reply has no observation block");
  ++i;

  std::vector<std::string> body;
  std::optional<int> score;
  for (; i < lines.size(); ++i) {
    std::string_view sv(lines[i]);
    if (sv.rfind(kScorePrefix, 0) == 0) {
      std::string digits = text::trim(sv.substr(kScorePrefix.size()));
      int value = 0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
      if (ec != std::errc() || ptr != digits.data() + digits.size())
        fail(ErrorCode::ParseError, "malformed score line in reply");
      if (value < 0 || value > 100)
        fail(ErrorCode::RangeError, "reply score " + digits + " outside [0, 100]");
      score = value;
      ++i;
      break;
    }
    if (!sv.empty() && sv[0] == '#')
      fail(ErrorCode::ParseError, "observation not closed by a score line");
    body.emplace_back(sv);
  }
  if (!score) fail(ErrorCode::ParseError, "reply observation block has no score line");

  ObservationBlock block;
  block.observation = join_lines(body);
  block.score = *score;

  while (i < lines.size() && lines[i].empty()) ++i;
  if (i < lines.size() && lines[i] == kAnswerHeader) {
    ++i;
    std::vector<std::string> answer_lines(lines.begin() + static_cast<std::ptrdiff_t>(i),
                                          lines.end());
    while (!answer_lines.empty() && answer_lines.back().empty()) answer_lines.pop_back();
    block.answer = join_lines(answer_lines);
  }
  return block;
}

}  // namespace nest::traj
