#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nest/error.hpp"
#include "nest/trajectory.hpp"
#include "support.hpp"

using namespace nest;
using namespace nest::traj;

namespace {

TrajectoryDoc one_turn_doc() {
  TrajectoryDoc doc;
  TurnBlock turn;
  turn.index = 1;
  turn.skill = "caption";
  turn.argument = "frame 3";
  turn.observation = "a dog";
  turn.score = 70;
  doc.turns.push_back(turn);
  return doc;
}

bool first_violation(const std::string& text, ViolationCode code, int line) {
  try {
    parse(text);
  } catch (const FormatError& e) {
    CHECK(e.code() == code);
    CHECK(e.line() == line);
    return e.code() == code && e.line() == line;
  }
  return false;
}

}  // namespace

TEST_CASE("serialize: single turn matches the grammar byte for byte") {
  CHECK(serialize(one_turn_doc()) ==
        "# Turn 1\n## Action: caption(frame 3)\n## Observation\na dog\n## Score: 70\n");
}

TEST_CASE("serialize: answer-only doc") {
  TrajectoryDoc doc;
  doc.answer = "B";
  CHECK(serialize(doc) == "# Answer\nB\n");
}

TEST_CASE("serialize: full tag set in order") {
  TrajectoryDoc doc = one_turn_doc();
  TurnBlock turn;
  turn.index = 2;
  turn.select_ref = 1;
  turn.expansions = {"try the left half", "try the right half"};
  turn.skill = "spatial_grounding";
  turn.argument = "left half";
  turn.observation = "nothing there\nstill nothing";
  turn.score = 10;
  turn.back_ref = 1;
  doc.turns.push_back(turn);
  doc.answer = "C";
  CHECK(serialize(doc) ==
        "# Turn 1\n## Action: caption(frame 3)\n## Observation\na dog\n## Score: 70\n"
        "# Turn 2\n## Select: Turn 1\n## Expand: try the left half\n"
        "## Expand: try the right half\n## Action: spatial_grounding(left half)\n"
        "## Observation\nnothing there\nstill nothing\n## Score: 10\n## Back: Turn 1\n"
        "# Answer\nC\n");
}

TEST_CASE("serialize: invariant violations are rejected") {
  TrajectoryDoc doc;
  CHECK_THROWS_AS(serialize(doc), Error);  // empty doc

  doc = one_turn_doc();
  doc.turns[0].back_ref = 1;  // back_ref must be < index
  CHECK_THROWS_AS(serialize(doc), Error);

  doc = one_turn_doc();
  doc.turns[0].score.reset();  // observation without score
  CHECK_THROWS_AS(serialize(doc), Error);

  doc = one_turn_doc();
  doc.turns[0].skill = "Caption";  // not snake_case
  CHECK_THROWS_AS(serialize(doc), Error);

  doc = one_turn_doc();
  doc.turns[0].argument = "two\nlines";
  CHECK_THROWS_AS(serialize(doc), Error);

  doc = one_turn_doc();
  doc.turns[0].observation = "# not a body line";
  CHECK_THROWS_AS(serialize(doc), Error);

  doc = one_turn_doc();
  doc.turns[0].expansions = {""};
  CHECK_THROWS_AS(serialize(doc), Error);

  doc = one_turn_doc();
  doc.turns[0].index = 2;
  CHECK_THROWS_AS(serialize(doc), Error);
}

TEST_CASE("parse: round-trips the serialize example") {
  TrajectoryDoc doc = one_turn_doc();
  CHECK(parse(serialize(doc)) == doc);
}

TEST_CASE("parse: first-block contiguity") {
  CHECK(first_violation("# Turn 2\n## Action: caption(x)\n", ViolationCode::OutOfOrder, 1));
}

TEST_CASE("parse: observation without a score line") {
  CHECK(first_violation("# Turn 1\n## Action: caption(x)\n## Observation\na dog\n",
                        ViolationCode::MissingScore, 5));
  CHECK(first_violation(
      "# Turn 1\n## Action: caption(x)\n## Observation\na dog\n## Back: Turn 1\n",
      ViolationCode::MissingScore, 5));
}

TEST_CASE("parse: empty input is not a document") {
  CHECK(first_violation("", ViolationCode::BadHeader, 1));
}

TEST_CASE("parse: answer body may hold an empty line") {
  TrajectoryDoc doc;
  doc.answer = "";
  std::string text = serialize(doc);
  CHECK(text == "# Answer\n\n");
  CHECK(parse(text) == doc);
}

TEST_CASE("validate: collects every violation with line numbers") {
  std::string text =
      "# Turn 1\n"
      "## Acton: caption(x)\n"   // 2: UnknownTag
      "## Action: caption(x)\n"
      "## Observation\n"
      "a dog\n"
      "## Score: 250\n"          // 6: ScoreRange
      "# Turn 2\n"
      "## Action: caption(y)\n"
      "## Back: Turn 5\n"        // 9: DanglingRef
      "# Answer\nB\n";
  FormatReport report = validate(text);
  CHECK_FALSE(report.valid);
  REQUIRE(report.violations.size() == 3);
  CHECK(report.violations[0].line == 2);
  CHECK(report.violations[0].code == ViolationCode::UnknownTag);
  CHECK(report.violations[1].line == 6);
  CHECK(report.violations[1].code == ViolationCode::ScoreRange);
  CHECK(report.violations[2].line == 9);
  CHECK(report.violations[2].code == ViolationCode::DanglingRef);
}

TEST_CASE("validate: specific codes") {
  CHECK(validate("# Turn 1\n## Action: caption(x)\n").valid);

  auto code_of = [](const std::string& text) {
    FormatReport report = validate(text);
    REQUIRE_FALSE(report.valid);
    return report.violations.front().code;
  };

  CHECK(code_of("# Turno 1\n## Action: caption(x)\n") == ViolationCode::BadHeader);
  CHECK(code_of("# Turn 1\n## Action: caption(x)\n# Turn 3\n## Action: caption(y)\n") ==
        ViolationCode::OutOfOrder);
  CHECK(code_of("# Turn 1\n## Acton: caption(x)\n## Action: caption(x)\n") ==
        ViolationCode::UnknownTag);
  CHECK(code_of("# Turn 1\n## Action: caption(x)\n## Observation\nz\n") ==
        ViolationCode::MissingScore);
  CHECK(code_of("# Turn 1\n## Action: caption(x)\n## Observation\nz\n## Score: 101\n") ==
        ViolationCode::ScoreRange);
  CHECK(code_of("# Turn 1\n## Select: Turn 1\n## Action: caption(x)\n") ==
        ViolationCode::DanglingRef);
  CHECK(code_of("# Answer\nB\n# Answer\nC\n") == ViolationCode::DuplicateAnswer);
  CHECK(code_of("# Answer\nB\nloose text is fine\n# Turn 1\n## Action: caption(x)\n") ==
        ViolationCode::TrailingGarbage);
  CHECK(code_of("loose text\n") == ViolationCode::TrailingGarbage);
  CHECK(code_of("# Turn 1\n## Action: caption(x)\n## Score: 10\n") ==
        ViolationCode::OutOfOrder);  // score outside an observation
  CHECK(code_of("# Turn 1\n## Action: caption(x)") == ViolationCode::TrailingGarbage);
  CHECK(code_of("# Turn 1\n## Action: caption(x) \n") == ViolationCode::TrailingGarbage);
}

TEST_CASE("validate: structural order inside a turn") {
  FormatReport report =
      validate("# Turn 1\n## Action: caption(x)\n## Expand: too late\n");
  REQUIRE_FALSE(report.valid);
  CHECK(report.violations.front().code == ViolationCode::OutOfOrder);
  CHECK(report.violations.front().line == 3);

  report = validate("# Turn 1\n## Observation\nz\n## Score: 5\n");
  REQUIRE_FALSE(report.valid);
  CHECK(report.violations.front().code == ViolationCode::OutOfOrder);
  CHECK(report.violations.front().line == 2);

  report = validate("# Turn 2\n## Select: Turn 1\n## Action: caption(x)\n");
  REQUIRE_FALSE(report.valid);  // first turn must be 1
  CHECK(report.violations.front().line == 1);
}

TEST_CASE("validate: resynchronizes after a missing score without extra noise") {
  FormatReport report = validate(
      "# Turn 1\n## Action: caption(x)\n## Observation\nbody\n"
      "# Turn 2\n## Action: caption(y)\n");
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].code == ViolationCode::MissingScore);
  CHECK(report.violations[0].line == 5);
}

TEST_CASE("validate: select ordering within a turn") {
  FormatReport twice = validate(
      "# Turn 1\n## Action: caption(x)\n"
      "# Turn 2\n## Select: Turn 1\n## Select: Turn 1\n## Action: caption(y)\n");
  REQUIRE_FALSE(twice.valid);
  CHECK(twice.violations.front().code == ViolationCode::OutOfOrder);
  CHECK(twice.violations.front().line == 5);

  FormatReport late = validate(
      "# Turn 1\n## Action: caption(x)\n"
      "# Turn 2\n## Expand: idea\n## Select: Turn 1\n## Action: caption(y)\n");
  REQUIRE_FALSE(late.valid);
  CHECK(late.violations.front().code == ViolationCode::OutOfOrder);
  CHECK(late.violations.front().line == 5);
}

TEST_CASE("property: parse(serialize(doc)) is the identity on 500 random docs") {
  testsup::Rng rng(20240811);
  for (int i = 0; i < 500; ++i) {
    TrajectoryDoc doc = testsup::random_doc(rng);
    std::string text = serialize(doc);
    TrajectoryDoc parsed = parse(text);
    REQUIRE(parsed == doc);
    REQUIRE(serialize(parsed) == text);  // idempotence
    REQUIRE(validate(text).valid);
  }
}

TEST_CASE("property: single-tag corruptions are rejected on the right line") {
  testsup::Rng rng(7151);
  int corruptions = 0;
  for (int i = 0; i < 60; ++i) {
    TrajectoryDoc doc = testsup::random_doc(rng);
    std::string text = serialize(doc);
    for (const testsup::Corruption& corruption : testsup::enumerate_corruptions(text)) {
      ++corruptions;
      FormatReport report = validate(corruption.text);
      INFO("kind=", corruption.kind, " expected line=", corruption.line);
      REQUIRE_FALSE(report.valid);
      REQUIRE(report.violations.front().line == corruption.line);
      try {
        parse(corruption.text);
        FAIL("parse accepted a corrupted document");
      } catch (const FormatError& e) {
        REQUIRE(e.line() == corruption.line);
      }
    }
  }
  CHECK(corruptions > 500);
}

TEST_CASE("property: arbitrary bytes never crash the validator") {
  testsup::Rng rng(31415);
  const std::string alphabet = "#T urn1:Sceo()\n\r\t aAnswer";
  for (int i = 0; i < 2000; ++i) {
    std::string noise;
    int length = rng.int_in(0, 120);
    for (int j = 0; j < length; ++j)
      noise.push_back(alphabet[static_cast<std::size_t>(rng.next() % alphabet.size())]);
    FormatReport report = validate(noise);
    for (const Violation& violation : report.violations) {
      REQUIRE(violation.line >= 1);
      REQUIRE(violation.line <= static_cast<int>(noise.size()) + 2);
    }
    try {
      TrajectoryDoc doc = parse(noise);
      REQUIRE(report.valid);           // parse accepted: validator must agree
      REQUIRE(serialize(doc) == noise);  // and only canonical bytes are accepted
    } catch (const FormatError&) {
      REQUIRE_FALSE(report.valid);
    }
  }
}

TEST_CASE("parse_observation_block: solver reply fragments") {
  ObservationBlock block = parse_observation_block("## Observation\ntwo dogs barking\n## Score: 85\n");
  CHECK(block.observation == "two dogs barking");
  CHECK(block.score == 85);
  CHECK_FALSE(block.answer.has_value());

  block = parse_observation_block(
      "noise before\n## Observation\nfound it\nat 3s\n## Score: 90\n# Answer\n[3.0, 4.0]\n");
  CHECK(block.observation == "found it\nat 3s");
  CHECK(block.score == 90);
  REQUIRE(block.answer.has_value());
  CHECK(*block.answer == "[3.0, 4.0]");

  try {
    parse_observation_block("## Observation\nno score here\n");
    FAIL("accepted a reply without a score line");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
  }
  try {
    parse_observation_block("## Observation\nx\n## Score: 400\n");
    FAIL("accepted an out-of-range score");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RangeError);
  }
}
