#include "doctest.h"
#include "support.hpp"

#include "curricula/error.hpp"
#include "curricula/ingest.hpp"
#include "curricula/rng.hpp"

#include <stdexcept>

using namespace curricula;
using test_support::TempDir;

namespace {

std::string golden_template() {
    return test_support::read_bytes(std::filesystem::path(CURRICULA_SOURCE_DIR) / "templates" / "instruction.golden");
}

std::string random_plain(Rng& r, std::size_t max_len) {
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz ABC:#?!.,0123456789";
    std::string s;
    const std::size_t n = 1 + r.below(max_len);
    for (std::size_t i = 0; i < n; ++i) s += alphabet[r.below(alphabet.size())];
    return s;
}

// Splits a two-round rendering on its literal delimiters.
std::vector<std::string> split_two_rounds(const std::string& s) {
    const std::string p0 = "User: ", p1 = " Bot: ", p2 = " ### Instruction: ", p3 = " ### Response: ";
    if (s.rfind(p0, 0) != 0) return {};
    const auto i1 = s.find(p1, p0.size());
    const auto i2 = s.find(p2, i1 + p1.size());
    const auto i3 = s.find(p3, i2 + p2.size());
    if (i1 == std::string::npos || i2 == std::string::npos || i3 == std::string::npos) return {};
    return {s.substr(p0.size(), i1 - p0.size()), s.substr(i1 + p1.size(), i2 - i1 - p1.size()),
            s.substr(i2 + p2.size(), i3 - i2 - p2.size()), s.substr(i3 + p3.size())};
}

} // namespace

TEST_SUITE("ingest") {
TEST_CASE("parallel splicing") {
    CHECK(format_parallel("hello", "nihao") == "hello\nnihao");
    CHECK(format_parallel("a", "a") == "a\na");
    // inner newlines are preserved, so the splice point is not recoverable
    CHECK(format_parallel("x\ny", "z") == std::string("x\ny") + "\n" + "z");
    CHECK_THROWS_AS(format_parallel("", "z"), std::invalid_argument);
    CHECK_THROWS_AS(format_parallel("x", ""), std::invalid_argument);
}

TEST_CASE("instruction template matches the golden file") {
    const InstructionRecord two{{{"{question-1}", "{answer-1}"}, {"{question-2}", "{answer-2}"}}};
    CHECK(format_instruction(two) == golden_template());

    // one round is the golden text up to the second-round delimiter
    const auto golden = golden_template();
    const InstructionRecord one{{{"{question-1}", "{answer-1}"}}};
    CHECK(format_instruction(one) == golden.substr(0, golden.find(" ### Instruction: ")));
    CHECK(format_instruction({{{"q", "a"}}}) == "User: q Bot: a");
}

TEST_CASE("instruction rounds beyond two repeat the second-round pattern") {
    const InstructionRecord r{{{"q1", "a1"}, {"q2", "a2"}, {"q3", "a3"}}};
    CHECK(format_instruction(r) ==
          "User: q1 Bot: a1 ### Instruction: q2 ### Response: a2 ### Instruction: q3 ### Response: a3");
}

TEST_CASE("instruction errors") {
    CHECK_THROWS_AS(format_instruction({}), std::invalid_argument);
    CHECK_THROWS_AS(format_instruction({{{"", "a"}}}), std::invalid_argument);
    CHECK_THROWS_AS(format_instruction({{{"q", "a"}, {"q", ""}}}), std::invalid_argument);
}

TEST_CASE("two-round rendering splits back into its fields") {
    Rng r(3);
    for (int i = 0; i < 2000; ++i) {
        std::vector<std::string> f;
        for (int k = 0; k < 4; ++k) f.push_back(random_plain(r, 20));
        bool clean = true;
        for (const auto& x : f) {
            for (const char* d : {"User: ", " Bot: ", " ### Instruction: ", " ### Response: "}) {
                clean = clean && x.find(d) == std::string::npos;
            }
            clean = clean && x.find(" Bot:") == std::string::npos && x.find(" ###") == std::string::npos;
        }
        if (!clean) continue;
        const auto s = format_instruction({{{f[0], f[1]}, {f[2], f[3]}}});
        CHECK(split_two_rounds(s) == f);
        CHECK(s.ends_with(" ### Response: " + f[3]));
    }
}

TEST_CASE("render_record") {
    CHECK(render_record(R"({"text":"abc"})", SourceFamily::corpus) == "abc");
    CHECK(render_record("{\"text\":\"abc\"}\r", SourceFamily::corpus) == "abc");
    CHECK(render_record(R"({"src":"hello","tgt":"nihao"})", SourceFamily::parallel) == "hello\nnihao");
    CHECK(render_record(R"({"rounds":[{"q":"Q","a":"A"}]})", SourceFamily::instruction) == "User: Q Bot: A");
    CHECK_THROWS_AS(render_record(R"({"text":""})", SourceFamily::corpus), std::invalid_argument);
    CHECK_THROWS_AS(render_record(R"({"text":1})", SourceFamily::corpus), std::invalid_argument);
    CHECK_THROWS_AS(render_record("{not json", SourceFamily::corpus), std::invalid_argument);
    CHECK_THROWS_AS(render_record("[1]", SourceFamily::corpus), std::invalid_argument);
    CHECK_THROWS_AS(render_record("", SourceFamily::corpus), std::invalid_argument);
    CHECK_THROWS_AS(render_record(R"({"src":"x"})", SourceFamily::parallel), std::invalid_argument);
    CHECK_THROWS_AS(render_record(R"({"rounds":[]})", SourceFamily::instruction), std::invalid_argument);
    CHECK_THROWS_AS(render_record(R"({"rounds":[{"q":"Q"}]})", SourceFamily::instruction), std::invalid_argument);
}

TEST_CASE("read_corpus") {
    TempDir dir("ingest");
    const auto p = dir / "c.jsonl";
    test_support::write_lines(p, {R"({"text":"abc"})", R"({"text":"de"})", R"({"text":"f"})"});
    const auto v = read_corpus({"c", p, TaskKind::corpus_en, std::nullopt});
    REQUIRE(v.size() == 3);
    CHECK(v[0].text == "abc");
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(v[i].ordinal == i);
        CHECK(v[i].dataset == "c");
        CHECK(v[i].task == TaskKind::corpus_en);
    }
    // replayable
    const auto w = read_corpus({"c", p, TaskKind::corpus_en, std::nullopt});
    for (std::size_t i = 0; i < 3; ++i) CHECK(w[i].text == v[i].text);
}

TEST_CASE("malformed records under each policy") {
    TempDir dir("ingest");
    const auto p = dir / "c.jsonl";
    test_support::write_lines(p, {R"({"text":"a"})", R"({"text":""})", R"({"text":"c"})"});
    const DatasetSpec spec{"bad", p, TaskKind::corpus_en, std::nullopt};
    try {
        read_corpus(spec);
        FAIL("expected a record error");
    } catch (const RecordError& e) {
        CHECK(e.dataset() == "bad");
        CHECK(e.line() == 1);
        CHECK(std::string(e.what()).find("bad:2:") == 0);
    }
    const auto v = read_corpus(spec, MalformedPolicy::skip);
    REQUIRE(v.size() == 2);
    CHECK(v[0].ordinal == 0);
    CHECK(v[1].ordinal == 2);

    DatasetReader reader(spec, SourceFamily::corpus, MalformedPolicy::skip);
    while (reader.next()) {
    }
    CHECK(reader.skipped() == 1);
}

TEST_CASE("empty and missing files") {
    TempDir dir("ingest");
    test_support::write_text(dir / "empty.jsonl", "");
    CHECK(read_parallel({"e", dir / "empty.jsonl", TaskKind::parallel, std::nullopt}).empty());
    CHECK_THROWS_AS(read_corpus({"m", dir / "missing.jsonl", TaskKind::corpus_en, std::nullopt}), InputError);
}

TEST_CASE("read_parallel and read_instruction") {
    TempDir dir("ingest");
    test_support::write_lines(dir / "p.jsonl", {R"({"src":"hello","tgt":"nihao"})"});
    test_support::write_lines(dir / "i.jsonl", {R"({"rounds":[{"q":"Q","a":"A"}]})",
                                                R"({"rounds":[{"q":"Q1","a":"A1"},{"q":"Q2","a":"A2"}]})"});
    const auto p = read_parallel({"p", dir / "p.jsonl", TaskKind::parallel, std::nullopt});
    REQUIRE(p.size() == 1);
    CHECK(p[0].text == "hello\nnihao");
    const auto i = read_instruction({"i", dir / "i.jsonl", TaskKind::instruction_en, std::nullopt});
    REQUIRE(i.size() == 2);
    CHECK(i[0].text == "User: Q Bot: A");
    CHECK(i[1].text == "User: Q1 Bot: A1 ### Instruction: Q2 ### Response: A2");
    // read_dataset picks the format from the task kind
    CHECK(read_dataset({"i", dir / "i.jsonl", TaskKind::instruction_target, std::nullopt})[0].text == i[0].text);
}

TEST_CASE("record file indexing and weights") {
    TempDir dir("ingest");
    const auto p = dir / "c.jsonl";
    test_support::write_lines(p, {R"({"text":"a"})", "garbage", R"({"text":"ccc"})"});
    CHECK_THROWS_AS(RecordFile({"c", p, TaskKind::corpus_en, std::nullopt}, MalformedPolicy::abort), RecordError);

    RecordFile f({"c", p, TaskKind::corpus_en, std::nullopt}, MalformedPolicy::skip);
    CHECK(f.lines() == 3);
    CHECK(f.valid_count() == 2);
    CHECK(f.skipped() == 1);
    CHECK_FALSE(f.valid(1));
    CHECK(f.file_bytes() == std::filesystem::file_size(p));
    CHECK(f.weight() == double(std::filesystem::file_size(p)));
    auto in = f.open();
    CHECK(f.instance(2, in).text == "ccc");
    CHECK(f.instance(0, in).text == "a");
    CHECK(f.instance(2, in).ordinal == 2);

    RecordFile g({"c", p, TaskKind::corpus_en, 2.5}, MalformedPolicy::skip);
    CHECK(g.weight() == 2.5);
    CHECK_THROWS_AS(RecordFile({"c", p, TaskKind::corpus_en, 0.0}, MalformedPolicy::skip), ConfigError);
}

TEST_CASE("policy names") {
    CHECK(parse_malformed_policy("skip") == MalformedPolicy::skip);
    CHECK(parse_malformed_policy(to_string(MalformedPolicy::abort)) == MalformedPolicy::abort);
    CHECK_FALSE(parse_malformed_policy("ignore").has_value());
}
}
