#include "curricula/error.hpp"
#include "curricula/ingest.hpp"
#include "curricula/synth.hpp"
#include "curricula/vocab.hpp"
#include "doctest.h"
#include "support.hpp"

#include <cmath>
#include <json.hpp>
#include <set>

using namespace curricula;
using test_support::TempDir;
using test_support::read_bytes;
using test_support::read_lines;

namespace {

SynthConfig small_synth(std::uint64_t seed = 11) {
    SynthConfig c;
    c.seed = seed;
    c.docs = 1000;
    c.eval_docs = 50;
    return c;
}

std::optional<InstructionTask> task_from_word(std::string_view w) {
    if (w == "copy") return InstructionTask::copy;
    if (w == "reverse") return InstructionTask::reverse;
    if (w == "last") return InstructionTask::last;
    return std::nullopt;
}

// Re-derives every answer from its question; returns the number of rounds
// that fail.
std::size_t invalid_rounds(const std::filesystem::path& file, const std::vector<std::string>& map,
                           std::size_t& rounds) {
    std::size_t bad = 0;
    for (const auto& line : read_lines(file)) {
        const auto j = nlohmann::json::parse(line);
        for (const auto& r : j.at("rounds")) {
            ++rounds;
            const auto q = r.at("q").get<std::string>();
            const auto a = r.at("a").get<std::string>();
            const auto colon = q.find(": ");
            const auto task = colon == std::string::npos ? std::nullopt : task_from_word(q.substr(0, colon));
            if (!task) {
                ++bad;
                continue;
            }
            const auto payload = unrender(q.substr(colon + 2), map);
            if (payload.empty() || answer_for(*task, payload, map) != a) ++bad;
        }
    }
    return bad;
}

} // namespace

TEST_SUITE("synth") {

TEST_CASE("markov rows sum to one") {
    for (std::uint64_t seed : {0u, 1u, 99u}) {
        auto cfg = small_synth(seed);
        for (std::size_t classes : {2u, 5u, 16u}) {
            cfg.classes = classes;
            cfg.successors = std::min<std::size_t>(3, classes);
            const LatentChain chain(cfg);
            for (std::size_t a = 0; a < classes; ++a) {
                for (std::size_t b = 0; b < classes; ++b) {
                    double s = 0.0;
                    for (std::size_t c = 0; c < classes; ++c) {
                        CHECK(chain.prob(a, b, c) > 0.0);
                        s += chain.prob(a, b, c);
                    }
                    CHECK(std::abs(s - 1.0) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("alphabets are disjoint and maps injective") {
    const auto cfg = small_synth();
    std::set<std::string> seen;
    std::size_t total = 0;
    for (Lang l : {Lang::a, Lang::b, Lang::code}) {
        const auto al = alphabet(cfg, l);
        total += al.size();
        seen.insert(al.begin(), al.end());
        const auto m = class_map(cfg, l);
        CHECK(m.size() == cfg.classes);
        CHECK(std::set<std::string>(m.begin(), m.end()).size() == cfg.classes);
        for (const auto& ch : m) CHECK(std::find(al.begin(), al.end(), ch) != al.end());
    }
    CHECK(seen.size() == total);
    // B characters never occur in the byte-level base vocab as single tokens.
    const Vocab base = Vocab::byte_level();
    for (const auto& ch : alphabet(cfg, Lang::b)) {
        CHECK_FALSE(base.find(ch).has_value());
        CHECK(base.tokenize(ch).size() == 3);
    }
}

TEST_CASE("A and B render the same latent sequence") {
    const auto cfg = small_synth();
    const LatentChain chain(cfg);
    const auto ma = class_map(cfg, Lang::a), mb = class_map(cfg, Lang::b);
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto a = corpus_text(cfg, chain, Lang::a, "corpus", i);
        const auto b = corpus_text(cfg, chain, Lang::b, "corpus", i);
        CHECK(a != b);
        const auto la = unrender(a, ma);
        CHECK(la == unrender(b, mb));
        CHECK(la == latent_doc(cfg, chain, "corpus", i));
        CHECK(la.size() >= cfg.doc_len_min);
        CHECK(la.size() <= cfg.doc_len_max);
    }
    CHECK_THROWS_AS(unrender("a\xe4\xb8\x80", ma), Error);
}

TEST_CASE("generated text follows the configured chain") {
    // For every context (a, b) and next class c the count is Binomial(n_ab,
    // P(c|a,b)); its z-score exceeds 3 for about 0.3% of cells under the
    // model. Allow 1%.
    auto cfg = small_synth(5);
    const LatentChain chain(cfg);
    const auto map = class_map(cfg, Lang::a);
    const std::size_t C = cfg.classes;
    std::vector<double> counts(C * C * C, 0.0);
    std::size_t symbols = 0;
    for (std::uint64_t i = 0; symbols < 300'000; ++i) {
        const auto seq = unrender(corpus_text(cfg, chain, Lang::a, "corpus", i), map);
        for (std::size_t t = 2; t < seq.size(); ++t) {
            counts[(seq[t - 2] * C + seq[t - 1]) * C + seq[t]] += 1.0;
            ++symbols;
        }
    }
    std::size_t cells = 0, outliers = 0;
    double worst = 0.0;
    for (std::size_t a = 0; a < C; ++a) {
        for (std::size_t b = 0; b < C; ++b) {
            double n = 0.0;
            for (std::size_t c = 0; c < C; ++c) n += counts[(a * C + b) * C + c];
            if (n == 0.0) continue;
            for (std::size_t c = 0; c < C; ++c) {
                const double p = chain.prob(a, b, c);
                const double z = (counts[(a * C + b) * C + c] - n * p) / std::sqrt(n * p * (1 - p));
                worst = std::max(worst, std::abs(z));
                ++cells;
                outliers += std::abs(z) > 3.0;
            }
        }
    }
    MESSAGE("chain fit: ", symbols, " transitions, ", outliers, " of ", cells, " cells beyond 3 SE, max |z| ", worst);
    CHECK(cells == C * C * C);
    CHECK(static_cast<double>(outliers) <= 0.01 * static_cast<double>(cells));
}

TEST_CASE("files are deterministic and seed dependent") {
    TempDir dir("synth");
    const auto cfg = small_synth();
    gen_suite(cfg, dir / "x");
    gen_suite(cfg, dir / "y");
    auto other = cfg;
    other.seed = 12;
    gen_suite(other, dir / "z");
    for (const char* f : {"corpus_a.jsonl", "corpus_b.jsonl", "parallel.jsonl", "instruction_a.jsonl",
                          "instruction_b.jsonl", "code.jsonl", "eval_a.jsonl", "eval_b.jsonl", "tokens_b.txt"}) {
        const auto x = read_bytes(dir / "x" / f);
        CHECK(!x.empty());
        CHECK(x == read_bytes(dir / "y" / f));
        if (std::string(f) != "tokens_b.txt") CHECK(x != read_bytes(dir / "z" / f));
    }
    CHECK(read_lines(dir / "x" / "parallel.jsonl").size() == 1000);
    CHECK(read_lines(dir / "x" / "eval_b.jsonl").size() == 50);
}

TEST_CASE("eval and training streams differ") {
    const auto cfg = small_synth();
    const LatentChain chain(cfg);
    std::size_t same = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        same += latent_doc(cfg, chain, "corpus", i) == latent_doc(cfg, chain, "eval", i);
    }
    CHECK(same < 5);
}

TEST_CASE("parallel records align") {
    TempDir dir("par");
    const auto cfg = small_synth();
    gen_parallel(cfg, dir / "p.jsonl");
    const auto ma = class_map(cfg, Lang::a), mb = class_map(cfg, Lang::b);
    const auto lines = read_lines(dir / "p.jsonl");
    REQUIRE(lines.size() == 1000);
    for (const auto& l : lines) {
        const auto j = nlohmann::json::parse(l);
        const auto src = unrender(j.at("src").get<std::string>(), ma);
        const auto tgt = unrender(j.at("tgt").get<std::string>(), mb);
        CHECK(src.size() == tgt.size());
        CHECK(src == tgt);
        CHECK(render_record(l, SourceFamily::parallel).find('\n') != std::string::npos);
    }
}

TEST_CASE("every instruction answer follows from its question") {
    TempDir dir("ins");
    const auto cfg = small_synth();
    for (Lang l : {Lang::a, Lang::b}) {
        gen_instruction(cfg, l, dir / "i.jsonl");
        std::size_t rounds = 0;
        CHECK(invalid_rounds(dir / "i.jsonl", class_map(cfg, l), rounds) == 0);
        CHECK(rounds >= 1000);
        for (const auto& line : read_lines(dir / "i.jsonl")) {
            CHECK_NOTHROW(render_record(line, SourceFamily::instruction));
        }
    }
}

TEST_CASE("task rules") {
    const std::vector<std::string> map{"x", "y", "z"};
    const LatentSeq s{0, 1, 2, 2};
    CHECK(answer_for(InstructionTask::copy, s, map) == "xyzz");
    CHECK(answer_for(InstructionTask::reverse, s, map) == "zzyx");
    CHECK(answer_for(InstructionTask::last, s, map) == "z");
    const auto cfg = small_synth();
    const LatentChain chain(cfg);
    const auto mb = class_map(cfg, Lang::b);
    std::size_t reverse_seen = 0;
    for (std::uint64_t i = 0; i < 300; ++i) {
        for (const auto& [q, a] : instruction_record(cfg, chain, Lang::b, i).rounds) {
            if (!q.starts_with("reverse: ")) continue;
            ++reverse_seen;
            auto payload = unrender(q.substr(9), mb);
            std::reverse(payload.begin(), payload.end());
            CHECK(a == render(payload, mb));
        }
    }
    CHECK(reverse_seen > 50);
}

TEST_CASE("suite layout") {
    TempDir dir("suite");
    const auto cfg = small_synth();
    const auto files = gen_suite(cfg, dir.path());
    CHECK(files.size() == 9);
    for (const auto& f : files) CHECK(std::filesystem::exists(f.path));
    const auto tokens = load_token_list(dir / "tokens_b.txt");
    CHECK(tokens == alphabet(cfg, Lang::b));
    for (const auto& d : suite_datasets(dir.path())) {
        CHECK(std::filesystem::exists(d.path));
        CHECK_NOTHROW(RecordFile(d, MalformedPolicy::abort));
    }
}

TEST_CASE("config validation") {
    auto bad = [](auto edit) {
        SynthConfig c;
        edit(c);
        CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    bad([](SynthConfig& c) { c.classes = 1; });
    bad([](SynthConfig& c) { c.alphabet_a = 10; });
    bad([](SynthConfig& c) { c.alphabet_b = 3; });
    bad([](SynthConfig& c) { c.successors = 0; });
    bad([](SynthConfig& c) { c.smoothing = 1.5; });
    bad([](SynthConfig& c) { c.doc_len_min = 1; });
    bad([](SynthConfig& c) { c.doc_len_max = 4; });
    bad([](SynthConfig& c) {
        c.classes = 22;
        c.alphabet_a = 22;
        c.alphabet_b = 22;
    });
    CHECK_NOTHROW(SynthConfig{}.validate());
}

} // TEST_SUITE
