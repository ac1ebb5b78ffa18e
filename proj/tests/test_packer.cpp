#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

#include "curricula/error.hpp"
#include "curricula/packer.hpp"
#include "curricula/rng.hpp"

using namespace curricula;
using test_support::TempDir;

namespace {

constexpr TokenId SEP = 1000;
constexpr TokenId PAD = 1001;

PackerConfig cfg(std::size_t L, FlushPolicy f = FlushPolicy::drop_tail) {
    return {L, SEP, f, PAD};
}

std::vector<PackedSequence> naive_pack(const std::vector<std::vector<TokenId>>& xs, std::size_t L, bool pad,
                                       std::uint64_t* tail = nullptr) {
    return oracle::naive_pack(xs, L, SEP, PAD, pad, tail);
}

} // namespace

TEST_SUITE("packer") {
TEST_CASE("hand-chunked examples") {
    PackStats st;
    auto out = pack(std::vector<std::vector<TokenId>>{{1, 2}, {3}}, cfg(3), &st);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == PackedSequence{1, 2, SEP});
    CHECK(st.dropped == 2);

    out = pack(std::vector<std::vector<TokenId>>{{1, 2, 3, 4, 5, 6, 7}}, cfg(3), &st);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == PackedSequence{1, 2, 3});
    CHECK(out[1] == PackedSequence{4, 5, 6});
    CHECK(st.instances == 1);
    CHECK(st.sequences == 2);
    CHECK(st.dropped == 2);
    CHECK(st.separators == 1);
    CHECK(st.conserved(3));

    out = pack(std::vector<std::vector<TokenId>>{}, cfg(3), &st);
    CHECK(out.empty());
    CHECK(st.instances == 0);
    CHECK(st.sequences == 0);
    CHECK(st.dropped == 0);
    CHECK(st.separators == 0);

    out = pack(std::vector<std::vector<TokenId>>{{}, {}, {}}, cfg(2), &st);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == PackedSequence{SEP, SEP});
    CHECK(st.dropped == 1);
}

TEST_CASE("instances of length L-1 fill one window each") {
    const std::size_t L = 16;
    std::vector<std::vector<TokenId>> xs(25, std::vector<TokenId>(L - 1, 7));
    PackStats st;
    const auto out = pack(xs, cfg(L), &st);
    CHECK(out.size() == 25);
    CHECK(st.dropped == 0);
    for (const auto& s : out) CHECK(s.back() == SEP);
}

TEST_CASE("pad tail") {
    PackStats st;
    const auto out = pack(std::vector<std::vector<TokenId>>{{1, 2, 3, 4}}, cfg(3, FlushPolicy::pad_tail), &st);
    REQUIRE(out.size() == 2);
    CHECK(out[1] == PackedSequence{4, SEP, PAD});
    CHECK(st.padded == 1);
    CHECK(st.dropped == 0);
    CHECK(st.conserved(3));
}

TEST_CASE("packer matches the concatenate-then-chunk oracle") {
    Rng r(41);
    for (int trial = 0; trial < 300; ++trial) {
        const auto xs = oracle::random_stream(r, 3000, SEP);
        const std::size_t L = 2 + r.below(100);
        for (bool pad : {false, true}) {
            PackStats st;
            std::uint64_t tail = 0;
            const auto got = pack(xs, cfg(L, pad ? FlushPolicy::pad_tail : FlushPolicy::drop_tail), &st);
            const auto want = naive_pack(xs, L, pad, &tail);
            CHECK(got == want);
            CHECK(st.conserved(L));
            CHECK(st.sequences == got.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].size() == L);
                const bool has_pad = std::find(got[i].begin(), got[i].end(), PAD) != got[i].end();
                if (has_pad) CHECK((pad && i + 1 == got.size()));
            }
            if (!pad) {
                CHECK(st.dropped == tail);
                CHECK(st.dropped < L);
            }
        }
    }
}

TEST_CASE("streaming and finish") {
    Packer p(cfg(4));
    std::vector<PackedSequence> out;
    auto emit = [&](const PackedSequence& s) { out.push_back(s); };
    p.push(std::vector<TokenId>{1, 2, 3, 4, 5}, emit);
    CHECK(out.size() == 1);
    p.finish(emit);
    CHECK(p.stats().dropped == 2);
    p.push(std::vector<TokenId>{6, 7, 8}, emit);
    CHECK(out.size() == 2);
    CHECK(out[1] == PackedSequence{6, 7, 8, SEP});
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(Packer(cfg(1)), ConfigError);
    CHECK_THROWS_AS(cfg(8).validate(500), ConfigError);
    CHECK_NOTHROW(cfg(8).validate(1002));
    CHECK(parse_flush_policy("pad_tail") == FlushPolicy::pad_tail);
    CHECK(parse_flush_policy(to_string(FlushPolicy::drop_tail)) == FlushPolicy::drop_tail);
    CHECK_FALSE(parse_flush_policy("pad").has_value());
}

TEST_CASE("PAK1 files") {
    TempDir dir("packer");
    const auto path = dir / "p.bin";
    {
        PackedWriter w(path, 3);
        w.write(PackedSequence{1, 2, 0x01020304});
        w.write(PackedSequence{4, 5, 6});
        CHECK(w.count() == 2);
        CHECK_THROWS_AS(w.write(PackedSequence{1, 2}), Error);
        w.close();
    }
    const auto bytes = test_support::read_bytes(path);
    REQUIRE(bytes.size() == 4 + 4 + 8 + 6 * 4);
    CHECK(bytes.substr(0, 4) == "PAK1");
    CHECK(bytes.substr(4, 4) == std::string("\x03\0\0\0", 4));
    CHECK(bytes.substr(8, 8) == std::string("\x02\0\0\0\0\0\0\0", 8));
    CHECK(bytes.substr(24, 4) == std::string("\x04\x03\x02\x01", 4));

    PackedReader r(path);
    CHECK(r.seq_len() == 3);
    CHECK(r.count() == 2);
    PackedSequence s;
    REQUIRE(r.next(s));
    CHECK(s == PackedSequence{1, 2, 0x01020304});
    REQUIRE(r.next(s));
    CHECK_FALSE(r.next(s));
    r.rewind();
    REQUIRE(r.next(s));
    CHECK(s[0] == 1);
    CHECK(read_packed(path).size() == 2);

    {
        PackedWriter empty(dir / "e.bin", 5);
    }
    CHECK(read_packed(dir / "e.bin").empty());
    CHECK_THROWS_AS(PackedReader(dir / "missing.bin"), InputError);
    test_support::write_text(dir / "bad.bin", "PAK2");
    CHECK_THROWS_AS(PackedReader(dir / "bad.bin"), Error);
}
}
