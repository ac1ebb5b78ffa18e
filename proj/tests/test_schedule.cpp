#include "doctest.h"
#include "oracles.hpp"

#include "curricula/error.hpp"
#include "curricula/rng.hpp"
#include "curricula/schedule.hpp"

#include <json.hpp>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace curricula;
using oracle::random_schedule;

namespace {

const std::vector<double> kAlphaColumn = {0.60, 0.05, 0.25, 0.05, 0.0, 0.05};
const std::vector<double> kBetaColumn = {0.15, 0.50, 0.0, 0.10, 0.20, 0.05};

// Straight line through (0, a) and (T, b), written as a weighted average
// instead of slope-intercept form.
double two_point_line(double a, double b, double T, double t) {
    if (t >= T) return b;
    return (a * (T - t) + b * t) / T;
}

void check_vector(const std::vector<double>& got, const std::vector<double>& want, double tol) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(std::abs(got[i] - want[i]) <= tol);
    }
}

} // namespace

TEST_SUITE("schedule") {
TEST_CASE("task kind names round trip") {
    for (auto k : kAllTasks) {
        CHECK(parse_task_kind(to_string(k)) == k);
    }
    CHECK_FALSE(parse_task_kind("corpus").has_value());
}

TEST_CASE("gamma endpoints") {
    CHECK(gamma({TaskKind::corpus_en, 0.60, 0.15}, 0, 5'000'000) == 0.60);
    CHECK(gamma({TaskKind::corpus_target, 0.05, 0.50}, 5'000'000, 5'000'000) == 0.50);
    CHECK_THROWS_AS(gamma({TaskKind::code, 0.1, 0.1}, 0, 0), ConfigError);
}

TEST_CASE("gamma at midpoint matches the two-point line") {
    const double oracle = two_point_line(0.25, 0.0, 5'000'000, 2'500'000);
    const double g = gamma({TaskKind::parallel, 0.25, 0.0}, 2'500'000, 5'000'000);
    CHECK(std::abs(oracle - 0.125) < 1e-15);
    CHECK(std::abs(g - oracle) < 1e-15);
}

TEST_CASE("gamma tracks the two-point line everywhere") {
    Rng r(11);
    for (int i = 0; i < 10'000; ++i) {
        const double a = r.uniform(), b = r.uniform();
        const std::uint64_t T = 1 + r.below(1'000'000);
        const std::uint64_t t = r.below(2 * T);
        const double g = gamma({TaskKind::code, a, b}, t, T);
        CHECK(std::abs(g - two_point_line(a, b, double(T), double(t))) < 1e-12);
        CHECK(g >= 0.0);
        CHECK(g <= 1.0);
    }
}

TEST_CASE("table schedule columns") {
    const auto m = table1_schedule();
    REQUIRE_NOTHROW(m.validate());
    CHECK(m.t_grow == 5'000'000);
    check_vector(weights_at(m, 0), kAlphaColumn, 1e-12);
    check_vector(weights_at(m, m.t_grow), kBetaColumn, 1e-12);
    check_vector(weights_at(m, 3 * m.t_grow), kBetaColumn, 1e-12);
    const auto mid = weights_at(m, m.t_grow / 2);
    check_vector(mid, {0.375, 0.275, 0.125, 0.075, 0.10, 0.05}, 1e-12);
    CHECK(std::abs(std::accumulate(mid.begin(), mid.end(), 0.0) - 1.0) < 1e-12);
}

TEST_CASE("endpoint identities and plateau are exact") {
    Rng r(5);
    for (int i = 0; i < 1000; ++i) {
        const TaskSchedule s{TaskKind::code, r.uniform(), r.uniform()};
        const std::uint64_t T = 1 + r.below(1ULL << 40);
        CHECK(gamma(s, 0, T) == s.alpha);
        CHECK(gamma(s, T, T) == s.beta);
        CHECK(gamma(s, T + 1 + r.below(1ULL << 40), T) == s.beta);
    }
}

TEST_CASE("linearity") {
    Rng r(6);
    for (int i = 0; i < 10'000; ++i) {
        const TaskSchedule s{TaskKind::code, r.uniform(), r.uniform()};
        const std::uint64_t T = 2 + r.below(1'000'000);
        std::uint64_t t1 = r.below(T + 1), t2 = r.below(T + 1);
        if (t1 > t2) std::swap(t1, t2);
        if ((t1 + t2) % 2) ++t2;
        if (t2 > T) continue;
        const double mid = gamma(s, (t1 + t2) / 2, T);
        CHECK(std::abs(mid - 0.5 * (gamma(s, t1, T) + gamma(s, t2, T))) < 1e-12);
    }
}

TEST_CASE("monotonicity") {
    Rng r(7);
    for (int i = 0; i < 200; ++i) {
        const TaskSchedule s{TaskKind::code, r.uniform(), r.uniform()};
        const std::uint64_t T = 1 + r.below(100'000);
        double prev = gamma(s, 0, T);
        for (std::uint64_t t = 0; t <= T + 10; t += 1 + T / 97) {
            const double g = gamma(s, t, T);
            if (s.beta > s.alpha) CHECK(g >= prev);
            if (s.beta < s.alpha) CHECK(g <= prev);
            prev = g;
        }
    }
}

TEST_CASE("normalization over random schedules") {
    Rng r(8);
    for (int i = 0; i < 300; ++i) {
        const auto m = random_schedule(r, 1e-7);
        REQUIRE_NOTHROW(m.validate());
        for (int j = 0; j < 30; ++j) {
            const auto w = weights_at(m, r.below(2 * m.t_grow + 1));
            CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) <= 1e-12);
            for (double x : w) CHECK(x >= 0.0);
        }
    }
}

TEST_CASE("validation") {
    auto m = table1_schedule();
    m.tasks[0].alpha = 0.50; // alpha column sums to 0.9
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("alpha endpoint sum"), ConfigError);

    m = table1_schedule();
    m.tasks[0].alpha += 5e-7; // inside the load tolerance
    CHECK_NOTHROW(m.validate());

    m = table1_schedule();
    m.t_grow = 0;
    CHECK_THROWS_AS(m.validate(), ConfigError);

    m = table1_schedule();
    m.tasks[1].task = TaskKind::corpus_en;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("listed twice"), ConfigError);

    m = table1_schedule();
    m.tasks[2].beta = -0.1;
    CHECK_THROWS_AS(m.validate(), ConfigError);

    CHECK_THROWS_AS(MixSchedule{}.validate(), ConfigError);
}

TEST_CASE("all-zero weights are rejected") {
    MixSchedule m;
    m.tasks = {{TaskKind::corpus_en, 0.0, 1.0}, {TaskKind::code, 0.0, 0.0}};
    m.t_grow = 10;
    CHECK_THROWS_AS(weights_at(m, 0), ConfigError);
    CHECK(weights_at(m, 1)[0] == 1.0);
}

TEST_CASE("fixed mixture") {
    const auto f = fixed_mixture(table1_schedule());
    check_vector(weights_at(f, 0), kBetaColumn, 1e-12);
    check_vector(weights_at(f, 12345), kBetaColumn, 1e-12);
}

TEST_CASE("schedule table rows") {
    const auto m = table1_schedule();
    const auto rows = schedule_table(m, 3);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].t == 0);
    CHECK(rows[1].t == m.t_grow);
    CHECK(rows[2].t == 2 * m.t_grow);
    for (const auto& row : rows) {
        check_vector(row.weights, weights_at(m, row.t), 0.0);
    }
    check_vector(rows[0].weights, kAlphaColumn, 1e-12);
    check_vector(rows[1].weights, kBetaColumn, 1e-12);
    check_vector(rows[2].weights, kBetaColumn, 1e-12);

    const auto two = schedule_table(m, 2);
    REQUIRE(two.size() == 2);
    check_vector(two[0].weights, kAlphaColumn, 1e-12);
    check_vector(two[1].weights, kBetaColumn, 1e-12);

    CHECK_THROWS_AS(schedule_table(m, 1), ConfigError);
}

TEST_CASE("one-task schedule is constant") {
    MixSchedule m;
    m.tasks = {{TaskKind::corpus_en, 1.0, 1.0}};
    m.t_grow = 1000;
    for (const auto& row : schedule_table(m, 7)) {
        REQUIRE(row.weights.size() == 1);
        CHECK(row.weights[0] == 1.0);
    }
}

TEST_CASE("schedule table JSON lines") {
    const auto m = table1_schedule();
    std::ostringstream os;
    write_schedule_table(os, m, schedule_table(m, 11));
    std::istringstream is(os.str());
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j["t"].is_number_unsigned());
        CHECK(j["weights"].size() == 6);
        const auto w = weights_at(m, j["t"].get<std::uint64_t>());
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(j["weights"][std::string(to_string(m.tasks[i].task))].get<double>() == w[i]);
        }
        ++n;
    }
    CHECK(n == 11);
}
}
