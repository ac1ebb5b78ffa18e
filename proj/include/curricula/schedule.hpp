#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace curricula {

// One value per row group of the mixture table.
enum class TaskKind : std::uint8_t {
    corpus_en,
    corpus_target,
    parallel,
    instruction_en,
    instruction_target,
    code,
};

inline constexpr std::array<TaskKind, 6> kAllTasks = {
    TaskKind::corpus_en,      TaskKind::corpus_target,      TaskKind::parallel,
    TaskKind::instruction_en, TaskKind::instruction_target, TaskKind::code,
};

std::string_view to_string(TaskKind k) noexcept;
std::optional<TaskKind> parse_task_kind(std::string_view s) noexcept;

enum class SourceFamily : std::uint8_t { corpus, parallel, instruction };

// Which on-disk record format a task's datasets use.
SourceFamily family_of(TaskKind k) noexcept;

struct TaskSchedule {
    TaskKind task{};
    double alpha = 0.0; // weight at t = 0
    double beta = 0.0;  // weight from t = t_grow onwards

    bool operator==(const TaskSchedule&) const = default;
};

// Endpoint sums may deviate from 1 by at most this much at load time.
inline constexpr double kEndpointSumTolerance = 1e-6;

struct MixSchedule {
    std::vector<TaskSchedule> tasks;
    std::uint64_t t_grow = 5'000'000;

    // Throws ConfigError naming the violated invariant.
    void validate() const;

    std::optional<std::size_t> index_of(TaskKind k) const noexcept;

    bool operator==(const MixSchedule&) const = default;
};

// Default mixture: initial and final weights per task, t_grow = 5M samples.
MixSchedule table1_schedule();

// Same task set with alpha replaced by beta: a constant mixture.
MixSchedule fixed_mixture(const MixSchedule& m);

// Linear ramp from alpha at t = 0 to beta at t = t_grow, then flat.
// Both endpoints are returned exactly. Throws ConfigError when t_grow == 0.
double gamma(const TaskSchedule& s, std::uint64_t t, std::uint64_t t_grow);

// Normalized gamma vector in the order of m.tasks. Throws ConfigError when
// every gamma is zero.
std::vector<double> weights_at(const MixSchedule& m, std::uint64_t t);

struct ScheduleRow {
    std::uint64_t t = 0;
    std::vector<double> weights;
};

// n_checkpoints rows evenly spaced over [0, 2 * t_grow].
std::vector<ScheduleRow> schedule_table(const MixSchedule& m, std::size_t n_checkpoints);

// JSON-lines: {"t": int, "weights": {task: float, ...}} per row.
void write_schedule_table(std::ostream& os, const MixSchedule& m, const std::vector<ScheduleRow>& rows);

} // namespace curricula
