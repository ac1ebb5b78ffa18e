#include "curricula/schedule.hpp"

#include "curricula/error.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

namespace curricula {

std::string_view to_string(TaskKind k) noexcept {
    switch (k) {
    case TaskKind::corpus_en: return "corpus_en";
    case TaskKind::corpus_target: return "corpus_target";
    case TaskKind::parallel: return "parallel";
    case TaskKind::instruction_en: return "instruction_en";
    case TaskKind::instruction_target: return "instruction_target";
    case TaskKind::code: return "code";
    }
    return "unknown";
}

std::optional<TaskKind> parse_task_kind(std::string_view s) noexcept {
    for (TaskKind k : kAllTasks) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

SourceFamily family_of(TaskKind k) noexcept {
    switch (k) {
    case TaskKind::parallel: return SourceFamily::parallel;
    case TaskKind::instruction_en:
    case TaskKind::instruction_target: return SourceFamily::instruction;
    default: return SourceFamily::corpus;
    }
}

void MixSchedule::validate() const {
    if (tasks.empty()) {
        throw ConfigError("schedule: task list is empty");
    }
    if (t_grow == 0) {
        throw ConfigError("schedule: t_grow must be positive");
    }
    double sum_alpha = 0.0;
    double sum_beta = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& s = tasks[i];
        const std::string name{to_string(s.task)};
        if (!(s.alpha >= 0.0 && s.alpha <= 1.0)) {
            throw ConfigError("schedule: alpha of " + name + " outside [0,1]");
        }
        if (!(s.beta >= 0.0 && s.beta <= 1.0)) {
            throw ConfigError("schedule: beta of " + name + " outside [0,1]");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (tasks[j].task == s.task) {
                throw ConfigError("schedule: task kind " + name + " listed twice");
            }
        }
        sum_alpha += s.alpha;
        sum_beta += s.beta;
    }
    if (std::abs(sum_alpha - 1.0) > kEndpointSumTolerance) {
        throw ConfigError("schedule: alpha endpoint sum " + std::to_string(sum_alpha) + " is not 1");
    }
    if (std::abs(sum_beta - 1.0) > kEndpointSumTolerance) {
        throw ConfigError("schedule: beta endpoint sum " + std::to_string(sum_beta) + " is not 1");
    }
}

std::optional<std::size_t> MixSchedule::index_of(TaskKind k) const noexcept {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].task == k) {
            return i;
        }
    }
    return std::nullopt;
}

MixSchedule table1_schedule() {
    return MixSchedule{
        {
            {TaskKind::corpus_en, 0.60, 0.15},
            {TaskKind::corpus_target, 0.05, 0.50},
            {TaskKind::parallel, 0.25, 0.0},
            {TaskKind::instruction_en, 0.05, 0.10},
            {TaskKind::instruction_target, 0.0, 0.20},
            {TaskKind::code, 0.05, 0.05},
        },
        5'000'000,
    };
}

MixSchedule fixed_mixture(const MixSchedule& m) {
    MixSchedule out = m;
    for (auto& s : out.tasks) {
        s.alpha = s.beta;
    }
    return out;
}

double gamma(const TaskSchedule& s, std::uint64_t t, std::uint64_t t_grow) {
    if (t_grow == 0) {
        throw ConfigError("schedule: t_grow must be positive");
    }
    if (t == 0) {
        return s.alpha;
    }
    if (t >= t_grow) {
        return s.beta;
    }
    const double slope = (s.beta - s.alpha) / static_cast<double>(t_grow);
    return std::clamp(s.alpha + slope * static_cast<double>(t), 0.0, 1.0);
}

std::vector<double> weights_at(const MixSchedule& m, std::uint64_t t) {
    std::vector<double> w;
    w.reserve(m.tasks.size());
    double total = 0.0;
    for (const auto& s : m.tasks) {
        w.push_back(gamma(s, t, m.t_grow));
        total += w.back();
    }
    if (!(total > 0.0)) {
        throw ConfigError("schedule: all task weights are zero at t=" + std::to_string(t));
    }
    for (double& x : w) {
        x /= total;
    }
    return w;
}

std::vector<ScheduleRow> schedule_table(const MixSchedule& m, std::size_t n_checkpoints) {
    m.validate();
    if (n_checkpoints < 2) {
        throw ConfigError("schedule table needs at least 2 checkpoints");
    }
    std::vector<ScheduleRow> rows;
    rows.reserve(n_checkpoints);
    const auto span = static_cast<unsigned __int128>(2) * m.t_grow;
    for (std::size_t i = 0; i < n_checkpoints; ++i) {
        const auto t = static_cast<std::uint64_t>(span * i / (n_checkpoints - 1));
        rows.push_back({t, weights_at(m, t)});
    }
    return rows;
}

void write_schedule_table(std::ostream& os, const MixSchedule& m, const std::vector<ScheduleRow>& rows) {
    for (const auto& row : rows) {
        nlohmann::ordered_json j;
        j["t"] = row.t;
        auto& w = j["weights"] = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < m.tasks.size(); ++i) {
            w[std::string(to_string(m.tasks[i].task))] = row.weights[i];
        }
        os << j.dump() << '\n';
    }
}

} // namespace curricula
