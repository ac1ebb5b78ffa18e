#pragma once

#include "curricula/ingest.hpp"
#include "curricula/packer.hpp"
#include "curricula/schedule.hpp"
#include "curricula/synth.hpp"
#include "curricula/trainer.hpp"

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace curricula {

struct SampleSettings {
    std::uint64_t n = 10'000;
    std::size_t workers = 1; // record prefetch/format threads

    bool operator==(const SampleSettings&) const = default;
};

struct VocabSettings {
    std::optional<std::filesystem::path> base;       // token file; unset = byte-level base vocab
    std::optional<std::filesystem::path> new_tokens; // token file to append
    std::optional<std::filesystem::path> checkpoint; // model to extend alongside the vocab

    bool operator==(const VocabSettings&) const = default;
};

struct PackSettings {
    std::size_t seq_len = 2048;
    FlushPolicy flush = FlushPolicy::drop_tail;
    std::optional<std::filesystem::path> eval_dataset; // corpus-format JSONL packed to packed_eval.bin

    bool operator==(const PackSettings&) const = default;
};

enum class Baseline : std::uint8_t { beta, alpha, uniform };

std::string_view to_string(Baseline b) noexcept;

struct AblationSettings {
    std::vector<std::uint64_t> seeds{1, 2, 3};
    Baseline baseline = Baseline::beta;
    std::uint64_t pretrain_steps = 300; // language-A-only steps before vocab extension
    std::uint64_t steps = 2000;
    std::uint64_t eval_every = 100;
    double window_fraction = 0.1; // early/final loss windows as a fraction of steps

    bool operator==(const AblationSettings&) const = default;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "run";
    MixSchedule schedule = table1_schedule();
    std::vector<DatasetSpec> datasets; // relative paths resolve against out_dir
    MalformedPolicy malformed_policy = MalformedPolicy::abort;
    bool shuffle_epochs = false;
    std::size_t plan_checkpoints = 11;
    SynthConfig synth;
    SampleSettings sample;
    VocabSettings vocab;
    PackSettings pack;
    ModelConfig model;  // vocab_size and seed are filled at run time
    TrainConfig train;  // sep_id is filled at run time
    std::optional<std::filesystem::path> train_init; // checkpoint to continue from
    AblationSettings ablation;

    bool operator==(const PipelineConfig&) const = default;

    // Checks every module invariant that can be checked without touching data.
    void validate() const;

    // Absolute or out_dir-relative.
    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

// Defaults: the mixture table, the synthetic suite as datasets, desk-scale
// model and training settings.
PipelineConfig default_config();

nlohmann::ordered_json to_json(const PipelineConfig& c);

// Missing keys take default values; unknown keys are rejected. Throws
// ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j);

// Apply "a.b.c=value" to a JSON document. The value is parsed as JSON when
// possible, else taken as a string. Throws ConfigError.
void apply_override(nlohmann::json& j, std::string_view assignment);

// Defaults, overlaid by the file when given (objects merge, other values
// replace), then overrides in order, then CURRICULA_SEED if set.
PipelineConfig load_config(const std::optional<std::filesystem::path>& path,
                           const std::vector<std::string>& overrides = {});

} // namespace curricula
