#pragma once

#include "curricula/config.hpp"
#include "curricula/packer.hpp"
#include "curricula/sampler.hpp"
#include "curricula/trainer.hpp"
#include "curricula/vocab.hpp"

#include <deque>
#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

namespace curricula {

// Fixed artifact names under the output directory.
namespace artifact {
inline constexpr const char* data_dir = "data";
inline constexpr const char* instances = "instances.jsonl";
inline constexpr const char* provenance = "provenance.jsonl";
inline constexpr const char* vocab = "vocab.txt";
inline constexpr const char* packed = "packed.bin";
inline constexpr const char* packed_eval = "packed_eval.bin";
inline constexpr const char* checkpoint = "checkpoint";
inline constexpr const char* extended_checkpoint = "checkpoint_extended";
inline constexpr const char* metrics = "metrics.jsonl";
inline constexpr const char* ablation_dir = "ablation";
} // namespace artifact

SamplerConfig sampler_config(const PipelineConfig& c);

// out/vocab.txt when present, else the byte-level base.
Vocab pipeline_vocab(const PipelineConfig& c);

// Each command writes its artifacts under c.out_dir and returns the one-line
// JSON summary it prints.
nlohmann::ordered_json cmd_plan(const PipelineConfig& c, std::ostream& table_out);
nlohmann::ordered_json cmd_gen(const PipelineConfig& c);
nlohmann::ordered_json cmd_sample(const PipelineConfig& c);
nlohmann::ordered_json cmd_extend(const PipelineConfig& c);
nlohmann::ordered_json cmd_pack(const PipelineConfig& c);
nlohmann::ordered_json cmd_train(const PipelineConfig& c);
nlohmann::ordered_json cmd_eval(const PipelineConfig& c);

// Samples on the fly, tokenizes and packs: an endless training stream.
class SamplerSequenceSource : public SequenceSource {
public:
    SamplerSequenceSource(SamplerConfig cfg, const Vocab& vocab, std::size_t seq_len);
    bool next(PackedSequence& seq) override;

    const Sampler& sampler() const noexcept { return sampler_; }

private:
    Sampler sampler_;
    const Vocab& vocab_;
    Packer packer_;
    std::deque<PackedSequence> ready_;
};

// Mixture held constant for the ablation baseline.
MixSchedule baseline_mixture(const MixSchedule& m, Baseline b);

// Mean train_loss over the first / last ceil(fraction * n) steps.
double early_window_loss(std::span<const StepMetrics> m, double fraction);
double final_window_loss(std::span<const StepMetrics> m, double fraction);

// Per seed: pretrain on language A only, extend the vocab with the language-B
// tokens, then train twice from the extended model, once with the dynamic
// schedule and once with the constant baseline mixture, under the same seed
// and budget. Writes ablation/{seed_S_dynamic,seed_S_fixed}.jsonl,
// report.json, loss.svg and ppl.svg.
nlohmann::ordered_json cmd_ablate(const PipelineConfig& c, std::ostream* progress = nullptr);

// Simple line plot. Each series is a list of (x, y) points.
struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};
void write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series);

// Entry point of the command-line tool. Returns the exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace curricula
