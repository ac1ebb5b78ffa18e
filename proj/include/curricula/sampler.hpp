#pragma once

#include "curricula/ingest.hpp"
#include "curricula/rng.hpp"
#include "curricula/schedule.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace curricula {

struct SamplerConfig {
    MixSchedule mix;
    std::vector<DatasetSpec> datasets;
    std::uint64_t seed = 0;
    MalformedPolicy malformed_policy = MalformedPolicy::abort;
    // Visit each dataset in a fresh seeded order every epoch instead of file order.
    bool shuffle_epochs = false;
};

// Where one sample came from.
struct Draw {
    std::uint64_t t = 0;
    TaskKind task{};
    std::size_t dataset = 0; // index into SamplerConfig::datasets
    std::uint64_t ordinal = 0;
    std::uint64_t epoch = 0;
};

// Categorical pick: first index whose running sum exceeds u * sum(weights).
// Zero-weight entries are never returned.
std::size_t pick_weighted(std::span<const double> weights, double u);

// The dynamic data sampler.
//
// Stream discipline: every sample consumes exactly two outputs of the run
// RNG, first the task draw, then the within-task dataset draw (consumed even
// when the task has a single dataset). Epoch shuffles use separate streams
// derived from (seed, dataset name, epoch) and never touch the run RNG.
class Sampler {
public:
    explicit Sampler(SamplerConfig cfg);

    const SamplerConfig& config() const noexcept { return cfg_; }
    std::uint64_t t() const noexcept { return t_; }
    std::size_t dataset_count() const noexcept { return files_.size(); }
    const RecordFile& dataset(std::size_t i) const { return files_.at(i); }

    // Multinomial draw from weights_at(mix, t). Consumes one RNG output and
    // leaves t unchanged.
    TaskKind next_task();

    // Task draw, dataset draw, cursor advance; increments t.
    Draw next_draw();

    // next_draw() followed by reading and formatting the record.
    Instance next_instance();

    // Read and format the record behind a draw. `streams` holds one stream per
    // dataset (opened lazily); distinct stream sets may be used concurrently.
    Instance materialize(const Draw& d, std::vector<std::ifstream>& streams) const;

private:
    struct Cursor {
        std::size_t pos = 0;
        std::uint64_t epoch = 0;
        std::vector<std::uint32_t> order; // used only when shuffling
    };

    std::uint64_t advance_cursor(std::size_t dataset, std::uint64_t& epoch);
    void reshuffle(std::size_t dataset);

    SamplerConfig cfg_;
    std::vector<RecordFile> files_;
    std::vector<std::vector<std::size_t>> task_datasets_; // per schedule task
    std::vector<std::vector<double>> task_dataset_weights_;
    std::vector<Cursor> cursors_;
    std::vector<std::ifstream> own_streams_;
    Rng rng_;
    std::uint64_t t_ = 0;
};

struct SampleRunStats {
    std::uint64_t instances = 0;
    std::vector<std::uint64_t> per_task; // in schedule order
};

// JSON-lines writers for the instance file and the provenance log.
void write_provenance_header(std::ostream& os, const SamplerConfig& cfg);
void write_provenance_entry(std::ostream& os, const Draw& d, const Sampler& s);
void write_instance(std::ostream& os, const Instance& inst);

// Draw n samples in order. Records are read and formatted by `workers`
// threads; output order and bytes do not depend on the worker count.
// `sink` receives each instance with its draw, in t order.
SampleRunStats sample_run(Sampler& sampler, std::uint64_t n, std::size_t workers,
                          const std::function<void(const Instance&, const Draw&)>& sink);

// Convenience: run and write the instance file and the provenance log.
SampleRunStats sample_run(const SamplerConfig& cfg, std::uint64_t n, std::size_t workers,
                          std::ostream& instances_out, std::ostream& log_out);

} // namespace curricula
