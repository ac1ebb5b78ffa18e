#include "curricula/sampler.hpp"

#include "curricula/error.hpp"

#include <algorithm>
#include <json.hpp>
#include <numeric>
#include <ostream>
#include <thread>

namespace curricula {

using nlohmann::ordered_json;

std::size_t pick_weighted(std::span<const double> weights, double u) {
    double total = 0.0;
    for (double w : weights) {
        total += w;
    }
    const double r = u * total;
    double c = 0.0;
    std::size_t last_nonzero = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) {
            continue;
        }
        c += weights[i];
        last_nonzero = i;
        if (r < c) {
            return i;
        }
    }
    if (last_nonzero == weights.size()) {
        throw ConfigError("cannot draw from an all-zero weight vector");
    }
    // r landed on the rounding sliver above the final running sum.
    return last_nonzero;
}

Sampler::Sampler(SamplerConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
    cfg_.mix.validate();
    files_.reserve(cfg_.datasets.size());
    for (const auto& spec : cfg_.datasets) {
        for (const auto& f : files_) {
            if (f.spec().name == spec.name) {
                throw ConfigError("dataset name " + spec.name + " used twice");
            }
        }
        files_.emplace_back(spec, cfg_.malformed_policy);
    }

    task_datasets_.resize(cfg_.mix.tasks.size());
    task_dataset_weights_.resize(cfg_.mix.tasks.size());
    for (std::size_t d = 0; d < files_.size(); ++d) {
        const auto ti = cfg_.mix.index_of(files_[d].spec().task);
        if (!ti) {
            continue; // task not in the schedule: never drawn
        }
        if (files_[d].valid_count() == 0) {
            if (files_[d].spec().size_weight) {
                throw ConfigError("dataset " + files_[d].spec().name + " has no usable records");
            }
            continue; // empty file with size-derived weight 0
        }
        task_datasets_[*ti].push_back(d);
        task_dataset_weights_[*ti].push_back(files_[d].weight());
    }
    for (std::size_t i = 0; i < cfg_.mix.tasks.size(); ++i) {
        const auto& s = cfg_.mix.tasks[i];
        if ((s.alpha > 0.0 || s.beta > 0.0) && task_datasets_[i].empty()) {
            throw ConfigError("task " + std::string(to_string(s.task)) + " has nonzero weight but no dataset");
        }
    }

    cursors_.resize(files_.size());
    own_streams_.resize(files_.size());
    if (cfg_.shuffle_epochs) {
        for (std::size_t d = 0; d < files_.size(); ++d) {
            reshuffle(d);
        }
    }
}

void Sampler::reshuffle(std::size_t d) {
    auto& c = cursors_[d];
    c.order.resize(files_[d].lines());
    std::iota(c.order.begin(), c.order.end(), 0u);
    Rng r(derive_seed(derive_seed(cfg_.seed, tag_of(files_[d].spec().name)), c.epoch));
    for (std::size_t i = c.order.size(); i > 1; --i) {
        std::swap(c.order[i - 1], c.order[r.below(i)]);
    }
}

TaskKind Sampler::next_task() {
    const auto w = weights_at(cfg_.mix, t_);
    return cfg_.mix.tasks[pick_weighted(w, rng_.uniform())].task;
}

std::uint64_t Sampler::advance_cursor(std::size_t d, std::uint64_t& epoch) {
    auto& c = cursors_[d];
    const auto& f = files_[d];
    // valid_count() > 0 is guaranteed for any dataset that can be drawn.
    for (;;) {
        if (c.pos == f.lines()) {
            c.pos = 0;
            ++c.epoch;
            if (cfg_.shuffle_epochs) {
                reshuffle(d);
            }
        }
        const std::size_t line = cfg_.shuffle_epochs ? c.order[c.pos] : c.pos;
        ++c.pos;
        if (f.valid(line)) {
            epoch = c.epoch;
            return line;
        }
    }
}

Draw Sampler::next_draw() {
    const auto w = weights_at(cfg_.mix, t_);
    const std::size_t ti = pick_weighted(w, rng_.uniform());
    const double u = rng_.uniform();
    const auto& candidates = task_datasets_[ti];
    if (candidates.empty()) {
        throw ConfigError("task " + std::string(to_string(cfg_.mix.tasks[ti].task)) + " drawn without a dataset");
    }
    const std::size_t d = candidates[pick_weighted(task_dataset_weights_[ti], u)];
    Draw out;
    out.t = t_;
    out.task = cfg_.mix.tasks[ti].task;
    out.dataset = d;
    out.ordinal = advance_cursor(d, out.epoch);
    ++t_;
    return out;
}

Instance Sampler::materialize(const Draw& d, std::vector<std::ifstream>& streams) const {
    if (streams.size() < files_.size()) {
        streams.resize(files_.size());
    }
    auto& in = streams[d.dataset];
    if (!in.is_open()) {
        in = files_[d.dataset].open();
    }
    return files_[d.dataset].instance(d.ordinal, in);
}

Instance Sampler::next_instance() {
    return materialize(next_draw(), own_streams_);
}

void write_provenance_header(std::ostream& os, const SamplerConfig& cfg) {
    ordered_json j;
    j["rng"] = std::string(kRngAlgorithm);
    j["seed"] = cfg.seed;
    j["t_grow"] = cfg.mix.t_grow;
    os << j.dump() << '\n';
}

void write_provenance_entry(std::ostream& os, const Draw& d, const Sampler& s) {
    ordered_json j;
    j["t"] = d.t;
    j["task"] = std::string(to_string(d.task));
    j["dataset"] = s.dataset(d.dataset).spec().name;
    j["ordinal"] = d.ordinal;
    os << j.dump() << '\n';
}

void write_instance(std::ostream& os, const Instance& inst) {
    ordered_json j;
    j["text"] = inst.text;
    j["task"] = std::string(to_string(inst.task));
    j["dataset"] = inst.dataset;
    j["ordinal"] = inst.ordinal;
    os << j.dump() << '\n';
}

SampleRunStats sample_run(Sampler& sampler, std::uint64_t n, std::size_t workers,
                          const std::function<void(const Instance&, const Draw&)>& sink) {
    constexpr std::size_t kBlock = 2048;
    workers = std::max<std::size_t>(workers, 1);

    SampleRunStats stats;
    stats.per_task.assign(sampler.config().mix.tasks.size(), 0);

    std::vector<std::vector<std::ifstream>> streams(workers);
    std::vector<Draw> draws;
    std::vector<Instance> block;
    for (std::uint64_t done = 0; done < n;) {
        const std::size_t m = static_cast<std::size_t>(std::min<std::uint64_t>(kBlock, n - done));
        draws.clear();
        for (std::size_t i = 0; i < m; ++i) {
            draws.push_back(sampler.next_draw());
        }
        block.assign(m, Instance{});

        auto work = [&](std::size_t w) {
            for (std::size_t i = w; i < m; i += workers) {
                block[i] = sampler.materialize(draws[i], streams[w]);
            }
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::exception_ptr> errors(workers);
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        work(w);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
            for (auto& th : pool) {
                th.join();
            }
            for (auto& e : errors) {
                if (e) {
                    std::rethrow_exception(e);
                }
            }
        }

        for (std::size_t i = 0; i < m; ++i) {
            ++stats.per_task[*sampler.config().mix.index_of(draws[i].task)];
            sink(block[i], draws[i]);
        }
        stats.instances += m;
        done += m;
    }
    return stats;
}

SampleRunStats sample_run(const SamplerConfig& cfg, std::uint64_t n, std::size_t workers,
                          std::ostream& instances_out, std::ostream& log_out) {
    Sampler sampler(cfg);
    write_provenance_header(log_out, cfg);
    return sample_run(sampler, n, workers, [&](const Instance& inst, const Draw& d) {
        write_instance(instances_out, inst);
        write_provenance_entry(log_out, d, sampler);
    });
}

} // namespace curricula
