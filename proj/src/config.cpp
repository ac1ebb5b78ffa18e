#include "curricula/config.hpp"

#include "curricula/error.hpp"

#include <algorithm>
#include <charconv>
#include <concepts>
#include <cstdlib>
#include <fstream>
#include <set>

namespace curricula {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Baseline b) noexcept {
    switch (b) {
    case Baseline::beta: return "beta";
    case Baseline::alpha: return "alpha";
    case Baseline::uniform: return "uniform";
    }
    return "beta";
}

namespace {

std::optional<Baseline> parse_baseline(std::string_view s) {
    for (auto b : {Baseline::beta, Baseline::alpha, Baseline::uniform}) {
        if (to_string(b) == s) return b;
    }
    return std::nullopt;
}

// Reads the keys of one JSON object, rejecting unknown ones.
class Section {
public:
    Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) {
            throw ConfigError(where_ + ": expected an object");
        }
    }

    const json* find(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <std::unsigned_integral U>
    void get(const char* key, U& out) {
        if (const auto* v = find(key)) {
            if (!v->is_number_unsigned()) {
                throw ConfigError(path(key) + ": expected a non-negative integer");
            }
            out = v->get<U>();
        }
    }

    void get(const char* key, double& out) {
        if (const auto* v = find(key)) {
            if (!v->is_number()) {
                throw ConfigError(path(key) + ": expected a number");
            }
            out = v->get<double>();
        }
    }

    void get(const char* key, bool& out) {
        if (const auto* v = find(key)) {
            if (!v->is_boolean()) {
                throw ConfigError(path(key) + ": expected true or false");
            }
            out = v->get<bool>();
        }
    }

    void get(const char* key, std::string& out) {
        if (const auto* v = find(key)) {
            if (!v->is_string()) {
                throw ConfigError(path(key) + ": expected a string");
            }
            out = v->get<std::string>();
        }
    }

    void get(const char* key, std::filesystem::path& out) {
        std::string s = out.string();
        get(key, s);
        out = s;
    }

    void get(const char* key, std::optional<std::filesystem::path>& out) {
        if (const auto* v = find(key)) {
            if (v->is_null()) {
                out.reset();
            } else if (v->is_string()) {
                out = v->get<std::string>();
            } else {
                throw ConfigError(path(key) + ": expected a path string or null");
            }
        }
    }

    template <class E, class Parse>
    void get_enum(const char* key, E& out, Parse parse) {
        if (const auto* v = find(key)) {
            if (!v->is_string()) {
                throw ConfigError(path(key) + ": expected a string");
            }
            auto e = parse(v->get<std::string>());
            if (!e) {
                throw ConfigError(path(key) + ": unknown value \"" + v->get<std::string>() + "\"");
            }
            out = *e;
        }
    }

    std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) {
                throw ConfigError("unknown config key " + (where_.empty() ? k : where_ + "." + k));
            }
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

// Objects merge key by key; any other value, arrays and null included,
// replaces the base value.
void deep_merge(json& base, const json& over) {
    if (!base.is_object() || !over.is_object()) {
        base = over;
        return;
    }
    for (const auto& [k, v] : over.items()) {
        if (base.contains(k)) {
            deep_merge(base[k], v);
        } else {
            base[k] = v;
        }
    }
}

ordered_json opt_path(const std::optional<std::filesystem::path>& p) {
    return p ? ordered_json(p->string()) : ordered_json(nullptr);
}

} // namespace

void PipelineConfig::validate() const {
    schedule.validate();
    synth.validate();
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        const auto& d = datasets[i];
        if (d.name.empty()) throw ConfigError("datasets[" + std::to_string(i) + "]: empty name");
        if (d.size_weight && !(*d.size_weight > 0.0)) {
            throw ConfigError("dataset " + d.name + ": size_weight must be positive");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (datasets[j].name == d.name) throw ConfigError("dataset name " + d.name + " used twice");
        }
    }
    for (const auto& s : schedule.tasks) {
        if (s.alpha == 0.0 && s.beta == 0.0) continue;
        const bool covered = std::any_of(datasets.begin(), datasets.end(), [&](const auto& d) { return d.task == s.task; });
        if (!covered) {
            throw ConfigError("task " + std::string(to_string(s.task)) + " has nonzero weight but no dataset");
        }
    }
    if (pack.seq_len < 2) throw ConfigError("pack.seq_len must be at least 2");
    if (sample.workers < 1) throw ConfigError("sample.workers must be positive");
    if (plan_checkpoints < 2) throw ConfigError("plan_checkpoints must be at least 2");
    ModelConfig m = model;
    m.vocab_size = 1;
    m.validate();
    train.validate();
    if (ablation.seeds.empty()) throw ConfigError("ablation.seeds is empty");
    if (!(ablation.window_fraction > 0.0 && ablation.window_fraction <= 1.0)) {
        throw ConfigError("ablation.window_fraction must be in (0,1]");
    }
}

std::filesystem::path PipelineConfig::resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : out_dir / p;
}

PipelineConfig default_config() {
    PipelineConfig c;
    c.datasets = suite_datasets("data");
    c.vocab.new_tokens = "data/tokens_b.txt";
    c.pack.eval_dataset = "data/eval_b.jsonl";
    c.synth.seed = 7;
    c.train.steps = 200;
    return c;
}

ordered_json to_json(const PipelineConfig& c) {
    ordered_json j;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir.string();

    auto& s = j["schedule"];
    s["t_grow"] = c.schedule.t_grow;
    s["tasks"] = ordered_json::array();
    for (const auto& t : c.schedule.tasks) {
        s["tasks"].push_back({{"task", std::string(to_string(t.task))}, {"alpha", t.alpha}, {"beta", t.beta}});
    }

    j["datasets"] = ordered_json::array();
    for (const auto& d : c.datasets) {
        ordered_json dj;
        dj["name"] = d.name;
        dj["path"] = d.path.string();
        dj["task"] = std::string(to_string(d.task));
        dj["size_weight"] = d.size_weight ? ordered_json(*d.size_weight) : ordered_json(nullptr);
        j["datasets"].push_back(dj);
    }
    j["malformed_policy"] = std::string(to_string(c.malformed_policy));
    j["shuffle_epochs"] = c.shuffle_epochs;
    j["plan_checkpoints"] = c.plan_checkpoints;

    j["synth"] = {
        {"seed", c.synth.seed},
        {"classes", c.synth.classes},
        {"alphabet_a", c.synth.alphabet_a},
        {"alphabet_b", c.synth.alphabet_b},
        {"successors", c.synth.successors},
        {"smoothing", c.synth.smoothing},
        {"docs", c.synth.docs},
        {"eval_docs", c.synth.eval_docs},
        {"doc_len_min", c.synth.doc_len_min},
        {"doc_len_max", c.synth.doc_len_max},
    };
    j["sample"] = {{"n", c.sample.n}, {"workers", c.sample.workers}};
    j["vocab"] = {
        {"base", opt_path(c.vocab.base)},
        {"new_tokens", opt_path(c.vocab.new_tokens)},
        {"checkpoint", opt_path(c.vocab.checkpoint)},
    };
    j["pack"] = {
        {"seq_len", c.pack.seq_len},
        {"flush", std::string(to_string(c.pack.flush))},
        {"eval_dataset", opt_path(c.pack.eval_dataset)},
    };
    j["model"] = {{"context", c.model.context}, {"embed_dim", c.model.embed_dim}, {"hidden_dim", c.model.hidden_dim}};
    j["train"] = {
        {"batch_size", c.train.batch_size},
        {"steps", c.train.steps},
        {"lr", c.train.adam.lr},
        {"beta1", c.train.adam.beta1},
        {"beta2", c.train.adam.beta2},
        {"eps", c.train.adam.eps},
        {"eval_every", c.train.eval_every},
        {"threads", c.train.threads},
        {"init", opt_path(c.train_init)},
    };
    j["ablation"] = {
        {"seeds", c.ablation.seeds},
        {"baseline", std::string(to_string(c.ablation.baseline))},
        {"pretrain_steps", c.ablation.pretrain_steps},
        {"steps", c.ablation.steps},
        {"eval_every", c.ablation.eval_every},
        {"window_fraction", c.ablation.window_fraction},
    };
    return j;
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c = default_config();
    Section top(j, "");
    top.get("seed", c.seed);
    top.get("out_dir", c.out_dir);

    if (const auto* s = top.find("schedule")) {
        Section sec(*s, "schedule");
        sec.get("t_grow", c.schedule.t_grow);
        if (const auto* tasks = sec.find("tasks")) {
            if (!tasks->is_array()) throw ConfigError("schedule.tasks: expected an array");
            c.schedule.tasks.clear();
            for (std::size_t i = 0; i < tasks->size(); ++i) {
                Section ts((*tasks)[i], "schedule.tasks." + std::to_string(i));
                TaskSchedule t;
                if (!ts.find("task")) throw ConfigError(ts.path("task") + ": missing");
                ts.get_enum("task", t.task, parse_task_kind);
                ts.get("alpha", t.alpha);
                ts.get("beta", t.beta);
                ts.finish();
                c.schedule.tasks.push_back(t);
            }
        }
        sec.finish();
    }

    if (const auto* ds = top.find("datasets")) {
        if (!ds->is_array()) throw ConfigError("datasets: expected an array");
        c.datasets.clear();
        for (std::size_t i = 0; i < ds->size(); ++i) {
            Section d((*ds)[i], "datasets." + std::to_string(i));
            DatasetSpec spec;
            d.get("name", spec.name);
            d.get("path", spec.path);
            if (!d.find("task")) throw ConfigError(d.path("task") + ": missing");
            d.get_enum("task", spec.task, parse_task_kind);
            if (const auto* w = d.find("size_weight"); w && !w->is_null()) {
                if (!w->is_number()) throw ConfigError(d.path("size_weight") + ": expected a number or null");
                spec.size_weight = w->get<double>();
            }
            d.finish();
            c.datasets.push_back(spec);
        }
    }

    top.get_enum("malformed_policy", c.malformed_policy, parse_malformed_policy);
    top.get("shuffle_epochs", c.shuffle_epochs);
    top.get("plan_checkpoints", c.plan_checkpoints);

    if (const auto* s = top.find("synth")) {
        Section sec(*s, "synth");
        sec.get("seed", c.synth.seed);
        sec.get("classes", c.synth.classes);
        sec.get("alphabet_a", c.synth.alphabet_a);
        sec.get("alphabet_b", c.synth.alphabet_b);
        sec.get("successors", c.synth.successors);
        sec.get("smoothing", c.synth.smoothing);
        sec.get("docs", c.synth.docs);
        sec.get("eval_docs", c.synth.eval_docs);
        sec.get("doc_len_min", c.synth.doc_len_min);
        sec.get("doc_len_max", c.synth.doc_len_max);
        sec.finish();
    }
    if (const auto* s = top.find("sample")) {
        Section sec(*s, "sample");
        sec.get("n", c.sample.n);
        sec.get("workers", c.sample.workers);
        sec.finish();
    }
    if (const auto* s = top.find("vocab")) {
        Section sec(*s, "vocab");
        sec.get("base", c.vocab.base);
        sec.get("new_tokens", c.vocab.new_tokens);
        sec.get("checkpoint", c.vocab.checkpoint);
        sec.finish();
    }
    if (const auto* s = top.find("pack")) {
        Section sec(*s, "pack");
        sec.get("seq_len", c.pack.seq_len);
        sec.get_enum("flush", c.pack.flush, parse_flush_policy);
        sec.get("eval_dataset", c.pack.eval_dataset);
        sec.finish();
    }
    if (const auto* s = top.find("model")) {
        Section sec(*s, "model");
        sec.get("context", c.model.context);
        sec.get("embed_dim", c.model.embed_dim);
        sec.get("hidden_dim", c.model.hidden_dim);
        sec.finish();
    }
    if (const auto* s = top.find("train")) {
        Section sec(*s, "train");
        sec.get("batch_size", c.train.batch_size);
        sec.get("steps", c.train.steps);
        sec.get("lr", c.train.adam.lr);
        sec.get("beta1", c.train.adam.beta1);
        sec.get("beta2", c.train.adam.beta2);
        sec.get("eps", c.train.adam.eps);
        sec.get("eval_every", c.train.eval_every);
        sec.get("threads", c.train.threads);
        sec.get("init", c.train_init);
        sec.finish();
    }
    if (const auto* s = top.find("ablation")) {
        Section sec(*s, "ablation");
        if (const auto* seeds = sec.find("seeds")) {
            if (!seeds->is_array()) throw ConfigError("ablation.seeds: expected an array");
            c.ablation.seeds.clear();
            for (const auto& x : *seeds) {
                if (!x.is_number_unsigned()) throw ConfigError("ablation.seeds: expected non-negative integers");
                c.ablation.seeds.push_back(x.get<std::uint64_t>());
            }
        }
        sec.get_enum("baseline", c.ablation.baseline, parse_baseline);
        sec.get("pretrain_steps", c.ablation.pretrain_steps);
        sec.get("steps", c.ablation.steps);
        sec.get("eval_every", c.ablation.eval_every);
        sec.get("window_fraction", c.ablation.window_fraction);
        sec.finish();
    }
    top.finish();
    c.validate();
    return c;
}

void apply_override(json& j, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override \"" + std::string(assignment) + "\" is not key=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string value(assignment.substr(eq + 1));

    json* node = &j;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) {
            throw ConfigError("override key \"" + key + "\" has an empty component");
        }
        if (node->is_array()) {
            std::size_t idx = 0;
            auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), idx);
            if (ec != std::errc() || ptr != part.data() + part.size() || idx >= node->size()) {
                throw ConfigError("override key \"" + key + "\": bad array index " + part);
            }
            node = &(*node)[idx];
        } else {
            if (node->is_null()) {
                *node = json::object();
            }
            if (!node->is_object()) {
                throw ConfigError("override key \"" + key + "\": " + part + " is not inside an object");
            }
            node = &(*node)[part];
        }
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    json parsed = json::parse(value, nullptr, false);
    *node = parsed.is_discarded() ? json(value) : parsed;
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
    // Overrides address the full document, so start from every default.
    json j = json::parse(to_json(default_config()).dump());
    if (path) {
        std::ifstream is(*path);
        if (!is) {
            throw ConfigError("cannot open config " + path->string());
        }
        const json file = json::parse(is, nullptr, false);
        if (file.is_discarded()) {
            throw ConfigError("config " + path->string() + " is not valid JSON");
        }
        if (!file.is_object()) {
            throw ConfigError("config " + path->string() + ": expected an object");
        }
        deep_merge(j, file);
    }
    for (const auto& o : overrides) {
        apply_override(j, o);
    }
    if (const char* env = std::getenv("CURRICULA_SEED"); env && *env) {
        std::uint64_t seed = 0;
        const std::string_view s(env);
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw ConfigError("CURRICULA_SEED is not an unsigned integer");
        }
        j["seed"] = seed;
    }
    return config_from_json(j);
}

} // namespace curricula
