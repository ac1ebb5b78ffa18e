#include "curricula/pipeline.hpp"

#include "curricula/error.hpp"
#include "curricula/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace curricula {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw Error("cannot write " + path.string());
    }
    return os;
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) {
        throw InputError("missing " + what + " at " + path.string());
    }
}

ordered_json task_counts(const MixSchedule& m, const std::vector<std::uint64_t>& per_task) {
    ordered_json j = ordered_json::object();
    for (std::size_t i = 0; i < m.tasks.size(); ++i) {
        j[std::string(to_string(m.tasks[i].task))] = i < per_task.size() ? per_task[i] : 0;
    }
    return j;
}

std::vector<DatasetSpec> resolved_datasets(const PipelineConfig& c) {
    auto ds = c.datasets;
    for (auto& d : ds) {
        d.path = c.resolve(d.path);
    }
    return ds;
}

PackerConfig packer_config(const PipelineConfig& c, const Vocab& v) {
    PackerConfig pc;
    pc.seq_len = c.pack.seq_len;
    pc.sep_id = v.eot_id();
    pc.pad_id = v.pad_id();
    pc.flush = c.pack.flush;
    pc.validate(v.size());
    return pc;
}

// Tokenize and pack a corpus-format file into a PAK1 file.
PackStats pack_corpus_file(const DatasetSpec& spec, MalformedPolicy policy, const Vocab& v, const PackerConfig& pc,
                           const fs::path& out) {
    DatasetReader reader(spec, SourceFamily::corpus, policy);
    PackedWriter writer(out, pc.seq_len);
    Packer packer(pc);
    auto emit = [&](const PackedSequence& s) { writer.write(s); };
    while (auto inst = reader.next()) {
        packer.push(v.tokenize(inst->text), emit);
    }
    packer.finish(emit);
    writer.close();
    return packer.stats();
}

std::vector<PackedSequence> pack_corpus(const DatasetSpec& spec, MalformedPolicy policy, const Vocab& v,
                                        const PackerConfig& pc) {
    DatasetReader reader(spec, SourceFamily::corpus, policy);
    std::vector<PackedSequence> seqs;
    Packer packer(pc);
    auto emit = [&](const PackedSequence& s) { seqs.push_back(s); };
    while (auto inst = reader.next()) {
        packer.push(v.tokenize(inst->text), emit);
    }
    packer.finish(emit);
    return seqs;
}

std::vector<std::string> new_token_list(const PipelineConfig& c) {
    if (!c.vocab.new_tokens) {
        return {};
    }
    const auto path = c.resolve(*c.vocab.new_tokens);
    require_file(path, "token list");
    return load_token_list(path);
}

ordered_json optional_number(const std::optional<double>& x) {
    return x ? ordered_json(*x) : ordered_json(nullptr);
}

} // namespace

SamplerConfig sampler_config(const PipelineConfig& c) {
    SamplerConfig sc;
    sc.mix = c.schedule;
    sc.datasets = resolved_datasets(c);
    sc.seed = c.seed;
    sc.malformed_policy = c.malformed_policy;
    sc.shuffle_epochs = c.shuffle_epochs;
    return sc;
}

Vocab pipeline_vocab(const PipelineConfig& c) {
    const auto path = c.resolve(artifact::vocab);
    if (fs::exists(path)) {
        return load_vocab(path);
    }
    return Vocab::byte_level();
}

ordered_json cmd_plan(const PipelineConfig& c, std::ostream& table_out) {
    const auto rows = schedule_table(c.schedule, c.plan_checkpoints);
    write_schedule_table(table_out, c.schedule, rows);
    ordered_json j;
    j["command"] = "plan";
    j["rows"] = rows.size();
    j["t_grow"] = c.schedule.t_grow;
    return j;
}

ordered_json cmd_gen(const PipelineConfig& c) {
    const auto files = gen_suite(c.synth, c.resolve(artifact::data_dir));
    ordered_json j;
    j["command"] = "gen";
    j["dir"] = c.resolve(artifact::data_dir).string();
    ordered_json records = ordered_json::object();
    for (const auto& f : files) {
        records[f.name] = f.records;
    }
    j["records"] = records;
    return j;
}

ordered_json cmd_sample(const PipelineConfig& c) {
    const auto sc = sampler_config(c);
    fs::create_directories(c.out_dir);
    auto inst_os = open_out(c.resolve(artifact::instances));
    auto log_os = open_out(c.resolve(artifact::provenance));
    const auto stats = sample_run(sc, c.sample.n, c.sample.workers, inst_os, log_os);
    inst_os.close();
    log_os.close();
    if (!inst_os || !log_os) {
        throw Error("write failure in " + c.out_dir.string());
    }
    ordered_json j;
    j["instances"] = stats.instances;
    j["command"] = "sample";
    j["per_task"] = task_counts(c.schedule, stats.per_task);
    return j;
}

ordered_json cmd_extend(const PipelineConfig& c) {
    Vocab base = Vocab::byte_level();
    if (c.vocab.base) {
        const auto path = c.resolve(*c.vocab.base);
        require_file(path, "base vocab");
        base = load_vocab(path);
    }
    const auto tokens = new_token_list(c);

    ordered_json j;
    j["command"] = "extend";
    j["base_size"] = base.size();
    if (c.vocab.checkpoint) {
        const auto dir = c.resolve(*c.vocab.checkpoint);
        auto [params, v] = load_checkpoint(dir);
        if (v.tokens() != base.tokens()) {
            throw ConfigError("checkpoint vocab differs from the base vocab");
        }
        auto ext = extend_model(params, v, tokens);
        save_vocab(c.resolve(artifact::vocab), ext.vocab);
        save_checkpoint(c.resolve(artifact::extended_checkpoint), params, ext.vocab);
        j["appended"] = ext.appended.size();
        j["skipped"] = ext.skipped.size();
        j["size"] = ext.vocab.size();
        j["checkpoint"] = c.resolve(artifact::extended_checkpoint).string();
        return j;
    }
    auto ext = extend_vocab(base, tokens);
    fs::create_directories(c.out_dir);
    save_vocab(c.resolve(artifact::vocab), ext.vocab);
    j["appended"] = ext.appended.size();
    j["skipped"] = ext.skipped.size();
    j["size"] = ext.vocab.size();
    return j;
}

ordered_json cmd_pack(const PipelineConfig& c) {
    const auto in_path = c.resolve(artifact::instances);
    require_file(in_path, "instance file (run sample first)");
    const Vocab v = pipeline_vocab(c);
    const auto pc = packer_config(c, v);

    std::ifstream is(in_path, std::ios::binary);
    PackedWriter writer(c.resolve(artifact::packed), pc.seq_len);
    Packer packer(pc);
    auto emit = [&](const PackedSequence& s) { writer.write(s); };
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        auto rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("text") || !rec["text"].is_string()) {
            throw RecordError(artifact::instances, line_no, "not an instance record");
        }
        packer.push(v.tokenize(rec["text"].get<std::string>()), emit);
        ++line_no;
    }
    packer.finish(emit);
    writer.close();

    const auto& st = packer.stats();
    ordered_json j;
    j["command"] = "pack";
    j["instances"] = st.instances;
    j["sequences"] = st.sequences;
    j["seq_len"] = pc.seq_len;
    j["instance_tokens"] = st.instance_tokens;
    j["separators"] = st.separators;
    j["dropped"] = st.dropped;
    j["padded"] = st.padded;

    if (c.pack.eval_dataset) {
        DatasetSpec spec{"eval", c.resolve(*c.pack.eval_dataset), TaskKind::corpus_target, std::nullopt};
        require_file(spec.path, "eval dataset");
        const auto es = pack_corpus_file(spec, c.malformed_policy, v, pc, c.resolve(artifact::packed_eval));
        j["eval_instances"] = es.instances;
        j["eval_sequences"] = es.sequences;
    }
    return j;
}

ordered_json cmd_train(const PipelineConfig& c) {
    const auto packed = c.resolve(artifact::packed);
    require_file(packed, "packed file (run pack first)");
    Vocab v = pipeline_vocab(c);

    ModelParams params;
    if (c.train_init) {
        auto [p, cv] = load_checkpoint(c.resolve(*c.train_init));
        if (cv.tokens() != v.tokens()) {
            throw ConfigError("initial checkpoint vocab differs from the run vocab");
        }
        params = std::move(p);
    } else {
        ModelConfig mc = c.model;
        mc.vocab_size = v.size();
        mc.seed = c.seed;
        params = ModelParams::initialize(mc);
    }

    TrainConfig tc = c.train;
    tc.sep_id = v.eot_id();

    std::vector<PackedSequence> eval_set;
    const auto eval_path = c.resolve(artifact::packed_eval);
    if (fs::exists(eval_path)) {
        eval_set = read_packed(eval_path);
    }

    PackedFileSource source(packed);
    auto metrics_os = open_out(c.resolve(artifact::metrics));
    StepMetrics last;
    std::optional<double> last_ppl;
    train(params, tc, source,
          [&](const StepMetrics& m) {
              write_metrics(metrics_os, m);
              last = m;
              if (m.eval_ppl) {
                  last_ppl = m.eval_ppl;
              }
          },
          eval_set);
    metrics_os.close();
    save_checkpoint(c.resolve(artifact::checkpoint), params, v);

    ordered_json j;
    j["command"] = "train";
    j["steps"] = tc.steps;
    j["tokens_seen"] = last.tokens_seen;
    j["final_loss"] = tc.steps ? ordered_json(last.train_loss) : ordered_json(nullptr);
    j["eval_ppl"] = optional_number(last_ppl);
    j["parameters"] = params.parameter_count();
    return j;
}

ordered_json cmd_eval(const PipelineConfig& c) {
    const auto dir = c.resolve(artifact::checkpoint);
    require_file(dir / "model.json", "checkpoint (run train first)");
    const auto eval_path = c.resolve(artifact::packed_eval);
    require_file(eval_path, "packed eval file (set pack.eval_dataset and run pack)");
    auto [params, v] = load_checkpoint(dir);
    const auto seqs = read_packed(eval_path);
    ordered_json j;
    j["command"] = "eval";
    j["sequences"] = seqs.size();
    j["eval_ppl"] = eval_ppl(params, seqs, v.eot_id());
    return j;
}

SamplerSequenceSource::SamplerSequenceSource(SamplerConfig cfg, const Vocab& vocab, std::size_t seq_len)
    : sampler_(std::move(cfg)), vocab_(vocab), packer_([&] {
          PackerConfig pc;
          pc.seq_len = seq_len;
          pc.sep_id = vocab.eot_id();
          pc.pad_id = vocab.pad_id();
          pc.validate(vocab.size());
          return pc;
      }()) {}

bool SamplerSequenceSource::next(PackedSequence& seq) {
    while (ready_.empty()) {
        const auto inst = sampler_.next_instance();
        packer_.push(vocab_.tokenize(inst.text), [&](const PackedSequence& s) { ready_.push_back(s); });
    }
    seq = std::move(ready_.front());
    ready_.pop_front();
    return true;
}

MixSchedule baseline_mixture(const MixSchedule& m, Baseline b) {
    switch (b) {
    case Baseline::beta: return fixed_mixture(m);
    case Baseline::alpha: {
        MixSchedule out = m;
        for (auto& t : out.tasks) t.beta = t.alpha;
        return out;
    }
    case Baseline::uniform: {
        MixSchedule out = m;
        std::size_t active = 0;
        for (const auto& t : m.tasks) active += (t.alpha > 0.0 || t.beta > 0.0);
        for (auto& t : out.tasks) {
            const bool on = t.alpha > 0.0 || t.beta > 0.0;
            t.alpha = t.beta = on ? 1.0 / static_cast<double>(active) : 0.0;
        }
        return out;
    }
    }
    return fixed_mixture(m);
}

namespace {

std::size_t window_size(std::size_t n, double fraction) {
    if (n == 0) {
        throw Error("no metrics to average");
    }
    const auto w = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(w, 1, n);
}

double mean_loss(std::span<const StepMetrics> m) {
    double s = 0.0;
    for (const auto& x : m) s += x.train_loss;
    return s / static_cast<double>(m.size());
}

} // namespace

double early_window_loss(std::span<const StepMetrics> m, double fraction) {
    return mean_loss(m.first(window_size(m.size(), fraction)));
}

double final_window_loss(std::span<const StepMetrics> m, double fraction) {
    return mean_loss(m.last(window_size(m.size(), fraction)));
}

namespace {

struct RunResult {
    std::vector<StepMetrics> metrics;
    double final_ppl = 0.0;
};

RunResult run_training(ModelParams params, const TrainConfig& tc, SamplerConfig sc, const Vocab& v,
                       std::size_t seq_len, std::span<const PackedSequence> eval_set, const fs::path& metrics_path,
                       std::ostream* progress, const std::string& label) {
    SamplerSequenceSource source(std::move(sc), v, seq_len);
    auto os = open_out(metrics_path);
    RunResult r;
    train(params, tc, source,
          [&](const StepMetrics& m) {
              write_metrics(os, m);
              r.metrics.push_back(m);
              if (m.eval_ppl) {
                  r.final_ppl = *m.eval_ppl;
                  if (progress) {
                      *progress << label << " step " << m.step << " loss " << m.train_loss << " eval_ppl "
                                << *m.eval_ppl << '\n';
                  }
              }
          },
          eval_set);
    os.close();
    return r;
}

std::vector<std::pair<double, double>> moving_average(const std::vector<StepMetrics>& m, std::size_t w) {
    std::vector<std::pair<double, double>> pts;
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        s += m[i].train_loss;
        if (i >= w) s -= m[i - w].train_loss;
        const auto n = std::min(i + 1, w);
        pts.emplace_back(static_cast<double>(m[i].tokens_seen), s / static_cast<double>(n));
    }
    return pts;
}

std::vector<std::pair<double, double>> ppl_points(const std::vector<StepMetrics>& m) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& x : m) {
        if (x.eval_ppl) pts.emplace_back(static_cast<double>(x.tokens_seen), *x.eval_ppl);
    }
    return pts;
}

} // namespace

ordered_json cmd_ablate(const PipelineConfig& c, std::ostream* progress) {
    const auto datasets = resolved_datasets(c);
    for (const auto& d : datasets) {
        require_file(d.path, "dataset " + d.name + " (run gen first)");
    }
    if (!c.pack.eval_dataset) {
        throw ConfigError("ablation needs pack.eval_dataset (target-language eval text)");
    }
    const auto eval_path = c.resolve(*c.pack.eval_dataset);
    require_file(eval_path, "eval dataset");

    Vocab base = Vocab::byte_level();
    if (c.vocab.base) {
        const auto path = c.resolve(*c.vocab.base);
        require_file(path, "base vocab");
        base = load_vocab(path);
    }
    const auto tokens = new_token_list(c);
    const Vocab extended = extend_vocab(base, tokens).vocab;

    PackerConfig pc;
    pc.seq_len = c.pack.seq_len;
    pc.sep_id = extended.eot_id();
    pc.pad_id = extended.pad_id();
    pc.flush = FlushPolicy::drop_tail;
    const auto eval_set =
        pack_corpus({"eval", eval_path, TaskKind::corpus_target, std::nullopt}, c.malformed_policy, extended, pc);
    if (eval_set.empty()) {
        throw ConfigError("eval dataset is shorter than one packed sequence");
    }

    // Pretraining mixture: language A corpus only.
    SamplerConfig pre_sc;
    pre_sc.mix.tasks = {{TaskKind::corpus_en, 1.0, 1.0}};
    pre_sc.mix.t_grow = 1;
    for (const auto& d : datasets) {
        if (d.task == TaskKind::corpus_en) pre_sc.datasets.push_back(d);
    }
    pre_sc.malformed_policy = c.malformed_policy;
    pre_sc.shuffle_epochs = c.shuffle_epochs;

    const MixSchedule fixed = baseline_mixture(c.schedule, c.ablation.baseline);
    const auto out = c.resolve(artifact::ablation_dir);
    fs::create_directories(out);

    ordered_json seeds = ordered_json::array();
    std::size_t early_wins = 0;
    std::size_t ppl_wins = 0;
    std::vector<PlotSeries> loss_series;
    std::vector<PlotSeries> ppl_series;
    const std::size_t ma = std::max<std::size_t>(1, c.ablation.steps / 20);

    for (const auto seed : c.ablation.seeds) {
        ModelConfig mc = c.model;
        mc.vocab_size = base.size();
        mc.seed = derive_seed(seed, tag_of("model"));
        ModelParams params = ModelParams::initialize(mc);

        TrainConfig tc = c.train;
        tc.sep_id = base.eot_id();
        tc.steps = c.ablation.pretrain_steps;
        tc.eval_every = 0;
        if (tc.steps > 0) {
            pre_sc.seed = derive_seed(seed, tag_of("pretrain"));
            SamplerSequenceSource pre(pre_sc, base, c.pack.seq_len);
            train(params, tc, pre, [&](const StepMetrics& m) {
                if (progress && m.step == tc.steps) {
                    *progress << "seed " << seed << " pretrain loss " << m.train_loss << '\n';
                }
            });
        }
        const auto ext = extend_model(params, base, tokens);

        tc.sep_id = ext.vocab.eot_id();
        tc.steps = c.ablation.steps;
        tc.eval_every = c.ablation.eval_every;

        SamplerConfig sc = sampler_config(c);
        sc.seed = derive_seed(seed, tag_of("sampler"));
        SamplerConfig fixed_sc = sc;
        fixed_sc.mix = fixed;

        const std::string stem = "seed_" + std::to_string(seed);
        const auto dyn = run_training(params, tc, sc, ext.vocab, c.pack.seq_len, eval_set,
                                      out / (stem + "_dynamic.jsonl"), progress, stem + " dynamic");
        const auto fix = run_training(params, tc, fixed_sc, ext.vocab, c.pack.seq_len, eval_set,
                                      out / (stem + "_fixed.jsonl"), progress, stem + " fixed");

        auto summary = [&](const RunResult& r) {
            ordered_json j;
            j["early_loss"] = early_window_loss(r.metrics, c.ablation.window_fraction);
            j["final_loss"] = final_window_loss(r.metrics, c.ablation.window_fraction);
            j["final_eval_ppl"] = r.final_ppl;
            return j;
        };
        ordered_json s;
        s["seed"] = seed;
        s["dynamic"] = summary(dyn);
        s["fixed"] = summary(fix);
        const bool early_lower = s["dynamic"]["early_loss"].get<double>() < s["fixed"]["early_loss"].get<double>();
        const bool ppl_not_worse = dyn.final_ppl <= fix.final_ppl;
        s["early_loss_lower"] = early_lower;
        s["final_ppl_not_worse"] = ppl_not_worse;
        early_wins += early_lower;
        ppl_wins += ppl_not_worse;
        seeds.push_back(s);

        loss_series.push_back({stem + " dynamic", moving_average(dyn.metrics, ma)});
        loss_series.push_back({stem + " fixed", moving_average(fix.metrics, ma)});
        ppl_series.push_back({stem + " dynamic", ppl_points(dyn.metrics)});
        ppl_series.push_back({stem + " fixed", ppl_points(fix.metrics)});
    }

    ordered_json report;
    report["baseline"] = std::string(to_string(c.ablation.baseline));
    report["t_grow"] = c.schedule.t_grow;
    report["pretrain_steps"] = c.ablation.pretrain_steps;
    report["steps"] = c.ablation.steps;
    report["window_fraction"] = c.ablation.window_fraction;
    report["eval_sequences"] = eval_set.size();
    report["seeds"] = seeds;
    report["early_loss_lower_count"] = early_wins;
    report["final_ppl_not_worse_count"] = ppl_wins;
    {
        auto os = open_out(out / "report.json");
        os << report.dump(2) << '\n';
    }
    write_svg_plot(out / "loss.svg", "training loss (moving average)", "tokens seen", "loss", loss_series);
    write_svg_plot(out / "ppl.svg", "target-language eval perplexity", "tokens seen", "perplexity", ppl_series);

    ordered_json j;
    j["command"] = "ablate";
    j["seeds"] = c.ablation.seeds.size();
    j["early_loss_lower_count"] = early_wins;
    j["final_ppl_not_worse_count"] = ppl_wins;
    j["report"] = (out / "report.json").string();
    return j;
}

void write_svg_plot(const fs::path& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    constexpr double W = 720, H = 440, L = 70, R = 180, T = 40, B = 50;

    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool any = false;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(y)) continue;
            if (!any) {
                x0 = x1 = x;
                y0 = y1 = y;
                any = true;
            }
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    auto os = open_out(path);
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = x0 + (x1 - x0) * i / 4.0;
        const double fy = y0 + (y1 - y0) * i / 4.0;
        os << "<text x=\"" << px(fx) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">" << fx
           << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(fy) + 3 << "\" text-anchor=\"end\" font-size=\"10\">" << fy
           << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
       << x_label << "</text>\n";
    os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
       << (T + H - B) / 2 << ")\">" << y_label << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = colors[i % std::size(colors)];
        const bool dashed = i % 2 == 1;
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\""
           << (dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
        for (const auto& [x, y] : series[i].points) {
            if (std::isfinite(y)) os << px(x) << ',' << py(y) << ' ';
        }
        os << "\"/>\n";
        const double ly = T + 14 * static_cast<double>(i);
        os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
           << "\" stroke=\"" << color << "\"" << (dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
        os << "<text x=\"" << W - R + 34 << "\" y=\"" << ly + 4 << "\" font-size=\"10\">" << series[i].label
           << "</text>\n";
    }
    os << "</svg>\n";
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    static const std::vector<std::string> commands = {"plan", "gen",   "sample", "pack",
                                                      "extend", "train", "eval",  "ablate"};
    CLI::App app{"Curriculum data pipeline and desk-scale training driver"};
    app.name("curricula");
    std::string command;
    std::optional<std::string> config_path;
    std::vector<std::string> sets;
    std::optional<std::string> out_dir;
    bool quiet = false;
    app.add_option("command", command, "plan | gen | sample | pack | extend | train | eval | ablate")
        ->required()
        ->check(CLI::IsMember(commands));
    app.add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
    app.add_option("--set", sets, "Override one config key, e.g. --set train.steps=50 (repeatable)")
        ->allow_extra_args(false);
    app.add_option("--out", out_dir, "Output directory (overrides out_dir)");
    app.add_flag("--quiet", quiet, "No progress output on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "curricula: " << e.what() << '\n';
        return 2;
    }

    try {
        std::optional<fs::path> cfg_file;
        if (config_path) cfg_file = *config_path;
        PipelineConfig c = load_config(cfg_file, sets);
        if (out_dir) c.out_dir = *out_dir;

        ordered_json summary;
        if (command == "plan") {
            summary = cmd_plan(c, out);
            if (!quiet) err << summary.dump() << '\n';
            return 0;
        }
        if (command == "gen") summary = cmd_gen(c);
        else if (command == "sample") summary = cmd_sample(c);
        else if (command == "extend") summary = cmd_extend(c);
        else if (command == "pack") summary = cmd_pack(c);
        else if (command == "train") summary = cmd_train(c);
        else if (command == "eval") summary = cmd_eval(c);
        else summary = cmd_ablate(c, quiet ? nullptr : &err);
        out << summary.dump() << '\n';
        return 0;
    } catch (const ConfigError& e) {
        err << "curricula: config error: " << e.what() << '\n';
        return 2;
    } catch (const InputError& e) {
        err << "curricula: missing input: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "curricula: error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace curricula
