#include "curricula/trainer.hpp"

#include "curricula/error.hpp"
#include "curricula/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <json.hpp>
#include <thread>

namespace curricula {

void ModelConfig::validate() const {
    if (context < 1) throw ConfigError("model: context must be at least 1");
    if (embed_dim < 1) throw ConfigError("model: embed_dim must be at least 1");
    if (hidden_dim < 1) throw ConfigError("model: hidden_dim must be at least 1");
    if (vocab_size < 1) throw ConfigError("model: vocab_size must be at least 1");
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.cfg = cfg;
    p.embedding = Matrix<double>(cfg.vocab_size, cfg.embed_dim);
    p.w1 = Matrix<double>(cfg.context * cfg.embed_dim, cfg.hidden_dim);
    p.b1.assign(cfg.hidden_dim, 0.0);
    p.output = Matrix<double>(cfg.vocab_size, cfg.hidden_dim);
    p.b2.assign(cfg.vocab_size, 0.0);
    return p;
}

ModelParams ModelParams::initialize(const ModelConfig& cfg) {
    constexpr double kInitStd = 0.02;
    ModelParams p = zeros(cfg);
    Rng rng(cfg.seed);
    for (auto* m : {&p.embedding, &p.w1, &p.output}) {
        for (double& x : m->values) {
            x = kInitStd * rng.normal();
        }
    }
    return p;
}

std::vector<std::span<double>> ModelParams::tensors() {
    return {embedding.values, w1.values, b1, output.values, b2};
}

std::vector<std::span<const double>> ModelParams::tensors() const {
    return {embedding.values, w1.values, b1, output.values, b2};
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (auto t : tensors()) {
        n += t.size();
    }
    return n;
}

namespace {

struct Workspace {
    std::vector<TokenId> ctx;
    std::vector<double> x, z, logits, probs, dz, dx;

    explicit Workspace(const ModelConfig& c)
        : ctx(c.context), x(c.context * c.embed_dim), z(c.hidden_dim), logits(c.vocab_size), probs(c.vocab_size),
          dz(c.hidden_dim), dx(c.context * c.embed_dim) {}
};

// Dot product with four interleaved partial sums, combined in a fixed order.
double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) {
        s0 += a[i] * b[i];
    }
    return (s0 + s1) + (s2 + s3);
}

void check_id(const ModelParams& p, TokenId id) {
    if (id >= p.cfg.vocab_size) {
        throw Error("token id " + std::to_string(id) + " outside vocab of size " + std::to_string(p.cfg.vocab_size));
    }
}

// Fills ws.x, ws.z, ws.logits and ws.probs (softmax) from ws.ctx; returns
// the log of the softmax normalizer, so log P(v) = logit_v - lse.
double forward(const ModelParams& p, Workspace& ws) {
    const std::size_t k = p.cfg.context;
    const std::size_t d = p.cfg.embed_dim;
    const std::size_t h = p.cfg.hidden_dim;
    const std::size_t V = p.cfg.vocab_size;

    for (std::size_t j = 0; j < k; ++j) {
        const auto e = p.embedding.row(ws.ctx[j]);
        std::copy(e.begin(), e.end(), ws.x.begin() + static_cast<std::ptrdiff_t>(j * d));
    }
    std::copy(p.b1.begin(), p.b1.end(), ws.z.begin());
    for (std::size_t r = 0; r < k * d; ++r) {
        const double xr = ws.x[r];
        const double* w = p.w1.values.data() + r * h;
        for (std::size_t c = 0; c < h; ++c) {
            ws.z[c] += xr * w[c];
        }
    }
    for (double& v : ws.z) {
        v = std::tanh(v);
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < V; ++v) {
        const double s = p.b2[v] + dot(p.output.values.data() + v * h, ws.z.data(), h);
        ws.logits[v] = s;
        mx = std::max(mx, s);
    }
    double sum = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
        const double e = std::exp(ws.logits[v] - mx);
        ws.probs[v] = e;
        sum += e;
    }
    const double inv = 1.0 / sum;
    for (std::size_t v = 0; v < V; ++v) {
        ws.probs[v] *= inv;
    }
    const double lse = mx + std::log(sum);
    return lse;
}

// Backward for one position given ws from forward(); accumulates
// scale * d(-log P(target)) into g.
void backward(const ModelParams& p, Workspace& ws, TokenId target, double scale, ModelParams& g) {
    const std::size_t k = p.cfg.context;
    const std::size_t d = p.cfg.embed_dim;
    const std::size_t h = p.cfg.hidden_dim;
    const std::size_t V = p.cfg.vocab_size;

    std::fill(ws.dz.begin(), ws.dz.end(), 0.0);
    for (std::size_t v = 0; v < V; ++v) {
        const double dl = scale * (ws.probs[v] - (v == target ? 1.0 : 0.0));
        g.b2[v] += dl;
        double* go = g.output.values.data() + v * h;
        const double* o = p.output.values.data() + v * h;
        for (std::size_t c = 0; c < h; ++c) {
            go[c] += dl * ws.z[c];
            ws.dz[c] += dl * o[c];
        }
    }
    for (std::size_t c = 0; c < h; ++c) {
        ws.dz[c] *= 1.0 - ws.z[c] * ws.z[c]; // now d/d(pre-activation)
        g.b1[c] += ws.dz[c];
    }
    for (std::size_t r = 0; r < k * d; ++r) {
        const double* w = p.w1.values.data() + r * h;
        double* gw = g.w1.values.data() + r * h;
        const double xr = ws.x[r];
        for (std::size_t c = 0; c < h; ++c) {
            gw[c] += xr * ws.dz[c];
        }
        ws.dx[r] = dot(w, ws.dz.data(), h);
    }
    for (std::size_t j = 0; j < k; ++j) {
        auto ge = g.embedding.row(ws.ctx[j]);
        for (std::size_t c = 0; c < d; ++c) {
            ge[c] += ws.dx[j * d + c];
        }
    }
}

void fill_context(std::span<const TokenId> seq, std::size_t i, TokenId sep, std::vector<TokenId>& ctx) {
    const std::size_t k = ctx.size();
    for (std::size_t j = 0; j < k; ++j) {
        // slot j holds token i - k + j
        ctx[j] = (i + j >= k) ? seq[i + j - k] : sep;
    }
}

// Incremental mean. Exact when every input is equal, so the uniform model
// scores log|V| to the last bit.
struct RunningMean {
    double mean = 0.0;
    std::uint64_t n = 0;

    void add(double x) {
        ++n;
        mean += (x - mean) / static_cast<double>(n);
    }
};

// Adds -log P at positions 1..L-1 to `acc`. With g set, also accumulates the
// gradient of `scale` times the sum of those terms.
void sequence_pass(const ModelParams& p, std::span<const TokenId> seq, TokenId sep, Workspace& ws, double scale,
                   ModelParams* g, RunningMean& acc) {
    for (std::size_t i = 1; i < seq.size(); ++i) {
        fill_context(seq, i, sep, ws.ctx);
        const double lse = forward(p, ws);
        // -log P(target) from the logit rather than from probs, which loses
        // precision as P approaches 1.
        const TokenId target = seq[i];
        acc.add(lse - ws.logits[target]);
        if (g) {
            backward(p, ws, target, scale, *g);
        }
    }
}

void check_sequence(const ModelParams& p, std::span<const TokenId> seq, TokenId sep) {
    if (seq.size() < 2) {
        throw Error("sequence must have at least 2 tokens");
    }
    check_id(p, sep);
    for (TokenId id : seq) {
        check_id(p, id);
    }
}

void add_into(ModelParams& dst, const ModelParams& src) {
    auto d = dst.tensors();
    auto s = src.tensors();
    for (std::size_t t = 0; t < d.size(); ++t) {
        for (std::size_t i = 0; i < d[t].size(); ++i) {
            d[t][i] += s[t][i];
        }
    }
}

void set_zero(ModelParams& g) {
    for (auto t : g.tensors()) {
        std::fill(t.begin(), t.end(), 0.0);
    }
}

// Reusable per-sequence gradient buffers.
class BatchGrad {
public:
    double run(const ModelParams& p, std::span<const PackedSequence> batch, TokenId sep, ModelParams& out,
               std::size_t threads) {
        if (batch.empty()) {
            throw Error("empty batch");
        }
        for (const auto& s : batch) {
            check_sequence(p, s, sep);
        }
        const std::size_t B = batch.size();
        if (bufs_.size() < B || (!bufs_.empty() && !(bufs_[0].cfg == p.cfg))) {
            bufs_.assign(B, ModelParams::zeros(p.cfg));
        }
        std::vector<double> losses(B);
        threads = std::clamp<std::size_t>(threads, 1, B);

        auto work = [&](std::size_t w) {
            Workspace ws(p.cfg);
            for (std::size_t b = w; b < B; b += threads) {
                set_zero(bufs_[b]);
                const double positions = static_cast<double>(batch[b].size() - 1);
                const double scale = 1.0 / (positions * static_cast<double>(B));
                RunningMean m;
                sequence_pass(p, batch[b], sep, ws, scale, &bufs_[b], m);
                losses[b] = m.mean;
            }
        };
        if (threads == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < threads; ++w) {
                pool.emplace_back(work, w);
            }
            for (auto& t : pool) {
                t.join();
            }
        }

        // Pairwise tree over sequence index: ((0+1)+(2+3))+...
        for (std::size_t stride = 1; stride < B; stride *= 2) {
            for (std::size_t i = 0; i + stride < B; i += 2 * stride) {
                add_into(bufs_[i], bufs_[i + stride]);
            }
        }
        out = bufs_[0];
        RunningMean loss;
        for (double l : losses) {
            loss.add(l);
        }
        return loss.mean;
    }

private:
    std::vector<ModelParams> bufs_;
};

} // namespace

std::vector<double> log_probs(const ModelParams& p, std::span<const TokenId> context) {
    if (context.size() != p.cfg.context) {
        throw Error("context has " + std::to_string(context.size()) + " ids, model expects " +
                    std::to_string(p.cfg.context));
    }
    for (TokenId id : context) {
        check_id(p, id);
    }
    Workspace ws(p.cfg);
    std::copy(context.begin(), context.end(), ws.ctx.begin());
    const double lse = forward(p, ws);
    std::vector<double> out(p.cfg.vocab_size);
    for (std::size_t v = 0; v < out.size(); ++v) {
        out[v] = ws.logits[v] - lse;
    }
    return out;
}

double nll_loss(const ModelParams& p, std::span<const TokenId> seq, TokenId sep_id) {
    check_sequence(p, seq, sep_id);
    Workspace ws(p.cfg);
    RunningMean m;
    sequence_pass(p, seq, sep_id, ws, 0.0, nullptr, m);
    return m.mean;
}

double loss_and_grad(const ModelParams& p, std::span<const PackedSequence> batch, TokenId sep_id, ModelParams& grad,
                     std::size_t threads) {
    BatchGrad bg;
    return bg.run(p, batch, sep_id, grad, threads);
}

ModelParams grad(const ModelParams& p, std::span<const PackedSequence> batch, TokenId sep_id) {
    ModelParams g;
    loss_and_grad(p, batch, sep_id, g, 1);
    return g;
}

double eval_ppl(const ModelParams& p, std::span<const PackedSequence> seqs, TokenId sep_id) {
    if (seqs.empty()) {
        throw Error("evaluation set is empty");
    }
    Workspace ws(p.cfg);
    RunningMean m;
    for (const auto& s : seqs) {
        check_sequence(p, s, sep_id);
        sequence_pass(p, s, sep_id, ws, 0.0, nullptr, m);
    }
    return std::exp(m.mean);
}

Adam::Adam(const ModelParams& shape, AdamConfig cfg)
    : cfg_(cfg), m_(ModelParams::zeros(shape.cfg)), v_(ModelParams::zeros(shape.cfg)) {}

void Adam::step(ModelParams& p, const ModelParams& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto pt = p.tensors();
    auto gt = g.tensors();
    auto mt = m_.tensors();
    auto vt = v_.tensors();
    for (std::size_t t = 0; t < pt.size(); ++t) {
        for (std::size_t i = 0; i < pt[t].size(); ++i) {
            const double gi = gt[t][i];
            mt[t][i] = cfg_.beta1 * mt[t][i] + (1.0 - cfg_.beta1) * gi;
            vt[t][i] = cfg_.beta2 * vt[t][i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = mt[t][i] / c1;
            const double vhat = vt[t][i] / c2;
            pt[t][i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
    if (!(adam.lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("train: beta1 must be in [0,1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("train: beta2 must be in [0,1)");
    if (!(adam.eps > 0.0)) throw ConfigError("train: eps must be positive");
    if (threads < 1) throw ConfigError("train: threads must be positive");
}

PackedFileSource::PackedFileSource(const std::filesystem::path& path) : reader_(path) {
    if (reader_.count() == 0) {
        throw Error("packed file " + path.string() + " holds no sequences");
    }
}

bool PackedFileSource::next(PackedSequence& seq) {
    if (reader_.next(seq)) {
        return true;
    }
    reader_.rewind();
    return reader_.next(seq);
}

void write_metrics(std::ostream& os, const StepMetrics& m) {
    nlohmann::ordered_json j;
    j["step"] = m.step;
    j["tokens_seen"] = m.tokens_seen;
    j["train_loss"] = m.train_loss;
    if (m.eval_ppl) {
        j["eval_ppl"] = *m.eval_ppl;
    }
    os << j.dump() << '\n';
}

std::vector<StepMetrics> read_metrics(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw InputError("cannot open metrics file " + path.string());
    }
    std::vector<StepMetrics> out;
    std::string line;
    while (std::getline(is, line)) {
        const auto j = nlohmann::json::parse(line);
        StepMetrics m;
        m.step = j.at("step").get<std::uint64_t>();
        m.tokens_seen = j.at("tokens_seen").get<std::uint64_t>();
        m.train_loss = j.at("train_loss").get<double>();
        if (j.contains("eval_ppl")) {
            m.eval_ppl = j["eval_ppl"].get<double>();
        }
        out.push_back(m);
    }
    return out;
}

void train(ModelParams& p, const TrainConfig& cfg, SequenceSource& data,
           const std::function<void(const StepMetrics&)>& on_step, std::span<const PackedSequence> eval_set) {
    cfg.validate();
    Adam adam(p, cfg.adam);
    BatchGrad bg;
    ModelParams g;
    std::vector<PackedSequence> batch(cfg.batch_size);
    std::uint64_t tokens = 0;
    for (std::uint64_t step = 1; step <= cfg.steps; ++step) {
        for (auto& s : batch) {
            if (!data.next(s)) {
                throw Error("training data exhausted at step " + std::to_string(step));
            }
            tokens += s.size();
        }
        const double loss = bg.run(p, batch, cfg.sep_id, g, cfg.threads);
        if (!std::isfinite(loss)) {
            throw TrainError("non-finite training loss at step " + std::to_string(step));
        }
        adam.step(p, g);

        StepMetrics m{step, tokens, loss, std::nullopt};
        const bool due = cfg.eval_every > 0 ? (step % cfg.eval_every == 0) : false;
        if (!eval_set.empty() && (due || step == cfg.steps)) {
            m.eval_ppl = eval_ppl(p, eval_set, cfg.sep_id);
        }
        if (on_step) {
            on_step(m);
        }
    }
}

VocabExtension extend_model(ModelParams& p, const Vocab& v, std::span<const std::string> new_tokens) {
    if (p.cfg.vocab_size != v.size()) {
        throw Error("model vocab size does not match the vocab");
    }
    auto ext = extend_model_vocab(p.embedding, p.output, v, new_tokens);
    Matrix<double> bias(p.b2.size(), 1);
    bias.values = p.b2;
    bias = mean_init_rows(bias, v, ext.ext.appended);
    p.embedding = std::move(ext.embedding);
    p.output = std::move(ext.output);
    p.b2 = std::move(bias.values);
    p.cfg.vocab_size = ext.ext.vocab.size();
    return std::move(ext.ext);
}

namespace {

EmbeddingMatrix to_f32(const Matrix<double>& m) {
    EmbeddingMatrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        out.values[i] = static_cast<float>(m.values[i]);
    }
    return out;
}

Matrix<double> to_f64(const EmbeddingMatrix& m) {
    Matrix<double> out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        out.values[i] = m.values[i];
    }
    return out;
}

Matrix<double> column(const std::vector<double>& v) {
    Matrix<double> m(v.size(), 1);
    m.values = v;
    return m;
}

} // namespace

void save_checkpoint(const std::filesystem::path& dir, const ModelParams& p, const Vocab& v) {
    if (p.cfg.vocab_size != v.size()) {
        throw Error("model vocab size does not match the vocab");
    }
    std::filesystem::create_directories(dir);
    save_vocab(dir / "vocab.txt", v);
    save_matrix(dir / "embedding.emb", to_f32(p.embedding));
    save_matrix(dir / "w1.emb", to_f32(p.w1));
    save_matrix(dir / "b1.emb", to_f32(column(p.b1)));
    save_matrix(dir / "output.emb", to_f32(p.output));
    save_matrix(dir / "b2.emb", to_f32(column(p.b2)));

    nlohmann::ordered_json j;
    j["context"] = p.cfg.context;
    j["embed_dim"] = p.cfg.embed_dim;
    j["hidden_dim"] = p.cfg.hidden_dim;
    j["vocab_size"] = p.cfg.vocab_size;
    j["seed"] = p.cfg.seed;
    j["tensors"] = {
        {"embedding", {{"file", "embedding.emb"}, {"rows", p.embedding.rows}, {"cols", p.embedding.cols}}},
        {"w1", {{"file", "w1.emb"}, {"rows", p.w1.rows}, {"cols", p.w1.cols}}},
        {"b1", {{"file", "b1.emb"}, {"rows", p.b1.size()}, {"cols", 1}}},
        {"output", {{"file", "output.emb"}, {"rows", p.output.rows}, {"cols", p.output.cols}}},
        {"b2", {{"file", "b2.emb"}, {"rows", p.b2.size()}, {"cols", 1}}},
    };
    std::ofstream os(dir / "model.json");
    os << j.dump(2) << '\n';
    if (!os) {
        throw Error("cannot write " + (dir / "model.json").string());
    }
}

std::pair<ModelParams, Vocab> load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream is(dir / "model.json");
    if (!is) {
        throw InputError("no checkpoint at " + dir.string());
    }
    const auto j = nlohmann::json::parse(is);
    ModelConfig cfg;
    cfg.context = j.at("context").get<std::size_t>();
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    ModelParams p = ModelParams::zeros(cfg);

    auto load = [&](const char* name, std::size_t rows, std::size_t cols) {
        auto m = to_f64(load_matrix(dir / j.at("tensors").at(name).at("file").get<std::string>()));
        if (m.rows != rows || m.cols != cols) {
            throw Error(std::string("checkpoint tensor ") + name + " has the wrong shape");
        }
        return m;
    };
    p.embedding = load("embedding", p.embedding.rows, p.embedding.cols);
    p.w1 = load("w1", p.w1.rows, p.w1.cols);
    p.b1 = load("b1", p.b1.size(), 1).values;
    p.output = load("output", p.output.rows, p.output.cols);
    p.b2 = load("b2", p.b2.size(), 1).values;

    Vocab v = load_vocab(dir / "vocab.txt");
    if (v.size() != cfg.vocab_size) {
        throw Error("checkpoint vocab does not match model.json");
    }
    return {std::move(p), std::move(v)};
}

} // namespace curricula
