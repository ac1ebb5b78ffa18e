#pragma once

#include "curricula/packer.hpp"
#include "curricula/vocab.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace curricula {

// Window language model. The next token is predicted from the previous
// `context` tokens only, not the full prefix:
//
//   x      = concat(E[ctx_0], ..., E[ctx_{k-1}])
//   z      = tanh(x W1 + b1)
//   logits = O z + b2,   O = output matrix, one row per token (|V| x h)
//
// Positions near the start of a sequence see the separator in the missing
// context slots. Forward and backward passes run in double precision.
struct ModelConfig {
    std::size_t context = 8;
    std::size_t embed_dim = 32;
    std::size_t hidden_dim = 64;
    std::size_t vocab_size = 0;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct ModelParams {
    ModelConfig cfg;
    Matrix<double> embedding; // |V| x d
    Matrix<double> w1;        // (k*d) x h
    std::vector<double> b1;   // h
    Matrix<double> output;    // |V| x h
    std::vector<double> b2;   // |V|

    // All-zero parameters of the right shapes (also the gradient container).
    static ModelParams zeros(const ModelConfig& cfg);
    // Matrices ~ N(0, 0.02) drawn from cfg.seed in tensor order, biases zero.
    static ModelParams initialize(const ModelConfig& cfg);

    // Views in the fixed order E, W1, b1, O, b2.
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;
    std::size_t parameter_count() const;

    bool operator==(const ModelParams&) const = default;
};

// log softmax over the vocab for a context of exactly cfg.context ids.
// Throws Error on a bad id or context length.
std::vector<double> log_probs(const ModelParams& p, std::span<const TokenId> context);

// Mean over positions 1..L-1 of -log P(t_i | previous tokens).
double nll_loss(const ModelParams& p, std::span<const TokenId> seq, TokenId sep_id);

// Mean of nll_loss over the batch and its exact gradient, written to `grad`
// (resized as needed). Per-sequence gradients are combined by a pairwise tree
// over sequence index, so the result is bitwise independent of `threads`.
double loss_and_grad(const ModelParams& p, std::span<const PackedSequence> batch, TokenId sep_id, ModelParams& grad,
                     std::size_t threads = 1);

ModelParams grad(const ModelParams& p, std::span<const PackedSequence> batch, TokenId sep_id);

// exp(mean nll over every position of every sequence). Throws Error when empty.
double eval_ppl(const ModelParams& p, std::span<const PackedSequence> seqs, TokenId sep_id);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;

    bool operator==(const AdamConfig&) const = default;
};

class Adam {
public:
    Adam(const ModelParams& shape, AdamConfig cfg);
    void step(ModelParams& p, const ModelParams& g);
    std::uint64_t steps() const noexcept { return t_; }

private:
    AdamConfig cfg_;
    ModelParams m_;
    ModelParams v_;
    std::uint64_t t_ = 0;
};

struct TrainConfig {
    std::size_t batch_size = 32;
    std::uint64_t steps = 0;
    AdamConfig adam;
    std::uint64_t eval_every = 0; // 0: evaluate only after the last step
    std::size_t threads = 1;
    TokenId sep_id = 0;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

// Supplies packed sequences to the trainer, in order.
class SequenceSource {
public:
    virtual ~SequenceSource() = default;
    // False when exhausted.
    virtual bool next(PackedSequence& seq) = 0;
};

// Reads a PAK1 file, starting over at the end.
class PackedFileSource : public SequenceSource {
public:
    explicit PackedFileSource(const std::filesystem::path& path);
    bool next(PackedSequence& seq) override;
    std::size_t seq_len() const noexcept { return reader_.seq_len(); }

private:
    PackedReader reader_;
};

struct StepMetrics {
    std::uint64_t step = 0;
    std::uint64_t tokens_seen = 0;
    double train_loss = 0.0;
    std::optional<double> eval_ppl;
};

void write_metrics(std::ostream& os, const StepMetrics& m);
std::vector<StepMetrics> read_metrics(const std::filesystem::path& path);

// Adam training on batches pulled from `data`. `on_step` sees every step's
// metrics; eval_ppl is filled on the eval cadence when `eval_set` is given.
// Throws TrainError on a non-finite loss and Error when data runs out.
void train(ModelParams& p, const TrainConfig& cfg, SequenceSource& data,
           const std::function<void(const StepMetrics&)>& on_step,
           std::span<const PackedSequence> eval_set = {});

// Append rows for new tokens to E, O (mean of base pieces) and b2 (mean of
// the pieces' biases). Returns the extension record with the new vocab.
VocabExtension extend_model(ModelParams& p, const Vocab& v, std::span<const std::string> new_tokens);

// Checkpoint directory: vocab.txt, model.json, and one EMB1 file per tensor
// (embedding.emb, w1.emb, b1.emb, output.emb, b2.emb), stored as float32.
void save_checkpoint(const std::filesystem::path& dir, const ModelParams& p, const Vocab& v);
std::pair<ModelParams, Vocab> load_checkpoint(const std::filesystem::path& dir);

} // namespace curricula
