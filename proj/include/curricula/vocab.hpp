#pragma once

#include "curricula/error.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace curricula {

using TokenId = std::uint32_t;

inline constexpr std::string_view kEndOfText = "<|endoftext|>";
inline constexpr std::string_view kPad = "<|pad|>";

// Token table with greedy longest-match tokenization.
//
// Stand-in for a production subword tokenizer: the 256 single-byte tokens are
// always present, so every byte string tokenizes and detokenizes exactly.
class Vocab {
public:
    // Throws Error on an empty token, a duplicate, or a missing single byte.
    explicit Vocab(std::vector<std::string> tokens);

    // The 256 bytes (ids 0..255), then <|endoftext|>, <|pad|>, then `extra`.
    static Vocab byte_level(std::span<const std::string> extra = {});

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    std::optional<TokenId> find(std::string_view token) const;

    // Throws Error when the special token is absent.
    TokenId eot_id() const;
    TokenId pad_id() const;

    std::vector<TokenId> tokenize(std::string_view text) const;
    std::string detokenize(std::span<const TokenId> ids) const;

private:
    struct Node {
        std::vector<std::pair<unsigned char, std::uint32_t>> children; // sorted by byte
        std::int64_t id = -1;
    };

    void insert(const std::string& token, TokenId id);
    std::uint32_t child(std::uint32_t node, unsigned char b) const;

    std::vector<std::string> tokens_;
    std::vector<Node> trie_;
};

struct VocabExtension {
    Vocab vocab;
    std::vector<std::string> appended; // in input order
    std::vector<std::string> skipped;  // already present in the base vocab
};

// Append tokens not already present, preserving input order. Existing ids are
// unchanged. Throws Error on an empty token or a duplicate within new_tokens.
VocabExtension extend_vocab(const Vocab& base, std::span<const std::string> new_tokens);

// Dense row-major matrix. EmbeddingMatrix is the float32 interchange form.
template <class T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), values(r * c, fill) {}

    std::span<T> row(std::size_t i) { return {values.data() + i * cols, cols}; }
    std::span<const T> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
    T& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

    bool operator==(const Matrix&) const = default;
};

using EmbeddingMatrix = Matrix<float>;

// Append one row per token: the arithmetic mean (accumulated in double) of
// the rows of its tokenization under v_base, counting repeated pieces with
// multiplicity. Existing rows are copied bit for bit.
template <class T>
Matrix<T> mean_init_rows(const Matrix<T>& e, const Vocab& v_base, std::span<const std::string> new_tokens) {
    if (e.rows != v_base.size()) {
        throw Error("matrix has " + std::to_string(e.rows) + " rows but vocab has " +
                    std::to_string(v_base.size()) + " tokens");
    }
    Matrix<T> out = e;
    out.rows += new_tokens.size();
    out.values.resize(out.rows * out.cols);
    std::vector<double> acc(e.cols);
    for (std::size_t n = 0; n < new_tokens.size(); ++n) {
        const auto pieces = v_base.tokenize(new_tokens[n]);
        if (pieces.empty()) {
            throw Error("new token tokenizes to nothing");
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        for (TokenId id : pieces) {
            const auto r = e.row(id);
            for (std::size_t j = 0; j < e.cols; ++j) {
                acc[j] += static_cast<double>(r[j]);
            }
        }
        auto dst = out.row(e.rows + n);
        for (std::size_t j = 0; j < e.cols; ++j) {
            dst[j] = static_cast<T>(acc[j] / static_cast<double>(pieces.size()));
        }
    }
    return out;
}

template <class T>
struct ModelVocabExtension {
    Matrix<T> embedding;
    Matrix<T> output;
    VocabExtension ext;
};

// Extend the vocab once and both matrices with the same appended token order.
// Each matrix's new rows depend only on that matrix.
template <class T>
ModelVocabExtension<T> extend_model_vocab(const Matrix<T>& embedding, const Matrix<T>& output, const Vocab& v,
                                          std::span<const std::string> new_tokens) {
    if (embedding.rows != v.size() || output.rows != v.size()) {
        throw Error("embedding/output matrices are not paired with the vocab");
    }
    auto ext = extend_vocab(v, new_tokens);
    auto e = mean_init_rows(embedding, v, ext.appended);
    auto o = mean_init_rows(output, v, ext.appended);
    return {std::move(e), std::move(o), std::move(ext)};
}

// Vocab file: one token per line; line number is the id. Escapes: \\ \n \t,
// and \xHH for other control bytes and for bytes of tokens that are not valid
// UTF-8 on their own.
void save_vocab(const std::filesystem::path& path, const Vocab& v);
Vocab load_vocab(const std::filesystem::path& path);
std::string escape_token(std::string_view token);
std::string unescape_token(std::string_view line);

// Token list file (same escaping, no completeness requirement).
void save_token_list(const std::filesystem::path& path, std::span<const std::string> tokens);
std::vector<std::string> load_token_list(const std::filesystem::path& path);

// "EMB1" matrix file: magic, u32 rows, u32 cols, rows*cols f32, little-endian.
void save_matrix(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix load_matrix(const std::filesystem::path& path);

} // namespace curricula
