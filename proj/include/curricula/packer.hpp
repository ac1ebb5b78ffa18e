#pragma once

#include "curricula/vocab.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace curricula {

enum class FlushPolicy : std::uint8_t { drop_tail, pad_tail };

std::string_view to_string(FlushPolicy p) noexcept;
std::optional<FlushPolicy> parse_flush_policy(std::string_view s) noexcept;

struct PackerConfig {
    std::size_t seq_len = 2048;
    TokenId sep_id = 0;
    FlushPolicy flush = FlushPolicy::drop_tail;
    TokenId pad_id = 0; // only written under pad_tail

    // Throws ConfigError; ids are checked against vocab_size.
    void validate(std::size_t vocab_size) const;
    bool operator==(const PackerConfig&) const = default;
};

using PackedSequence = std::vector<TokenId>;

struct PackStats {
    std::uint64_t instances = 0;
    std::uint64_t instance_tokens = 0; // excluding separators
    std::uint64_t separators = 0;
    std::uint64_t sequences = 0;
    std::uint64_t dropped = 0; // tail tokens discarded at flush
    std::uint64_t padded = 0;  // pad tokens added at flush

    // sequences * L == instance_tokens + separators - dropped + padded
    bool conserved(std::size_t seq_len) const noexcept {
        return sequences * seq_len == instance_tokens + separators - dropped + padded;
    }
};

// Full-sentence packing. Each instance is followed by the separator and the
// resulting stream is cut into consecutive windows of exactly seq_len ids;
// instances freely cross window boundaries, so an over-long instance is split
// rather than truncated.
class Packer {
public:
    using Emit = std::function<void(const PackedSequence&)>;

    explicit Packer(PackerConfig cfg);

    void push(std::span<const TokenId> instance, const Emit& emit);
    // Drop or pad the partial window. Further pushes start a fresh window.
    void finish(const Emit& emit);

    const PackStats& stats() const noexcept { return stats_; }
    const PackerConfig& config() const noexcept { return cfg_; }

private:
    void put(TokenId id, const Emit& emit);

    PackerConfig cfg_;
    PackedSequence buf_;
    PackStats stats_;
};

// Pack a whole list of tokenized instances.
std::vector<PackedSequence> pack(std::span<const std::vector<TokenId>> instances, const PackerConfig& cfg,
                                 PackStats* stats = nullptr);

// "PAK1" file: magic, u32 L, u64 count, then count*L u32 ids, little-endian.
class PackedWriter {
public:
    PackedWriter(const std::filesystem::path& path, std::size_t seq_len);
    PackedWriter(const PackedWriter&) = delete;
    PackedWriter& operator=(const PackedWriter&) = delete;
    ~PackedWriter();

    void write(std::span<const TokenId> seq);
    // Patches the sequence count into the header. Called by the destructor if
    // not called explicitly, but only an explicit call reports errors.
    void close();

    std::uint64_t count() const noexcept { return count_; }

private:
    std::filesystem::path path_;
    std::ofstream os_;
    std::size_t seq_len_;
    std::uint64_t count_ = 0;
    bool closed_ = false;
};

class PackedReader {
public:
    explicit PackedReader(const std::filesystem::path& path);

    std::size_t seq_len() const noexcept { return seq_len_; }
    std::uint64_t count() const noexcept { return count_; }

    // False once all sequences have been read.
    bool next(PackedSequence& seq);
    void rewind();

private:
    std::filesystem::path path_;
    std::ifstream is_;
    std::size_t seq_len_ = 0;
    std::uint64_t count_ = 0;
    std::uint64_t read_ = 0;
};

std::vector<PackedSequence> read_packed(const std::filesystem::path& path);

} // namespace curricula
