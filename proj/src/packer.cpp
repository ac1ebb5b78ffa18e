#include "curricula/packer.hpp"

#include "curricula/binio.hpp"
#include "curricula/error.hpp"

namespace curricula {

std::string_view to_string(FlushPolicy p) noexcept {
    return p == FlushPolicy::pad_tail ? "pad_tail" : "drop_tail";
}

std::optional<FlushPolicy> parse_flush_policy(std::string_view s) noexcept {
    if (s == "drop_tail") return FlushPolicy::drop_tail;
    if (s == "pad_tail") return FlushPolicy::pad_tail;
    return std::nullopt;
}

void PackerConfig::validate(std::size_t vocab_size) const {
    if (seq_len < 2) {
        throw ConfigError("packer: seq_len must be at least 2");
    }
    if (sep_id >= vocab_size) {
        throw ConfigError("packer: sep_id outside the vocab");
    }
    if (flush == FlushPolicy::pad_tail && pad_id >= vocab_size) {
        throw ConfigError("packer: pad_id outside the vocab");
    }
}

Packer::Packer(PackerConfig cfg) : cfg_(cfg) {
    if (cfg_.seq_len < 2) {
        throw ConfigError("packer: seq_len must be at least 2");
    }
    buf_.reserve(cfg_.seq_len);
}

void Packer::put(TokenId id, const Emit& emit) {
    buf_.push_back(id);
    if (buf_.size() == cfg_.seq_len) {
        emit(buf_);
        ++stats_.sequences;
        buf_.clear();
    }
}

void Packer::push(std::span<const TokenId> instance, const Emit& emit) {
    ++stats_.instances;
    stats_.instance_tokens += instance.size();
    for (TokenId id : instance) {
        put(id, emit);
    }
    ++stats_.separators;
    put(cfg_.sep_id, emit);
}

void Packer::finish(const Emit& emit) {
    if (buf_.empty()) {
        return;
    }
    if (cfg_.flush == FlushPolicy::pad_tail) {
        stats_.padded += cfg_.seq_len - buf_.size();
        buf_.resize(cfg_.seq_len, cfg_.pad_id);
        emit(buf_);
        ++stats_.sequences;
    } else {
        stats_.dropped += buf_.size();
    }
    buf_.clear();
}

std::vector<PackedSequence> pack(std::span<const std::vector<TokenId>> instances, const PackerConfig& cfg,
                                 PackStats* stats) {
    Packer packer(cfg);
    std::vector<PackedSequence> out;
    const Packer::Emit emit = [&](const PackedSequence& s) { out.push_back(s); };
    for (const auto& inst : instances) {
        packer.push(inst, emit);
    }
    packer.finish(emit);
    if (stats) {
        *stats = packer.stats();
    }
    return out;
}

PackedWriter::PackedWriter(const std::filesystem::path& path, std::size_t seq_len)
    : path_(path), os_(path, std::ios::binary), seq_len_(seq_len) {
    if (!os_) {
        throw Error("cannot write " + path.string());
    }
    os_.write("PAK1", 4);
    binio::put_u32(os_, static_cast<std::uint32_t>(seq_len));
    binio::put_u64(os_, 0);
}

PackedWriter::~PackedWriter() {
    try {
        close();
    } catch (...) {
    }
}

void PackedWriter::write(std::span<const TokenId> seq) {
    if (seq.size() != seq_len_) {
        throw Error("packed sequence has length " + std::to_string(seq.size()) + ", expected " +
                    std::to_string(seq_len_));
    }
    for (TokenId id : seq) {
        binio::put_u32(os_, id);
    }
    ++count_;
}

void PackedWriter::close() {
    if (closed_) {
        return;
    }
    closed_ = true;
    os_.seekp(8);
    binio::put_u64(os_, count_);
    os_.close();
    if (!os_) {
        throw Error("write failed for " + path_.string());
    }
}

PackedReader::PackedReader(const std::filesystem::path& path) : path_(path), is_(path, std::ios::binary) {
    if (!is_) {
        throw InputError("cannot open packed file " + path.string());
    }
    rewind();
}

void PackedReader::rewind() {
    is_.clear();
    is_.seekg(0);
    char magic[4];
    std::uint32_t l = 0;
    if (!is_.read(magic, 4) || std::string_view(magic, 4) != "PAK1" || !binio::get_u32(is_, l) ||
        !binio::get_u64(is_, count_)) {
        throw Error(path_.string() + " is not a PAK1 file");
    }
    seq_len_ = l;
    read_ = 0;
}

bool PackedReader::next(PackedSequence& seq) {
    if (read_ == count_) {
        return false;
    }
    seq.resize(seq_len_);
    for (auto& id : seq) {
        if (!binio::get_u32(is_, id)) {
            throw Error(path_.string() + ": truncated at sequence " + std::to_string(read_));
        }
    }
    ++read_;
    return true;
}

std::vector<PackedSequence> read_packed(const std::filesystem::path& path) {
    PackedReader r(path);
    std::vector<PackedSequence> out;
    PackedSequence s;
    while (r.next(s)) {
        out.push_back(s);
    }
    return out;
}

} // namespace curricula
