#include "curricula/vocab.hpp"

#include "curricula/binio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace curricula {

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    trie_.emplace_back();
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty()) {
            throw Error("vocab token " + std::to_string(i) + " is empty");
        }
        insert(tokens_[i], static_cast<TokenId>(i));
    }
    for (int b = 0; b < 256; ++b) {
        if (!find(std::string(1, static_cast<char>(b)))) {
            throw Error("vocab lacks single-byte token " + std::to_string(b));
        }
    }
}

Vocab Vocab::byte_level(std::span<const std::string> extra) {
    std::vector<std::string> t;
    t.reserve(258 + extra.size());
    for (int b = 0; b < 256; ++b) {
        t.emplace_back(1, static_cast<char>(b));
    }
    t.emplace_back(kEndOfText);
    t.emplace_back(kPad);
    t.insert(t.end(), extra.begin(), extra.end());
    return Vocab(std::move(t));
}

std::uint32_t Vocab::child(std::uint32_t node, unsigned char b) const {
    const auto& ch = trie_[node].children;
    auto it = std::lower_bound(ch.begin(), ch.end(), b, [](const auto& p, unsigned char x) { return p.first < x; });
    return (it != ch.end() && it->first == b) ? it->second : 0;
}

void Vocab::insert(const std::string& token, TokenId id) {
    std::uint32_t node = 0;
    for (char c : token) {
        const auto b = static_cast<unsigned char>(c);
        std::uint32_t next = child(node, b);
        if (next == 0) {
            next = static_cast<std::uint32_t>(trie_.size());
            trie_.emplace_back();
            auto& ch = trie_[node].children;
            auto it = std::lower_bound(ch.begin(), ch.end(), b,
                                       [](const auto& p, unsigned char x) { return p.first < x; });
            ch.insert(it, {b, next});
        }
        node = next;
    }
    if (trie_[node].id >= 0) {
        throw Error("duplicate vocab token at ids " + std::to_string(trie_[node].id) + " and " + std::to_string(id));
    }
    trie_[node].id = id;
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
    std::uint32_t node = 0;
    for (char c : token) {
        node = child(node, static_cast<unsigned char>(c));
        if (node == 0) {
            return std::nullopt;
        }
    }
    if (token.empty() || trie_[node].id < 0) {
        return std::nullopt;
    }
    return static_cast<TokenId>(trie_[node].id);
}

TokenId Vocab::eot_id() const {
    if (auto id = find(kEndOfText)) {
        return *id;
    }
    throw Error("vocab has no end-of-text token");
}

TokenId Vocab::pad_id() const {
    if (auto id = find(kPad)) {
        return *id;
    }
    throw Error("vocab has no pad token");
}

std::vector<TokenId> Vocab::tokenize(std::string_view text) const {
    std::vector<TokenId> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::uint32_t node = 0;
        std::int64_t best_id = -1;
        std::size_t best_len = 0;
        for (std::size_t i = pos; i < text.size(); ++i) {
            node = child(node, static_cast<unsigned char>(text[i]));
            if (node == 0) {
                break;
            }
            if (trie_[node].id >= 0) {
                best_id = trie_[node].id;
                best_len = i - pos + 1;
            }
        }
        // best_len >= 1: every single byte is a token.
        out.push_back(static_cast<TokenId>(best_id));
        pos += best_len;
    }
    return out;
}

std::string Vocab::detokenize(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
        out += token(id);
    }
    return out;
}

VocabExtension extend_vocab(const Vocab& base, std::span<const std::string> new_tokens) {
    std::unordered_set<std::string> seen;
    VocabExtension result{base, {}, {}};
    std::vector<std::string> tokens = base.tokens();
    for (const auto& t : new_tokens) {
        if (t.empty()) {
            throw Error("cannot extend vocab with an empty token");
        }
        if (!seen.insert(t).second) {
            throw Error("token listed twice in extension list: " + escape_token(t));
        }
        if (base.find(t)) {
            result.skipped.push_back(t);
        } else {
            result.appended.push_back(t);
            tokens.push_back(t);
        }
    }
    if (!result.appended.empty()) {
        result.vocab = Vocab(std::move(tokens));
    }
    return result;
}

namespace {

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t n = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xe0) == 0xc0) {
            n = 1;
            cp = c & 0x1f;
        } else if ((c & 0xf0) == 0xe0) {
            n = 2;
            cp = c & 0x0f;
        } else if ((c & 0xf8) == 0xf0) {
            n = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + n >= s.size()) {
            return false;
        }
        for (std::size_t k = 1; k <= n; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xc0) != 0x80) {
                return false;
            }
            cp = (cp << 6) | (cc & 0x3f);
        }
        static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
        if (cp < kMin[n] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) {
            return false;
        }
        i += n + 1;
    }
    return true;
}

constexpr char kHex[] = "0123456789abcdef";

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

} // namespace

std::string escape_token(std::string_view token) {
    const bool utf8 = valid_utf8(token);
    std::string out;
    for (char c : token) {
        const auto b = static_cast<unsigned char>(c);
        if (c == '\\') {
            out += "\\\\";
        } else if (c == '\n') {
            out += "\\n";
        } else if (c == '\t') {
            out += "\\t";
        } else if (b < 0x20 || b == 0x7f || (b >= 0x80 && !utf8)) {
            out += "\\x";
            out += kHex[b >> 4];
            out += kHex[b & 0xf];
        } else {
            out += c;
        }
    }
    return out;
}

std::string unescape_token(std::string_view line) {
    std::string out;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] != '\\') {
            out += line[i];
            continue;
        }
        if (i + 1 >= line.size()) {
            throw Error("dangling backslash in token line");
        }
        const char e = line[++i];
        if (e == '\\') {
            out += '\\';
        } else if (e == 'n') {
            out += '\n';
        } else if (e == 't') {
            out += '\t';
        } else if (e == 'x' && i + 2 < line.size() && hex_value(line[i + 1]) >= 0 && hex_value(line[i + 2]) >= 0) {
            out += static_cast<char>(hex_value(line[i + 1]) * 16 + hex_value(line[i + 2]));
            i += 2;
        } else {
            throw Error(std::string("unknown escape \\") + e + " in token line");
        }
    }
    return out;
}

void save_token_list(const std::filesystem::path& path, std::span<const std::string> tokens) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw Error("cannot write " + path.string());
    }
    for (const auto& t : tokens) {
        os << escape_token(t) << '\n';
    }
    if (!os) {
        throw Error("write failed for " + path.string());
    }
}

std::vector<std::string> load_token_list(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw InputError("cannot open token list " + path.string());
    }
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(is, line)) {
        tokens.push_back(unescape_token(line));
    }
    return tokens;
}

void save_vocab(const std::filesystem::path& path, const Vocab& v) { save_token_list(path, v.tokens()); }

Vocab load_vocab(const std::filesystem::path& path) { return Vocab(load_token_list(path)); }

void save_matrix(const std::filesystem::path& path, const EmbeddingMatrix& m) {
    if (m.values.size() != m.rows * m.cols || m.rows > 0xffffffffu || m.cols > 0xffffffffu) {
        throw Error("matrix shape cannot be stored as EMB1");
    }
    for (float x : m.values) {
        if (!std::isfinite(x)) {
            throw Error("refusing to store a non-finite matrix value in " + path.string());
        }
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw Error("cannot write " + path.string());
    }
    os.write("EMB1", 4);
    binio::put_u32(os, static_cast<std::uint32_t>(m.rows));
    binio::put_u32(os, static_cast<std::uint32_t>(m.cols));
    for (float x : m.values) {
        binio::put_f32(os, x);
    }
    if (!os) {
        throw Error("write failed for " + path.string());
    }
}

EmbeddingMatrix load_matrix(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw InputError("cannot open matrix " + path.string());
    }
    char magic[4];
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    if (!is.read(magic, 4) || std::string_view(magic, 4) != "EMB1" || !binio::get_u32(is, rows) ||
        !binio::get_u32(is, cols)) {
        throw Error(path.string() + " is not an EMB1 matrix file");
    }
    EmbeddingMatrix m(rows, cols);
    for (float& x : m.values) {
        if (!binio::get_f32(is, x)) {
            throw Error(path.string() + ": truncated matrix data");
        }
    }
    return m;
}

} // namespace curricula
