#include "curricula/synth.hpp"

#include "curricula/error.hpp"
#include "curricula/rng.hpp"
#include "curricula/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <numeric>

namespace curricula {

namespace {

constexpr std::string_view kCodeSymbols = "0123456789+-*/=()<>;%";

std::string utf8(std::uint32_t cp) {
    std::string s;
    if (cp < 0x80) {
        s += static_cast<char>(cp);
    } else if (cp < 0x800) {
        s += static_cast<char>(0xc0 | (cp >> 6));
        s += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
        s += static_cast<char>(0xe0 | (cp >> 12));
        s += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        s += static_cast<char>(0x80 | (cp & 0x3f));
    }
    return s;
}

std::uint64_t lang_tag(Lang lang) {
    switch (lang) {
    case Lang::a: return tag_of("lang-a");
    case Lang::b: return tag_of("lang-b");
    case Lang::code: return tag_of("lang-code");
    }
    return 0;
}

void write_lines(const std::filesystem::path& out, std::size_t n, const std::function<std::string(std::size_t)>& line) {
    std::ofstream os(out, std::ios::binary);
    if (!os) {
        throw Error("cannot write " + out.string());
    }
    for (std::size_t i = 0; i < n; ++i) {
        os << line(i) << '\n';
    }
    if (!os) {
        throw Error("write failed for " + out.string());
    }
}

} // namespace

void SynthConfig::validate() const {
    if (classes < 2 || classes > 255) throw ConfigError("synth: classes must be in [2,255]");
    if (alphabet_a < classes || alphabet_a > 26) throw ConfigError("synth: alphabet_a must be in [classes,26]");
    if (alphabet_b < classes || alphabet_b > 20000) throw ConfigError("synth: alphabet_b must be in [classes,20000]");
    if (classes > kCodeSymbols.size()) throw ConfigError("synth: too many classes for the code alphabet");
    if (successors < 1 || successors > classes) throw ConfigError("synth: successors must be in [1,classes]");
    if (!(smoothing >= 0.0 && smoothing <= 1.0)) throw ConfigError("synth: smoothing must be in [0,1]");
    if (doc_len_min < 2 || doc_len_max < doc_len_min) throw ConfigError("synth: need 2 <= doc_len_min <= doc_len_max");
}

LatentChain::LatentChain(const SynthConfig& cfg) : classes_(cfg.classes), p_(cfg.classes * cfg.classes * cfg.classes) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, tag_of("latent-chain")));
    const std::size_t C = classes_;
    std::vector<std::size_t> perm(C);
    std::vector<double> w(cfg.successors);
    for (std::size_t ctx = 0; ctx < C * C; ++ctx) {
        double* row = p_.data() + ctx * C;
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = 0; i < cfg.successors; ++i) {
            std::swap(perm[i], perm[i + rng.below(C - i)]);
        }
        double total = 0.0;
        for (double& x : w) {
            x = 0.25 + rng.uniform();
            total += x;
        }
        for (std::size_t c = 0; c < C; ++c) {
            row[c] = cfg.smoothing / static_cast<double>(C);
        }
        for (std::size_t i = 0; i < cfg.successors; ++i) {
            row[perm[i]] += (1.0 - cfg.smoothing) * w[i] / total;
        }
        // Renormalize so the row sums to 1 up to rounding.
        const double s = std::accumulate(row, row + C, 0.0);
        for (std::size_t c = 0; c < C; ++c) {
            row[c] /= s;
        }
    }
}

LatentSeq LatentChain::sample(Rng& rng, std::size_t n) const {
    LatentSeq out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i < 2) {
            out.push_back(static_cast<std::uint8_t>(rng.below(classes_)));
            continue;
        }
        const double* row = p_.data() + (out[i - 2] * classes_ + out[i - 1]) * classes_;
        const double u = rng.uniform();
        double c = 0.0;
        std::size_t pick = classes_ - 1;
        for (std::size_t k = 0; k < classes_; ++k) {
            c += row[k];
            if (u < c) {
                pick = k;
                break;
            }
        }
        out.push_back(static_cast<std::uint8_t>(pick));
    }
    return out;
}

std::vector<std::string> alphabet(const SynthConfig& cfg, Lang lang) {
    std::vector<std::string> out;
    switch (lang) {
    case Lang::a:
        for (std::size_t i = 0; i < cfg.alphabet_a; ++i) out.push_back(utf8(static_cast<std::uint32_t>('a' + i)));
        break;
    case Lang::b:
        for (std::size_t i = 0; i < cfg.alphabet_b; ++i) out.push_back(utf8(static_cast<std::uint32_t>(0x4e00 + i)));
        break;
    case Lang::code:
        for (char c : kCodeSymbols) out.emplace_back(1, c);
        break;
    }
    return out;
}

std::vector<std::string> class_map(const SynthConfig& cfg, Lang lang) {
    auto chars = alphabet(cfg, lang);
    Rng rng(derive_seed(cfg.seed, lang_tag(lang)));
    for (std::size_t i = chars.size(); i > 1; --i) {
        std::swap(chars[i - 1], chars[rng.below(i)]);
    }
    chars.resize(cfg.classes);
    return chars;
}

std::string render(const LatentSeq& seq, const std::vector<std::string>& map) {
    std::string out;
    for (auto c : seq) {
        out += map.at(c);
    }
    return out;
}

LatentSeq unrender(std::string_view text, const std::vector<std::string>& map) {
    LatentSeq out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        bool found = false;
        for (std::size_t c = 0; c < map.size(); ++c) {
            if (text.substr(pos, map[c].size()) == map[c]) {
                out.push_back(static_cast<std::uint8_t>(c));
                pos += map[c].size();
                found = true;
                break;
            }
        }
        if (!found) {
            throw Error("character outside the language map at byte " + std::to_string(pos));
        }
    }
    return out;
}

LatentSeq latent_doc(const SynthConfig& cfg, const LatentChain& chain, std::string_view stream, std::uint64_t index) {
    Rng rng(derive_seed(derive_seed(cfg.seed, tag_of(stream)), index));
    const std::size_t n = cfg.doc_len_min + rng.below(cfg.doc_len_max - cfg.doc_len_min + 1);
    return chain.sample(rng, n);
}

std::string answer_for(InstructionTask task, const LatentSeq& payload, const std::vector<std::string>& map) {
    switch (task) {
    case InstructionTask::copy: return render(payload, map);
    case InstructionTask::reverse: {
        LatentSeq r(payload.rbegin(), payload.rend());
        return render(r, map);
    }
    case InstructionTask::last: return map.at(payload.back());
    }
    return {};
}

namespace {

constexpr std::string_view task_word(InstructionTask t) {
    switch (t) {
    case InstructionTask::copy: return "copy";
    case InstructionTask::reverse: return "reverse";
    case InstructionTask::last: return "last";
    }
    return "";
}

} // namespace

std::string corpus_text(const SynthConfig& cfg, const LatentChain& chain, Lang lang, std::string_view stream,
                        std::uint64_t index) {
    return render(latent_doc(cfg, chain, stream, index), class_map(cfg, lang));
}

InstructionRecord instruction_record(const SynthConfig& cfg, const LatentChain& chain, Lang lang,
                                     std::uint64_t index) {
    const auto map = class_map(cfg, lang);
    Rng rng(derive_seed(derive_seed(cfg.seed, tag_of("instruction")), index));
    InstructionRecord r;
    const std::size_t rounds = 1 + rng.below(3);
    for (std::size_t i = 0; i < rounds; ++i) {
        const auto task = static_cast<InstructionTask>(rng.below(3));
        const std::size_t len = 3 + rng.below(6);
        const LatentSeq payload = chain.sample(rng, len);
        r.rounds.push_back({std::string(task_word(task)) + ": " + render(payload, map), answer_for(task, payload, map)});
    }
    return r;
}

std::size_t gen_corpus(const SynthConfig& cfg, Lang lang, const std::filesystem::path& out, std::string_view stream,
                       std::size_t count) {
    const LatentChain chain(cfg);
    const auto map = class_map(cfg, lang);
    const std::size_t n = count ? count : cfg.docs;
    write_lines(out, n, [&](std::size_t i) {
        nlohmann::ordered_json j;
        j["text"] = render(latent_doc(cfg, chain, stream, i), map);
        return j.dump();
    });
    return n;
}

std::size_t gen_parallel(const SynthConfig& cfg, const std::filesystem::path& out) {
    const LatentChain chain(cfg);
    const auto map_a = class_map(cfg, Lang::a);
    const auto map_b = class_map(cfg, Lang::b);
    write_lines(out, cfg.docs, [&](std::size_t i) {
        const auto seq = latent_doc(cfg, chain, "parallel", i);
        nlohmann::ordered_json j;
        j["src"] = render(seq, map_a);
        j["tgt"] = render(seq, map_b);
        return j.dump();
    });
    return cfg.docs;
}

std::size_t gen_instruction(const SynthConfig& cfg, Lang lang, const std::filesystem::path& out) {
    const LatentChain chain(cfg);
    write_lines(out, cfg.docs, [&](std::size_t i) {
        const auto rec = instruction_record(cfg, chain, lang, i);
        nlohmann::ordered_json j;
        j["rounds"] = nlohmann::ordered_json::array();
        for (const auto& [q, a] : rec.rounds) {
            j["rounds"].push_back({{"q", q}, {"a", a}});
        }
        return j.dump();
    });
    return cfg.docs;
}

std::vector<SynthFile> gen_suite(const SynthConfig& cfg, const std::filesystem::path& dir) {
    cfg.validate();
    std::filesystem::create_directories(dir);
    std::vector<SynthFile> files;
    auto add = [&](std::string name, std::size_t n) {
        files.push_back({name, dir / (name + ".jsonl"), n});
    };
    add("corpus_a", gen_corpus(cfg, Lang::a, dir / "corpus_a.jsonl"));
    add("corpus_b", gen_corpus(cfg, Lang::b, dir / "corpus_b.jsonl"));
    add("parallel", gen_parallel(cfg, dir / "parallel.jsonl"));
    add("instruction_a", gen_instruction(cfg, Lang::a, dir / "instruction_a.jsonl"));
    add("instruction_b", gen_instruction(cfg, Lang::b, dir / "instruction_b.jsonl"));
    add("code", gen_corpus(cfg, Lang::code, dir / "code.jsonl", "code"));
    add("eval_a", gen_corpus(cfg, Lang::a, dir / "eval_a.jsonl", "eval", cfg.eval_docs));
    add("eval_b", gen_corpus(cfg, Lang::b, dir / "eval_b.jsonl", "eval", cfg.eval_docs));
    const auto b_tokens = alphabet(cfg, Lang::b);
    save_token_list(dir / "tokens_b.txt", b_tokens);
    files.push_back({"tokens_b", dir / "tokens_b.txt", b_tokens.size()});
    return files;
}

std::vector<DatasetSpec> suite_datasets(const std::filesystem::path& dir) {
    return {
        {"corpus_a", dir / "corpus_a.jsonl", TaskKind::corpus_en, std::nullopt},
        {"corpus_b", dir / "corpus_b.jsonl", TaskKind::corpus_target, std::nullopt},
        {"parallel", dir / "parallel.jsonl", TaskKind::parallel, std::nullopt},
        {"instruction_a", dir / "instruction_a.jsonl", TaskKind::instruction_en, std::nullopt},
        {"instruction_b", dir / "instruction_b.jsonl", TaskKind::instruction_target, std::nullopt},
        {"code", dir / "code.jsonl", TaskKind::code, std::nullopt},
    };
}

} // namespace curricula
