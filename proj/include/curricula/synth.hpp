#pragma once

#include "curricula/ingest.hpp"
#include "curricula/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace curricula {

// Surface languages over one latent class sequence. A renders to lowercase
// ASCII letters, B to CJK ideographs from U+4E00 (absent from a byte-level
// base vocab), code to ASCII digits and operators.
enum class Lang : std::uint8_t { a, b, code };

struct SynthConfig {
    std::uint64_t seed = 0;
    std::size_t classes = 16;
    std::size_t alphabet_a = 16; // >= classes, <= 26
    std::size_t alphabet_b = 16; // >= classes
    std::size_t successors = 3;  // high-probability next classes per context
    double smoothing = 0.1;      // mass spread uniformly over all classes
    std::size_t docs = 2000;     // records per generated dataset
    std::size_t eval_docs = 200;
    std::size_t doc_len_min = 8;
    std::size_t doc_len_max = 24;

    void validate() const;
    bool operator==(const SynthConfig&) const = default;
};

using LatentSeq = std::vector<std::uint8_t>;

// Order-2 Markov chain over latent classes: P(c | a, b).
class LatentChain {
public:
    explicit LatentChain(const SynthConfig& cfg);

    std::size_t classes() const noexcept { return classes_; }
    double prob(std::size_t a, std::size_t b, std::size_t c) const { return p_[(a * classes_ + b) * classes_ + c]; }
    // Sequence of length n; the first two classes are uniform.
    LatentSeq sample(Rng& rng, std::size_t n) const;

private:
    std::size_t classes_;
    std::vector<double> p_;
};

// Injective class -> character map of a language (UTF-8 strings).
std::vector<std::string> class_map(const SynthConfig& cfg, Lang lang);

// Every character of the language's alphabet, mapped or not.
std::vector<std::string> alphabet(const SynthConfig& cfg, Lang lang);

std::string render(const LatentSeq& seq, const std::vector<std::string>& map);

// Invert a rendering back to classes. Throws Error on a foreign character.
LatentSeq unrender(std::string_view text, const std::vector<std::string>& map);

// Latent document `index` of a named stream; identical for every language.
LatentSeq latent_doc(const SynthConfig& cfg, const LatentChain& chain, std::string_view stream, std::uint64_t index);

enum class InstructionTask : std::uint8_t { copy, reverse, last };

// Rule shared by generator and validator; question is "<task>: <payload>".
std::string answer_for(InstructionTask task, const LatentSeq& payload, const std::vector<std::string>& map);

// Writers. Each returns the number of records written.
std::size_t gen_corpus(const SynthConfig& cfg, Lang lang, const std::filesystem::path& out,
                       std::string_view stream = "corpus", std::size_t count = 0);
std::size_t gen_parallel(const SynthConfig& cfg, const std::filesystem::path& out);
std::size_t gen_instruction(const SynthConfig& cfg, Lang lang, const std::filesystem::path& out);

// Record generators behind the writers.
std::string corpus_text(const SynthConfig& cfg, const LatentChain& chain, Lang lang, std::string_view stream,
                        std::uint64_t index);
InstructionRecord instruction_record(const SynthConfig& cfg, const LatentChain& chain, Lang lang,
                                     std::uint64_t index);

struct SynthFile {
    std::string name;
    std::filesystem::path path;
    std::size_t records = 0;
};

// Whole suite under `dir`: corpus_a, corpus_b, parallel, instruction_a,
// instruction_b, code, eval_a, eval_b (.jsonl), and tokens_b.txt listing the
// B alphabet for vocab extension.
std::vector<SynthFile> gen_suite(const SynthConfig& cfg, const std::filesystem::path& dir);

// Dataset specs for the suite, one per task kind, paths relative to `dir`.
std::vector<DatasetSpec> suite_datasets(const std::filesystem::path& dir);

} // namespace curricula
