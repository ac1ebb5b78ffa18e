#pragma once

#include "curricula/schedule.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace curricula {

enum class MalformedPolicy : std::uint8_t { abort, skip };

std::string_view to_string(MalformedPolicy p) noexcept;
std::optional<MalformedPolicy> parse_malformed_policy(std::string_view s) noexcept;

struct DatasetSpec {
    std::string name;
    std::filesystem::path path;
    TaskKind task{};
    // Relative weight among datasets of the same task. Unset means the
    // on-disk byte size of the file.
    std::optional<double> size_weight;

    bool operator==(const DatasetSpec&) const = default;
};

struct Instance {
    std::string text;
    TaskKind task{};
    std::string dataset;
    std::uint64_t ordinal = 0; // 0-based line index in the dataset file
};

struct QaRound {
    std::string question;
    std::string answer;
};

struct InstructionRecord {
    std::vector<QaRound> rounds;
};

// "src\ntgt". Throws std::invalid_argument if either side is empty.
std::string format_parallel(std::string_view src, std::string_view tgt);

// "User: q1 Bot: a1" followed by " ### Instruction: qi ### Response: ai" for
// every further round. Throws std::invalid_argument on an empty round list or
// empty field.
std::string format_instruction(const InstructionRecord& r);

// Parse one JSON-lines record of the given family and render its training
// text. Throws std::invalid_argument describing what is wrong with the record.
std::string render_record(std::string_view line, SourceFamily family);

// Streaming reader: one pass over a file, one Instance per valid line.
class DatasetReader {
public:
    DatasetReader(DatasetSpec spec, SourceFamily family, MalformedPolicy policy = MalformedPolicy::abort);

    // Next formatted instance, or nullopt at end of file. Throws RecordError
    // on a malformed line under the abort policy.
    std::optional<Instance> next();

    std::size_t skipped() const noexcept { return skipped_; }

private:
    DatasetSpec spec_;
    SourceFamily family_;
    MalformedPolicy policy_;
    std::ifstream in_;
    std::size_t line_ = 0;
    std::size_t skipped_ = 0;
};

std::vector<Instance> read_corpus(const DatasetSpec& spec, MalformedPolicy policy = MalformedPolicy::abort);
std::vector<Instance> read_parallel(const DatasetSpec& spec, MalformedPolicy policy = MalformedPolicy::abort);
std::vector<Instance> read_instruction(const DatasetSpec& spec, MalformedPolicy policy = MalformedPolicy::abort);

// Reads using the record format implied by spec.task.
std::vector<Instance> read_dataset(const DatasetSpec& spec, MalformedPolicy policy = MalformedPolicy::abort);

// Random-access view of a JSON-lines dataset. The constructor scans the file
// once, recording line offsets and which lines are valid records; under the
// abort policy the first malformed line throws RecordError. Reads go through
// a caller-owned stream so several threads can read concurrently.
class RecordFile {
public:
    RecordFile(DatasetSpec spec, MalformedPolicy policy);

    const DatasetSpec& spec() const noexcept { return spec_; }
    SourceFamily family() const noexcept { return family_; }
    std::size_t lines() const noexcept { return valid_.size(); }
    bool valid(std::size_t line) const { return valid_.at(line); }
    std::size_t valid_count() const noexcept { return valid_count_; }
    std::size_t skipped() const noexcept { return valid_.size() - valid_count_; }
    std::uint64_t file_bytes() const noexcept { return file_bytes_; }

    // Explicit size_weight, else the byte size of the file.
    double weight() const noexcept;

    std::ifstream open() const;

    // Formatted instance for a valid line. Throws Error when the file can no
    // longer be read, naming the dataset and line.
    Instance instance(std::size_t line, std::ifstream& in) const;

private:
    DatasetSpec spec_;
    SourceFamily family_;
    std::vector<std::uint64_t> offsets_;
    std::vector<bool> valid_;
    std::size_t valid_count_ = 0;
    std::uint64_t file_bytes_ = 0;
};

} // namespace curricula
