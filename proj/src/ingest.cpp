#include "curricula/ingest.hpp"

#include "curricula/error.hpp"

#include <json.hpp>
#include <stdexcept>

namespace curricula {

using nlohmann::json;

std::string_view to_string(MalformedPolicy p) noexcept {
    return p == MalformedPolicy::skip ? "skip" : "abort";
}

std::optional<MalformedPolicy> parse_malformed_policy(std::string_view s) noexcept {
    if (s == "abort") return MalformedPolicy::abort;
    if (s == "skip") return MalformedPolicy::skip;
    return std::nullopt;
}

std::string format_parallel(std::string_view src, std::string_view tgt) {
    if (src.empty() || tgt.empty()) {
        throw std::invalid_argument("parallel record has an empty side");
    }
    std::string out;
    out.reserve(src.size() + tgt.size() + 1);
    out.append(src).push_back('\n');
    out.append(tgt);
    return out;
}

std::string format_instruction(const InstructionRecord& r) {
    if (r.rounds.empty()) {
        throw std::invalid_argument("instruction record has no rounds");
    }
    std::string out;
    for (std::size_t i = 0; i < r.rounds.size(); ++i) {
        const auto& [q, a] = r.rounds[i];
        if (q.empty() || a.empty()) {
            throw std::invalid_argument("instruction round " + std::to_string(i) + " has an empty field");
        }
        if (i == 0) {
            out += "User: " + q + " Bot: " + a;
        } else {
            out += " ### Instruction: " + q + " ### Response: " + a;
        }
    }
    return out;
}

namespace {

const std::string& string_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw std::invalid_argument(std::string("missing string field \"") + key + "\"");
    }
    return it->get_ref<const std::string&>();
}

std::string_view chomp(std::string_view line) {
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    return line;
}

} // namespace

std::string render_record(std::string_view line, SourceFamily family) {
    json j;
    try {
        j = json::parse(chomp(line));
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw std::invalid_argument("record is not a JSON object");
    }
    switch (family) {
    case SourceFamily::corpus: {
        const auto& text = string_field(j, "text");
        if (text.empty()) {
            throw std::invalid_argument("empty text");
        }
        return text;
    }
    case SourceFamily::parallel:
        return format_parallel(string_field(j, "src"), string_field(j, "tgt"));
    case SourceFamily::instruction: {
        auto it = j.find("rounds");
        if (it == j.end() || !it->is_array()) {
            throw std::invalid_argument("missing array field \"rounds\"");
        }
        InstructionRecord r;
        for (const auto& round : *it) {
            if (!round.is_object()) {
                throw std::invalid_argument("round is not an object");
            }
            r.rounds.push_back({string_field(round, "q"), string_field(round, "a")});
        }
        return format_instruction(r);
    }
    }
    throw std::invalid_argument("unknown source family");
}

DatasetReader::DatasetReader(DatasetSpec spec, SourceFamily family, MalformedPolicy policy)
    : spec_(std::move(spec)), family_(family), policy_(policy), in_(spec_.path, std::ios::binary) {
    if (!in_) {
        throw InputError("cannot open dataset " + spec_.name + " at " + spec_.path.string());
    }
}

std::optional<Instance> DatasetReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        const std::size_t idx = line_++;
        try {
            return Instance{render_record(line, family_), spec_.task, spec_.name, idx};
        } catch (const std::invalid_argument& e) {
            if (policy_ == MalformedPolicy::abort) {
                throw RecordError(spec_.name, idx, e.what());
            }
            ++skipped_;
        }
    }
    if (in_.bad()) {
        throw Error("read failure in dataset " + spec_.name + " at line " + std::to_string(line_));
    }
    return std::nullopt;
}

namespace {

std::vector<Instance> read_all(const DatasetSpec& spec, SourceFamily family, MalformedPolicy policy) {
    DatasetReader reader(spec, family, policy);
    std::vector<Instance> out;
    while (auto inst = reader.next()) {
        out.push_back(std::move(*inst));
    }
    return out;
}

} // namespace

std::vector<Instance> read_corpus(const DatasetSpec& spec, MalformedPolicy policy) {
    return read_all(spec, SourceFamily::corpus, policy);
}

std::vector<Instance> read_parallel(const DatasetSpec& spec, MalformedPolicy policy) {
    return read_all(spec, SourceFamily::parallel, policy);
}

std::vector<Instance> read_instruction(const DatasetSpec& spec, MalformedPolicy policy) {
    return read_all(spec, SourceFamily::instruction, policy);
}

std::vector<Instance> read_dataset(const DatasetSpec& spec, MalformedPolicy policy) {
    return read_all(spec, family_of(spec.task), policy);
}

RecordFile::RecordFile(DatasetSpec spec, MalformedPolicy policy)
    : spec_(std::move(spec)), family_(family_of(spec_.task)) {
    if (spec_.size_weight && !(*spec_.size_weight > 0.0)) {
        throw ConfigError("dataset " + spec_.name + ": size_weight must be positive");
    }
    std::ifstream in(spec_.path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open dataset " + spec_.name + " at " + spec_.path.string());
    }
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t idx = offsets_.size();
        offsets_.push_back(offset);
        offset += line.size() + (in.eof() ? 0 : 1);
        bool ok = true;
        try {
            render_record(line, family_);
        } catch (const std::invalid_argument& e) {
            if (policy == MalformedPolicy::abort) {
                throw RecordError(spec_.name, idx, e.what());
            }
            ok = false;
        }
        valid_.push_back(ok);
        valid_count_ += ok ? 1 : 0;
    }
    if (in.bad()) {
        throw InputError("read failure while indexing dataset " + spec_.name);
    }
    file_bytes_ = offset;
}

double RecordFile::weight() const noexcept {
    return spec_.size_weight ? *spec_.size_weight : static_cast<double>(file_bytes_);
}

std::ifstream RecordFile::open() const {
    std::ifstream in(spec_.path, std::ios::binary);
    if (!in) {
        throw Error("dataset " + spec_.name + " became unreadable at " + spec_.path.string());
    }
    return in;
}

Instance RecordFile::instance(std::size_t line, std::ifstream& in) const {
    in.clear();
    in.seekg(static_cast<std::streamoff>(offsets_.at(line)));
    std::string text;
    if (!in || !std::getline(in, text)) {
        throw Error("dataset " + spec_.name + ": read failed at cursor " + std::to_string(line));
    }
    try {
        return Instance{render_record(text, family_), spec_.task, spec_.name, line};
    } catch (const std::invalid_argument& e) {
        // The file changed after indexing.
        throw Error("dataset " + spec_.name + ": record at cursor " + std::to_string(line) +
                    " no longer parses: " + e.what());
    }
}

} // namespace curricula
