#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <vector>

namespace test_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("curricula_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os << text;
}

inline void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
    std::string s;
    for (const auto& l : lines) {
        s += l;
        s += '\n';
    }
    write_text(p, s);
}

inline std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot read " + p.string());
    }
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::istringstream is(read_bytes(p));
    std::vector<std::string> out;
    for (std::string l; std::getline(is, l);) {
        out.push_back(l);
    }
    return out;
}

struct ChiSquare {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
    bool zero_cells_empty = true; // no counts where the expected probability is 0
};

// Goodness of fit of counts against probabilities. Categories with zero
// probability carry no degree of freedom; any count in them is flagged.
inline ChiSquare chi_square(std::span<const std::uint64_t> counts, std::span<const double> probs) {
    ChiSquare r;
    double n = 0.0;
    for (auto c : counts) n += static_cast<double>(c);
    std::size_t cells = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (probs[i] <= 0.0) {
            r.zero_cells_empty = r.zero_cells_empty && counts[i] == 0;
            continue;
        }
        const double e = n * probs[i];
        const double d = static_cast<double>(counts[i]) - e;
        r.statistic += d * d / e;
        ++cells;
    }
    r.dof = static_cast<double>(cells) - 1.0;
    if (r.dof >= 1.0) {
        r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.dof), r.statistic));
    }
    return r;
}

} // namespace test_support
