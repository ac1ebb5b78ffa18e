#pragma once

#include <stdexcept>
#include <string>

namespace curricula {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or schedule. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A required input file is missing or unreadable before work starts (exit 2).
class InputError : public Error {
public:
    using Error::Error;
};

// One bad record in a JSON-lines dataset.
class RecordError : public Error {
public:
    RecordError(const std::string& dataset, std::size_t line, const std::string& what)
        : Error(dataset + ":" + std::to_string(line + 1) + ": " + what), dataset_(dataset), line_(line) {}

    const std::string& dataset() const noexcept { return dataset_; }
    // 0-based line index
    std::size_t line() const noexcept { return line_; }

private:
    std::string dataset_;
    std::size_t line_;
};

// Raised by the trainer when the loss stops being finite.
class TrainError : public Error {
public:
    using Error::Error;
};

} // namespace curricula
