#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace apsems {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid system description or run configuration. Carries one entry per
/// violated invariant, each prefixed with the offending field path.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> issues);
    explicit ConfigError(const std::string& issue) : ConfigError(std::vector<std::string>{issue}) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    std::vector<std::string> issues_;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

class IngestError : public Error {
public:
    IngestError(const std::string& file, std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class BuildError : public Error {
public:
    using Error::Error;
};

class ExtractionError : public Error {
public:
    ExtractionError(const std::string& what, std::vector<std::string> rows);
    const std::vector<std::string>& violated_rows() const noexcept { return rows_; }

private:
    std::vector<std::string> rows_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IntegrationError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace apsems
