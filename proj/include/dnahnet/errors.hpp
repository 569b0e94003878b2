#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dnahnet {

// Exit-code classes used by the command-line front end.
enum class ErrorKind { usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, const std::string& what);

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& module() const noexcept { return module_; }

private:
    ErrorKind kind_;
    std::string module_;
};

// seqdata
class AmbiguityError : public Error {
public:
    explicit AmbiguityError(std::vector<std::size_t> positions);
    const std::vector<std::size_t>& positions() const noexcept { return positions_; }

private:
    std::vector<std::size_t> positions_;
};

class WindowError : public Error {
public:
    explicit WindowError(const std::string& what) : Error(ErrorKind::data, "seqdata", what) {}
};

class RefMismatchError : public Error {
public:
    explicit RefMismatchError(const std::string& what) : Error(ErrorKind::data, "seqdata", what) {}
};

class GeneTooShortError : public Error {
public:
    explicit GeneTooShortError(const std::string& what) : Error(ErrorKind::data, "seqdata", what) {}
};

class ParseError : public Error {
public:
    ParseError(std::string source, std::size_t line, const std::string& reason);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// diffcore
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorKind::numeric, "diffcore", what) {}
};

class NumericsError : public Error {
public:
    explicit NumericsError(const std::string& what, std::string module = "diffcore")
        : Error(ErrorKind::numeric, std::move(module), what) {}
};

class GraphError : public Error {
public:
    explicit GraphError(const std::string& what) : Error(ErrorKind::numeric, "diffcore", what) {}
};

class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& what) : Error(ErrorKind::data, "diffcore", what) {}
};

// layers
class LayoutError : public Error {
public:
    LayoutError(std::size_t offset, const std::string& reason);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::data, "config", what) {}
};

// chunking
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::numeric, "chunking", what) {}
};

// hnet
class ContextError : public Error {
public:
    explicit ContextError(const std::string& what) : Error(ErrorKind::data, "hnet", what) {}
};

// eval / flops
class DegenerateError : public Error {
public:
    DegenerateError(std::string module, const std::string& what)
        : Error(ErrorKind::data, std::move(module), what) {}
};

class AnnotationError : public Error {
public:
    explicit AnnotationError(const std::string& what) : Error(ErrorKind::data, "eval", what) {}
};

}  // namespace dnahnet
