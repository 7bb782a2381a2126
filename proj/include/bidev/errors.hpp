#pragma once

#include <stdexcept>
#include <string>

namespace bidev {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// A call violated a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

// Configuration file / flag problems (startup-time).
class ConfigError : public Error {
public:
    using Error::Error;
};

// ---- prompt templating ----

class MissingBindingError : public Error {
public:
    explicit MissingBindingError(const std::string& name)
        : Error("missing binding for placeholder: " + name), name(name) {}
    std::string name;
};

class UnknownBindingError : public Error {
public:
    explicit UnknownBindingError(const std::string& name)
        : Error("binding matches no placeholder: " + name), name(name) {}
    std::string name;
};

class TemplateFormatError : public Error {
public:
    using Error::Error;
};

// ---- backends ----

// Scripted backend has no registered response for a request.
class ScriptMissError : public Error {
public:
    using Error::Error;
};

class DuplicateExactMatcherError : public Error {
public:
    using Error::Error;
};

// Network failure that persisted across the bounded retries.
class BackendUnreachableError : public Error {
public:
    using Error::Error;
};

// Non-retryable HTTP error (or a retryable one after retries ran out).
class BackendRejectedError : public Error {
public:
    BackendRejectedError(int status, const std::string& body)
        : Error("backend rejected request, status " + std::to_string(status) + ": " + body),
          status(status),
          body(body) {}
    int status;
    std::string body;
};

// ---- retrieval ----

class DuplicateDocIdError : public Error {
public:
    explicit DuplicateDocIdError(const std::string& id)
        : Error("duplicate doc_id in corpus: " + id), doc_id(id) {}
    std::string doc_id;
};

class IndexOutOfRangeError : public Error {
public:
    using Error::Error;
};

class EmptyQueryError : public Error {
public:
    using Error::Error;
};

class IndexVersionError : public Error {
public:
    using Error::Error;
};

// ---- role output parsing ----

class UnparseableRoleOutputError : public Error {
public:
    UnparseableRoleOutputError(const std::string& role, const std::string& raw)
        : Error("unparseable " + role + " output: \"" + raw + "\""), raw_output(raw) {}
    std::string raw_output;
};

class UnparseableVerdictError : public Error {
public:
    explicit UnparseableVerdictError(const std::string& raw)
        : Error("no verdict keyword in checker output: \"" + raw + "\""), raw_output(raw) {}
    std::string raw_output;
};

class EmptyRewriteError : public Error {
public:
    using Error::Error;
};

// ---- pipeline ----

class UnknownGoldDocError : public Error {
public:
    explicit UnknownGoldDocError(const std::string& id)
        : Error("gold doc_id not found in corpus: " + id), doc_id(id) {}
    std::string doc_id;
};

class EmptyVerdictListError : public Error {
public:
    EmptyVerdictListError() : Error("cannot aggregate an empty verdict list") {}
};

// ---- evaluation ----

class MalformedRecordError : public Error {
public:
    MalformedRecordError(int line, const std::string& detail)
        : Error("malformed record at line " + std::to_string(line) + ": " + detail), line(line) {}
    int line;
};

class UnmappableLabelError : public Error {
public:
    UnmappableLabelError(int line, const std::string& label)
        : Error("unmappable label at line " + std::to_string(line) + ": \"" + label + "\""),
          line(line),
          label(label) {}
    int line;
    std::string label;
};

class KeyMismatchError : public Error {
public:
    using Error::Error;
};

}  // namespace bidev
