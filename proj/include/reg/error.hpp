#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace reg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record. line() is 1-based; 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Unknown entity, relation, or triple reference.
class LookupError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A pipeline artifact is absent; stage() names the stage that produces it.
class MissingArtifact : public Error {
 public:
  MissingArtifact(std::string path, std::string stage)
      : Error("missing artifact " + path + " (produced by `reg " + stage + "`)"),
        path_(std::move(path)),
        stage_(std::move(stage)) {}
  const std::string& path() const noexcept { return path_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string path_;
  std::string stage_;
};

// LLM backend failure. Carries the backend name and the request digest.
class BackendError : public Error {
 public:
  BackendError(std::string backend, std::string digest, const std::string& what)
      : Error(backend + " backend [" + digest + "]: " + what),
        backend_(std::move(backend)),
        digest_(std::move(digest)) {}
  const std::string& backend() const noexcept { return backend_; }
  const std::string& digest() const noexcept { return digest_; }

 private:
  std::string backend_;
  std::string digest_;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace reg
