#pragma once

#include <stdexcept>
#include <string>

namespace cogstat {

/// Root of every error raised by the library. The three intermediate
/// classes map one-to-one onto the CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data, files, schemas or configuration.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not produce a result.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpus : public InputError {
 public:
  EmptyCorpus() : InputError("empty corpus: no words to count") {}
};

class InvalidExponent : public InputError {
 public:
  using InputError::InputError;
};

class IndexOutOfRange : public InputError {
 public:
  using InputError::InputError;
};

class LengthMismatch : public InputError {
 public:
  using InputError::InputError;
};

class NonPositiveInput : public InputError {
 public:
  using InputError::InputError;
};

class InvalidProbabilities : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateSample : public InputError {
 public:
  using InputError::InputError;
};

class InsufficientData : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

/// Malformed JSON or a document that does not follow the expected layout.
/// `path` is a JSON-pointer-like location of the offending field.
class SchemaError : public InputError {
 public:
  SchemaError(std::string path, const std::string& what)
      : InputError(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class DegenerateSpectrum : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

/// The solver stalled. Carries the best relative constraint residuals seen.
class NoConvergence : public ConvergenceError {
 public:
  NoConvergence(const std::string& what, double best_residual_n, double best_residual_e)
      : ConvergenceError(what), best_residual_n_(best_residual_n),
        best_residual_e_(best_residual_e) {}
  double best_residual_n() const noexcept { return best_residual_n_; }
  double best_residual_e() const noexcept { return best_residual_e_; }

 private:
  double best_residual_n_;
  double best_residual_e_;
};

class AllFitsFailed : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

}  // namespace cogstat
