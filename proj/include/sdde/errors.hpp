#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdde {

// Base of every error thrown by the library. `numerical()` separates
// failures of the computation itself (blowups, singular data, domain
// violations hit while evaluating) from bad input, which the CLI maps to
// different exit codes.
class Error : public std::runtime_error {
public:
   using std::runtime_error::runtime_error;
   virtual bool numerical() const noexcept { return false; }
};

class ArgumentError : public Error {
public:
   using Error::Error;
};

class DomainError : public Error {
public:
   using Error::Error;
};

class ConfigError : public Error {
public:
   using Error::Error;
};

class StencilError : public Error {
public:
   using Error::Error;
};

class InsufficientDataError : public Error {
public:
   using Error::Error;
   bool numerical() const noexcept override { return true; }
};

// Raised while evaluating a basis term or a fitted model outside its domain.
class EvaluationError : public Error {
public:
   EvaluationError(const std::string& what, std::size_t sample, std::string term)
      : Error(what), sample_(sample), term_(std::move(term))
   {
   }
   std::size_t sample() const noexcept { return sample_; }
   const std::string& term() const noexcept { return term_; }
   bool numerical() const noexcept override { return true; }

private:
   std::size_t sample_;
   std::string term_;
};

// Non-finite state produced by a time stepper. `index` is the step index
// (fine-grid index for `simulate`, grid index for Approach A), `path` the
// ensemble member when known.
class NumericalError : public Error {
public:
   NumericalError(const std::string& what, std::size_t index, std::size_t path = npos)
      : Error(what), index_(index), path_(path)
   {
   }
   static constexpr std::size_t npos = static_cast<std::size_t>(-1);
   std::size_t index() const noexcept { return index_; }
   std::size_t path() const noexcept { return path_; }
   bool numerical() const noexcept override { return true; }

private:
   std::size_t index_;
   std::size_t path_;
};

} // namespace sdde
