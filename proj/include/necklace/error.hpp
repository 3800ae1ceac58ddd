#pragma once

#include <stdexcept>
#include <string>

namespace necklace {

/// Base of every error raised by the library. The category decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { config = 2, solver = 3, io = 4 };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

/// Invalid parameters, precondition violations, mismatched lattices.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

/// Linear solver, eigen-solver or time integrator failure.
class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what) : Error(Category::solver, what) {}
};

/// File system failures; the message always names the path.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Category::io, what) {}
};

}  // namespace necklace
