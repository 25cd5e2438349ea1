#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace genpred {

// Precondition violated by an argument (bad probability, empty sample, shape mismatch).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A computation that could not produce a usable number (singular design, underflow).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t epoch, std::size_t batch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + ")"),
        epoch_(epoch),
        batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

// Malformed input file or configuration; carries a location string such as "data.csv:17 column x2".
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace genpred
