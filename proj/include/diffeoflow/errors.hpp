#pragma once

#include <stdexcept>
#include <string>

namespace diffeoflow {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what) : Error(what) {}
};

class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(const std::string& what) : Error(what) {}
};

class NotCorrelation : public Error {
 public:
  explicit NotCorrelation(const std::string& what) : Error(what) {}
};

// A finite-difference step left the manifold even after shrinking once.
class StepFailure : public Error {
 public:
  explicit StepFailure(const std::string& what) : Error(what) {}
};

class MissingClass : public Error {
 public:
  explicit MissingClass(const std::string& what) : Error(what) {}
};

class NonFiniteGradient : public Error {
 public:
  explicit NonFiniteGradient(const std::string& what) : Error(what) {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(const std::string& what) : Error(what) {}
};

class DivergedTrajectory : public Error {
 public:
  DivergedTrajectory(const std::string& what, int step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_index(step) {}
  int step_index;
};

class DegenerateLabels : public Error {
 public:
  explicit DegenerateLabels(const std::string& what) : Error(what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what) {}
};

class InvalidDataset : public Error {
 public:
  explicit InvalidDataset(const std::string& what) : Error(what) {}
};

class CannotSplit : public Error {
 public:
  explicit CannotSplit(const std::string& what) : Error(what) {}
};

class DegenerateChannel : public Error {
 public:
  explicit DegenerateChannel(const std::string& what) : Error(what) {}
};

}  // namespace diffeoflow
