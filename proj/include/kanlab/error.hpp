#pragma once

#include <stdexcept>
#include <string>

namespace kanlab {

/// Process exit codes, one per error class.
enum class ExitCode : int {
  ok = 0,
  internal = 1,
  usage = 2,
  config = 3,
  invalid_input = 4,
  load = 5,
  training_diverged = 6,
  rollout_diverged = 7,
  integration = 8,
  numerical_degeneracy = 9,
  io = 10,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode code() const noexcept { return ExitCode::internal; }
};

#define KANLAB_ERROR_CLASS(Name, Base, Code)                          \
  class Name : public Base {                                          \
   public:                                                            \
    using Base::Base;                                                 \
    ExitCode code() const noexcept override { return ExitCode::Code; } \
  }

KANLAB_ERROR_CLASS(InvalidInputError, Error, invalid_input);
KANLAB_ERROR_CLASS(InvalidSpecError, InvalidInputError, invalid_input);
KANLAB_ERROR_CLASS(DomainError, InvalidInputError, invalid_input);
KANLAB_ERROR_CLASS(ShapeError, InvalidInputError, invalid_input);
KANLAB_ERROR_CLASS(UnsupportedDegreeError, InvalidInputError, invalid_input);
KANLAB_ERROR_CLASS(IntegrationError, Error, integration);
KANLAB_ERROR_CLASS(DivergenceError, IntegrationError, integration);
KANLAB_ERROR_CLASS(NumericalDegeneracyError, Error, numerical_degeneracy);
KANLAB_ERROR_CLASS(LoadError, Error, load);
KANLAB_ERROR_CLASS(MalformedFileError, LoadError, load);
KANLAB_ERROR_CLASS(VersionMismatchError, LoadError, load);
KANLAB_ERROR_CLASS(ConfigError, Error, config);
KANLAB_ERROR_CLASS(IoError, Error, io);

#undef KANLAB_ERROR_CLASS

/// Raised when an iterative process (training, rollout) leaves the finite
/// regime. Carries the step at which this was detected.
class StepError : public Error {
 public:
  StepError(const std::string& what, long step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class TrainingDivergedError : public StepError {
 public:
  using StepError::StepError;
  ExitCode code() const noexcept override { return ExitCode::training_diverged; }
};

class RolloutDivergedError : public StepError {
 public:
  using StepError::StepError;
  ExitCode code() const noexcept override { return ExitCode::rollout_diverged; }
};

/// Wraps an error raised inside a named pipeline stage, keeping its exit code.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& inner)
      : Error(stage + ": " + inner.what()),
        stage_(std::move(stage)),
        code_(inner.code()) {}
  ExitCode code() const noexcept override { return code_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
  ExitCode code_;
};

}  // namespace kanlab
