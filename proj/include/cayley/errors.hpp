#pragma once
#include <stdexcept>
#include <string>

namespace cayley {

// Two failure families, mapped to process exit codes by the CLI:
// validation errors (bad input / config) -> exit 2,
// numerical failures (solver, rank, contraction, ...) -> exit 3.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define CAYLEY_VALIDATION_ERROR(Name)            \
  struct Name : ValidationError {                \
    explicit Name(const std::string& m)          \
        : ValidationError(#Name ": " + m) {}     \
  }
#define CAYLEY_NUMERICAL_ERROR(Name)             \
  struct Name : NumericalError {                 \
    explicit Name(const std::string& m)          \
        : NumericalError(#Name ": " + m) {}      \
  }

CAYLEY_VALIDATION_ERROR(BadRange);
CAYLEY_VALIDATION_ERROR(GridMismatch);
CAYLEY_VALIDATION_ERROR(MissingDerivatives);
CAYLEY_VALIDATION_ERROR(CriticalEndpoint);
CAYLEY_VALIDATION_ERROR(ParityError);
CAYLEY_VALIDATION_ERROR(ScaleViolation);
CAYLEY_VALIDATION_ERROR(ConeMismatch);
CAYLEY_VALIDATION_ERROR(ConfigInvalid);
CAYLEY_VALIDATION_ERROR(UnknownCommand);
CAYLEY_VALIDATION_ERROR(IoError);

CAYLEY_NUMERICAL_ERROR(RankDeficient);
CAYLEY_NUMERICAL_ERROR(DegenerateImmersion);
CAYLEY_NUMERICAL_ERROR(NonLinearityDetected);
CAYLEY_NUMERICAL_ERROR(AnsatzExhausted);
CAYLEY_NUMERICAL_ERROR(ImmersionDegenerate);
CAYLEY_NUMERICAL_ERROR(MarginTooLow);
CAYLEY_NUMERICAL_ERROR(SolverFailure);
CAYLEY_NUMERICAL_ERROR(RateTableMismatch);
CAYLEY_NUMERICAL_ERROR(NoContraction);

#undef CAYLEY_VALIDATION_ERROR
#undef CAYLEY_NUMERICAL_ERROR

}  // namespace cayley
