#pragma once

#include <stdexcept>
#include <string>

namespace fcprobe {

enum class ErrorKind {
    InvalidInput,
    NumericalFailure,
    SingularMatrix,
    InvalidEffect,
    InvalidSplit,
    Undefined,
    TrainingDiverged,
    DegenerateImportances,
    IoError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Thrown by spd_eig; carries the sweep count reached before giving up.
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, int iterations)
        : Error(ErrorKind::NumericalFailure, what), iterations_(iterations) {}

    int iterations() const noexcept { return iterations_; }

private:
    int iterations_;
};

// Thrown by train() when the loss becomes non-finite.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& what, int epoch)
        : Error(ErrorKind::TrainingDiverged, what), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace fcprobe
