#include "fcprobe/error.h"

namespace fcprobe {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::NumericalFailure: return "NumericalFailure";
        case ErrorKind::SingularMatrix: return "SingularMatrix";
        case ErrorKind::InvalidEffect: return "InvalidEffect";
        case ErrorKind::InvalidSplit: return "InvalidSplit";
        case ErrorKind::Undefined: return "Undefined";
        case ErrorKind::TrainingDiverged: return "TrainingDiverged";
        case ErrorKind::DegenerateImportances: return "DegenerateImportances";
        case ErrorKind::IoError: return "IoError";
    }
    return "Error";
}

}  // namespace fcprobe
