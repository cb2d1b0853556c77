#include "mlpmcmc/error.hpp"

namespace mlpmcmc {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Domain: return "domain";
        case ErrorKind::LevelUnderflow: return "level-underflow";
        case ErrorKind::DegenerateVariance: return "degenerate-variance";
        case ErrorKind::DegenerateWeights: return "degenerate-weights";
        case ErrorKind::FilterCollapse: return "filter-collapse";
        case ErrorKind::InsufficientData: return "insufficient-data";
        case ErrorKind::Config: return "config";
        case ErrorKind::Schema: return "schema";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace mlpmcmc
