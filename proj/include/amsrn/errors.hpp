#pragma once

#include <stdexcept>
#include <string>

namespace amsrn {

// Operand shapes disagree (lengths, matrix dims, alignment of targets).
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A value violates a mathematical precondition (non-normalized distribution,
// zero token count, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Token id outside the vocabulary, or corpus/vocab inconsistency.
struct VocabError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// A computation produced NaN/Inf where finite values are required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint/config/vocabulary combinations that do not fit together,
// including unsupported format versions.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File ingestion problems (missing file, empty corpus, malformed content).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace amsrn
