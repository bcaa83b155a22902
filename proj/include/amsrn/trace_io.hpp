#pragma once

#include <optional>
#include <string>
#include <vector>

#include "amsrn/attention.hpp"

namespace amsrn {

inline constexpr int kTraceSchemaVersion = 1;

// One sentence per line of a trace file:
//   {"schema_version": 1, "tokens": [surface...],
//    "steps": [{"position", "alpha", "entropy", "w1_mean", "w2_mean"}...]}
// verbose additionally stores the full w1/w2 vectors per step.
std::string trace_record_json(const std::vector<std::string>& surface,
                              const AttentionTrace& trace, bool verbose);

// Highlight rule: an explicit threshold X marks alpha > X everywhere; the
// default marks alpha above twice the uniform weight 2/t, with the forced
// single-entry bank at t=1 always marked.
bool highlighted(double alpha, std::size_t bank_size, std::optional<double> threshold);

// Memory-bank position -> display label. Index 0 is the initial state and
// index 1 the state after reading <s>; both render as <s>. Later indices
// show the word whose reading produced the stored state.
std::string bank_label(const std::vector<std::string>& surface, std::size_t bank_index);

// The token being predicted at 1-indexed step `position` (</s> at the end).
std::string target_label(const std::vector<std::string>& surface, std::size_t position);

// Plain-text rendering, one block per sentence: each step lists the bank
// labels with attention weights, highlight-marked per the rule above.
std::string render_trace_text(const std::vector<std::string>& surface,
                              const AttentionTrace& trace, std::optional<double> threshold);

}  // namespace amsrn
