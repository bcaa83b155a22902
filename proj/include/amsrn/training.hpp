#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "amsrn/attention.hpp"
#include "amsrn/corpus.hpp"
#include "amsrn/lstm.hpp"

namespace amsrn {

struct TrainConfig {
    std::size_t d = 50;
    double lr = 0.5;
    std::string optimizer = "sgd";  // "sgd" | "adam"
    std::size_t epochs = 10;
    double clip = 5.0;    // global gradient-norm ceiling
    double lambda = 0.0;  // entropy-regularizer weight
    std::uint64_t seed = 1;
    SelectionMode mode = SelectionMode::kTied;
    bool shuffle = true;       // epoch-level sentence shuffling
    std::size_t patience = 0;  // stop after this many non-improving epochs; 0 = off

    void validate() const;  // ConfigError on out-of-range values
};

struct TrainMeta {
    std::size_t epoch = 0;  // epoch whose weights the checkpoint carries
    double best_valid_ppl = std::numeric_limits<double>::infinity();
};

struct Checkpoint {
    TrainConfig config;
    std::uint64_t vocab_hash = 0;
    LstmParams lstm;
    std::optional<AmsrnParams> att;
    TrainMeta meta;

    bool has_attention() const { return att.has_value(); }
};

// One row per epoch; epoch 0 is the untrained initialization, whose training
// columns are NaN (rendered as "-" in the metrics file).
struct EpochMetrics {
    std::size_t epoch = 0;
    double train_c = std::numeric_limits<double>::quiet_NaN();     // sum over epoch
    double train_lreg = std::numeric_limits<double>::quiet_NaN();  // sum over epoch
    double valid_ppl = 0.0;
    double best_valid_ppl = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;  // best-validation weights
    std::vector<EpochMetrics> log;
};

// Phase 1: plain LSTM language model from random initialization.
TrainResult train_lstm(const TrainConfig& cfg, const Vocabulary& vocab, const Corpus& train,
                       const Corpus& valid);

// Phase 2: attention model initialized from a pretrained LSTM checkpoint
// (head copied, attention projection zeroed), optimizing C + lambda * L_reg.
TrainResult train_amsrn(const TrainConfig& cfg, const Checkpoint& lstm_ckpt,
                        const Vocabulary& vocab, const Corpus& train, const Corpus& valid);

struct EvalResult {
    double ppl = 0.0;
    double total_nll = 0.0;       // nats over all target tokens
    std::size_t token_count = 0;  // prediction targets, </s> included
    std::vector<double> sentence_nll;  // mean nats per target token
    std::vector<std::size_t> sentence_tokens;
    double total_entropy = 0.0;   // L_reg over the corpus (attention models)
    std::size_t step_count = 0;   // attention steps contributing to total_entropy
    std::vector<AttentionTrace> traces;  // filled only when requested
};

// Traces are only available for attention checkpoints; requesting them on an
// LSTM-only checkpoint is a ConfigError.
EvalResult evaluate(const Checkpoint& ckpt, const Vocabulary& vocab, const Corpus& corpus,
                    bool want_traces = false);

struct RankedSentence {
    std::size_t index = 0;      // position in the original corpus
    double improvement = 0.0;   // baseline NLL - model NLL, mean nats per token
};

// Sorted by improvement descending, ties by original index.
std::vector<RankedSentence> sentence_ranking(const std::vector<double>& baseline_nll,
                                             const std::vector<double>& model_nll);

// Scales all gradients in place by min(1, clip / ||g||_2) over the joint
// norm; returns the pre-clip norm.
double clip_gradients(const std::vector<Vector*>& grads, double clip);

// TSV with header; appends when the file already exists.
void write_metrics_tsv(const std::string& path, const std::vector<EpochMetrics>& log);

}  // namespace amsrn
