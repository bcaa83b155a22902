#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "amsrn/math_core.hpp"

namespace amsrn {

inline constexpr double kWeightInitRange = 0.08;
inline constexpr double kForgetBiasInit = 1.0;

// Single-layer LSTM language model. Gate pre-activations are stored as one
// 4d block laid out [input i | forget f | output o | candidate g].
struct LstmParams {
    std::size_t d = 0;
    std::size_t vocab = 0;
    Matrix embedding;  // vocab x d
    Matrix w_x;        // 4d x d
    Matrix w_h;        // 4d x d
    Vector b;          // 4d
    Matrix w_out;      // vocab x d
    Vector b_out;      // vocab
};

// embedding/w_x/w_h uniform in [-0.08, 0.08]; gate bias zero except the
// forget block at 1.0; the LM head starts at zero so the untrained model is
// exactly the uniform predictor.
LstmParams init_lstm_params(std::size_t vocab, std::size_t d, Rng& rng);

struct LstmGrads {
    Matrix embedding;
    Matrix w_x;
    Matrix w_h;
    Vector b;
    Matrix w_out;
    Vector b_out;
};

LstmGrads zero_lstm_grads(const LstmParams& p);

// Parameter/gradient tensors in one fixed registry order, used by the
// optimizer, gradient clipping, and flattening for gradient checks.
std::vector<Vector*> lstm_param_tensors(LstmParams& p);
std::vector<Vector*> lstm_grad_tensors(LstmGrads& g);

struct LstmState {
    Vector h;
    Vector c;
};

LstmState initial_state(std::size_t d);

// Ordered snapshots h_0 .. h_T of the hidden state, one entry per consumed
// token plus the initial state. The prediction at step t attends over the
// prefix of size t (h_0 .. h_{t-1}), never over h_t itself.
struct MemoryBank {
    std::vector<Vector> states;

    std::size_t size() const { return states.size(); }
    const Vector& operator[](std::size_t i) const { return states[i]; }
    std::span<const Vector> prefix(std::size_t t) const {
        return std::span<const Vector>(states.data(), t);
    }
};

LstmState lstm_cell(const LstmParams& p, const Vector& x_embed, const LstmState& prev);

struct LstmForward {
    std::vector<LstmState> states;  // index 0 = initial state, then one per token
    MemoryBank bank;                // h snapshots matching states
};

LstmForward run_sentence(const LstmParams& p, const std::vector<int>& tokens);

struct LstmLmForward {
    std::vector<Vector> distributions;  // one vocab distribution per token
    MemoryBank bank;
};

LstmLmForward lstm_lm_forward(const LstmParams& p, const std::vector<int>& tokens);

// Total cross-entropy of the sentence in nats, via the fused
// log-sum-exp path.
double lstm_sentence_nll(const LstmParams& p, const std::vector<int>& tokens,
                         const std::vector<int>& targets);

struct LstmBackwardResult {
    double loss = 0.0;  // cross-entropy C for this sentence
    LstmGrads grads;
};

// Full BPTT of the cross-entropy loss through the unrolled sentence.
LstmBackwardResult lstm_backward(const LstmParams& p, const std::vector<int>& tokens,
                                 const std::vector<int>& targets);

namespace detail {

// Per-step activations kept for the reverse sweep.
struct LstmStepCache {
    Vector i, f, o, g;  // gate activations
    Vector c_tanh;      // tanh(c_t)
};

struct LstmUnroll {
    std::vector<LstmState> states;      // 0..T
    std::vector<LstmStepCache> caches;  // 1..T (index t-1)
};

LstmUnroll unroll_with_cache(const LstmParams& p, const std::vector<int>& tokens);

void check_tokens(const LstmParams& p, const std::vector<int>& tokens);
void check_targets(const std::vector<int>& tokens, const std::vector<int>& targets,
                   std::size_t vocab);

// Backward through one cell step. dh/dc are the gradients flowing into h_t
// and c_t; on return dh_prev/dc_prev hold the gradients for step t-1 and the
// parameter gradients have been accumulated.
void lstm_cell_backward(const LstmParams& p, const LstmStepCache& cache,
                        const Vector& h_prev, const Vector& c_prev, const Vector& c_cur,
                        int token, const Vector& dh, const Vector& dc,
                        LstmGrads& grads, Vector& dh_prev, Vector& dc_prev);

}  // namespace detail

}  // namespace amsrn
