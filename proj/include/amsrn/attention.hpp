#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "amsrn/lstm.hpp"
#include "amsrn/math_core.hpp"

namespace amsrn {

// How the two memory-selection vectors w_h1 (similarity mask) and
// w_h2 (extraction mask) are generated from the current hidden state.
//   kIndependent: two separate affine+sigmoid maps
//   kTied:        one map, w_h2 = w_h1
//   kComplement:  one map produces w_h2, w_h1 = 1 - w_h2
//   kNone:        both masks fixed to all-ones (plain unselected attention)
enum class SelectionMode { kIndependent, kTied, kComplement, kNone };

std::string to_string(SelectionMode mode);
SelectionMode selection_mode_from_string(const std::string& name);

// Attention-side parameters stacked on the LSTM. In tied/complement modes the
// second selection map (w_hh2/b_h2) is absent, not merely unused; in none
// mode both maps are absent.
struct AmsrnParams {
    std::size_t d = 0;
    std::size_t vocab = 0;
    SelectionMode mode = SelectionMode::kTied;
    Matrix w_kh;   // d x d
    Vector b_k;    // d
    Matrix w_hh1;  // d x d, absent in none mode
    Vector b_h1;   // d
    Matrix w_hh2;  // d x d, present only in independent mode
    Vector b_h2;   // d
    Matrix w_ph;   // vocab x d
    Matrix w_pr;   // vocab x d
    Vector b_p;    // vocab
};

// Initialization from a pretrained LSTM: the output head is copied from the
// LSTM head and w_pr starts at zero, so the freshly assembled model scores
// exactly like the LSTM it came from. Selection and key maps get small
// random weights with zero bias.
AmsrnParams init_amsrn_params(const LstmParams& lstm, SelectionMode mode, Rng& rng);

std::size_t amsrn_param_count(const AmsrnParams& p);

struct AmsrnGrads {
    Matrix w_kh;
    Vector b_k;
    Matrix w_hh1;
    Vector b_h1;
    Matrix w_hh2;
    Vector b_h2;
    Matrix w_ph;
    Matrix w_pr;
    Vector b_p;
};

AmsrnGrads zero_amsrn_grads(const AmsrnParams& p);

// Same fixed registry order as the lstm counterparts; absent tensors appear
// as empty vectors and are skipped by consumers.
std::vector<Vector*> amsrn_param_tensors(AmsrnParams& p);
std::vector<Vector*> amsrn_grad_tensors(AmsrnGrads& g);

// ---------------------------------------------------------------------------
// Pipeline ops (one per stage, so each stage is independently testable)
// ---------------------------------------------------------------------------

struct SelectionVectors {
    Vector w1;
    Vector w2;
};

SelectionVectors selection_vectors(const AmsrnParams& p, const Vector& h_t);

// k_t = W_kh h_t + b_k
Vector attention_key(const AmsrnParams& p, const Vector& h_t);

// e_i = (h_i . w1) dot k for every h_i in the given bank prefix.
Vector attention_scores(std::span<const Vector> bank, const Vector& w1, const Vector& k);

// softmax over scores; empty input is a shape error.
Vector attention_weights(const Vector& scores);

// r = sum_i alpha_i (h_i . w2)
Vector relevant_vector(std::span<const Vector> bank, const Vector& alpha, const Vector& w2);

// P = softmax(W_ph h_t + W_pr r_t + b_p)
Vector output_distribution(const AmsrnParams& p, const Vector& h_t, const Vector& r_t);

// Entropy of an attention distribution, natural log, with the 0 log 0 = 0
// convention (entries below 1e-300 contribute nothing). Input must sum to 1
// within 1e-9.
double attention_entropy(const Vector& alpha);

// ---------------------------------------------------------------------------
// Whole-model forward / backward
// ---------------------------------------------------------------------------

struct TraceStep {
    std::size_t position = 0;  // 1-indexed prediction step; bank size == position
    Vector alpha;
    Vector w1;
    Vector w2;
    Vector key;
    Vector relevant;
    double entropy = 0.0;
};

struct AttentionTrace {
    std::vector<TraceStep> steps;
};

struct AmsrnForwardResult {
    std::vector<Vector> distributions;  // one vocab distribution per token
    AttentionTrace trace;
    MemoryBank bank;
};

AmsrnForwardResult amsrn_forward(const LstmParams& lstm, const AmsrnParams& att,
                                 const std::vector<int>& tokens);

struct AmsrnEval {
    double nll = 0.0;          // cross-entropy over the sentence, nats
    double entropy_sum = 0.0;  // sum of per-step attention entropies
    AttentionTrace trace;      // filled only when requested
};

// Fused-loss evaluation pass; cheaper than amsrn_forward when only the NLL
// and entropies are needed.
AmsrnEval amsrn_sentence_eval(const LstmParams& lstm, const AmsrnParams& att,
                              const std::vector<int>& tokens, const std::vector<int>& targets,
                              bool want_trace = false);

struct AmsrnBackwardResult {
    double loss_ce = 0.0;       // C
    double loss_entropy = 0.0;  // L_reg (sum of step entropies)
    LstmGrads lstm_grads;
    AmsrnGrads att_grads;
};

// Gradients of C + lambda * L_reg with respect to every LSTM and attention
// parameter, including the paths through the memory bank (each stored h_i
// feeds the scores and the relevant vector of every later step).
AmsrnBackwardResult amsrn_backward(const LstmParams& lstm, const AmsrnParams& att,
                                   const std::vector<int>& tokens,
                                   const std::vector<int>& targets, double lambda);

}  // namespace amsrn
