#include "amsrn/attention.hpp"

#include <cmath>
#include <string>

namespace amsrn {

namespace {

constexpr double kEntropyFloor = 1e-300;  // below this, 0 log 0 = 0

void fill_uniform(Matrix& m, Rng& rng, double range) {
    for (double& x : m.data) x = rng.uniform(-range, range);
}

double step_entropy(const Vector& alpha) {
    double h = 0.0;
    for (double a : alpha) {
        if (a >= kEntropyFloor) h -= a * std::log(a);
    }
    return h;
}

}  // namespace

std::string to_string(SelectionMode mode) {
    switch (mode) {
        case SelectionMode::kIndependent: return "independent";
        case SelectionMode::kTied: return "tied";
        case SelectionMode::kComplement: return "complement";
        case SelectionMode::kNone: return "none";
    }
    return "unknown";
}

SelectionMode selection_mode_from_string(const std::string& name) {
    if (name == "independent") return SelectionMode::kIndependent;
    if (name == "tied") return SelectionMode::kTied;
    if (name == "complement") return SelectionMode::kComplement;
    if (name == "none") return SelectionMode::kNone;
    throw ConfigError("unknown selection mode '" + name + "'");
}

AmsrnParams init_amsrn_params(const LstmParams& lstm, SelectionMode mode, Rng& rng) {
    const std::size_t d = lstm.d;
    const std::size_t vocab = lstm.vocab;
    AmsrnParams p;
    p.d = d;
    p.vocab = vocab;
    p.mode = mode;
    p.w_kh = Matrix(d, d);
    p.b_k = Vector(d, 0.0);
    fill_uniform(p.w_kh, rng, kWeightInitRange);
    if (mode != SelectionMode::kNone) {
        p.w_hh1 = Matrix(d, d);
        p.b_h1 = Vector(d, 0.0);
        fill_uniform(p.w_hh1, rng, kWeightInitRange);
    }
    if (mode == SelectionMode::kIndependent) {
        p.w_hh2 = Matrix(d, d);
        p.b_h2 = Vector(d, 0.0);
        fill_uniform(p.w_hh2, rng, kWeightInitRange);
    }
    p.w_ph = lstm.w_out;
    p.b_p = lstm.b_out;
    p.w_pr = Matrix(vocab, d);  // zero: the assembled model reproduces the LSTM exactly
    return p;
}

std::size_t amsrn_param_count(const AmsrnParams& p) {
    return p.w_kh.size() + p.b_k.size() + p.w_hh1.size() + p.b_h1.size() +
           p.w_hh2.size() + p.b_h2.size() + p.w_ph.size() + p.w_pr.size() + p.b_p.size();
}

AmsrnGrads zero_amsrn_grads(const AmsrnParams& p) {
    AmsrnGrads g;
    g.w_kh = Matrix(p.w_kh.rows, p.w_kh.cols);
    g.b_k = Vector(p.b_k.size(), 0.0);
    g.w_hh1 = Matrix(p.w_hh1.rows, p.w_hh1.cols);
    g.b_h1 = Vector(p.b_h1.size(), 0.0);
    g.w_hh2 = Matrix(p.w_hh2.rows, p.w_hh2.cols);
    g.b_h2 = Vector(p.b_h2.size(), 0.0);
    g.w_ph = Matrix(p.w_ph.rows, p.w_ph.cols);
    g.w_pr = Matrix(p.w_pr.rows, p.w_pr.cols);
    g.b_p = Vector(p.b_p.size(), 0.0);
    return g;
}

std::vector<Vector*> amsrn_param_tensors(AmsrnParams& p) {
    return {&p.w_kh.data, &p.b_k, &p.w_hh1.data, &p.b_h1, &p.w_hh2.data,
            &p.b_h2, &p.w_ph.data, &p.w_pr.data, &p.b_p};
}

std::vector<Vector*> amsrn_grad_tensors(AmsrnGrads& g) {
    return {&g.w_kh.data, &g.b_k, &g.w_hh1.data, &g.b_h1, &g.w_hh2.data,
            &g.b_h2, &g.w_ph.data, &g.w_pr.data, &g.b_p};
}

// ---------------------------------------------------------------------------
// Pipeline ops
// ---------------------------------------------------------------------------

SelectionVectors selection_vectors(const AmsrnParams& p, const Vector& h_t) {
    if (h_t.size() != p.d) {
        throw ShapeError("selection_vectors: h " + detail::shape_of(h_t) +
                         " does not match d " + std::to_string(p.d));
    }
    SelectionVectors out;
    switch (p.mode) {
        case SelectionMode::kIndependent: {
            out.w1 = sigmoid(add(matvec(p.w_hh1, h_t), p.b_h1));
            out.w2 = sigmoid(add(matvec(p.w_hh2, h_t), p.b_h2));
            break;
        }
        case SelectionMode::kTied: {
            out.w1 = sigmoid(add(matvec(p.w_hh1, h_t), p.b_h1));
            out.w2 = out.w1;
            break;
        }
        case SelectionMode::kComplement: {
            // The single learned map produces w2; w1 is its complement.
            out.w2 = sigmoid(add(matvec(p.w_hh1, h_t), p.b_h1));
            out.w1.resize(p.d);
            for (std::size_t j = 0; j < p.d; ++j) out.w1[j] = 1.0 - out.w2[j];
            break;
        }
        case SelectionMode::kNone: {
            out.w1.assign(p.d, 1.0);
            out.w2.assign(p.d, 1.0);
            break;
        }
    }
    return out;
}

Vector attention_key(const AmsrnParams& p, const Vector& h_t) {
    if (h_t.size() != p.d) {
        throw ShapeError("attention_key: h " + detail::shape_of(h_t) +
                         " does not match d " + std::to_string(p.d));
    }
    Vector k = matvec(p.w_kh, h_t);
    add_inplace(k, p.b_k);
    return k;
}

Vector attention_scores(std::span<const Vector> bank, const Vector& w1, const Vector& k) {
    if (bank.empty()) throw ShapeError("attention_scores: empty memory bank");
    detail::require_same_length(w1, k, "attention_scores");
    Vector e(bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) {
        detail::require_same_length(bank[i], k, "attention_scores");
        double acc = 0.0;
        for (std::size_t j = 0; j < k.size(); ++j) acc += bank[i][j] * w1[j] * k[j];
        e[i] = acc;
    }
    return e;
}

Vector attention_weights(const Vector& scores) {
    return softmax(scores);
}

Vector relevant_vector(std::span<const Vector> bank, const Vector& alpha, const Vector& w2) {
    if (alpha.size() != bank.size()) {
        throw ShapeError("relevant_vector: alpha len " + std::to_string(alpha.size()) +
                         " does not match bank size " + std::to_string(bank.size()));
    }
    Vector r(w2.size(), 0.0);
    for (std::size_t i = 0; i < bank.size(); ++i) {
        detail::require_same_length(bank[i], w2, "relevant_vector");
        const double a = alpha[i];
        for (std::size_t j = 0; j < w2.size(); ++j) r[j] += a * bank[i][j] * w2[j];
    }
    return r;
}

Vector output_distribution(const AmsrnParams& p, const Vector& h_t, const Vector& r_t) {
    Vector logits = matvec(p.w_ph, h_t);
    add_inplace(logits, matvec(p.w_pr, r_t));
    add_inplace(logits, p.b_p);
    return softmax(logits);
}

double attention_entropy(const Vector& alpha) {
    if (alpha.empty()) throw ShapeError("attention_entropy: empty vector");
    double sum = 0.0;
    for (double a : alpha) sum += a;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw DomainError("attention_entropy: input sums to " + std::to_string(sum) +
                          ", not a probability vector");
    }
    return step_entropy(alpha);
}

// ---------------------------------------------------------------------------
// Whole-model forward / backward
// ---------------------------------------------------------------------------

namespace {

void check_amsrn_shapes(const LstmParams& lstm, const AmsrnParams& att) {
    if (lstm.d != att.d || lstm.vocab != att.vocab) {
        throw ShapeError("amsrn: lstm (d=" + std::to_string(lstm.d) + ", v=" +
                         std::to_string(lstm.vocab) + ") does not match attention (d=" +
                         std::to_string(att.d) + ", v=" + std::to_string(att.vocab) + ")");
    }
}

// One attention step; shared by the plain forward, the fused evaluation, and
// the backward pass.
struct AttStep {
    SelectionVectors sel;
    Vector key;
    Vector e;
    Vector alpha;
    Vector relevant;
    Vector logits;
    double entropy = 0.0;
};

AttStep attention_step(const AmsrnParams& att, const Vector& h_t,
                       std::span<const Vector> bank) {
    AttStep s;
    s.sel = selection_vectors(att, h_t);
    s.key = attention_key(att, h_t);
    s.e = attention_scores(bank, s.sel.w1, s.key);
    s.alpha = attention_weights(s.e);
    s.relevant = relevant_vector(bank, s.alpha, s.sel.w2);
    s.logits = matvec(att.w_ph, h_t);
    add_inplace(s.logits, matvec(att.w_pr, s.relevant));
    add_inplace(s.logits, att.b_p);
    s.entropy = step_entropy(s.alpha);
    return s;
}

TraceStep make_trace_step(std::size_t position, const AttStep& s) {
    TraceStep ts;
    ts.position = position;
    ts.alpha = s.alpha;
    ts.w1 = s.sel.w1;
    ts.w2 = s.sel.w2;
    ts.key = s.key;
    ts.relevant = s.relevant;
    ts.entropy = s.entropy;
    return ts;
}

}  // namespace

AmsrnForwardResult amsrn_forward(const LstmParams& lstm, const AmsrnParams& att,
                                 const std::vector<int>& tokens) {
    check_amsrn_shapes(lstm, att);
    LstmForward fwd = run_sentence(lstm, tokens);
    AmsrnForwardResult out;
    out.distributions.reserve(tokens.size());
    out.trace.steps.reserve(tokens.size());
    for (std::size_t t = 1; t <= tokens.size(); ++t) {
        AttStep s = attention_step(att, fwd.states[t].h, fwd.bank.prefix(t));
        out.distributions.push_back(softmax(s.logits));
        out.trace.steps.push_back(make_trace_step(t, s));
    }
    out.bank = std::move(fwd.bank);
    return out;
}

AmsrnEval amsrn_sentence_eval(const LstmParams& lstm, const AmsrnParams& att,
                              const std::vector<int>& tokens, const std::vector<int>& targets,
                              bool want_trace) {
    check_amsrn_shapes(lstm, att);
    detail::check_targets(tokens, targets, lstm.vocab);
    LstmForward fwd = run_sentence(lstm, tokens);
    AmsrnEval out;
    for (std::size_t t = 1; t <= tokens.size(); ++t) {
        AttStep s = attention_step(att, fwd.states[t].h, fwd.bank.prefix(t));
        out.nll += log_sum_exp(s.logits) - s.logits[static_cast<std::size_t>(targets[t - 1])];
        out.entropy_sum += s.entropy;
        if (want_trace) out.trace.steps.push_back(make_trace_step(t, s));
    }
    return out;
}

AmsrnBackwardResult amsrn_backward(const LstmParams& lstm, const AmsrnParams& att,
                                   const std::vector<int>& tokens,
                                   const std::vector<int>& targets, double lambda) {
    check_amsrn_shapes(lstm, att);
    detail::check_targets(tokens, targets, lstm.vocab);
    if (lambda < 0.0) throw DomainError("amsrn_backward: lambda must be >= 0");

    detail::LstmUnroll u = detail::unroll_with_cache(lstm, tokens);
    const std::size_t d = lstm.d;
    const std::size_t steps = tokens.size();

    AmsrnBackwardResult result;
    result.lstm_grads = zero_lstm_grads(lstm);
    result.att_grads = zero_amsrn_grads(att);

    // dh_query[t-1]: gradient into h_t through the head, key and selection
    // maps of step t. dbank[i]: gradient into h_i through the scores and
    // relevant vectors of steps t >= i+1. Both fill in forward order; only
    // the cell recurrence needs the reverse sweep.
    std::vector<Vector> dh_query(steps, Vector(d, 0.0));
    std::vector<Vector> dbank(steps + 1, Vector(d, 0.0));

    Vector drw2(d), w1k(d);

    // The unroll stores h inside LstmState, not contiguously; gather a
    // contiguous snapshot so prefixes are plain spans.
    std::vector<Vector> bank_vecs;
    bank_vecs.reserve(steps + 1);
    for (std::size_t t = 0; t <= steps; ++t) bank_vecs.push_back(u.states[t].h);

    for (std::size_t t = 1; t <= steps; ++t) {
        const Vector& h_t = u.states[t].h;
        std::span<const Vector> pre(bank_vecs.data(), t);
        AttStep s = attention_step(att, h_t, pre);

        const std::size_t y = static_cast<std::size_t>(targets[t - 1]);
        result.loss_ce += log_sum_exp(s.logits) - s.logits[y];
        result.loss_entropy += s.entropy;

        // head
        Vector dlogits = softmax(s.logits);
        dlogits[y] -= 1.0;
        add_outer(result.att_grads.w_ph, dlogits, h_t);
        add_outer(result.att_grads.w_pr, dlogits, s.relevant);
        add_inplace(result.att_grads.b_p, dlogits);
        add_inplace(dh_query[t - 1], matvec_transposed(att.w_ph, dlogits));
        const Vector dr = matvec_transposed(att.w_pr, dlogits);

        // r = sum_i alpha_i (h_i . w2)
        Vector dalpha(t, 0.0);
        Vector dw2(d, 0.0);
        for (std::size_t j = 0; j < d; ++j) drw2[j] = dr[j] * s.sel.w2[j];
        for (std::size_t i = 0; i < t; ++i) {
            const Vector& h_i = bank_vecs[i];
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += drw2[j] * h_i[j];
            dalpha[i] = acc;
            const double a = s.alpha[i];
            for (std::size_t j = 0; j < d; ++j) {
                dw2[j] += a * dr[j] * h_i[j];
                dbank[i][j] += a * drw2[j];
            }
        }

        // entropy regularizer: dH/dalpha_i = -(log alpha_i + 1)
        if (lambda != 0.0) {
            for (std::size_t i = 0; i < t; ++i) {
                if (s.alpha[i] >= kEntropyFloor) {
                    dalpha[i] += lambda * (-std::log(s.alpha[i]) - 1.0);
                }
            }
        }

        const Vector de = softmax_vjp(s.alpha, dalpha);

        // e_i = (h_i . w1) dot k
        Vector dk(d, 0.0);
        Vector dw1(d, 0.0);
        for (std::size_t j = 0; j < d; ++j) w1k[j] = s.sel.w1[j] * s.key[j];
        for (std::size_t i = 0; i < t; ++i) {
            const Vector& h_i = bank_vecs[i];
            const double dei = de[i];
            for (std::size_t j = 0; j < d; ++j) {
                dk[j] += dei * h_i[j] * s.sel.w1[j];
                dw1[j] += dei * h_i[j] * s.key[j];
                dbank[i][j] += dei * w1k[j];
            }
        }

        // key map
        add_outer(result.att_grads.w_kh, dk, h_t);
        add_inplace(result.att_grads.b_k, dk);
        add_inplace(dh_query[t - 1], matvec_transposed(att.w_kh, dk));

        // selection maps
        switch (att.mode) {
            case SelectionMode::kIndependent: {
                const Vector da1 = sigmoid_vjp(s.sel.w1, dw1);
                add_outer(result.att_grads.w_hh1, da1, h_t);
                add_inplace(result.att_grads.b_h1, da1);
                add_inplace(dh_query[t - 1], matvec_transposed(att.w_hh1, da1));
                const Vector da2 = sigmoid_vjp(s.sel.w2, dw2);
                add_outer(result.att_grads.w_hh2, da2, h_t);
                add_inplace(result.att_grads.b_h2, da2);
                add_inplace(dh_query[t - 1], matvec_transposed(att.w_hh2, da2));
                break;
            }
            case SelectionMode::kTied: {
                const Vector ds = add(dw1, dw2);
                const Vector da = sigmoid_vjp(s.sel.w1, ds);
                add_outer(result.att_grads.w_hh1, da, h_t);
                add_inplace(result.att_grads.b_h1, da);
                add_inplace(dh_query[t - 1], matvec_transposed(att.w_hh1, da));
                break;
            }
            case SelectionMode::kComplement: {
                // w2 = sigmoid(a), w1 = 1 - w2
                Vector ds(d);
                for (std::size_t j = 0; j < d; ++j) ds[j] = dw2[j] - dw1[j];
                const Vector da = sigmoid_vjp(s.sel.w2, ds);
                add_outer(result.att_grads.w_hh1, da, h_t);
                add_inplace(result.att_grads.b_h1, da);
                add_inplace(dh_query[t - 1], matvec_transposed(att.w_hh1, da));
                break;
            }
            case SelectionMode::kNone:
                break;
        }
    }

    // Reverse sweep through the cells. h_0 is a constant, so dbank[0] is
    // dropped at the end of the recursion.
    Vector dh(d, 0.0), dc(d, 0.0), dh_prev, dc_prev;
    for (std::size_t t = steps; t >= 1; --t) {
        add_inplace(dh, dh_query[t - 1]);
        add_inplace(dh, dbank[t]);
        detail::lstm_cell_backward(lstm, u.caches[t - 1], u.states[t - 1].h, u.states[t - 1].c,
                                   u.states[t].c, tokens[t - 1], dh, dc, result.lstm_grads,
                                   dh_prev, dc_prev);
        dh = std::move(dh_prev);
        dc = std::move(dc_prev);
        dh_prev = Vector();
        dc_prev = Vector();
    }
    return result;
}

}  // namespace amsrn
