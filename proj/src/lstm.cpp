#include "amsrn/lstm.hpp"

#include <cmath>
#include <string>

namespace amsrn {

namespace {

void fill_uniform(Matrix& m, Rng& rng, double range) {
    for (double& x : m.data) x = rng.uniform(-range, range);
}

}  // namespace

LstmParams init_lstm_params(std::size_t vocab, std::size_t d, Rng& rng) {
    if (vocab == 0 || d == 0) throw ShapeError("init_lstm_params: vocab and d must be positive");
    LstmParams p;
    p.d = d;
    p.vocab = vocab;
    p.embedding = Matrix(vocab, d);
    p.w_x = Matrix(4 * d, d);
    p.w_h = Matrix(4 * d, d);
    p.b = Vector(4 * d, 0.0);
    p.w_out = Matrix(vocab, d);       // zero: untrained model is the uniform predictor
    p.b_out = Vector(vocab, 0.0);
    fill_uniform(p.embedding, rng, kWeightInitRange);
    fill_uniform(p.w_x, rng, kWeightInitRange);
    fill_uniform(p.w_h, rng, kWeightInitRange);
    for (std::size_t j = d; j < 2 * d; ++j) p.b[j] = kForgetBiasInit;  // forget block
    return p;
}

LstmGrads zero_lstm_grads(const LstmParams& p) {
    LstmGrads g;
    g.embedding = Matrix(p.embedding.rows, p.embedding.cols);
    g.w_x = Matrix(p.w_x.rows, p.w_x.cols);
    g.w_h = Matrix(p.w_h.rows, p.w_h.cols);
    g.b = Vector(p.b.size(), 0.0);
    g.w_out = Matrix(p.w_out.rows, p.w_out.cols);
    g.b_out = Vector(p.b_out.size(), 0.0);
    return g;
}

std::vector<Vector*> lstm_param_tensors(LstmParams& p) {
    return {&p.embedding.data, &p.w_x.data, &p.w_h.data, &p.b, &p.w_out.data, &p.b_out};
}

std::vector<Vector*> lstm_grad_tensors(LstmGrads& g) {
    return {&g.embedding.data, &g.w_x.data, &g.w_h.data, &g.b, &g.w_out.data, &g.b_out};
}

LstmState initial_state(std::size_t d) {
    return LstmState{Vector(d, 0.0), Vector(d, 0.0)};
}

namespace detail {

void check_tokens(const LstmParams& p, const std::vector<int>& tokens) {
    if (tokens.empty()) throw ShapeError("run_sentence: empty token sequence");
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t] < 0 || static_cast<std::size_t>(tokens[t]) >= p.vocab) {
            throw VocabError("token id " + std::to_string(tokens[t]) +
                             " out of range [0, " + std::to_string(p.vocab) +
                             ") at position " + std::to_string(t));
        }
    }
}

void check_targets(const std::vector<int>& tokens, const std::vector<int>& targets,
                   std::size_t vocab) {
    if (targets.size() != tokens.size()) {
        throw ShapeError("targets misaligned with tokens (len " +
                         std::to_string(targets.size()) + " vs len " +
                         std::to_string(tokens.size()) + ")");
    }
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (targets[t] < 0 || static_cast<std::size_t>(targets[t]) >= vocab) {
            throw VocabError("target id " + std::to_string(targets[t]) +
                             " out of range [0, " + std::to_string(vocab) +
                             ") at position " + std::to_string(t));
        }
    }
}

}  // namespace detail

LstmState lstm_cell(const LstmParams& p, const Vector& x_embed, const LstmState& prev) {
    const std::size_t d = p.d;
    if (x_embed.size() != d) {
        throw ShapeError("lstm_cell: input " + detail::shape_of(x_embed) +
                         " does not match hidden size " + std::to_string(d));
    }
    if (prev.h.size() != d || prev.c.size() != d) {
        throw ShapeError("lstm_cell: state size mismatch");
    }

    Vector z = matvec(p.w_x, x_embed);
    add_inplace(z, matvec(p.w_h, prev.h));
    add_inplace(z, p.b);

    LstmState next;
    next.h.resize(d);
    next.c.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double i = 1.0 / (1.0 + std::exp(-z[j]));
        const double f = 1.0 / (1.0 + std::exp(-z[d + j]));
        const double o = 1.0 / (1.0 + std::exp(-z[2 * d + j]));
        const double g = std::tanh(z[3 * d + j]);
        next.c[j] = f * prev.c[j] + i * g;
        next.h[j] = o * std::tanh(next.c[j]);
    }
    return next;
}

namespace detail {

LstmUnroll unroll_with_cache(const LstmParams& p, const std::vector<int>& tokens) {
    check_tokens(p, tokens);
    const std::size_t d = p.d;
    LstmUnroll u;
    u.states.reserve(tokens.size() + 1);
    u.caches.reserve(tokens.size());
    u.states.push_back(initial_state(d));

    Vector x(d);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const LstmState& prev = u.states.back();
        const double* erow = p.embedding.row(static_cast<std::size_t>(tokens[t]));
        for (std::size_t j = 0; j < d; ++j) x[j] = erow[j];

        Vector z = matvec(p.w_x, x);
        add_inplace(z, matvec(p.w_h, prev.h));
        add_inplace(z, p.b);

        LstmStepCache cache;
        cache.i.resize(d);
        cache.f.resize(d);
        cache.o.resize(d);
        cache.g.resize(d);
        cache.c_tanh.resize(d);
        LstmState next;
        next.h.resize(d);
        next.c.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            const double iv = 1.0 / (1.0 + std::exp(-z[j]));
            const double fv = 1.0 / (1.0 + std::exp(-z[d + j]));
            const double ov = 1.0 / (1.0 + std::exp(-z[2 * d + j]));
            const double gv = std::tanh(z[3 * d + j]);
            cache.i[j] = iv;
            cache.f[j] = fv;
            cache.o[j] = ov;
            cache.g[j] = gv;
            next.c[j] = fv * prev.c[j] + iv * gv;
            cache.c_tanh[j] = std::tanh(next.c[j]);
            next.h[j] = ov * cache.c_tanh[j];
        }
        u.states.push_back(std::move(next));
        u.caches.push_back(std::move(cache));
    }
    return u;
}

void lstm_cell_backward(const LstmParams& p, const LstmStepCache& cache,
                        const Vector& h_prev, const Vector& c_prev, const Vector& c_cur,
                        int token, const Vector& dh, const Vector& dc,
                        LstmGrads& grads, Vector& dh_prev, Vector& dc_prev) {
    (void)c_cur;
    const std::size_t d = p.d;
    Vector dz(4 * d);
    dc_prev.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        const double iv = cache.i[j];
        const double fv = cache.f[j];
        const double ov = cache.o[j];
        const double gv = cache.g[j];
        const double ct = cache.c_tanh[j];

        const double do_ = dh[j] * ct;
        const double dct = dc[j] + dh[j] * ov * (1.0 - ct * ct);

        const double di = dct * gv;
        const double df = dct * c_prev[j];
        const double dg = dct * iv;
        dc_prev[j] = dct * fv;

        dz[j] = di * iv * (1.0 - iv);
        dz[d + j] = df * fv * (1.0 - fv);
        dz[2 * d + j] = do_ * ov * (1.0 - ov);
        dz[3 * d + j] = dg * (1.0 - gv * gv);
    }

    // z = W_x x + W_h h_prev + b
    Vector x(d);
    const double* erow = p.embedding.row(static_cast<std::size_t>(token));
    for (std::size_t j = 0; j < d; ++j) x[j] = erow[j];

    add_outer(grads.w_x, dz, x);
    add_outer(grads.w_h, dz, h_prev);
    add_inplace(grads.b, dz);

    const Vector dx = matvec_transposed(p.w_x, dz);
    double* grow = grads.embedding.row(static_cast<std::size_t>(token));
    for (std::size_t j = 0; j < d; ++j) grow[j] += dx[j];

    dh_prev = matvec_transposed(p.w_h, dz);
}

}  // namespace detail

LstmForward run_sentence(const LstmParams& p, const std::vector<int>& tokens) {
    detail::LstmUnroll u = detail::unroll_with_cache(p, tokens);
    LstmForward out;
    out.bank.states.reserve(u.states.size());
    for (const LstmState& s : u.states) out.bank.states.push_back(s.h);
    out.states = std::move(u.states);
    return out;
}

LstmLmForward lstm_lm_forward(const LstmParams& p, const std::vector<int>& tokens) {
    LstmForward fwd = run_sentence(p, tokens);
    LstmLmForward out;
    out.distributions.reserve(tokens.size());
    for (std::size_t t = 1; t < fwd.states.size(); ++t) {
        Vector logits = matvec(p.w_out, fwd.states[t].h);
        add_inplace(logits, p.b_out);
        out.distributions.push_back(softmax(logits));
    }
    out.bank = std::move(fwd.bank);
    return out;
}

double lstm_sentence_nll(const LstmParams& p, const std::vector<int>& tokens,
                         const std::vector<int>& targets) {
    detail::check_targets(tokens, targets, p.vocab);
    LstmForward fwd = run_sentence(p, tokens);
    double nll = 0.0;
    for (std::size_t t = 1; t < fwd.states.size(); ++t) {
        Vector logits = matvec(p.w_out, fwd.states[t].h);
        add_inplace(logits, p.b_out);
        nll += log_sum_exp(logits) - logits[static_cast<std::size_t>(targets[t - 1])];
    }
    return nll;
}

LstmBackwardResult lstm_backward(const LstmParams& p, const std::vector<int>& tokens,
                                 const std::vector<int>& targets) {
    detail::check_targets(tokens, targets, p.vocab);
    detail::LstmUnroll u = detail::unroll_with_cache(p, tokens);
    const std::size_t d = p.d;
    const std::size_t steps = tokens.size();

    LstmBackwardResult result;
    result.grads = zero_lstm_grads(p);

    // Head gradients can be accumulated in forward order; only the cell
    // recurrence needs the reverse sweep.
    std::vector<Vector> dh_head(steps);
    for (std::size_t t = 1; t <= steps; ++t) {
        const Vector& h = u.states[t].h;
        Vector logits = matvec(p.w_out, h);
        add_inplace(logits, p.b_out);
        const std::size_t y = static_cast<std::size_t>(targets[t - 1]);
        result.loss += log_sum_exp(logits) - logits[y];

        Vector dlogits = softmax(logits);
        dlogits[y] -= 1.0;
        add_outer(result.grads.w_out, dlogits, h);
        add_inplace(result.grads.b_out, dlogits);
        dh_head[t - 1] = matvec_transposed(p.w_out, dlogits);
    }

    Vector dh(d, 0.0), dc(d, 0.0), dh_prev, dc_prev;
    for (std::size_t t = steps; t >= 1; --t) {
        add_inplace(dh, dh_head[t - 1]);
        detail::lstm_cell_backward(p, u.caches[t - 1], u.states[t - 1].h, u.states[t - 1].c,
                                   u.states[t].c, tokens[t - 1], dh, dc, result.grads,
                                   dh_prev, dc_prev);
        dh = std::move(dh_prev);
        dc = std::move(dc_prev);
        dh_prev = Vector();
        dc_prev = Vector();
    }
    return result;
}

}  // namespace amsrn
