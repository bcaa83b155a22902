#include <doctest.h>

#include <cmath>

#include "amsrn/attention.hpp"
#include "test_support.hpp"

using namespace amsrn;
using testsup::random_amsrn;
using testsup::random_lstm;
using testsup::random_sentence;

namespace {

const SelectionMode kAllModes[] = {SelectionMode::kIndependent, SelectionMode::kTied,
                                   SelectionMode::kComplement, SelectionMode::kNone};

std::vector<Vector*> all_param_tensors(LstmParams& lstm, AmsrnParams& att) {
    std::vector<Vector*> out = lstm_param_tensors(lstm);
    for (Vector* t : amsrn_param_tensors(att)) out.push_back(t);
    return out;
}

std::vector<Vector*> all_grad_tensors(LstmGrads& lg, AmsrnGrads& ag) {
    std::vector<Vector*> out = lstm_grad_tensors(lg);
    for (Vector* t : amsrn_grad_tensors(ag)) out.push_back(t);
    return out;
}

Vector model_gradient(const LstmParams& lstm, const AmsrnParams& att,
                      const std::vector<int>& tokens, const std::vector<int>& targets,
                      double lambda) {
    AmsrnBackwardResult r = amsrn_backward(lstm, att, tokens, targets, lambda);
    return testsup::flatten(all_grad_tensors(r.lstm_grads, r.att_grads));
}

}  // namespace

TEST_CASE("selection mode names round-trip") {
    for (SelectionMode m : kAllModes) CHECK(selection_mode_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(selection_mode_from_string("bogus"), ConfigError);
}

TEST_CASE("init: shapes, head copy, absent tensors") {
    const LstmParams lstm = random_lstm(10, 4, 21);
    Rng rng(22);

    AmsrnParams ind = init_amsrn_params(lstm, SelectionMode::kIndependent, rng);
    CHECK(ind.w_kh.rows == 4);
    CHECK(ind.w_hh1.size() == 16);
    CHECK(ind.w_hh2.size() == 16);
    CHECK(ind.b_h2.size() == 4);

    AmsrnParams tied = init_amsrn_params(lstm, SelectionMode::kTied, rng);
    CHECK(tied.w_hh1.size() == 16);
    CHECK(tied.w_hh2.empty());
    CHECK(tied.b_h2.empty());

    AmsrnParams comp = init_amsrn_params(lstm, SelectionMode::kComplement, rng);
    CHECK(comp.w_hh2.empty());

    AmsrnParams none = init_amsrn_params(lstm, SelectionMode::kNone, rng);
    CHECK(none.w_hh1.empty());
    CHECK(none.b_h1.empty());
    CHECK(none.w_hh2.empty());

    // head copied from the LSTM, attention projection zeroed
    CHECK(ind.w_ph.data == lstm.w_out.data);
    CHECK(ind.b_p == lstm.b_out);
    for (double x : ind.w_pr.data) CHECK(x == 0.0);

    // one extra selection map = d^2 + d parameters
    CHECK(amsrn_param_count(ind) - amsrn_param_count(tied) == 4 * 4 + 4);
}

TEST_CASE("selection vectors per mode") {
    const LstmParams lstm = random_lstm(10, 3, 23);
    Rng rng(24);
    const Vector h = {0.2, -0.5, 0.7};

    SUBCASE("tied with zero map is all 0.5 and identical") {
        AmsrnParams p = init_amsrn_params(lstm, SelectionMode::kTied, rng);
        p.w_hh1.data.assign(p.w_hh1.size(), 0.0);
        p.b_h1.assign(3, 0.0);
        const SelectionVectors sv = selection_vectors(p, h);
        CHECK(sv.w1 == Vector(3, 0.5));
        CHECK(sv.w1 == sv.w2);
    }

    SUBCASE("complement of 0.5 is 0.5; w1 + w2 == 1 bitwise at random points") {
        AmsrnParams p = init_amsrn_params(lstm, SelectionMode::kComplement, rng);
        AmsrnParams zero = p;
        zero.w_hh1.data.assign(zero.w_hh1.size(), 0.0);
        const SelectionVectors sv = selection_vectors(zero, h);
        CHECK(sv.w1 == Vector(3, 0.5));
        CHECK(sv.w2 == Vector(3, 0.5));

        Rng hr(25);
        for (int trial = 0; trial < 50; ++trial) {
            Vector hh(3);
            for (double& x : hh) x = hr.uniform(-1.0, 1.0);
            const SelectionVectors rv = selection_vectors(p, hh);
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK(rv.w1[j] + rv.w2[j] == 1.0);  // exact in IEEE double
                CHECK(rv.w1[j] > 0.0);
                CHECK(rv.w1[j] < 1.0);
            }
        }
    }

    SUBCASE("independent maps differ; none is all ones") {
        const AmsrnParams ind = random_amsrn(lstm, SelectionMode::kIndependent, 26);
        const SelectionVectors sv = selection_vectors(ind, h);
        CHECK(sv.w1 != sv.w2);

        const AmsrnParams none = random_amsrn(lstm, SelectionMode::kNone, 27);
        const SelectionVectors nv = selection_vectors(none, h);
        CHECK(nv.w1 == Vector(3, 1.0));
        CHECK(nv.w2 == Vector(3, 1.0));
    }

    SUBCASE("shape error") {
        const AmsrnParams p = random_amsrn(lstm, SelectionMode::kTied, 28);
        CHECK_THROWS_AS(selection_vectors(p, {1.0, 2.0}), ShapeError);
    }
}

TEST_CASE("attention key") {
    const LstmParams lstm = random_lstm(5, 3, 29);
    Rng rng(30);
    AmsrnParams p = init_amsrn_params(lstm, SelectionMode::kTied, rng);

    SUBCASE("identity map") {
        p.w_kh.data.assign(9, 0.0);
        for (std::size_t i = 0; i < 3; ++i) p.w_kh(i, i) = 1.0;
        p.b_k.assign(3, 0.0);
        CHECK(attention_key(p, {0.1, 0.2, 0.3}) == Vector{0.1, 0.2, 0.3});
    }
    SUBCASE("constant map") {
        p.w_kh.data.assign(9, 0.0);
        p.b_k.assign(3, 1.0);
        CHECK(attention_key(p, {5.0, -2.0, 0.0}) == Vector(3, 1.0));
    }
    SUBCASE("matches matvec+add") {
        const Vector h = {0.4, -0.6, 0.9};
        CHECK(attention_key(p, h) == add(matvec(p.w_kh, h), p.b_k));
        CHECK_THROWS_AS(attention_key(p, {1.0}), ShapeError);
    }
}

TEST_CASE("attention scores") {
    const std::vector<Vector> bank_store = {{1.0, 0.0}, {0.0, 1.0}};
    const std::span<const Vector> bank(bank_store.data(), 2);

    CHECK(attention_scores(bank, {1.0, 1.0}, {2.0, 3.0}) == Vector{2.0, 3.0});
    CHECK(attention_scores(bank, {0.0, 0.0}, {2.0, 3.0}) == Vector{0.0, 0.0});

    // all-ones mask reduces to the plain dot product
    Rng rng(31);
    std::vector<Vector> rb(3, Vector(4));
    for (Vector& v : rb)
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
    Vector k(4);
    for (double& x : k) x = rng.uniform(-1.0, 1.0);
    const Vector e = attention_scores(std::span<const Vector>(rb.data(), 3), Vector(4, 1.0), k);
    for (std::size_t i = 0; i < 3; ++i) CHECK(e[i] == doctest::Approx(dot(rb[i], k)).epsilon(1e-15));

    CHECK_THROWS_AS(attention_scores(std::span<const Vector>(), {1.0}, {1.0}), ShapeError);
}

TEST_CASE("attention weights") {
    CHECK(attention_weights({0.0, 0.0}) == Vector{0.5, 0.5});
    CHECK(attention_weights({-3.2}) == Vector{1.0});
    const Vector a = attention_weights({std::log(1.0), std::log(3.0)});
    CHECK(a[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(a[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("relevant vector") {
    const std::vector<Vector> bank_store = {{1.0, 0.0}, {0.0, 2.0}};
    const std::span<const Vector> bank(bank_store.data(), 2);

    CHECK(relevant_vector(bank.subspan(0, 1), {1.0}, {0.5, 0.5}) == Vector{0.5, 0.0});
    CHECK(relevant_vector(bank, {0.5, 0.5}, {0.0, 0.0}) == Vector{0.0, 0.0});
    CHECK(relevant_vector(bank, {0.5, 0.5}, {1.0, 1.0}) == Vector{0.5, 1.0});
    CHECK_THROWS_AS(relevant_vector(bank, {1.0}, {1.0, 1.0}), ShapeError);
}

TEST_CASE("output distribution") {
    LstmParams lstm = random_lstm(2, 2, 32);
    Rng rng(33);
    AmsrnParams p = init_amsrn_params(lstm, SelectionMode::kTied, rng);

    SUBCASE("zero attention projection reduces to the plain head") {
        const Vector h = {0.3, -0.4};
        const Vector got = output_distribution(p, h, {9.9, 9.9});  // r must not matter
        const Vector want = softmax(add(matvec(p.w_ph, h), p.b_p));
        CHECK(got == want);
    }
    SUBCASE("all zero params give uniform") {
        p.w_ph.data.assign(p.w_ph.size(), 0.0);
        p.w_pr.data.assign(p.w_pr.size(), 0.0);
        p.b_p.assign(2, 0.0);
        CHECK(output_distribution(p, {1.0, 2.0}, {3.0, 4.0}) == Vector{0.5, 0.5});
    }
    SUBCASE("hand-set two-word vocabulary") {
        // logits = W_ph h + W_pr r + b_p with hand numbers
        p.w_ph(0, 0) = 1.0; p.w_ph(0, 1) = 0.0; p.w_ph(1, 0) = 0.0; p.w_ph(1, 1) = 1.0;
        p.w_pr(0, 0) = 1.0; p.w_pr(0, 1) = 0.0; p.w_pr(1, 0) = 0.0; p.w_pr(1, 1) = 0.0;
        p.b_p = {0.0, 0.5};
        // logits = (1*0.2 + 1*0.1 + 0, 1*0.4 + 0 + 0.5) = (0.3, 0.9)
        const Vector got = output_distribution(p, {0.2, 0.4}, {0.1, 0.7});
        const double z = std::exp(0.3) + std::exp(0.9);
        CHECK(got[0] == doctest::Approx(std::exp(0.3) / z).epsilon(1e-14));
        CHECK(got[1] == doctest::Approx(std::exp(0.9) / z).epsilon(1e-14));
    }
}

TEST_CASE("attention entropy") {
    CHECK(attention_entropy({1.0}) == 0.0);
    CHECK(attention_entropy({0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(attention_entropy(Vector(4, 0.25)) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(attention_entropy({1.0, 0.0}) == 0.0);  // 0 log 0 = 0
    CHECK_THROWS_AS(attention_entropy({0.5, 0.4}), DomainError);
    CHECK_THROWS_AS(attention_entropy({}), ShapeError);

    Rng rng(34);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(10);
        Vector raw(n);
        for (double& x : raw) x = rng.uniform(-4.0, 4.0);
        const double h = attention_entropy(softmax(raw));
        CHECK(h >= 0.0);
        CHECK(h <= std::log(static_cast<double>(n)) + 1e-12);
    }
}

TEST_CASE("forward: zeroed attention projection reproduces the plain LSTM") {
    const LstmParams lstm = random_lstm(10, 4, 35);
    Rng rng(36);
    const AmsrnParams att = init_amsrn_params(lstm, SelectionMode::kTied, rng);  // w_pr = 0

    const std::vector<int> tokens = {1, 7, 3, 3, 9};
    const AmsrnForwardResult a = amsrn_forward(lstm, att, tokens);
    const LstmLmForward b = lstm_lm_forward(lstm, tokens);
    REQUIRE(a.distributions.size() == b.distributions.size());
    for (std::size_t t = 0; t < a.distributions.size(); ++t)
        for (std::size_t i = 0; i < 10; ++i) {
            const double pa = a.distributions[t][i];
            const double pb = b.distributions[t][i];
            CHECK(std::abs(std::log(pa) - std::log(pb)) <= 1e-12);
        }
}

TEST_CASE("forward: one-token sentence forces alpha = (1)") {
    const LstmParams lstm = random_lstm(6, 3, 37);
    const AmsrnParams att = random_amsrn(lstm, SelectionMode::kIndependent, 38);
    const AmsrnForwardResult r = amsrn_forward(lstm, att, {4});
    REQUIRE(r.trace.steps.size() == 1);
    CHECK(r.trace.steps[0].position == 1);
    CHECK(r.trace.steps[0].alpha == Vector{1.0});
    CHECK(r.trace.steps[0].entropy == 0.0);
}

TEST_CASE("forward matches the straight-line reference in every mode") {
    for (SelectionMode mode : kAllModes) {
        const LstmParams lstm = random_lstm(10, 4, 39);
        const AmsrnParams att = random_amsrn(lstm, mode, 40);
        const std::vector<int> tokens = {2, 8, 0, 5, 5, 1};

        const AmsrnForwardResult got = amsrn_forward(lstm, att, tokens);
        const std::vector<Vector> want = testsup::ref_amsrn_distributions(lstm, att, tokens);
        REQUIRE(got.distributions.size() == want.size());
        for (std::size_t t = 0; t < want.size(); ++t)
            for (std::size_t i = 0; i < 10; ++i)
                CHECK(got.distributions[t][i] ==
                      doctest::Approx(want[t][i]).epsilon(1e-12));
    }
}

TEST_CASE("mode algebra: independent with duplicated map equals tied bitwise") {
    const LstmParams lstm = random_lstm(10, 4, 41);
    const AmsrnParams tied = random_amsrn(lstm, SelectionMode::kTied, 42);

    AmsrnParams ind = tied;
    ind.mode = SelectionMode::kIndependent;
    ind.w_hh2 = ind.w_hh1;
    ind.b_h2 = ind.b_h1;

    const std::vector<int> tokens = {3, 1, 4, 1, 5, 9, 2, 6};
    const AmsrnForwardResult a = amsrn_forward(lstm, tied, tokens);
    const AmsrnForwardResult b = amsrn_forward(lstm, ind, tokens);
    REQUIRE(a.distributions.size() == b.distributions.size());
    for (std::size_t t = 0; t < a.distributions.size(); ++t) {
        CHECK(a.distributions[t] == b.distributions[t]);
        CHECK(a.trace.steps[t].alpha == b.trace.steps[t].alpha);
        CHECK(a.trace.steps[t].w1 == b.trace.steps[t].w1);
        CHECK(a.trace.steps[t].w2 == b.trace.steps[t].w2);
    }
}

TEST_CASE("mode none equals the pipeline with all-ones masks") {
    const LstmParams lstm = random_lstm(8, 3, 43);
    const AmsrnParams none = random_amsrn(lstm, SelectionMode::kNone, 44);
    const std::vector<int> tokens = {1, 6, 2, 7};

    const AmsrnForwardResult got = amsrn_forward(lstm, none, tokens);
    const LstmForward fwd = run_sentence(lstm, tokens);
    const Vector ones(3, 1.0);
    for (std::size_t t = 1; t <= tokens.size(); ++t) {
        const Vector k = attention_key(none, fwd.states[t].h);
        const Vector alpha = attention_weights(attention_scores(fwd.bank.prefix(t), ones, k));
        CHECK(got.trace.steps[t - 1].alpha == alpha);
        const Vector r = relevant_vector(fwd.bank.prefix(t), alpha, ones);
        CHECK(got.trace.steps[t - 1].relevant == r);
        CHECK(got.distributions[t - 1] == output_distribution(none, fwd.states[t].h, r));
    }
}

TEST_CASE("alpha normalization and entropy bounds over random passes") {
    Rng meta(45);
    for (int trial = 0; trial < 50; ++trial) {
        const SelectionMode mode = kAllModes[meta.below(4)];
        const LstmParams lstm = random_lstm(8, 4, meta.next_u64());
        const AmsrnParams att = random_amsrn(lstm, mode, meta.next_u64());
        const std::vector<int> tokens = testsup::random_tokens(1 + meta.below(8), 8, meta);

        const AmsrnForwardResult r = amsrn_forward(lstm, att, tokens);
        for (const TraceStep& step : r.trace.steps) {
            double sum = 0.0;
            for (double a : step.alpha) {
                CHECK(a >= 0.0);
                sum += a;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
            CHECK(step.entropy >= 0.0);
            CHECK(step.entropy <= std::log(static_cast<double>(step.alpha.size())) + 1e-12);
        }
    }
}

TEST_CASE("eval agrees with forward and records entropy sums") {
    const LstmParams lstm = random_lstm(10, 4, 46);
    const AmsrnParams att = random_amsrn(lstm, SelectionMode::kComplement, 47);
    const std::vector<int> tokens = {2, 9, 4, 4, 0};
    const std::vector<int> targets = {9, 4, 4, 0, 3};

    const AmsrnForwardResult fwd = amsrn_forward(lstm, att, tokens);
    double nll = 0.0, hsum = 0.0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        nll -= std::log(fwd.distributions[t][static_cast<std::size_t>(targets[t])]);
        hsum += fwd.trace.steps[t].entropy;
    }

    const AmsrnEval eval = amsrn_sentence_eval(lstm, att, tokens, targets, true);
    CHECK(eval.nll == doctest::Approx(nll).epsilon(1e-12));
    CHECK(eval.entropy_sum == doctest::Approx(hsum).epsilon(1e-15));
    REQUIRE(eval.trace.steps.size() == tokens.size());
    for (std::size_t t = 0; t < tokens.size(); ++t)
        CHECK(eval.trace.steps[t].alpha == fwd.trace.steps[t].alpha);

    // entropy_sum equals entropies recomputed from the trace
    double recomputed = 0.0;
    for (const TraceStep& s : eval.trace.steps) recomputed += attention_entropy(s.alpha);
    CHECK(std::abs(recomputed - eval.entropy_sum) <= 1e-9);
}

TEST_CASE("backward: attention projection carries gradient even when zero") {
    const LstmParams lstm = random_lstm(10, 4, 48);
    Rng rng(49);
    const AmsrnParams att = init_amsrn_params(lstm, SelectionMode::kTied, rng);  // w_pr = 0

    const std::vector<int> tokens = {1, 7, 3, 9};
    const std::vector<int> targets = {7, 3, 9, 2};
    const AmsrnBackwardResult r = amsrn_backward(lstm, att, tokens, targets, 0.0);

    CHECK(r.loss_ce == doctest::Approx(lstm_sentence_nll(lstm, tokens, targets)).epsilon(1e-12));
    double norm = 0.0;
    for (double g : r.att_grads.w_pr.data) norm += g * g;
    CHECK(norm > 0.0);
}

TEST_CASE("backward: gradient check for every mode and lambda") {
    for (SelectionMode mode : kAllModes) {
        for (double lambda : {0.0, 0.1}) {
            for (std::uint64_t seed = 0; seed < 2; ++seed) {
                LstmParams lstm = random_lstm(10, 4, 52 + seed);
                AmsrnParams att = random_amsrn(lstm, mode, 152 + seed);
                Rng rng(252 + seed);
                const auto s = random_sentence(6, 10, rng);

                const Vector theta0 = testsup::flatten(all_param_tensors(lstm, att));
                auto f = [&](const Vector& th) {
                    LstmParams L = lstm;
                    AmsrnParams A = att;
                    testsup::unflatten(th, all_param_tensors(L, A));
                    const AmsrnEval e = amsrn_sentence_eval(L, A, s.tokens, s.targets);
                    return e.nll + lambda * e.entropy_sum;
                };
                auto g = [&](const Vector& th) {
                    LstmParams L = lstm;
                    AmsrnParams A = att;
                    testsup::unflatten(th, all_param_tensors(L, A));
                    return model_gradient(L, A, s.tokens, s.targets, lambda);
                };
                const GradCheckReport report = grad_check(f, g, theta0);
                CHECK_MESSAGE(report.ok(), to_string(mode), " lambda=", lambda, " seed ",
                              seed, " max rel err ", report.max_rel_error);
            }
        }
    }
}

TEST_CASE("backward: regularizer gradient is linear in lambda") {
    const LstmParams lstm = random_lstm(10, 4, 60);
    const AmsrnParams att = random_amsrn(lstm, SelectionMode::kIndependent, 61);
    Rng rng(62);
    const auto s = random_sentence(5, 10, rng);

    const Vector g0 = model_gradient(lstm, att, s.tokens, s.targets, 0.0);
    const Vector g1 = model_gradient(lstm, att, s.tokens, s.targets, 1.0);
    const Vector g2 = model_gradient(lstm, att, s.tokens, s.targets, 2.0);
    REQUIRE(g0.size() == g1.size());
    for (std::size_t i = 0; i < g0.size(); ++i)
        CHECK(std::abs((g2[i] - g0[i]) - 2.0 * (g1[i] - g0[i])) <= 1e-10);
}

TEST_CASE("backward: deterministic, validates inputs") {
    const LstmParams lstm = random_lstm(10, 4, 63);
    const AmsrnParams att = random_amsrn(lstm, SelectionMode::kTied, 64);
    const std::vector<int> tokens = {1, 2, 3};
    const std::vector<int> targets = {2, 3, 4};

    AmsrnBackwardResult a = amsrn_backward(lstm, att, tokens, targets, 0.1);
    AmsrnBackwardResult b = amsrn_backward(lstm, att, tokens, targets, 0.1);
    CHECK(a.loss_ce == b.loss_ce);
    CHECK(a.loss_entropy == b.loss_entropy);
    const auto ta = all_grad_tensors(a.lstm_grads, a.att_grads);
    const auto tb = all_grad_tensors(b.lstm_grads, b.att_grads);
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);

    CHECK_THROWS_AS(amsrn_backward(lstm, att, tokens, {1}, 0.0), ShapeError);
    CHECK_THROWS_AS(amsrn_backward(lstm, att, tokens, targets, -0.5), DomainError);
}
