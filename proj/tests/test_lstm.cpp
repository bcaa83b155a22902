#include <doctest.h>

#include <cmath>

#include "amsrn/lstm.hpp"
#include "test_support.hpp"

using namespace amsrn;
using testsup::random_lstm;
using testsup::random_sentence;

namespace {

LstmParams zero_lstm(std::size_t vocab, std::size_t d) {
    Rng rng(0);
    LstmParams p = init_lstm_params(vocab, d, rng);
    for (Vector* t : lstm_param_tensors(p)) t->assign(t->size(), 0.0);
    return p;
}

}  // namespace

TEST_CASE("init shapes and ranges") {
    Rng rng(1);
    const LstmParams p = init_lstm_params(10, 4, rng);
    CHECK(p.embedding.rows == 10);
    CHECK(p.embedding.cols == 4);
    CHECK(p.w_x.rows == 16);
    CHECK(p.w_x.cols == 4);
    CHECK(p.w_h.rows == 16);
    CHECK(p.b.size() == 16);
    CHECK(p.w_out.rows == 10);
    CHECK(p.b_out.size() == 10);

    for (double x : p.embedding.data) CHECK(std::abs(x) <= kWeightInitRange);
    for (double x : p.w_x.data) CHECK(std::abs(x) <= kWeightInitRange);

    // bias: forget block 1.0, everything else 0
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(p.b[j] == 0.0);
        CHECK(p.b[4 + j] == kForgetBiasInit);
        CHECK(p.b[8 + j] == 0.0);
        CHECK(p.b[12 + j] == 0.0);
    }
    for (double x : p.w_out.data) CHECK(x == 0.0);
    for (double x : p.b_out) CHECK(x == 0.0);
}

TEST_CASE("zero-parameter cell maps everything to zero state") {
    const LstmParams p = zero_lstm(5, 3);
    const LstmState out = lstm_cell(p, {0.3, -0.7, 0.1}, initial_state(3));
    for (double h : out.h) CHECK(h == 0.0);
    for (double c : out.c) CHECK(c == 0.0);
}

TEST_CASE("saturated forget gate carries memory") {
    LstmParams p = zero_lstm(5, 2);
    for (std::size_t j = 0; j < 2; ++j) {
        p.b[j] = -50.0;     // input gate ~ 0
        p.b[2 + j] = 50.0;  // forget gate ~ 1
    }
    LstmState prev{Vector{0.0, 0.0}, Vector{0.8, -1.3}};
    const LstmState out = lstm_cell(p, {0.0, 0.0}, prev);
    CHECK(out.c[0] == doctest::Approx(0.8).epsilon(1e-8));
    CHECK(out.c[1] == doctest::Approx(-1.3).epsilon(1e-8));
}

TEST_CASE("cell matches the straight-line reference") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const LstmParams p = random_lstm(7, 4, 100 + seed);
        Rng rng(500 + seed);
        Vector x(4), h(4), c(4);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        for (double& v : h) v = rng.uniform(-0.9, 0.9);
        for (double& v : c) v = rng.uniform(-2.0, 2.0);

        const LstmState got = lstm_cell(p, x, LstmState{h, c});
        const testsup::RefState want = testsup::ref_lstm_cell(p, x, testsup::RefState{h, c});
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(got.h[j] == doctest::Approx(want.h[j]).epsilon(1e-14));
            CHECK(got.c[j] == doctest::Approx(want.c[j]).epsilon(1e-14));
        }
    }
}

TEST_CASE("cell shape errors") {
    const LstmParams p = zero_lstm(5, 3);
    CHECK_THROWS_AS(lstm_cell(p, {1.0, 2.0}, initial_state(3)), ShapeError);
    CHECK_THROWS_AS(lstm_cell(p, {1.0, 2.0, 3.0}, initial_state(2)), ShapeError);
}

TEST_CASE("run_sentence bank growth and prefix semantics") {
    const LstmParams p = random_lstm(9, 4, 7);

    const LstmForward one = run_sentence(p, {3});
    CHECK(one.bank.size() == 2);  // h_0 and h_1
    CHECK(one.bank.prefix(1).size() == 1);
    CHECK(one.bank.prefix(1)[0] == Vector(4, 0.0));  // h_0 is the zero vector

    const LstmForward three = run_sentence(p, {3, 1, 4});
    CHECK(three.bank.size() == 4);
    for (std::size_t t = 1; t <= 3; ++t) CHECK(three.bank.prefix(t).size() == t);

    // snapshots: bank entries equal the recorded states
    for (std::size_t i = 0; i < three.bank.size(); ++i)
        CHECK(three.bank[i] == three.states[i].h);

    // h stays inside (-1, 1)
    for (std::size_t i = 1; i < three.bank.size(); ++i)
        for (double h : three.bank[i]) {
            CHECK(h > -1.0);
            CHECK(h < 1.0);
        }
}

TEST_CASE("run_sentence is deterministic") {
    const LstmParams p = random_lstm(9, 4, 8);
    const LstmForward a = run_sentence(p, {2, 5, 1, 8});
    const LstmForward b = run_sentence(p, {2, 5, 1, 8});
    REQUIRE(a.bank.size() == b.bank.size());
    for (std::size_t i = 0; i < a.bank.size(); ++i) CHECK(a.bank[i] == b.bank[i]);
}

TEST_CASE("run_sentence input validation") {
    const LstmParams p = random_lstm(9, 4, 9);
    CHECK_THROWS_AS(run_sentence(p, {}), ShapeError);
    try {
        run_sentence(p, {2, 9, 1});
        FAIL("expected VocabError");
    } catch (const VocabError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("9") != std::string::npos);
        CHECK(msg.find("position 1") != std::string::npos);
    }
}

TEST_CASE("lm forward: zero head gives the uniform predictor") {
    Rng rng(10);
    LstmParams p = init_lstm_params(6, 4, rng);  // head stays zero
    const LstmLmForward out = lstm_lm_forward(p, {1, 2, 3});
    REQUIRE(out.distributions.size() == 3);
    for (const Vector& dist : out.distributions)
        for (double x : dist) CHECK(x == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("lm forward matches reference and normalizes") {
    const LstmParams p = random_lstm(3, 2, 11);
    const std::vector<int> tokens = {2};
    const LstmLmForward got = lstm_lm_forward(p, tokens);
    const std::vector<Vector> want = testsup::ref_lstm_distributions(p, tokens);
    REQUIRE(got.distributions.size() == 1);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(got.distributions[0][i] == doctest::Approx(want[0][i]).epsilon(1e-13));

    const LstmLmForward longer = lstm_lm_forward(random_lstm(12, 5, 12), {0, 4, 7, 11, 3});
    for (const Vector& dist : longer.distributions) {
        double sum = 0.0;
        for (double x : dist) sum += x;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("untrained model scores per-token NLL of ln |v|") {
    Rng rng(13);
    const LstmParams p = init_lstm_params(17, 4, rng);
    const std::vector<int> tokens = {1, 2, 3, 4, 5};
    const std::vector<int> targets = {2, 3, 4, 5, 6};
    const double nll = lstm_sentence_nll(p, tokens, targets);
    CHECK(std::exp(nll / 5.0) == doctest::Approx(17.0).epsilon(1e-12));
}

TEST_CASE("backward: unused embedding rows get zero gradient") {
    const LstmParams p = random_lstm(10, 4, 14);
    const LstmBackwardResult r = lstm_backward(p, {1, 2}, {2, 3});
    // tokens 1 and 2 are used as inputs; rows of all other ids stay zero
    for (std::size_t row = 0; row < 10; ++row) {
        const bool used = (row == 1 || row == 2);
        bool all_zero = true;
        for (std::size_t j = 0; j < 4; ++j)
            if (r.grads.embedding(row, j) != 0.0) all_zero = false;
        CHECK(all_zero == !used);
    }
}

TEST_CASE("backward: loss matches forward NLL and is deterministic") {
    const LstmParams p = random_lstm(10, 4, 15);
    Rng rng(16);
    const auto s = random_sentence(6, 10, rng);
    const LstmBackwardResult a = lstm_backward(p, s.tokens, s.targets);
    const LstmBackwardResult b = lstm_backward(p, s.tokens, s.targets);
    CHECK(a.loss == lstm_sentence_nll(p, s.tokens, s.targets));
    CHECK(a.loss == b.loss);

    LstmGrads ga = a.grads, gb = b.grads;
    const auto ta = lstm_grad_tensors(ga);
    const auto tb = lstm_grad_tensors(gb);
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);

    CHECK_THROWS_AS(lstm_backward(p, s.tokens, {1, 2}), ShapeError);
}

TEST_CASE("BPTT gradients pass grad_check on 20 seeds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        LstmParams p = random_lstm(10, 4, 9000 + seed);
        Rng rng(9500 + seed);
        const auto s = random_sentence(5, 10, rng);

        const Vector theta0 = testsup::flatten(lstm_param_tensors(p));
        auto f = [&](const Vector& th) {
            LstmParams q = p;
            testsup::unflatten(th, lstm_param_tensors(q));
            return lstm_sentence_nll(q, s.tokens, s.targets);
        };
        auto g = [&](const Vector& th) {
            LstmParams q = p;
            testsup::unflatten(th, lstm_param_tensors(q));
            LstmBackwardResult r = lstm_backward(q, s.tokens, s.targets);
            return testsup::flatten(lstm_grad_tensors(r.grads));
        };
        const GradCheckReport report = grad_check(f, g, theta0);
        CHECK_MESSAGE(report.ok(), "seed ", seed, " max rel err ", report.max_rel_error);
    }
}
