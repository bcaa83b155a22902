#include "amsrn/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace amsrn {

void TrainConfig::validate() const {
    if (d == 0) throw ConfigError("d must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(clip > 0.0)) throw ConfigError("gradient clip must be positive");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (optimizer != "sgd" && optimizer != "adam") {
        throw ConfigError("unknown optimizer '" + optimizer + "' (expected sgd or adam)");
    }
}

double clip_gradients(const std::vector<Vector*>& grads, double clip) {
    if (!(clip > 0.0)) throw DomainError("clip_gradients: clip must be positive");
    double sq = 0.0;
    for (const Vector* g : grads)
        for (double x : *g) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm > clip) {
        const double s = clip / norm;
        for (Vector* g : grads)
            for (double& x : *g) x *= s;
    }
    return norm;
}

namespace {

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

class Optimizer {
public:
    Optimizer(const std::string& kind, double lr) : adam_(kind == "adam"), lr_(lr) {}

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

    void step(const std::vector<Vector*>& params, const std::vector<Vector*>& grads) {
        if (!adam_) {
            for (std::size_t i = 0; i < params.size(); ++i)
                axpy_inplace(-lr_, *grads[i], *params[i]);
            return;
        }
        if (m_.empty()) {
            for (const Vector* p : params) {
                m_.emplace_back(p->size(), 0.0);
                v_.emplace_back(p->size(), 0.0);
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Vector& m = m_[i];
            Vector& v = v_[i];
            Vector& p = *params[i];
            const Vector& g = *grads[i];
            for (std::size_t j = 0; j < p.size(); ++j) {
                m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g[j];
                v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g[j] * g[j];
                p[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + kEps);
            }
        }
    }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    bool adam_;
    double lr_;
    std::vector<Vector> m_, v_;
    std::uint64_t t_ = 0;
};

void fisher_yates(std::vector<std::size_t>& order, Rng& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
}

struct CorpusEval {
    double total_nll = 0.0;
    std::size_t tokens = 0;
    double entropy = 0.0;
    std::size_t steps = 0;
};

CorpusEval eval_params(const LstmParams& lstm, const AmsrnParams* att, const Corpus& corpus) {
    CorpusEval out;
    for (const EncodedSentence& s : corpus.sentences) {
        const std::vector<int> tokens = s.inputs();
        const std::vector<int> targets = s.targets();
        if (att != nullptr) {
            const AmsrnEval e = amsrn_sentence_eval(lstm, *att, tokens, targets);
            out.total_nll += e.nll;
            out.entropy += e.entropy_sum;
            out.steps += tokens.size();
        } else {
            out.total_nll += lstm_sentence_nll(lstm, tokens, targets);
        }
        out.tokens += targets.size();
    }
    return out;
}

struct BestSnapshot {
    LstmParams lstm;
    AmsrnParams att;
    std::size_t epoch = 0;
    double valid_ppl = std::numeric_limits<double>::infinity();
};

}  // namespace

TrainResult train_lstm(const TrainConfig& cfg, const Vocabulary& vocab, const Corpus& train,
                       const Corpus& valid) {
    cfg.validate();

    Rng master(cfg.seed);
    Rng init_rng = master.split();
    Rng shuffle_rng = master.split();

    LstmParams params = init_lstm_params(vocab.size(), cfg.d, init_rng);
    Optimizer opt(cfg.optimizer, cfg.lr);

    TrainResult result;
    BestSnapshot best;

    auto validate_now = [&]() {
        const CorpusEval e = eval_params(params, nullptr, valid);
        return perplexity(e.total_nll, e.tokens);
    };

    double valid_ppl = validate_now();
    best.lstm = params;
    best.epoch = 0;
    best.valid_ppl = valid_ppl;
    result.log.push_back(
        {0, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
         valid_ppl, valid_ppl, opt.lr()});

    std::vector<std::size_t> order(train.sentences.size());
    std::iota(order.begin(), order.end(), 0);

    std::size_t stall = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) fisher_yates(order, shuffle_rng);

        double epoch_c = 0.0;
        for (std::size_t idx : order) {
            const EncodedSentence& s = train.sentences[idx];
            LstmBackwardResult r = lstm_backward(params, s.inputs(), s.targets());
            if (!std::isfinite(r.loss)) {
                throw NumericError("non-finite training loss at sentence " +
                                   std::to_string(idx) + " (epoch " + std::to_string(epoch) +
                                   ")");
            }
            epoch_c += r.loss;
            const auto grads = lstm_grad_tensors(r.grads);
            clip_gradients(grads, cfg.clip);
            opt.step(lstm_param_tensors(params), grads);
        }

        valid_ppl = validate_now();
        if (valid_ppl < best.valid_ppl) {
            best.lstm = params;
            best.epoch = epoch;
            best.valid_ppl = valid_ppl;
            stall = 0;
        } else {
            ++stall;
            opt.set_lr(opt.lr() * 0.5);  // halve on stall
        }
        result.log.push_back({epoch, epoch_c, 0.0, valid_ppl, best.valid_ppl, opt.lr()});
        if (cfg.patience > 0 && stall >= cfg.patience) break;
    }

    result.checkpoint.config = cfg;
    result.checkpoint.vocab_hash = vocab.hash();
    result.checkpoint.lstm = std::move(best.lstm);
    result.checkpoint.meta.epoch = best.epoch;
    result.checkpoint.meta.best_valid_ppl = best.valid_ppl;
    return result;
}

TrainResult train_amsrn(const TrainConfig& cfg, const Checkpoint& lstm_ckpt,
                        const Vocabulary& vocab, const Corpus& train, const Corpus& valid) {
    cfg.validate();
    if (lstm_ckpt.vocab_hash != vocab.hash()) {
        throw ConfigError("checkpoint was built with a different vocabulary");
    }
    if (lstm_ckpt.lstm.d != cfg.d) {
        throw ConfigError("checkpoint d=" + std::to_string(lstm_ckpt.lstm.d) +
                          " does not match configured d=" + std::to_string(cfg.d));
    }
    if (lstm_ckpt.lstm.vocab != vocab.size()) {
        throw ConfigError("checkpoint vocabulary size " + std::to_string(lstm_ckpt.lstm.vocab) +
                          " does not match vocabulary (" + std::to_string(vocab.size()) + ")");
    }

    Rng master(cfg.seed);
    Rng init_rng = master.split();
    Rng shuffle_rng = master.split();

    LstmParams lstm = lstm_ckpt.lstm;
    AmsrnParams att = init_amsrn_params(lstm, cfg.mode, init_rng);
    Optimizer opt(cfg.optimizer, cfg.lr);

    TrainResult result;
    BestSnapshot best;

    auto validate_now = [&]() {
        const CorpusEval e = eval_params(lstm, &att, valid);
        return perplexity(e.total_nll, e.tokens);
    };

    auto all_params = [&]() {
        std::vector<Vector*> out = lstm_param_tensors(lstm);
        for (Vector* t : amsrn_param_tensors(att)) out.push_back(t);
        return out;
    };

    double valid_ppl = validate_now();
    best.lstm = lstm;
    best.att = att;
    best.epoch = 0;
    best.valid_ppl = valid_ppl;
    result.log.push_back(
        {0, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
         valid_ppl, valid_ppl, opt.lr()});

    std::vector<std::size_t> order(train.sentences.size());
    std::iota(order.begin(), order.end(), 0);

    std::size_t stall = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) fisher_yates(order, shuffle_rng);

        double epoch_c = 0.0, epoch_lreg = 0.0;
        for (std::size_t idx : order) {
            const EncodedSentence& s = train.sentences[idx];
            AmsrnBackwardResult r =
                amsrn_backward(lstm, att, s.inputs(), s.targets(), cfg.lambda);
            if (!std::isfinite(r.loss_ce) || !std::isfinite(r.loss_entropy)) {
                throw NumericError("non-finite training loss at sentence " +
                                   std::to_string(idx) + " (epoch " + std::to_string(epoch) +
                                   ")");
            }
            epoch_c += r.loss_ce;
            epoch_lreg += r.loss_entropy;

            std::vector<Vector*> grads = lstm_grad_tensors(r.lstm_grads);
            for (Vector* t : amsrn_grad_tensors(r.att_grads)) grads.push_back(t);
            clip_gradients(grads, cfg.clip);
            opt.step(all_params(), grads);
        }

        valid_ppl = validate_now();
        if (valid_ppl < best.valid_ppl) {
            best.lstm = lstm;
            best.att = att;
            best.epoch = epoch;
            best.valid_ppl = valid_ppl;
            stall = 0;
        } else {
            ++stall;
            opt.set_lr(opt.lr() * 0.5);
        }
        result.log.push_back({epoch, epoch_c, epoch_lreg, valid_ppl, best.valid_ppl, opt.lr()});
        if (cfg.patience > 0 && stall >= cfg.patience) break;
    }

    result.checkpoint.config = cfg;
    result.checkpoint.vocab_hash = vocab.hash();
    result.checkpoint.lstm = std::move(best.lstm);
    result.checkpoint.att = std::move(best.att);
    result.checkpoint.meta.epoch = best.epoch;
    result.checkpoint.meta.best_valid_ppl = best.valid_ppl;
    return result;
}

EvalResult evaluate(const Checkpoint& ckpt, const Vocabulary& vocab, const Corpus& corpus,
                    bool want_traces) {
    if (ckpt.vocab_hash != vocab.hash()) {
        throw ConfigError("checkpoint was built with a different vocabulary");
    }
    if (want_traces && !ckpt.has_attention()) {
        throw ConfigError("traces require an attention checkpoint");
    }

    EvalResult out;
    out.sentence_nll.reserve(corpus.sentences.size());
    out.sentence_tokens.reserve(corpus.sentences.size());
    for (const EncodedSentence& s : corpus.sentences) {
        const std::vector<int> tokens = s.inputs();
        const std::vector<int> targets = s.targets();
        double nll = 0.0;
        if (ckpt.has_attention()) {
            AmsrnEval e = amsrn_sentence_eval(ckpt.lstm, *ckpt.att, tokens, targets, want_traces);
            nll = e.nll;
            out.total_entropy += e.entropy_sum;
            out.step_count += tokens.size();
            if (want_traces) out.traces.push_back(std::move(e.trace));
        } else {
            nll = lstm_sentence_nll(ckpt.lstm, tokens, targets);
        }
        out.total_nll += nll;
        out.token_count += targets.size();
        out.sentence_nll.push_back(nll / static_cast<double>(targets.size()));
        out.sentence_tokens.push_back(targets.size());
    }
    out.ppl = perplexity(out.total_nll, out.token_count);
    return out;
}

std::vector<RankedSentence> sentence_ranking(const std::vector<double>& baseline_nll,
                                             const std::vector<double>& model_nll) {
    if (baseline_nll.size() != model_nll.size()) {
        throw ShapeError("sentence_ranking: baseline has " +
                         std::to_string(baseline_nll.size()) + " sentences, model has " +
                         std::to_string(model_nll.size()));
    }
    std::vector<RankedSentence> out(baseline_nll.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = {i, baseline_nll[i] - model_nll[i]};
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedSentence& a, const RankedSentence& b) {
        return a.improvement > b.improvement;
    });
    return out;
}

void write_metrics_tsv(const std::string& path, const std::vector<EpochMetrics>& log) {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot write metrics file " + path);
    out.precision(17);
    if (fresh) out << "epoch\ttrain_c\ttrain_lreg\tvalid_ppl\tbest_valid_ppl\tlr\n";
    for (const EpochMetrics& row : log) {
        out << row.epoch << '\t';
        if (std::isnan(row.train_c)) {
            out << "-\t-\t";
        } else {
            out << row.train_c << '\t' << row.train_lreg << '\t';
        }
        out << row.valid_ppl << '\t' << row.best_valid_ppl << '\t' << row.lr << '\n';
    }
    if (!out) throw IoError("failed writing metrics file " + path);
}

}  // namespace amsrn
