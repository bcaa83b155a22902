// amsrn: vocabulary building, two-phase training, evaluation, ablation,
// and attention-trace export for the library in src/.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amsrn/checkpoint_io.hpp"
#include "amsrn/corpus.hpp"
#include "amsrn/trace_io.hpp"
#include "amsrn/training.hpp"

namespace {

using namespace amsrn;

// flag-level mistakes discovered after parsing (still exit code 2)
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonTrainFlags {
    std::string train_path;
    std::string valid_path;
    std::string vocab_path;
    std::string out_path;
    TrainConfig cfg;
    bool no_shuffle = false;
};

void add_train_flags(CLI::App* sub, CommonTrainFlags& f, bool with_d) {
    sub->add_option("--train", f.train_path, "training corpus, one sentence per line")
        ->required();
    sub->add_option("--valid", f.valid_path, "validation corpus")->required();
    sub->add_option("--vocab", f.vocab_path, "vocabulary file")->required();
    sub->add_option("--out", f.out_path, "checkpoint output path")->required();
    if (with_d) sub->add_option("--d", f.cfg.d, "hidden size")->check(CLI::PositiveNumber);
    sub->add_option("--seed", f.cfg.seed, "rng seed");
    sub->add_option("--epochs", f.cfg.epochs, "training epochs");
    sub->add_option("--lr", f.cfg.lr, "learning rate")->check(CLI::PositiveNumber);
    sub->add_option("--clip", f.cfg.clip, "gradient-norm clip")->check(CLI::PositiveNumber);
    sub->add_option("--optimizer", f.cfg.optimizer, "sgd or adam")
        ->check(CLI::IsMember({"sgd", "adam"}));
    sub->add_option("--patience", f.cfg.patience,
                    "stop after this many non-improving epochs (0 = off)");
    sub->add_flag("--no-shuffle", f.no_shuffle, "keep corpus order every epoch");
}

Vocabulary load_vocab(const std::string& path) { return Vocabulary::load(path); }

void print_log(const std::vector<EpochMetrics>& log) {
    for (const EpochMetrics& m : log) {
        std::cout << "epoch " << m.epoch;
        if (std::isnan(m.train_c)) {
            std::cout << " (init)";
        } else {
            std::cout << " train_c " << m.train_c << " train_lreg " << m.train_lreg;
        }
        std::cout << " valid_ppl " << m.valid_ppl << " best " << m.best_valid_ppl << " lr "
                  << m.lr << "\n";
    }
}

void finish_training(const TrainResult& r, const std::string& out_path) {
    save_checkpoint(r.checkpoint, out_path);
    write_metrics_tsv(out_path + ".metrics.tsv", r.log);
    print_log(r.log);
    std::cout << "best valid_ppl " << r.checkpoint.meta.best_valid_ppl << " (epoch "
              << r.checkpoint.meta.epoch << ") -> " << out_path << "\n";
}

int run_build_vocab(const std::string& train_path, const std::string& out_path,
                    std::size_t max_size, std::size_t min_count) {
    const Vocabulary vocab = build_vocab(read_lines(train_path), max_size, min_count);
    vocab.save(out_path);
    std::cout << "vocab size " << vocab.size() << " -> " << out_path << "\n";
    return 0;
}

int run_train_lstm(const CommonTrainFlags& f) {
    TrainConfig cfg = f.cfg;
    cfg.shuffle = !f.no_shuffle;
    const Vocabulary vocab = load_vocab(f.vocab_path);
    const Corpus train = load_corpus(f.train_path, vocab);
    const Corpus valid = load_corpus(f.valid_path, vocab);
    finish_training(train_lstm(cfg, vocab, train, valid), f.out_path);
    return 0;
}

int run_train_amsrn(const CommonTrainFlags& f, const std::string& init_lstm,
                    const std::string& mode, double lambda) {
    TrainConfig cfg = f.cfg;
    cfg.shuffle = !f.no_shuffle;
    cfg.mode = selection_mode_from_string(mode);
    cfg.lambda = lambda;
    const Vocabulary vocab = load_vocab(f.vocab_path);
    const Corpus train = load_corpus(f.train_path, vocab);
    const Corpus valid = load_corpus(f.valid_path, vocab);
    const Checkpoint init = load_checkpoint(init_lstm);
    cfg.d = init.config.d;  // the pretrained model fixes the width
    finish_training(train_amsrn(cfg, init, vocab, train, valid), f.out_path);
    return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& test_path,
             const std::string& vocab_path) {
    const Vocabulary vocab = load_vocab(vocab_path);
    const Corpus test = load_corpus(test_path, vocab);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const EvalResult e = evaluate(ckpt, vocab, test);
    std::cout << std::setprecision(17);
    std::cout << "sentences " << test.sentences.size() << "\n"
              << "tokens " << e.token_count << "\n"
              << "nll " << e.total_nll << "\n"
              << "ppl " << e.ppl << "\n";
    return 0;
}

int run_trace(const std::string& ckpt_path, const std::string& test_path,
              const std::string& vocab_path, const std::string& out_path,
              std::optional<double> threshold, bool verbose) {
    const Vocabulary vocab = load_vocab(vocab_path);
    const Corpus test = load_corpus(test_path, vocab);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (!ckpt.has_attention())
        throw UsageError("no attention head: " + ckpt_path +
                         " is an LSTM-only checkpoint; trace needs an amsrn model");

    const EvalResult e = evaluate(ckpt, vocab, test, true);
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot open trace output " + out_path);
    for (std::size_t i = 0; i < e.traces.size(); ++i) {
        out << trace_record_json(test.surfaces[i], e.traces[i], verbose) << "\n";
        std::cout << render_trace_text(test.surfaces[i], e.traces[i], threshold) << "\n";
    }
    if (!out.flush()) throw IoError("failed writing trace output " + out_path);
    std::cout << "ppl " << std::setprecision(17) << e.ppl << "\n"
              << "traces -> " << out_path << "\n";
    return 0;
}

int run_ablate(const CommonTrainFlags& f, const std::string& test_path,
               const std::string& init_lstm, double lambda, const std::string& out_prefix) {
    TrainConfig cfg = f.cfg;
    cfg.shuffle = !f.no_shuffle;
    cfg.lambda = lambda;
    const Vocabulary vocab = load_vocab(f.vocab_path);
    const Corpus train = load_corpus(f.train_path, vocab);
    const Corpus valid = load_corpus(f.valid_path, vocab);
    const Corpus test = load_corpus(test_path, vocab);
    const Checkpoint init = load_checkpoint(init_lstm);
    cfg.d = init.config.d;

    std::ostringstream table;
    table << std::setprecision(17);
    table << "mode\tinit_valid_ppl\tbest_valid_ppl\ttest_ppl\n";
    for (SelectionMode mode : {SelectionMode::kIndependent, SelectionMode::kTied,
                               SelectionMode::kComplement}) {
        TrainConfig mcfg = cfg;
        mcfg.mode = mode;
        const TrainResult r = train_amsrn(mcfg, init, vocab, train, valid);
        const EvalResult e = evaluate(r.checkpoint, vocab, test);
        table << to_string(mode) << '\t' << r.log.front().valid_ppl << '\t'
              << r.checkpoint.meta.best_valid_ppl << '\t' << e.ppl << "\n";
        if (!out_prefix.empty())
            save_checkpoint(r.checkpoint, out_prefix + "." + to_string(mode) + ".json");
    }
    std::cout << table.str();
    if (!out_prefix.empty()) {
        const std::string path = out_prefix + ".table.tsv";
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path);
        out << table.str();
    }
    return 0;
}

int run_rank(const std::string& baseline_path, const std::string& model_path,
             const std::string& test_path, const std::string& vocab_path, std::size_t top) {
    const Vocabulary vocab = load_vocab(vocab_path);
    const Corpus test = load_corpus(test_path, vocab);
    const EvalResult base = evaluate(load_checkpoint(baseline_path), vocab, test);
    const EvalResult model = evaluate(load_checkpoint(model_path), vocab, test);
    const auto ranked = sentence_ranking(base.sentence_nll, model.sentence_nll);

    std::cout << std::setprecision(6);
    std::cout << "improvement\tindex\tsentence\n";
    const std::size_t n = std::min<std::size_t>(top == 0 ? ranked.size() : top, ranked.size());
    for (std::size_t i = 0; i < n; ++i) {
        const RankedSentence& s = ranked[i];
        std::cout << s.improvement << '\t' << s.index << '\t';
        const auto& words = test.surfaces[s.index];
        for (std::size_t w = 0; w < words.size(); ++w)
            std::cout << (w ? " " : "") << words[w];
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attention-based memory selection language model"};
    app.require_subcommand(1);

    // build-vocab
    std::string bv_train, bv_out;
    std::size_t bv_max = 0, bv_min = 1;
    CLI::App* bv = app.add_subcommand("build-vocab", "build a vocabulary from a corpus");
    bv->add_option("--train", bv_train, "training corpus")->required();
    bv->add_option("--out", bv_out, "vocabulary output path")->required();
    bv->add_option("--max-size", bv_max, "cap vocabulary size (0 = unlimited)");
    bv->add_option("--min-count", bv_min, "drop tokens below this count");
    bv->callback([&] { run_build_vocab(bv_train, bv_out, bv_max, bv_min); });

    // train-lstm
    CommonTrainFlags lf;
    CLI::App* tl = app.add_subcommand("train-lstm", "pretrain the LSTM language model");
    add_train_flags(tl, lf, true);
    tl->callback([&] { run_train_lstm(lf); });

    // train-amsrn
    CommonTrainFlags af;
    std::string am_init, am_mode = "tied";
    double am_lambda = 0.0;
    CLI::App* ta = app.add_subcommand("train-amsrn",
                                      "fine-tune attention on a pretrained LSTM");
    add_train_flags(ta, af, false);
    ta->add_option("--init-lstm", am_init, "pretrained LSTM checkpoint")->required();
    ta->add_option("--mode", am_mode, "memory selection mode")
        ->check(CLI::IsMember({"independent", "tied", "complement", "none"}));
    ta->add_option("--lambda", am_lambda, "entropy regularizer weight")
        ->check(CLI::NonNegativeNumber);
    ta->callback([&] { run_train_amsrn(af, am_init, am_mode, am_lambda); });

    // eval
    std::string ev_ckpt, ev_test, ev_vocab;
    CLI::App* ev = app.add_subcommand("eval", "perplexity on a test corpus");
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--test", ev_test, "test corpus")->required();
    ev->add_option("--vocab", ev_vocab, "vocabulary file")->required();
    ev->callback([&] { run_eval(ev_ckpt, ev_test, ev_vocab); });

    // trace
    std::string tr_ckpt, tr_test, tr_vocab, tr_out;
    double tr_threshold = 0.0;
    bool tr_verbose = false;
    CLI::App* tr = app.add_subcommand("trace", "export attention traces (jsonl + text)");
    tr->add_option("--checkpoint", tr_ckpt, "amsrn checkpoint")->required();
    tr->add_option("--test", tr_test, "corpus to trace")->required();
    tr->add_option("--vocab", tr_vocab, "vocabulary file")->required();
    tr->add_option("--out", tr_out, "jsonl output path")->required();
    CLI::Option* thr = tr->add_option("--threshold", tr_threshold,
                                      "highlight alphas above this (default: 2/t)");
    tr->add_flag("--verbose-trace", tr_verbose, "include full selection vectors");
    tr->callback([&] {
        const std::optional<double> threshold =
            thr->count() ? std::optional<double>(tr_threshold) : std::nullopt;
        run_trace(tr_ckpt, tr_test, tr_vocab, tr_out, threshold, tr_verbose);
    });

    // ablate
    CommonTrainFlags abf;
    std::string ab_test, ab_init, ab_prefix;
    double ab_lambda = 0.0;
    CLI::App* ab = app.add_subcommand(
        "ablate", "train all three selection modes from one pretrained LSTM");
    add_train_flags(ab, abf, false);
    ab->get_option("--out")->required(false);  // table goes to stdout; prefix optional
    ab->get_option("--out")->description("checkpoint/table output prefix");
    ab->add_option("--test", ab_test, "test corpus")->required();
    ab->add_option("--init-lstm", ab_init, "pretrained LSTM checkpoint")->required();
    ab->add_option("--lambda", ab_lambda, "entropy regularizer weight")
        ->check(CLI::NonNegativeNumber);
    ab->callback([&] { run_ablate(abf, ab_test, ab_init, ab_lambda, abf.out_path); });

    // rank-improvements
    std::string rk_base, rk_model, rk_test, rk_vocab;
    std::size_t rk_top = 10;
    CLI::App* rk = app.add_subcommand("rank-improvements",
                                      "sentences ordered by per-token NLL improvement");
    rk->add_option("--baseline", rk_base, "baseline checkpoint")->required();
    rk->add_option("--model", rk_model, "improved checkpoint")->required();
    rk->add_option("--test", rk_test, "test corpus")->required();
    rk->add_option("--vocab", rk_vocab, "vocabulary file")->required();
    rk->add_option("--top", rk_top, "rows to print (0 = all)");
    rk->callback([&] { run_rank(rk_base, rk_model, rk_test, rk_vocab, rk_top); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // help/version are success; bad flags are usage errors
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
