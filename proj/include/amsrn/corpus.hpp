#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amsrn/errors.hpp"

namespace amsrn {

inline constexpr int kUnkId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kBosToken = "<s>";
inline constexpr const char* kEosToken = "</s>";

// Token/id bijection with dense ids. Ids 0..2 are always the specials above;
// regular tokens follow in frequency order.
class Vocabulary {
public:
    // tokens listed in id order; must start with the three specials
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    std::size_t size() const { return id_to_token_.size(); }
    const std::string& token(int id) const;
    int id(const std::string& token) const;  // unknown tokens map to <unk>
    bool contains(const std::string& token) const;
    const std::vector<std::string>& tokens() const { return id_to_token_; }

    // FNV-1a over the id-ordered token list; checkpoints store this to refuse
    // evaluation under the wrong vocabulary.
    std::uint64_t hash() const;

    // One token per line, line number = id, specials first. Reload is
    // bit-exact.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    std::vector<std::string> id_to_token_;
    std::map<std::string, int> token_to_id_;
};

// Most-frequent tokens kept up to max_size (0 = unlimited); specials do not
// count against the budget. Ties break by first occurrence in the stream.
// Tokens seen fewer than min_count times are dropped.
Vocabulary build_vocab(const std::vector<std::string>& lines, std::size_t max_size = 0,
                       std::size_t min_count = 1);

// ids = [<s>, w_1 .. w_n, </s>]; the model reads ids[0..n] and predicts
// ids[1..n+1], so </s> is scored and <s> never is.
struct EncodedSentence {
    std::vector<int> ids;

    std::vector<int> inputs() const { return {ids.begin(), ids.end() - 1}; }
    std::vector<int> targets() const { return {ids.begin() + 1, ids.end()}; }
    std::size_t target_count() const { return ids.size() - 1; }
};

// Empty/whitespace-only lines yield nullopt (skipped, not an error).
std::optional<EncodedSentence> encode(const Vocabulary& vocab, const std::string& line);

std::vector<std::string> decode(const Vocabulary& vocab, const std::vector<int>& ids);

struct CorpusStats {
    std::size_t sentences = 0;
    std::size_t tokens = 0;  // prediction targets, </s> included
    double mean_sentence_length = 0.0;
};

struct Corpus {
    std::vector<EncodedSentence> sentences;
    std::vector<std::vector<std::string>> surfaces;  // raw tokens, for traces
    std::size_t skipped_empty = 0;

    CorpusStats stats() const;
};

std::vector<std::string> split_tokens(const std::string& line);
std::vector<std::string> read_lines(const std::string& path);
Corpus load_corpus(const std::string& path, const Vocabulary& vocab);

// exp(total_nll / token_count), nats in, perplexity out
double perplexity(double total_nll, std::size_t token_count);

}  // namespace amsrn
