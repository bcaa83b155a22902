#include "amsrn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace amsrn {

namespace {

bool is_special(const std::string& tok) {
    return tok == kUnkToken || tok == kBosToken || tok == kEosToken;
}

}  // namespace

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 3 || tokens[0] != kUnkToken || tokens[1] != kBosToken ||
        tokens[2] != kEosToken) {
        throw ConfigError("vocabulary must start with <unk>, <s>, </s>");
    }
    Vocabulary v;
    v.id_to_token_ = std::move(tokens);
    for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
        const auto [it, inserted] =
            v.token_to_id_.emplace(v.id_to_token_[i], static_cast<int>(i));
        if (!inserted) {
            throw ConfigError("duplicate vocabulary token '" + v.id_to_token_[i] + "'");
        }
    }
    return v;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        throw VocabError("token id " + std::to_string(id) + " out of range [0, " +
                         std::to_string(id_to_token_.size()) + ")");
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

int Vocabulary::id(const std::string& token) const {
    const auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
    return token_to_id_.count(token) != 0;
}

std::uint64_t Vocabulary::hash() const {
    // FNV-1a, token bytes separated by '\n'
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 0x100000001b3ULL;
    };
    for (const std::string& tok : id_to_token_) {
        for (char c : tok) mix(static_cast<unsigned char>(c));
        mix('\n');
    }
    return h;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vocabulary file " + path);
    for (const std::string& tok : id_to_token_) out << tok << '\n';
    if (!out) throw IoError("failed writing vocabulary file " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read vocabulary file " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    if (tokens.size() < 3) throw ConfigError("vocabulary file " + path + " is truncated");
    return from_tokens(std::move(tokens));
}

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(std::move(tok));
    return out;
}

Vocabulary build_vocab(const std::vector<std::string>& lines, std::size_t max_size,
                       std::size_t min_count) {
    struct Entry {
        std::size_t count = 0;
        std::size_t first_seen = 0;
    };
    std::unordered_map<std::string, Entry> counts;
    std::size_t position = 0;
    bool any_token = false;
    for (const std::string& line : lines) {
        for (std::string& tok : split_tokens(line)) {
            any_token = true;
            if (is_special(tok)) continue;  // specials are always present anyway
            auto [it, inserted] = counts.emplace(std::move(tok), Entry{0, position});
            it->second.count += 1;
            ++position;
        }
    }
    if (!any_token) throw IoError("empty corpus: no tokens found");

    std::vector<std::pair<std::string, Entry>> ranked(counts.begin(), counts.end());
    // total order: frequency desc, then first occurrence asc
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.count != b.second.count) return a.second.count > b.second.count;
        return a.second.first_seen < b.second.first_seen;
    });

    std::vector<std::string> tokens = {kUnkToken, kBosToken, kEosToken};
    for (const auto& [tok, entry] : ranked) {
        if (entry.count < min_count) break;  // ranked by count, nothing later qualifies
        tokens.push_back(tok);
        if (max_size != 0 && tokens.size() - 3 >= max_size) break;
    }
    return Vocabulary::from_tokens(std::move(tokens));
}

std::optional<EncodedSentence> encode(const Vocabulary& vocab, const std::string& line) {
    const std::vector<std::string> toks = split_tokens(line);
    if (toks.empty()) return std::nullopt;
    EncodedSentence s;
    s.ids.reserve(toks.size() + 2);
    s.ids.push_back(kBosId);
    for (const std::string& tok : toks) s.ids.push_back(vocab.id(tok));
    s.ids.push_back(kEosId);
    return s;
}

std::vector<std::string> decode(const Vocabulary& vocab, const std::vector<int>& ids) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(vocab.token(id));
    return out;
}

CorpusStats Corpus::stats() const {
    CorpusStats st;
    st.sentences = sentences.size();
    for (const EncodedSentence& s : sentences) st.tokens += s.target_count();
    if (st.sentences > 0) {
        st.mean_sentence_length =
            static_cast<double>(st.tokens) / static_cast<double>(st.sentences);
    }
    return st;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read file " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

Corpus load_corpus(const std::string& path, const Vocabulary& vocab) {
    Corpus corpus;
    for (const std::string& line : read_lines(path)) {
        std::optional<EncodedSentence> enc = encode(vocab, line);
        if (!enc) {
            ++corpus.skipped_empty;
            continue;
        }
        corpus.sentences.push_back(std::move(*enc));
        corpus.surfaces.push_back(split_tokens(line));
    }
    if (corpus.sentences.empty()) throw IoError("empty corpus: " + path);
    return corpus;
}

double perplexity(double total_nll, std::size_t token_count) {
    if (token_count == 0) throw DomainError("perplexity: token count must be positive");
    return std::exp(total_nll / static_cast<double>(token_count));
}

}  // namespace amsrn
