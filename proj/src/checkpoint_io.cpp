#include "amsrn/checkpoint_io.hpp"

#include <fstream>

#include <json.hpp>

namespace amsrn {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const json& j, const std::string& name) {
    const std::size_t rows = j.at("rows").get<std::size_t>();
    const std::size_t cols = j.at("cols").get<std::size_t>();
    const json& data = j.at("data");
    if (data.size() != rows) {
        throw ConfigError("checkpoint matrix " + name + " has " + std::to_string(data.size()) +
                          " rows, expected " + std::to_string(rows));
    }
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const json& row = data[i];
        if (row.size() != cols) {
            throw ConfigError("checkpoint matrix " + name + " row " + std::to_string(i) +
                              " has " + std::to_string(row.size()) + " columns, expected " +
                              std::to_string(cols));
        }
        for (std::size_t jx = 0; jx < cols; ++jx) m(i, jx) = row[jx].get<double>();
    }
    return m;
}

json config_to_json(const TrainConfig& c) {
    return json{{"d", c.d},           {"lr", c.lr},
                {"optimizer", c.optimizer}, {"epochs", c.epochs},
                {"clip", c.clip},     {"lambda", c.lambda},
                {"seed", c.seed},     {"mode", to_string(c.mode)},
                {"shuffle", c.shuffle}, {"patience", c.patience}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.d = j.at("d").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.optimizer = j.at("optimizer").get<std::string>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.clip = j.at("clip").get<double>();
    c.lambda = j.at("lambda").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.mode = selection_mode_from_string(j.at("mode").get<std::string>());
    c.shuffle = j.at("shuffle").get<bool>();
    c.patience = j.at("patience").get<std::size_t>();
    return c;
}

json lstm_to_json(const LstmParams& p) {
    return json{{"d", p.d},
                {"vocab", p.vocab},
                {"embedding", matrix_to_json(p.embedding)},
                {"w_x", matrix_to_json(p.w_x)},
                {"w_h", matrix_to_json(p.w_h)},
                {"b", p.b},
                {"w_out", matrix_to_json(p.w_out)},
                {"b_out", p.b_out}};
}

LstmParams lstm_from_json(const json& j) {
    LstmParams p;
    p.d = j.at("d").get<std::size_t>();
    p.vocab = j.at("vocab").get<std::size_t>();
    p.embedding = matrix_from_json(j.at("embedding"), "embedding");
    p.w_x = matrix_from_json(j.at("w_x"), "w_x");
    p.w_h = matrix_from_json(j.at("w_h"), "w_h");
    p.b = j.at("b").get<Vector>();
    p.w_out = matrix_from_json(j.at("w_out"), "w_out");
    p.b_out = j.at("b_out").get<Vector>();
    return p;
}

json amsrn_to_json(const AmsrnParams& p) {
    json j{{"d", p.d},
           {"vocab", p.vocab},
           {"mode", to_string(p.mode)},
           {"w_kh", matrix_to_json(p.w_kh)},
           {"b_k", p.b_k},
           {"w_ph", matrix_to_json(p.w_ph)},
           {"w_pr", matrix_to_json(p.w_pr)},
           {"b_p", p.b_p}};
    // absent selection maps are omitted, not stored empty
    if (!p.w_hh1.empty()) {
        j["w_hh1"] = matrix_to_json(p.w_hh1);
        j["b_h1"] = p.b_h1;
    }
    if (!p.w_hh2.empty()) {
        j["w_hh2"] = matrix_to_json(p.w_hh2);
        j["b_h2"] = p.b_h2;
    }
    return j;
}

AmsrnParams amsrn_from_json(const json& j) {
    AmsrnParams p;
    p.d = j.at("d").get<std::size_t>();
    p.vocab = j.at("vocab").get<std::size_t>();
    p.mode = selection_mode_from_string(j.at("mode").get<std::string>());
    p.w_kh = matrix_from_json(j.at("w_kh"), "w_kh");
    p.b_k = j.at("b_k").get<Vector>();
    if (j.contains("w_hh1")) {
        p.w_hh1 = matrix_from_json(j.at("w_hh1"), "w_hh1");
        p.b_h1 = j.at("b_h1").get<Vector>();
    }
    if (j.contains("w_hh2")) {
        p.w_hh2 = matrix_from_json(j.at("w_hh2"), "w_hh2");
        p.b_h2 = j.at("b_h2").get<Vector>();
    }
    p.w_ph = matrix_from_json(j.at("w_ph"), "w_ph");
    p.w_pr = matrix_from_json(j.at("w_pr"), "w_pr");
    p.b_p = j.at("b_p").get<Vector>();
    return p;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json j{{"format_version", kCheckpointFormatVersion},
           {"config", config_to_json(ckpt.config)},
           {"vocab_hash", ckpt.vocab_hash},
           {"meta", json{{"epoch", ckpt.meta.epoch},
                         {"best_valid_ppl", ckpt.meta.best_valid_ppl}}},
           {"lstm", lstm_to_json(ckpt.lstm)}};
    if (ckpt.att) j["amsrn"] = amsrn_to_json(*ckpt.att);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint file " + path);
    out << j.dump(1, '\t') << '\n';
    if (!out) throw IoError("failed writing checkpoint file " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read checkpoint file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed checkpoint " + path + ": " + e.what());
    }

    try {
        const int version = j.at("format_version").get<int>();
        if (version != kCheckpointFormatVersion) {
            throw ConfigError("unsupported checkpoint format version " +
                              std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointFormatVersion) + ")");
        }
        Checkpoint ckpt;
        ckpt.config = config_from_json(j.at("config"));
        ckpt.vocab_hash = j.at("vocab_hash").get<std::uint64_t>();
        ckpt.meta.epoch = j.at("meta").at("epoch").get<std::size_t>();
        ckpt.meta.best_valid_ppl = j.at("meta").at("best_valid_ppl").get<double>();
        ckpt.lstm = lstm_from_json(j.at("lstm"));
        if (j.contains("amsrn")) ckpt.att = amsrn_from_json(j.at("amsrn"));
        return ckpt;
    } catch (const json::exception& e) {
        throw ConfigError("malformed checkpoint " + path + ": " + e.what());
    }
}

}  // namespace amsrn
