#include "amsrn/trace_io.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "amsrn/corpus.hpp"

namespace amsrn {

namespace {

double mean(const Vector& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string trace_record_json(const std::vector<std::string>& surface,
                              const AttentionTrace& trace, bool verbose) {
    nlohmann::json steps = nlohmann::json::array();
    for (const TraceStep& s : trace.steps) {
        nlohmann::json step{{"position", s.position},
                            {"alpha", s.alpha},
                            {"entropy", s.entropy},
                            {"w1_mean", mean(s.w1)},
                            {"w2_mean", mean(s.w2)}};
        if (verbose) {
            step["w1"] = s.w1;
            step["w2"] = s.w2;
        }
        steps.push_back(std::move(step));
    }
    const nlohmann::json record{{"schema_version", kTraceSchemaVersion},
                                {"tokens", surface},
                                {"steps", std::move(steps)}};
    return record.dump();
}

bool highlighted(double alpha, std::size_t bank_size, std::optional<double> threshold) {
    if (threshold.has_value()) return alpha > *threshold;
    if (bank_size <= 1) return true;  // forced alpha = 1
    return alpha > 2.0 / static_cast<double>(bank_size);
}

std::string bank_label(const std::vector<std::string>& surface, std::size_t bank_index) {
    if (bank_index <= 1) return kBosToken;
    if (bank_index - 2 < surface.size()) return surface[bank_index - 2];
    throw ShapeError("bank index " + std::to_string(bank_index) +
                     " out of range for a sentence of " + std::to_string(surface.size()) +
                     " tokens");
}

std::string target_label(const std::vector<std::string>& surface, std::size_t position) {
    if (position == 0 || position > surface.size() + 1) {
        throw ShapeError("prediction step " + std::to_string(position) +
                         " out of range for a sentence of " + std::to_string(surface.size()) +
                         " tokens");
    }
    return position <= surface.size() ? surface[position - 1] : kEosToken;
}

std::string render_trace_text(const std::vector<std::string>& surface,
                              const AttentionTrace& trace, std::optional<double> threshold) {
    std::ostringstream out;
    out << "sentence:";
    for (const std::string& tok : surface) out << ' ' << tok;
    out << '\n';

    char buf[32];
    for (const TraceStep& step : trace.steps) {
        out << "  t=" << step.position << " predict " << target_label(surface, step.position)
            << " |";
        for (std::size_t i = 0; i < step.alpha.size(); ++i) {
            const bool mark = highlighted(step.alpha[i], step.alpha.size(), threshold);
            std::snprintf(buf, sizeof buf, "(%.3f)", step.alpha[i]);
            out << ' ';
            if (mark) out << '*';
            out << bank_label(surface, i);
            if (mark) out << '*';
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace amsrn
