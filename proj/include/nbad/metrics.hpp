#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nbad/error.hpp"

namespace nbad {

// KxK count table, rows = true class, columns = predicted class.
struct ConfusionMatrix {
    std::size_t k = 5;
    std::vector<std::uint64_t> counts;  // row-major

    explicit ConfusionMatrix(std::size_t classes = 5) : k(classes), counts(classes * classes, 0) {}

    std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * k + pred]; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    std::uint64_t trace() const {
        std::uint64_t t = 0;
        for (std::size_t i = 0; i < k; ++i) t += at(i, i);
        return t;
    }
};

inline ConfusionMatrix confusion_from_pairs(const std::vector<std::pair<int, int>>& pairs,
                                            std::size_t k = 5) {
    ConfusionMatrix cm(k);
    for (const auto& [truth, pred] : pairs) {
        require(truth >= 0 && static_cast<std::size_t>(truth) < k && pred >= 0 &&
                    static_cast<std::size_t>(pred) < k,
                "ClassOutOfRange", "pair (" + std::to_string(truth) + "," + std::to_string(pred) + ")");
        ++cm.at(static_cast<std::size_t>(truth), static_cast<std::size_t>(pred));
    }
    return cm;
}

inline double accuracy_of(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    require(total > 0, "EmptyMatrix", "confusion matrix has no counts");
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

struct PerClassStats {
    std::uint64_t tp = 0, fn = 0, fp = 0, tn = 0;

    bool has_sens() const { return tp + fn > 0; }
    bool has_spec() const { return tn + fp > 0; }
    double sens() const { return static_cast<double>(tp) / static_cast<double>(tp + fn); }
    double spec() const { return static_cast<double>(tn) / static_cast<double>(tn + fp); }
};

inline std::vector<PerClassStats> per_class_stats(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    std::vector<PerClassStats> out(cm.k);
    for (std::size_t c = 0; c < cm.k; ++c) {
        std::uint64_t row = 0, col = 0;
        for (std::size_t j = 0; j < cm.k; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        out[c].tp = cm.at(c, c);
        out[c].fn = row - out[c].tp;
        out[c].fp = col - out[c].tp;
        out[c].tn = total - row - col + out[c].tp;
    }
    return out;
}

// Macro-averaged one-vs-rest sensitivity and specificity. Classes whose
// denominator is zero are excluded from the mean.
inline std::pair<double, double> macro_sens_spec(const ConfusionMatrix& cm) {
    require(cm.total() > 0, "EmptyMatrix", "confusion matrix has no counts");
    double sens_sum = 0, spec_sum = 0;
    std::size_t sens_n = 0, spec_n = 0;
    for (const auto& s : per_class_stats(cm)) {
        if (s.has_sens()) {
            sens_sum += s.sens();
            ++sens_n;
        }
        if (s.has_spec()) {
            spec_sum += s.spec();
            ++spec_n;
        }
    }
    return {sens_n ? sens_sum / static_cast<double>(sens_n) : 0.0,
            spec_n ? spec_sum / static_cast<double>(spec_n) : 0.0};
}

// Evaluation report. Aggregation is macro one-vs-rest; per-class values are
// included so other conventions can be recomputed.
inline nlohmann::json metrics_report(const ConfusionMatrix& cm) {
    const auto [sens, spec] = macro_sens_spec(cm);
    nlohmann::json confusion = nlohmann::json::array();
    for (std::size_t r = 0; r < cm.k; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < cm.k; ++c) row.push_back(cm.at(r, c));
        confusion.push_back(std::move(row));
    }
    nlohmann::json per_class = nlohmann::json::array();
    for (const auto& s : per_class_stats(cm))
        per_class.push_back({{"sensitivity", s.has_sens() ? s.sens() : 0.0},
                             {"specificity", s.has_spec() ? s.spec() : 0.0}});
    return {{"accuracy", accuracy_of(cm)},   {"sensitivity_macro", sens},
            {"specificity_macro", spec},     {"confusion", confusion},
            {"per_class", per_class},        {"n_samples", cm.total()}};
}

} // namespace nbad
