#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bifold/errors.hpp"
#include "bifold/profiles.hpp"
#include "bifold/types.hpp"

namespace bifold {

// Row labels are the true classes, column labels the predicted ones. The
// two label sets may differ: a cascade that can reject an instance outright
// produces predictions outside the true-class set, giving a rectangular
// matrix. A cell counts as correct when its row and column labels match.
class ConfusionMatrix {
public:
    ConfusionMatrix(std::vector<std::string> row_labels, std::vector<std::string> col_labels)
        : row_labels_(std::move(row_labels)), col_labels_(std::move(col_labels)),
          counts_(row_labels_.size() * col_labels_.size(), 0) {
        if (row_labels_.empty() || col_labels_.empty())
            throw Error(ErrorCode::ShapeMismatch, "confusion matrix needs at least one row and column");
    }

    static ConfusionMatrix from_pairs(std::vector<std::string> row_labels,
                                      std::vector<std::string> col_labels,
                                      std::span<const std::pair<std::size_t, std::size_t>> pairs) {
        ConfusionMatrix m(std::move(row_labels), std::move(col_labels));
        for (auto [row, col] : pairs) m.add(row, col);
        return m;
    }

    static ConfusionMatrix from_counts(std::vector<std::string> row_labels,
                                       std::vector<std::string> col_labels,
                                       std::span<const std::uint64_t> counts) {
        ConfusionMatrix m(std::move(row_labels), std::move(col_labels));
        if (counts.size() != m.counts_.size())
            throw Error(ErrorCode::ShapeMismatch,
                        std::to_string(counts.size()) + " counts for a " +
                            std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " matrix");
        for (std::size_t i = 0; i < counts.size(); ++i) m.counts_[i] = counts[i];
        return m;
    }

    void add(std::size_t row, std::size_t col, std::uint64_t n = 1) {
        if (row >= rows() || col >= cols())
            throw Error(ErrorCode::ShapeMismatch,
                        "cell (" + std::to_string(row) + "," + std::to_string(col) +
                            ") outside a " + std::to_string(rows()) + "x" + std::to_string(cols()) +
                            " matrix");
        counts_[row * cols() + col] += n;
    }

    std::uint64_t at(std::size_t row, std::size_t col) const {
        if (row >= rows() || col >= cols())
            throw Error(ErrorCode::ShapeMismatch,
                        "cell (" + std::to_string(row) + "," + std::to_string(col) +
                            ") outside a " + std::to_string(rows()) + "x" + std::to_string(cols()) +
                            " matrix");
        return counts_[row * cols() + col];
    }

    std::size_t rows() const noexcept { return row_labels_.size(); }
    std::size_t cols() const noexcept { return col_labels_.size(); }
    const std::vector<std::string>& row_labels() const noexcept { return row_labels_; }
    const std::vector<std::string>& col_labels() const noexcept { return col_labels_; }

    std::uint64_t row_total(std::size_t row) const {
        std::uint64_t sum = 0;
        for (std::size_t c = 0; c < cols(); ++c) sum += at(row, c);
        return sum;
    }

    std::uint64_t col_total(std::size_t col) const {
        std::uint64_t sum = 0;
        for (std::size_t r = 0; r < rows(); ++r) sum += at(r, col);
        return sum;
    }

    std::uint64_t total() const noexcept {
        std::uint64_t sum = 0;
        for (std::uint64_t n : counts_) sum += n;
        return sum;
    }

    std::uint64_t correct() const {
        std::uint64_t sum = 0;
        for (std::size_t r = 0; r < rows(); ++r)
            for (std::size_t c = 0; c < cols(); ++c)
                if (row_labels_[r] == col_labels_[c]) sum += at(r, c);
        return sum;
    }

private:
    std::vector<std::string> row_labels_;
    std::vector<std::string> col_labels_;
    std::vector<std::uint64_t> counts_; // row-major
};

inline double accuracy(std::uint64_t correct, std::uint64_t total) {
    if (total == 0)
        throw Error(ErrorCode::EmptyEvaluation, "no instances to evaluate");
    return static_cast<double>(correct) / static_cast<double>(total);
}

/// Accuracy as a percent string with two decimals, rounded half up in exact
/// integer arithmetic so that e.g. 1408/1416 prints "99.44".
inline std::string format_percent(std::uint64_t correct, std::uint64_t total) {
    if (total == 0)
        throw Error(ErrorCode::EmptyEvaluation, "no instances to evaluate");
    std::uint64_t hundredths = (20000 * correct + total) / (2 * total);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%llu.%02llu",
                  static_cast<unsigned long long>(hundredths / 100),
                  static_cast<unsigned long long>(hundredths % 100));
    return buf;
}

struct ClassMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

/// Precision, recall and F1 for every row label. A class absent from the
/// predictions gets precision 0, one absent from the truth gets recall 0,
/// and F1 is 0 whenever precision + recall is.
inline std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& m) {
    std::vector<ClassMetrics> out;
    out.reserve(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const std::string& label = m.row_labels()[r];
        std::size_t col = m.cols();
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (m.col_labels()[c] == label) { col = c; break; }
        if (col == m.cols())
            throw Error(ErrorCode::ShapeMismatch, "no prediction column for class '" + label + "'");
        ClassMetrics cm;
        cm.label = label;
        cm.support = m.row_total(r);
        std::uint64_t hit = m.at(r, col);
        std::uint64_t col_total = m.col_total(col);
        cm.precision = col_total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(col_total);
        cm.recall = cm.support == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(cm.support);
        cm.f1 = (cm.precision + cm.recall) == 0.0
                    ? 0.0
                    : 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall);
        out.push_back(std::move(cm));
    }
    return out;
}

struct EvaluationReport {
    ConfusionMatrix confusion;
    std::uint64_t correct = 0;
    std::uint64_t total = 0;
    double accuracy = 0.0;
    std::string accuracy_percent;
    std::vector<ClassMetrics> per_class;
    double macro_f1 = 0.0;
    std::uint64_t tie_count = 0;
};

inline EvaluationReport make_report(ConfusionMatrix confusion, std::uint64_t tie_count = 0) {
    std::uint64_t correct_count = confusion.correct();
    std::uint64_t total_count = confusion.total();
    std::vector<ClassMetrics> per_class = per_class_metrics(confusion);
    double f1_sum = 0.0;
    for (const ClassMetrics& cm : per_class) f1_sum += cm.f1;
    double macro_f1 = f1_sum / static_cast<double>(per_class.size());
    return EvaluationReport{std::move(confusion),
                            correct_count,
                            total_count,
                            accuracy(correct_count, total_count),
                            format_percent(correct_count, total_count),
                            std::move(per_class),
                            macro_f1,
                            tie_count};
}

/// One model's labelled validation outcomes: (true class, predicted class)
/// index pairs over the stage's class set.
struct ValidationOutcomes {
    std::string model_id;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

/// Scores each model on its own validation outcomes and packages the
/// per-class F1 values as profiles, ready for F1-proportional weighting.
inline std::vector<ModelProfile> profiles_from_validation(std::span<const ValidationOutcomes> outcomes,
                                                          Stage stage) {
    if (outcomes.empty())
        throw Error(ErrorCode::InvalidProfile, "no validation outcomes supplied");
    std::span<const std::string_view> labels = stage_labels(stage);
    std::vector<std::string> label_names(labels.begin(), labels.end());
    std::vector<ModelProfile> profiles;
    profiles.reserve(outcomes.size());
    for (const ValidationOutcomes& vo : outcomes) {
        if (vo.pairs.empty())
            throw Error(ErrorCode::EmptyEvaluation,
                        "model '" + vo.model_id + "' has no validation outcomes");
        ConfusionMatrix m = ConfusionMatrix::from_pairs(label_names, label_names, vo.pairs);
        std::vector<double> per_class;
        for (const ClassMetrics& cm : per_class_metrics(m)) per_class.push_back(cm.f1);
        profiles.push_back(ModelProfile::from_per_class(vo.model_id, stage, std::move(per_class)));
    }
    return profiles;
}

/// Joint evaluation of cascade outcomes. The detection report covers every
/// instance as tumor vs notumor. The classification report covers only the
/// instances whose true label is a tumor subtype; its prediction columns
/// include notumor because a missed detection ends the cascade early.
struct OutcomeEvaluation {
    EvaluationReport detection;
    std::optional<EvaluationReport> classification;
};

inline OutcomeEvaluation evaluate_outcomes(std::span<const OutcomeRecord> outcomes,
                                           std::span<const GroundTruth> truth) {
    if (outcomes.empty())
        throw Error(ErrorCode::EmptyEvaluation, "no outcomes to evaluate");
    std::map<std::string, FinalLabel> truth_by_id;
    for (const GroundTruth& gt : truth)
        if (!truth_by_id.emplace(gt.instance_id, gt.label).second)
            throw Error(ErrorCode::DuplicateRecord, "instance '" + gt.instance_id + "' labelled twice");
    if (truth_by_id.size() != outcomes.size())
        throw Error(ErrorCode::InstanceMismatch,
                    std::to_string(outcomes.size()) + " outcomes vs " +
                        std::to_string(truth_by_id.size()) + " ground-truth labels");

    std::span<const std::string_view> det_labels = stage_labels(Stage::detection);
    std::vector<std::string> det_names(det_labels.begin(), det_labels.end());
    ConfusionMatrix detection(det_names, det_names);

    std::span<const std::string_view> cls_labels = stage_labels(Stage::classification);
    std::vector<std::string> cls_rows(cls_labels.begin(), cls_labels.end());
    std::vector<std::string> cls_cols = cls_rows;
    cls_cols.emplace_back(to_string(FinalLabel::notumor));
    ConfusionMatrix classification(cls_rows, cls_cols);

    std::map<std::string, bool> seen;
    std::uint64_t detection_ties = 0;
    std::uint64_t classification_ties = 0;
    bool any_subtype_truth = false;
    for (const OutcomeRecord& rec : outcomes) {
        if (!seen.emplace(rec.instance_id, true).second)
            throw Error(ErrorCode::DuplicateRecord,
                        "instance '" + rec.instance_id + "' has two outcomes");
        auto it = truth_by_id.find(rec.instance_id);
        if (it == truth_by_id.end())
            throw Error(ErrorCode::InstanceMismatch,
                        "no ground truth for instance '" + rec.instance_id + "'");
        if (rec.detection_class != 0 && rec.detection_class != 1)
            throw Error(ErrorCode::UnknownLabel,
                        "detection class " + std::to_string(rec.detection_class) +
                            " is not a detection label");
        FinalLabel true_label = it->second;
        std::size_t true_det = is_tumor(true_label) ? 0 : 1;
        detection.add(true_det, static_cast<std::size_t>(rec.detection_class));
        if (rec.tie_broken) ++detection_ties;
        if (is_tumor(true_label)) {
            any_subtype_truth = true;
            classification.add(static_cast<std::size_t>(true_label),
                               static_cast<std::size_t>(rec.final_label));
            if (rec.tie_broken) ++classification_ties;
        }
    }

    OutcomeEvaluation eval{make_report(std::move(detection), detection_ties), std::nullopt};
    if (any_subtype_truth)
        eval.classification = make_report(std::move(classification), classification_ties);
    return eval;
}

} // namespace bifold
