#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bifold/errors.hpp"

namespace bifold {

// The cascade has two stages: a binary tumor/no-tumor detector gating a
// three-way subtype classifier. Class orders are fixed:
//   detection       tumor = 0, notumor = 1
//   classification  glioma = 0, meningioma = 1, pituitary = 2
enum class Stage { detection, classification };

constexpr std::size_t class_count(Stage stage) {
    return stage == Stage::detection ? 2 : 3;
}

constexpr std::string_view to_string(Stage stage) {
    return stage == Stage::detection ? "detection" : "classification";
}

inline Stage parse_stage(std::string_view text) {
    if (text == "detection") return Stage::detection;
    if (text == "classification") return Stage::classification;
    throw Error(ErrorCode::InvalidSpec, "unknown stage '" + std::string(text) + "'");
}

inline std::span<const std::string_view> stage_labels(Stage stage) {
    static constexpr std::array<std::string_view, 2> det{"tumor", "notumor"};
    static constexpr std::array<std::string_view, 3> cls{"glioma", "meningioma", "pituitary"};
    if (stage == Stage::detection) return {det.data(), det.size()};
    return {cls.data(), cls.size()};
}

// Final four-way outcome of the cascade.
enum class FinalLabel { glioma, meningioma, pituitary, notumor };

constexpr std::array<FinalLabel, 4> kFinalLabels{FinalLabel::glioma, FinalLabel::meningioma,
                                                 FinalLabel::pituitary, FinalLabel::notumor};

constexpr std::string_view to_string(FinalLabel label) {
    switch (label) {
    case FinalLabel::glioma: return "glioma";
    case FinalLabel::meningioma: return "meningioma";
    case FinalLabel::pituitary: return "pituitary";
    case FinalLabel::notumor: return "notumor";
    }
    return "?";
}

inline FinalLabel parse_final_label(std::string_view text) {
    for (FinalLabel label : kFinalLabels)
        if (text == to_string(label)) return label;
    throw Error(ErrorCode::UnknownLabel, "unknown label '" + std::string(text) + "'");
}

// Subtype index 0/1/2 from the classification stage.
constexpr FinalLabel subtype_label(std::size_t class_index) {
    return class_index == 0 ? FinalLabel::glioma
         : class_index == 1 ? FinalLabel::meningioma
                            : FinalLabel::pituitary;
}

constexpr bool is_tumor(FinalLabel label) { return label != FinalLabel::notumor; }

enum class Method { soft, hard, uwm, esvt, nwm };

constexpr std::string_view to_string(Method method) {
    switch (method) {
    case Method::soft: return "soft";
    case Method::hard: return "hard";
    case Method::uwm: return "uwm";
    case Method::esvt: return "esvt";
    case Method::nwm: return "nwm";
    }
    return "?";
}

inline Method parse_method(std::string_view text) {
    for (Method m : {Method::soft, Method::hard, Method::uwm, Method::esvt, Method::nwm})
        if (text == to_string(m)) return m;
    throw Error(ErrorCode::InvalidSpec, "unknown method '" + std::string(text) + "'");
}

// One model's per-class probability distribution for one instance.
// Entries are in [0,1] and sum to 1 within kDistributionTolerance; file
// ingestion may renormalize slightly-off rows before construction.
class ProbabilityVector {
public:
    static constexpr double kDistributionTolerance = 1e-6;

    explicit ProbabilityVector(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty())
            throw Error(ErrorCode::ShapeMismatch, "probability vector must have at least one class");
        double sum = 0.0;
        for (double p : probs_) {
            if (!(p >= 0.0 && p <= 1.0))
                throw Error(ErrorCode::ProbabilityOutOfRange,
                            "probability " + std::to_string(p) + " outside [0,1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kDistributionTolerance)
            throw Error(ErrorCode::DistributionViolation,
                        "probabilities sum to " + std::to_string(sum) + ", expected 1");
    }

    // Ingestion path: accepts a row whose sum drifts from 1 by at most
    // `tolerance` and rescales it to an exact distribution.
    static ProbabilityVector renormalized(std::vector<double> probs, double tolerance) {
        if (probs.empty())
            throw Error(ErrorCode::ShapeMismatch, "probability vector must have at least one class");
        double sum = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0 && p <= 1.0))
                throw Error(ErrorCode::ProbabilityOutOfRange,
                            "probability " + std::to_string(p) + " outside [0,1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > tolerance)
            throw Error(ErrorCode::DistributionViolation,
                        "probabilities sum to " + std::to_string(sum) + ", expected 1 within " +
                            std::to_string(tolerance));
        if (std::abs(sum - 1.0) > 1e-9) {
            for (double& p : probs) p /= sum;
        }
        return ProbabilityVector(std::move(probs));
    }

    std::size_t class_count() const noexcept { return probs_.size(); }
    double operator[](std::size_t k) const noexcept { return probs_[k]; }
    const std::vector<double>& values() const noexcept { return probs_; }

    bool operator==(const ProbabilityVector&) const = default;

private:
    std::vector<double> probs_;
};

// Ground-truth label for one instance of the blind-test set.
struct GroundTruth {
    std::string instance_id;
    FinalLabel label;

    bool operator==(const GroundTruth&) const = default;
};

// Flat row of a persisted cascade outcome; mirrors the outcomes CSV schema.
struct OutcomeRecord {
    std::string instance_id;
    FinalLabel final_label;
    int detection_class = 0; // 0 = tumor, 1 = notumor
    bool tie_broken = false;

    bool operator==(const OutcomeRecord&) const = default;
};

} // namespace bifold
