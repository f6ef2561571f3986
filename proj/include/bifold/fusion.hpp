#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bifold/errors.hpp"
#include "bifold/profiles.hpp"
#include "bifold/types.hpp"

namespace bifold {

/// Outcome of fusing one instance's model predictions.
struct FusionResult {
    std::size_t predicted_class = 0;
    std::vector<double> fused_scores;            // per-class, same order as the inputs
    Method method = Method::soft;
    std::optional<std::size_t> winning_model;    // set by nwm only
    bool tie_broken = false;
};

/// First index holding the maximum, plus whether any other index ties it
/// exactly.
inline std::pair<std::size_t, bool> argmax_with_tie(std::span<const double> scores) {
    if (scores.empty())
        throw Error(ErrorCode::ShapeMismatch, "cannot take argmax of an empty score list");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    bool tie = false;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (i != best && scores[i] == scores[best]) tie = true;
    return {best, tie};
}

namespace detail {

inline std::size_t common_class_count(std::span<const ProbabilityVector> predictions) {
    if (predictions.empty())
        throw Error(ErrorCode::MissingPredictions, "no predictions to fuse");
    std::size_t k = predictions.front().class_count();
    for (const ProbabilityVector& p : predictions)
        if (p.class_count() != k)
            throw Error(ErrorCode::ShapeMismatch,
                        "prediction has " + std::to_string(p.class_count()) +
                            " classes, expected " + std::to_string(k));
    return k;
}

} // namespace detail

/// Element-wise mean of several probability vectors, used to collapse
/// repeated runs of one model into a single prediction before fusion.
inline ProbabilityVector average_runs(std::span<const ProbabilityVector> runs) {
    std::size_t k = detail::common_class_count(runs);
    std::vector<double> mean(k, 0.0);
    for (const ProbabilityVector& run : runs)
        for (std::size_t c = 0; c < k; ++c) mean[c] += run[c];
    for (double& v : mean) v /= static_cast<double>(runs.size());
    return ProbabilityVector::renormalized(std::move(mean), 1e-6);
}

/// Weighted soft vote: fused score per class is the weighted sum of the
/// model probabilities; the predicted class is the argmax.
inline FusionResult weighted_soft_vote(std::span<const ProbabilityVector> predictions,
                                       const WeightVector& weights, Method method = Method::uwm) {
    std::size_t k = detail::common_class_count(predictions);
    if (weights.size() != predictions.size())
        throw Error(ErrorCode::ShapeMismatch,
                    std::to_string(weights.size()) + " weights for " +
                        std::to_string(predictions.size()) + " predictions");
    FusionResult result;
    result.method = method;
    result.fused_scores.assign(k, 0.0);
    for (std::size_t i = 0; i < predictions.size(); ++i)
        for (std::size_t c = 0; c < k; ++c)
            result.fused_scores[c] += weights[i] * predictions[i][c];
    auto [best, tie] = argmax_with_tie(result.fused_scores);
    result.predicted_class = best;
    result.tie_broken = tie;
    return result;
}

/// Unweighted soft vote: mean of the model probabilities, then argmax.
inline FusionResult soft_vote(std::span<const ProbabilityVector> predictions) {
    FusionResult result =
        weighted_soft_vote(predictions, WeightVector::uniform(Stage::detection, predictions.empty() ? 1 : predictions.size()),
                           Method::soft);
    return result;
}

/// Majority vote over the per-model argmax labels. Fused scores are the
/// vote fractions; tie_broken reports a tie between modal classes.
inline FusionResult hard_vote(std::span<const ProbabilityVector> predictions) {
    std::size_t k = detail::common_class_count(predictions);
    std::vector<double> votes(k, 0.0);
    for (const ProbabilityVector& p : predictions) {
        auto [cls, tie] = argmax_with_tie(std::span<const double>(p.values()));
        static_cast<void>(tie); // per-model tie resolves to the first class
        votes[cls] += 1.0;
    }
    FusionResult result;
    result.method = Method::hard;
    result.fused_scores.resize(k);
    for (std::size_t c = 0; c < k; ++c)
        result.fused_scores[c] = votes[c] / static_cast<double>(predictions.size());
    auto [best, tie] = argmax_with_tie(result.fused_scores);
    result.predicted_class = best;
    result.tie_broken = tie;
    return result;
}

/// Weighted soft vote with weights derived from the model profiles'
/// average F1 scores.
inline FusionResult esvt_fuse(std::span<const ProbabilityVector> predictions,
                              std::span<const ModelProfile> profiles) {
    if (profiles.size() != predictions.size())
        throw Error(ErrorCode::ShapeMismatch,
                    std::to_string(profiles.size()) + " profiles for " +
                        std::to_string(predictions.size()) + " predictions");
    return weighted_soft_vote(predictions, uwcs_weights(profiles), Method::esvt);
}

/// Position of a flattened model/class entry. Entries are laid out
/// model-major: flat = model * class_count + class.
struct NwmIndex {
    std::size_t model = 0;
    std::size_t cls = 0;
};

inline NwmIndex decode_flat_index(std::size_t flat, std::size_t class_count) {
    if (class_count == 0)
        throw Error(ErrorCode::ShapeMismatch, "class count is zero");
    return {flat / class_count, flat % class_count};
}

/// Picks the single largest weighted entry w[i] * p[i][c] across all models
/// and classes; that entry's class wins and its model is reported. Fused
/// scores keep the per-class maxima for inspection.
inline FusionResult nwm_fuse(std::span<const ProbabilityVector> predictions,
                             const WeightVector& weights) {
    std::size_t k = detail::common_class_count(predictions);
    if (weights.size() != predictions.size())
        throw Error(ErrorCode::ShapeMismatch,
                    std::to_string(weights.size()) + " weights for " +
                        std::to_string(predictions.size()) + " predictions");
    std::vector<double> flat(predictions.size() * k, 0.0);
    for (std::size_t i = 0; i < predictions.size(); ++i)
        for (std::size_t c = 0; c < k; ++c)
            flat[i * k + c] = weights[i] * predictions[i][c];
    auto [best_flat, tie] = argmax_with_tie(flat);
    NwmIndex idx = decode_flat_index(best_flat, k);
    FusionResult result;
    result.method = Method::nwm;
    result.predicted_class = idx.cls;
    result.winning_model = idx.model;
    result.tie_broken = tie;
    result.fused_scores.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < predictions.size(); ++i)
            if (flat[i * k + c] > result.fused_scores[c]) result.fused_scores[c] = flat[i * k + c];
    return result;
}

} // namespace bifold
