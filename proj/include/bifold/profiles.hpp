#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bifold/errors.hpp"
#include "bifold/types.hpp"

namespace bifold {

/// Arithmetic mean of a model's per-class F1 scores.
inline double average_f1(std::span<const double> per_class_f1) {
    if (per_class_f1.empty())
        throw Error(ErrorCode::InvalidProfile, "per-class F1 list is empty");
    double sum = 0.0;
    for (double f1 : per_class_f1) {
        if (!(f1 >= 0.0 && f1 <= 1.0))
            throw Error(ErrorCode::InvalidProfile, "F1 score " + std::to_string(f1) + " outside [0,1]");
        sum += f1;
    }
    return sum / static_cast<double>(per_class_f1.size());
}

// A model's identity plus its validation F1 scores for one stage. The
// per-class list is optional: a profile may carry only the macro average
// when that is all the source material provides.
class ModelProfile {
public:
    static ModelProfile from_per_class(std::string model_id, Stage stage, std::vector<double> per_class_f1) {
        double avg = average_f1(per_class_f1);
        return ModelProfile(std::move(model_id), stage, std::move(per_class_f1), avg);
    }

    static ModelProfile from_average(std::string model_id, Stage stage, double f1_average) {
        if (!(f1_average >= 0.0 && f1_average <= 1.0))
            throw Error(ErrorCode::InvalidProfile,
                        "F1 average " + std::to_string(f1_average) + " outside [0,1]");
        return ModelProfile(std::move(model_id), stage, {}, f1_average);
    }

    const std::string& model_id() const noexcept { return model_id_; }
    Stage stage() const noexcept { return stage_; }
    const std::vector<double>& per_class_f1() const noexcept { return per_class_f1_; }
    bool has_per_class() const noexcept { return !per_class_f1_.empty(); }
    double f1_average() const noexcept { return f1_average_; }

private:
    ModelProfile(std::string model_id, Stage stage, std::vector<double> per_class_f1, double f1_average)
        : model_id_(std::move(model_id)), stage_(stage), per_class_f1_(std::move(per_class_f1)),
          f1_average_(f1_average) {}

    std::string model_id_;
    Stage stage_;
    std::vector<double> per_class_f1_;
    double f1_average_;
};

// Per-model fusion weights for one stage, in manifest order. Weights are
// nonnegative; the uwcs/user-weight factories below produce vectors that
// sum to 1. Construction alone does not force the sum so callers can probe
// scale-invariance directly.
class WeightVector {
public:
    WeightVector(Stage stage, std::vector<double> weights, bool renormalized = false)
        : stage_(stage), weights_(std::move(weights)), renormalized_(renormalized) {
        if (weights_.empty())
            throw Error(ErrorCode::InvalidWeights, "weight vector is empty");
        for (double w : weights_)
            if (!(w >= 0.0))
                throw Error(ErrorCode::InvalidWeights, "negative weight " + std::to_string(w));
    }

    static WeightVector uniform(Stage stage, std::size_t model_count) {
        if (model_count == 0)
            throw Error(ErrorCode::InvalidWeights, "weight vector is empty");
        return WeightVector(stage,
                            std::vector<double>(model_count, 1.0 / static_cast<double>(model_count)));
    }

    Stage stage() const noexcept { return stage_; }
    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t i) const noexcept { return weights_[i]; }
    const std::vector<double>& values() const noexcept { return weights_; }
    bool renormalized() const noexcept { return renormalized_; }
    double sum() const noexcept { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

private:
    Stage stage_;
    std::vector<double> weights_;
    bool renormalized_;
};

/// Unsupervised weight calculation: each model's weight is its average F1
/// divided by the sum of average F1 over the whole model set.
inline WeightVector uwcs_weights(std::span<const ModelProfile> profiles) {
    if (profiles.empty())
        throw Error(ErrorCode::InvalidProfile, "no model profiles supplied");
    Stage stage = profiles.front().stage();
    double denominator = 0.0;
    for (const ModelProfile& profile : profiles) {
        if (profile.stage() != stage)
            throw Error(ErrorCode::StageMismatch,
                        "profile '" + profile.model_id() + "' belongs to a different stage");
        denominator += profile.f1_average();
    }
    if (denominator <= 0.0)
        throw Error(ErrorCode::DegenerateWeights, "all model F1 averages are zero");
    std::vector<double> weights;
    weights.reserve(profiles.size());
    for (const ModelProfile& profile : profiles)
        weights.push_back(profile.f1_average() / denominator);
    return WeightVector(stage, std::move(weights));
}

/// Validates externally supplied weights. Nonnegative weights are accepted;
/// a sum off 1 by more than 1e-6 is rescaled and the result flagged as
/// renormalized.
inline WeightVector validate_user_weights(std::span<const double> weights, Stage stage) {
    if (weights.empty())
        throw Error(ErrorCode::InvalidWeights, "weight vector is empty");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0))
            throw Error(ErrorCode::InvalidWeights, "negative weight " + std::to_string(w));
        sum += w;
    }
    if (sum <= 0.0)
        throw Error(ErrorCode::InvalidWeights, "weights are all zero");
    std::vector<double> values(weights.begin(), weights.end());
    bool renormalized = std::abs(sum - 1.0) > 1e-6;
    if (renormalized)
        for (double& w : values) w /= sum;
    return WeightVector(stage, std::move(values), renormalized);
}

} // namespace bifold
