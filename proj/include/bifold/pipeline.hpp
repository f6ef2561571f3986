#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bifold/errors.hpp"
#include "bifold/fusion.hpp"
#include "bifold/io.hpp"
#include "bifold/profiles.hpp"
#include "bifold/types.hpp"

namespace bifold {

/// Where a stage's fusion weights come from: equal weights, F1-proportional
/// weights computed from model profiles, or a user-supplied list.
struct WeightSource {
    enum class Kind { uniform, uwcs, explicit_list };

    Kind kind = Kind::uwcs;
    std::vector<double> weights; // explicit_list only

    static WeightSource uniform() { return {Kind::uniform, {}}; }
    static WeightSource uwcs() { return {Kind::uwcs, {}}; }
    static WeightSource explicit_list(std::vector<double> weights) {
        return {Kind::explicit_list, std::move(weights)};
    }
};

struct BiFoldConfig {
    Method detection_method = Method::uwm;
    Method classification_method = Method::uwm;
    WeightSource detection_weights = WeightSource::uwcs();
    WeightSource classification_weights = WeightSource::uwcs();

    BiFoldConfig() = default;
    explicit BiFoldConfig(Method method)
        : detection_method(method), classification_method(method) {}
};

/// A stage's method with its weights already materialised. Weight-free
/// methods leave the optional empty.
struct ResolvedStage {
    Method method = Method::soft;
    std::optional<WeightVector> weights;
};

inline bool method_uses_weights(Method method) {
    return method == Method::uwm || method == Method::esvt || method == Method::nwm;
}

/// Materialises one stage's weights. The esvt method always derives its
/// weights from profiles, whatever the configured source says; that
/// coupling is what distinguishes it from a plain weighted soft vote.
inline ResolvedStage resolve_stage(Method method, const WeightSource& source, Stage stage,
                                   std::span<const std::string> model_order,
                                   const std::vector<ModelProfile>* profiles) {
    if (model_order.empty())
        throw Error(ErrorCode::MissingPredictions,
                    std::string(to_string(stage)) + " stage has no models");
    ResolvedStage resolved{method, std::nullopt};
    if (!method_uses_weights(method)) return resolved;
    WeightSource effective = method == Method::esvt ? WeightSource::uwcs() : source;
    switch (effective.kind) {
    case WeightSource::Kind::uniform:
        resolved.weights = WeightVector::uniform(stage, model_order.size());
        break;
    case WeightSource::Kind::uwcs: {
        if (profiles == nullptr || profiles->empty())
            throw Error(ErrorCode::InvalidProfile,
                        std::string(to_string(stage)) +
                            " stage needs model profiles for F1-based weights");
        std::map<std::string, const ModelProfile*> by_id;
        for (const ModelProfile& profile : *profiles) by_id[profile.model_id()] = &profile;
        std::vector<ModelProfile> ordered;
        ordered.reserve(model_order.size());
        for (const std::string& model_id : model_order) {
            auto it = by_id.find(model_id);
            if (it == by_id.end())
                throw Error(ErrorCode::UnknownModel, "model '" + model_id + "' has no profile");
            ordered.push_back(*it->second);
        }
        resolved.weights = uwcs_weights(ordered);
        break;
    }
    case WeightSource::Kind::explicit_list: {
        if (effective.weights.size() != model_order.size())
            throw Error(ErrorCode::ShapeMismatch,
                        std::to_string(effective.weights.size()) + " weights for " +
                            std::to_string(model_order.size()) + " models");
        resolved.weights = validate_user_weights(effective.weights, stage);
        break;
    }
    }
    return resolved;
}

/// Runs one stage's fusion method on a single instance's predictions.
inline FusionResult apply_method(Method method, std::span<const ProbabilityVector> predictions,
                                 const WeightVector* weights) {
    switch (method) {
    case Method::soft: return soft_vote(predictions);
    case Method::hard: return hard_vote(predictions);
    case Method::uwm:
    case Method::esvt:
    case Method::nwm:
        if (weights == nullptr)
            throw Error(ErrorCode::InvalidWeights,
                        "method '" + std::string(to_string(method)) + "' needs weights");
        if (method == Method::nwm) return nwm_fuse(predictions, *weights);
        return weighted_soft_vote(predictions, *weights, method);
    }
    throw Error(ErrorCode::InvalidSpec, "unhandled fusion method");
}

inline FusionResult apply_method(Method method, std::span<const ProbabilityVector> predictions,
                                 const ResolvedStage& stage) {
    return apply_method(method, predictions, stage.weights ? &*stage.weights : nullptr);
}

/// Result of the two-stage cascade for one instance. The classification
/// result exists exactly when detection said tumor; otherwise the final
/// label is notumor and the second stage never ran.
struct BiFoldOutcome {
    std::string instance_id;
    FinalLabel final_label = FinalLabel::notumor;
    FusionResult detection;
    std::optional<FusionResult> classification;

    OutcomeRecord to_record() const {
        OutcomeRecord rec;
        rec.instance_id = instance_id;
        rec.final_label = final_label;
        rec.detection_class = static_cast<int>(detection.predicted_class);
        rec.tie_broken = detection.tie_broken || (classification && classification->tie_broken);
        return rec;
    }
};

inline BiFoldOutcome run_instance(std::string instance_id,
                                  std::span<const ProbabilityVector> detection_predictions,
                                  const std::vector<ProbabilityVector>* classification_predictions,
                                  const ResolvedStage& detection_stage,
                                  const ResolvedStage& classification_stage) {
    BiFoldOutcome outcome;
    outcome.instance_id = std::move(instance_id);
    outcome.detection =
        apply_method(detection_stage.method, detection_predictions, detection_stage);
    if (outcome.detection.predicted_class == 1) {
        outcome.final_label = FinalLabel::notumor;
        return outcome;
    }
    if (classification_predictions == nullptr || classification_predictions->empty())
        throw Error(ErrorCode::MissingPredictions,
                    "instance '" + outcome.instance_id +
                        "' passed detection but has no classification predictions");
    outcome.classification = apply_method(classification_stage.method,
                                          *classification_predictions, classification_stage);
    outcome.final_label = subtype_label(outcome.classification->predicted_class);
    return outcome;
}

namespace detail {

/// Fusion order for a table's models: profile order when profiles are
/// given (every table model must appear there), first appearance otherwise.
inline std::vector<std::string> model_order_for(const PredictionTable& table,
                                                const std::vector<ModelProfile>* profiles) {
    if (profiles == nullptr || profiles->empty()) return table.model_ids();
    std::set<std::string> known;
    std::vector<std::string> order;
    for (const ModelProfile& profile : *profiles) {
        known.insert(profile.model_id());
        order.push_back(profile.model_id());
    }
    for (const std::string& model_id : table.model_ids())
        if (known.find(model_id) == known.end())
            throw Error(ErrorCode::UnknownModel,
                        "model '" + model_id + "' is not in the manifest");
    return order;
}

/// One averaged prediction per model, in the given model order.
inline std::vector<ProbabilityVector> gather_instance(const PredictionTable& table,
                                                      const std::string& instance_id,
                                                      std::span<const std::string> model_order) {
    std::vector<ProbabilityVector> predictions;
    predictions.reserve(model_order.size());
    for (const std::string& model_id : model_order) {
        std::vector<ProbabilityVector> runs = table.runs(instance_id, model_id);
        predictions.push_back(average_runs(runs));
    }
    return predictions;
}

} // namespace detail

/// Runs the cascade over every detection instance in ascending id order.
/// Classification predictions are consulted only for instances that pass
/// detection, so gated-out instances may be absent from that table.
inline std::vector<BiFoldOutcome> run_batch(const PredictionTable& detection_table,
                                            const PredictionTable& classification_table,
                                            const BiFoldConfig& config,
                                            const Manifest* manifest = nullptr) {
    if (detection_table.stage() != Stage::detection)
        throw Error(ErrorCode::StageMismatch, "first table must hold detection predictions");
    if (classification_table.stage() != Stage::classification)
        throw Error(ErrorCode::StageMismatch, "second table must hold classification predictions");
    if (detection_table.empty())
        throw Error(ErrorCode::MissingPredictions, "detection table is empty");

    const std::vector<ModelProfile>* det_profiles =
        manifest ? &manifest->detection : nullptr;
    const std::vector<ModelProfile>* cls_profiles =
        manifest ? &manifest->classification : nullptr;
    std::vector<std::string> det_order = detail::model_order_for(detection_table, det_profiles);
    std::vector<std::string> cls_order =
        detail::model_order_for(classification_table, cls_profiles);
    ResolvedStage det_stage = resolve_stage(config.detection_method, config.detection_weights,
                                            Stage::detection, det_order, det_profiles);
    ResolvedStage cls_stage =
        resolve_stage(config.classification_method, config.classification_weights,
                      Stage::classification, cls_order, cls_profiles);

    std::vector<BiFoldOutcome> outcomes;
    for (const std::string& instance_id : detection_table.instance_ids()) {
        std::vector<ProbabilityVector> det_preds =
            detail::gather_instance(detection_table, instance_id, det_order);
        FusionResult det_result = apply_method(det_stage.method, det_preds, det_stage);
        BiFoldOutcome outcome;
        outcome.instance_id = instance_id;
        outcome.detection = det_result;
        if (det_result.predicted_class == 1) {
            outcome.final_label = FinalLabel::notumor;
        } else {
            std::vector<ProbabilityVector> cls_preds =
                detail::gather_instance(classification_table, instance_id, cls_order);
            outcome.classification = apply_method(cls_stage.method, cls_preds, cls_stage);
            outcome.final_label = subtype_label(outcome.classification->predicted_class);
        }
        outcomes.push_back(std::move(outcome));
    }
    return outcomes;
}

inline std::vector<OutcomeRecord> to_records(std::span<const BiFoldOutcome> outcomes) {
    std::vector<OutcomeRecord> records;
    records.reserve(outcomes.size());
    for (const BiFoldOutcome& outcome : outcomes) records.push_back(outcome.to_record());
    return records;
}

/// Single-stage fusion over a whole prediction table: repeated runs are
/// averaged per model, then the method runs once per instance. Results come
/// back in ascending instance order, alongside the model order used (which
/// is what a result's winning_model indexes).
struct TableFusion {
    std::vector<std::string> model_order;
    std::vector<std::pair<std::string, FusionResult>> results;
};

inline TableFusion fuse_table(const PredictionTable& table, Method method,
                              const WeightSource& source,
                              const std::vector<ModelProfile>* profiles = nullptr) {
    if (table.empty())
        throw Error(ErrorCode::MissingPredictions, "prediction table is empty");
    TableFusion fusion;
    fusion.model_order = detail::model_order_for(table, profiles);
    ResolvedStage stage = resolve_stage(method, source, table.stage(), fusion.model_order, profiles);
    for (const std::string& instance_id : table.instance_ids()) {
        std::vector<ProbabilityVector> predictions =
            detail::gather_instance(table, instance_id, fusion.model_order);
        fusion.results.emplace_back(instance_id, apply_method(stage.method, predictions, stage));
    }
    return fusion;
}

} // namespace bifold
