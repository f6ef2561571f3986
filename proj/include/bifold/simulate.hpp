#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bifold/errors.hpp"
#include "bifold/fusion.hpp"
#include "bifold/io.hpp"
#include "bifold/types.hpp"

namespace bifold {

// Deterministic random source. mt19937_64 has a standard-mandated output
// sequence and the two mappings below avoid the library-dependent
// std::uniform_*_distribution implementations, so a seed reproduces the
// same stream on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) using the top 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform index in [0, n) via 128-bit multiply-shift.
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw Error(ErrorCode::InvalidSpec, "cannot draw from an empty range");
        unsigned __int128 product = static_cast<unsigned __int128>(engine_()) * n;
        return static_cast<std::size_t>(product >> 64);
    }

private:
    std::mt19937_64 engine_;
};

// How accurately one synthetic model predicts. per_class_correct holds the
// chance of hitting each true class; a single entry applies to every class.
// concentration shapes the losing probabilities: higher values push them
// toward zero, making the model more confident.
struct ModelSkill {
    std::string model_id;
    std::vector<double> per_class_correct{0.9};
    double concentration = 4.0;
};

struct SyntheticSpec {
    Stage stage = Stage::detection;
    std::map<FinalLabel, std::size_t> counts;
    std::vector<ModelSkill> models;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    PredictionTable predictions;
    std::vector<GroundTruth> truth;
};

namespace detail {

inline void validate_skill(const ModelSkill& skill, std::size_t k) {
    if (skill.model_id.empty())
        throw Error(ErrorCode::InvalidSpec, "model skill needs a model_id");
    if (skill.per_class_correct.size() != 1 && skill.per_class_correct.size() != k)
        throw Error(ErrorCode::InvalidSpec,
                    "model '" + skill.model_id + "' lists " +
                        std::to_string(skill.per_class_correct.size()) +
                        " correctness values, expected 1 or " + std::to_string(k));
    for (double p : skill.per_class_correct)
        if (!(p >= 0.0 && p <= 1.0))
            throw Error(ErrorCode::InvalidSpec,
                        "model '" + skill.model_id + "' correctness " + std::to_string(p) +
                            " outside [0,1]");
    if (!(skill.concentration > 0.0))
        throw Error(ErrorCode::InvalidSpec,
                    "model '" + skill.model_id + "' concentration must be positive");
}

inline double correct_chance(const ModelSkill& skill, std::size_t true_class) {
    return skill.per_class_correct.size() == 1 ? skill.per_class_correct[0]
                                               : skill.per_class_correct[true_class];
}

/// Uniform choice among the k-1 classes other than `exclude`.
inline std::size_t draw_other_class(Rng& rng, std::size_t k, std::size_t exclude) {
    std::size_t drawn = rng.uniform_index(k - 1);
    return drawn >= exclude ? drawn + 1 : drawn;
}

/// Probability row whose argmax is `winner`: the winner gets weight 1,
/// every other class a weight strictly below 1, then the row is scaled to
/// sum to 1.
inline ProbabilityVector draw_row(Rng& rng, std::size_t k, std::size_t winner,
                                  double concentration) {
    std::vector<double> weights(k, 0.0);
    weights[winner] = 1.0;
    for (std::size_t c = 0; c < k; ++c) {
        if (c == winner) continue;
        double w = std::pow(rng.uniform(), concentration);
        if (w >= 1.0) w = 1.0 - 1e-12;
        weights[c] = w;
    }
    double sum = 0.0;
    for (double w : weights) sum += w;
    for (double& w : weights) w /= sum;
    return ProbabilityVector::renormalized(std::move(weights), 1e-6);
}

inline char label_prefix(FinalLabel label) { return to_string(label)[0]; }

inline std::string make_instance_id(FinalLabel label, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%c%06zu", label_prefix(label), index);
    return buf;
}

} // namespace detail

/// Generates ground truth plus one prediction row per instance and model.
/// Detection folds the three tumor subtypes into the tumor class. A notumor
/// instance in a classification spec has no right answer there, so models
/// pick a class uniformly at random for it.
inline SyntheticData generate(const SyntheticSpec& spec) {
    std::size_t k = class_count(spec.stage);
    if (spec.models.empty())
        throw Error(ErrorCode::InvalidSpec, "no models to simulate");
    std::set<std::string> ids;
    for (const ModelSkill& skill : spec.models) {
        detail::validate_skill(skill, k);
        if (!ids.insert(skill.model_id).second)
            throw Error(ErrorCode::DuplicateRecord,
                        "model '" + skill.model_id + "' appears twice");
    }
    std::size_t total = 0;
    for (const auto& [label, count] : spec.counts) total += count;
    if (total == 0) throw Error(ErrorCode::InvalidSpec, "no instances to simulate");

    Rng rng(spec.seed);
    SyntheticData data{PredictionTable(spec.stage), {}};
    for (FinalLabel label : kFinalLabels) {
        auto it = spec.counts.find(label);
        if (it == spec.counts.end()) continue;
        for (std::size_t i = 1; i <= it->second; ++i) {
            std::string instance_id = detail::make_instance_id(label, i);
            data.truth.push_back({instance_id, label});
            std::optional<std::size_t> true_class;
            if (spec.stage == Stage::detection)
                true_class = is_tumor(label) ? 0 : 1;
            else if (label != FinalLabel::notumor)
                true_class = static_cast<std::size_t>(label);
            for (const ModelSkill& skill : spec.models) {
                std::size_t winner;
                if (!true_class) {
                    winner = rng.uniform_index(k);
                } else if (rng.uniform() < detail::correct_chance(skill, *true_class)) {
                    winner = *true_class;
                } else {
                    winner = detail::draw_other_class(rng, k, *true_class);
                }
                PredictionRecord record{instance_id, skill.model_id, 1,
                                        detail::draw_row(rng, k, winner, skill.concentration)};
                data.predictions.add(std::move(record));
            }
        }
    }
    return data;
}

/// Degrades one model: each of its rows has its top class swapped with a
/// uniformly chosen other class with probability `degradation`. Everything
/// else is copied through untouched.
inline PredictionTable perturb(const PredictionTable& table, const std::string& model_id,
                               double degradation, std::uint64_t seed) {
    if (!(degradation >= 0.0 && degradation <= 1.0))
        throw Error(ErrorCode::InvalidSpec,
                    "degradation " + std::to_string(degradation) + " outside [0,1]");
    bool known = false;
    for (const std::string& id : table.model_ids())
        if (id == model_id) { known = true; break; }
    if (!known)
        throw Error(ErrorCode::UnknownModel, "model '" + model_id + "' is not in the table");

    Rng rng(seed);
    PredictionTable out(table.stage());
    for (const PredictionRecord& record : table.records()) {
        if (record.model_id != model_id || rng.uniform() >= degradation) {
            out.add(record);
            continue;
        }
        std::vector<double> values = record.probabilities.values();
        auto [top, tie] = argmax_with_tie(std::span<const double>(values));
        static_cast<void>(tie);
        std::size_t other = detail::draw_other_class(rng, values.size(), top);
        std::swap(values[top], values[other]);
        PredictionRecord swapped{record.instance_id, record.model_id, record.run_id,
                                 ProbabilityVector::renormalized(std::move(values), 1e-6)};
        out.add(std::move(swapped));
    }
    return out;
}

/// Stage sections of a simulation run, parsed from a JSON file of the form
/// {"seed": 42, "detection": {"instances": {...}, "models": [...]},
///  "classification": {...}}. A section without its own seed derives one
/// from the top-level seed (detection +0, classification +1).
struct SimulationSpec {
    std::optional<SyntheticSpec> detection;
    std::optional<SyntheticSpec> classification;
};

namespace detail {

inline SyntheticSpec parse_stage_spec(const nlohmann::json& section, Stage stage,
                                      std::uint64_t default_seed) {
    if (!section.is_object())
        throw Error(ErrorCode::InvalidSpec,
                    "'" + std::string(to_string(stage)) + "' section must be an object");
    for (const auto& item : section.items())
        if (item.key() != "seed" && item.key() != "instances" && item.key() != "models")
            throw Error(ErrorCode::InvalidSpec,
                        "unknown key '" + item.key() + "' in '" + std::string(to_string(stage)) +
                            "' section");
    SyntheticSpec spec;
    spec.stage = stage;
    spec.seed = default_seed;
    if (section.contains("seed")) {
        if (!section["seed"].is_number_unsigned())
            throw Error(ErrorCode::InvalidSpec, "seed must be a nonnegative integer");
        spec.seed = section["seed"].get<std::uint64_t>();
    }
    if (!section.contains("instances") || !section["instances"].is_object())
        throw Error(ErrorCode::InvalidSpec,
                    "'" + std::string(to_string(stage)) + "' section needs an instances object");
    for (const auto& item : section["instances"].items()) {
        FinalLabel label = parse_final_label(item.key());
        if (!item.value().is_number_unsigned())
            throw Error(ErrorCode::InvalidSpec,
                        "instance count for '" + item.key() + "' must be a nonnegative integer");
        spec.counts[label] = item.value().get<std::size_t>();
    }
    if (!section.contains("models") || !section["models"].is_array() ||
        section["models"].empty())
        throw Error(ErrorCode::InvalidSpec,
                    "'" + std::string(to_string(stage)) + "' section needs a model list");
    for (const nlohmann::json& entry : section["models"]) {
        if (!entry.is_object())
            throw Error(ErrorCode::InvalidSpec, "model entries must be objects");
        for (const auto& item : entry.items())
            if (item.key() != "model_id" && item.key() != "correct" &&
                item.key() != "concentration")
                throw Error(ErrorCode::InvalidSpec, "unknown key '" + item.key() + "' in model entry");
        if (!entry.contains("model_id") || !entry["model_id"].is_string())
            throw Error(ErrorCode::InvalidSpec, "model entry needs a model_id string");
        ModelSkill skill;
        skill.model_id = entry["model_id"].get<std::string>();
        if (!entry.contains("correct"))
            throw Error(ErrorCode::InvalidSpec,
                        "model '" + skill.model_id + "' needs a correct value");
        const nlohmann::json& correct = entry["correct"];
        skill.per_class_correct.clear();
        if (correct.is_number()) {
            skill.per_class_correct.push_back(correct.get<double>());
        } else if (correct.is_array()) {
            for (const nlohmann::json& v : correct) {
                if (!v.is_number())
                    throw Error(ErrorCode::InvalidSpec,
                                "correct list for model '" + skill.model_id +
                                    "' must hold numbers");
                skill.per_class_correct.push_back(v.get<double>());
            }
        } else {
            throw Error(ErrorCode::InvalidSpec,
                        "correct for model '" + skill.model_id + "' must be a number or list");
        }
        if (entry.contains("concentration")) {
            if (!entry["concentration"].is_number())
                throw Error(ErrorCode::InvalidSpec,
                            "concentration for model '" + skill.model_id + "' must be a number");
            skill.concentration = entry["concentration"].get<double>();
        }
        spec.models.push_back(std::move(skill));
    }
    return spec;
}

} // namespace detail

/// seed_override replaces the file's top-level seed; sections carrying
/// their own seed keep it either way.
inline SimulationSpec load_simulation_spec(const std::string& path,
                                           std::optional<std::uint64_t> seed_override = std::nullopt) {
    std::ifstream in = detail::open_input(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvalidSpec, e.what());
    }
    if (!doc.is_object())
        throw Error(ErrorCode::InvalidSpec, "simulation spec root must be an object");
    for (const auto& item : doc.items())
        if (item.key() != "seed" && item.key() != "detection" && item.key() != "classification")
            throw Error(ErrorCode::InvalidSpec, "unknown key '" + item.key() + "'");
    std::uint64_t top_seed = 0;
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned())
            throw Error(ErrorCode::InvalidSpec, "seed must be a nonnegative integer");
        top_seed = doc["seed"].get<std::uint64_t>();
    }
    if (seed_override) top_seed = *seed_override;
    SimulationSpec spec;
    if (doc.contains("detection"))
        spec.detection = detail::parse_stage_spec(doc["detection"], Stage::detection, top_seed);
    if (doc.contains("classification"))
        spec.classification =
            detail::parse_stage_spec(doc["classification"], Stage::classification, top_seed + 1);
    if (!spec.detection && !spec.classification)
        throw Error(ErrorCode::InvalidSpec, "spec needs a detection or classification section");
    return spec;
}

} // namespace bifold
