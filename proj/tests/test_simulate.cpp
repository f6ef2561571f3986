#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <unistd.h>
#include <vector>

#include "bifold/simulate.hpp"
#include "oracles.hpp"
#include "support.hpp"

using bifold::ErrorCode;
using bifold::FinalLabel;
using bifold::ModelSkill;
using bifold::PredictionTable;
using bifold::Stage;
using bifold::SyntheticData;
using bifold::SyntheticSpec;

namespace {

std::string write_file(const std::string& name, const std::string& content) {
    static const std::filesystem::path dir = [] {
        std::filesystem::path d = std::filesystem::temp_directory_path() /
                                  ("bifold_sim_" + std::to_string(::getpid()));
        std::filesystem::create_directories(d);
        return d;
    }();
    std::filesystem::path path = dir / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

SyntheticSpec detection_spec(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.stage = Stage::detection;
    spec.counts = {{FinalLabel::glioma, 30},
                   {FinalLabel::meningioma, 20},
                   {FinalLabel::pituitary, 10},
                   {FinalLabel::notumor, 40}};
    spec.models = {{"m1", {0.9}, 4.0}, {"m2", {0.8}, 2.0}};
    spec.seed = seed;
    return spec;
}

std::size_t argmax_of(const bifold::ProbabilityVector& p) {
    return oracle::first_argmax(p.values());
}

} // namespace

TEST_CASE("the random source is reproducible and in range") {
    bifold::Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        double ua = a.uniform(), ub = b.uniform(), uc = c.uniform();
        CHECK(ua >= 0.0);
        CHECK(ua < 1.0);
        all_equal = all_equal && ua == ub;
        any_diff = any_diff || ua != uc;
    }
    CHECK(all_equal);
    CHECK(any_diff);

    bifold::Rng d(7);
    for (int i = 0; i < 1000; ++i) CHECK(d.uniform_index(5) < 5);
    expect_error(ErrorCode::InvalidSpec, [&] { d.uniform_index(0); });
}

TEST_CASE("generation is deterministic per seed") {
    SyntheticData first = bifold::generate(detection_spec(11));
    SyntheticData second = bifold::generate(detection_spec(11));
    REQUIRE(first.predictions.size() == second.predictions.size());
    for (std::size_t i = 0; i < first.predictions.size(); ++i) {
        const bifold::PredictionRecord& a = first.predictions.records()[i];
        const bifold::PredictionRecord& b = second.predictions.records()[i];
        CHECK(a.instance_id == b.instance_id);
        CHECK(a.model_id == b.model_id);
        CHECK(a.probabilities.values() == b.probabilities.values());
    }
    CHECK(first.truth == second.truth);

    SyntheticData other = bifold::generate(detection_spec(12));
    bool differs = false;
    for (std::size_t i = 0; i < first.predictions.size() && !differs; ++i)
        differs = first.predictions.records()[i].probabilities.values() !=
                  other.predictions.records()[i].probabilities.values();
    CHECK(differs);
}

TEST_CASE("generated ids, counts and run ids follow the layout") {
    SyntheticData data = bifold::generate(detection_spec(5));
    CHECK(data.truth.size() == 100);
    CHECK(data.predictions.size() == 200); // two models per instance
    CHECK(data.truth.front().instance_id == "g000001");
    CHECK(data.truth.back().instance_id == "n000040");

    std::map<FinalLabel, std::size_t> seen;
    for (const bifold::GroundTruth& gt : data.truth) ++seen[gt.label];
    CHECK(seen[FinalLabel::glioma] == 30);
    CHECK(seen[FinalLabel::meningioma] == 20);
    CHECK(seen[FinalLabel::pituitary] == 10);
    CHECK(seen[FinalLabel::notumor] == 40);

    for (const bifold::PredictionRecord& rec : data.predictions.records())
        CHECK(rec.run_id == 1);
}

TEST_CASE("skill pins the argmax at the extremes") {
    SyntheticSpec perfect = detection_spec(3);
    perfect.models = {{"m1", {1.0}, 4.0}};
    SyntheticData data = bifold::generate(perfect);
    std::map<std::string, FinalLabel> truth;
    for (const bifold::GroundTruth& gt : data.truth) truth[gt.instance_id] = gt.label;
    for (const bifold::PredictionRecord& rec : data.predictions.records()) {
        std::size_t expected = bifold::is_tumor(truth[rec.instance_id]) ? 0 : 1;
        CHECK(argmax_of(rec.probabilities) == expected);
    }

    SyntheticSpec hopeless = detection_spec(3);
    hopeless.models = {{"m1", {0.0}, 4.0}};
    SyntheticData bad = bifold::generate(hopeless);
    for (const bifold::PredictionRecord& rec : bad.predictions.records()) {
        std::size_t truth_class = bifold::is_tumor(truth[rec.instance_id]) ? 0 : 1;
        CHECK(argmax_of(rec.probabilities) != truth_class);
    }
}

TEST_CASE("classification specs may include instances with no subtype") {
    SyntheticSpec spec;
    spec.stage = Stage::classification;
    spec.counts = {{FinalLabel::glioma, 50}, {FinalLabel::notumor, 300}};
    spec.models = {{"m1", {1.0}, 4.0}};
    spec.seed = 9;
    SyntheticData data = bifold::generate(spec);
    CHECK(data.truth.size() == 350);

    // Perfect skill still spreads over all three classes when the instance
    // has no true subtype.
    std::map<std::size_t, std::size_t> histogram;
    for (const bifold::PredictionRecord& rec : data.predictions.records())
        if (rec.instance_id[0] == 'n') ++histogram[argmax_of(rec.probabilities)];
    CHECK(histogram.size() == 3);
    for (auto [cls, count] : histogram) CHECK(count > 50); // ~100 each out of 300
}

TEST_CASE("per-class skill vectors steer each class separately") {
    SyntheticSpec spec;
    spec.stage = Stage::detection;
    spec.counts = {{FinalLabel::glioma, 200}, {FinalLabel::notumor, 200}};
    spec.models = {{"m1", {1.0, 0.0}, 4.0}};
    spec.seed = 21;
    SyntheticData data = bifold::generate(spec);
    for (const bifold::PredictionRecord& rec : data.predictions.records()) {
        // tumor rows always right, notumor rows always wrong
        CHECK(argmax_of(rec.probabilities) == 0);
    }
}

TEST_CASE("generation validates the spec") {
    SyntheticSpec spec = detection_spec(1);
    spec.models.clear();
    expect_error(ErrorCode::InvalidSpec, [&] { bifold::generate(spec); });

    spec = detection_spec(1);
    spec.counts.clear();
    expect_error(ErrorCode::InvalidSpec, [&] { bifold::generate(spec); });

    spec = detection_spec(1);
    spec.models[0].per_class_correct = {0.9, 0.8, 0.7};
    expect_error(ErrorCode::InvalidSpec, [&] { bifold::generate(spec); });

    spec = detection_spec(1);
    spec.models[0].per_class_correct = {1.0001};
    expect_error(ErrorCode::InvalidSpec, [&] { bifold::generate(spec); });

    spec = detection_spec(1);
    spec.models[0].concentration = 0.0;
    expect_error(ErrorCode::InvalidSpec, [&] { bifold::generate(spec); });

    spec = detection_spec(1);
    spec.models[1].model_id = "m1";
    expect_error(ErrorCode::DuplicateRecord, [&] { bifold::generate(spec); });
}

TEST_CASE("degrading a model swaps its winners in place") {
    SyntheticData data = bifold::generate(detection_spec(17));

    PredictionTable untouched = bifold::perturb(data.predictions, "m1", 0.0, 99);
    for (std::size_t i = 0; i < data.predictions.size(); ++i)
        CHECK(untouched.records()[i].probabilities.values() ==
              data.predictions.records()[i].probabilities.values());

    PredictionTable wrecked = bifold::perturb(data.predictions, "m1", 1.0, 99);
    REQUIRE(wrecked.size() == data.predictions.size());
    for (std::size_t i = 0; i < data.predictions.size(); ++i) {
        const bifold::PredictionRecord& before = data.predictions.records()[i];
        const bifold::PredictionRecord& after = wrecked.records()[i];
        if (before.model_id != "m1") {
            CHECK(after.probabilities.values() == before.probabilities.values());
            continue;
        }
        CHECK(argmax_of(after.probabilities) != argmax_of(before.probabilities));
    }

    PredictionTable again = bifold::perturb(data.predictions, "m1", 1.0, 99);
    for (std::size_t i = 0; i < wrecked.size(); ++i)
        CHECK(again.records()[i].probabilities.values() ==
              wrecked.records()[i].probabilities.values());

    expect_error(ErrorCode::UnknownModel,
                 [&] { bifold::perturb(data.predictions, "nope", 0.5, 1); });
    expect_error(ErrorCode::InvalidSpec,
                 [&] { bifold::perturb(data.predictions, "m1", 1.5, 1); });
}

TEST_CASE("simulation specs load sections with derived seeds") {
    std::string path = write_file("spec.json", R"({
        "seed": 100,
        "detection": {
            "instances": {"glioma": 5, "notumor": 5},
            "models": [{"model_id": "m1", "correct": 0.9}]
        },
        "classification": {
            "instances": {"glioma": 5, "meningioma": 5},
            "models": [{"model_id": "m1", "correct": [0.9, 0.8, 0.7], "concentration": 2.5}]
        }
    })");
    bifold::SimulationSpec spec = bifold::load_simulation_spec(path);
    REQUIRE(spec.detection.has_value());
    REQUIRE(spec.classification.has_value());
    CHECK(spec.detection->seed == 100);
    CHECK(spec.classification->seed == 101);
    CHECK(spec.detection->counts.at(FinalLabel::notumor) == 5);
    CHECK(spec.classification->models[0].per_class_correct.size() == 3);
    CHECK(spec.classification->models[0].concentration == 2.5);

    bifold::SimulationSpec overridden = bifold::load_simulation_spec(path, 500);
    CHECK(overridden.detection->seed == 500);
    CHECK(overridden.classification->seed == 501);

    std::string own_seed = write_file("own_seed.json", R"({
        "seed": 100,
        "detection": {
            "seed": 7,
            "instances": {"notumor": 5},
            "models": [{"model_id": "m1", "correct": 0.9}]
        }
    })");
    CHECK(bifold::load_simulation_spec(own_seed).detection->seed == 7);
    CHECK(bifold::load_simulation_spec(own_seed, 500).detection->seed == 7);
}

TEST_CASE("simulation spec validation rejects malformed files") {
    expect_error(ErrorCode::InvalidSpec,
                 [&] { bifold::load_simulation_spec(write_file("garbage.json", "nope")); });
    expect_error(ErrorCode::InvalidSpec,
                 [&] { bifold::load_simulation_spec(write_file("nosections.json", R"({"seed": 1})")); });
    expect_error(ErrorCode::InvalidSpec, [&] {
        bifold::load_simulation_spec(write_file("unknown.json", R"({"bogus": 1})"));
    });
    expect_error(ErrorCode::InvalidSpec, [&] {
        bifold::load_simulation_spec(write_file("nomodels.json", R"({
            "detection": {"instances": {"notumor": 5}, "models": []}
        })"));
    });
    expect_error(ErrorCode::InvalidSpec, [&] {
        bifold::load_simulation_spec(write_file("negcount.json", R"({
            "detection": {"instances": {"notumor": -5},
                          "models": [{"model_id": "m1", "correct": 0.9}]}
        })"));
    });
    expect_error(ErrorCode::UnknownLabel, [&] {
        bifold::load_simulation_spec(write_file("badlabel.json", R"({
            "detection": {"instances": {"sarcoma": 5},
                          "models": [{"model_id": "m1", "correct": 0.9}]}
        })"));
    });
    expect_error(ErrorCode::InvalidSpec, [&] {
        bifold::load_simulation_spec(write_file("badcorrect.json", R"({
            "detection": {"instances": {"notumor": 5},
                          "models": [{"model_id": "m1", "correct": "high"}]}
        })"));
    });
    expect_error(ErrorCode::Io, [] { bifold::load_simulation_spec("/nonexistent/spec.json"); });
}
