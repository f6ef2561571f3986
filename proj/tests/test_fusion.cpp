#include <vector>

#include "bifold/fusion.hpp"
#include "bifold/simulate.hpp"
#include "oracles.hpp"
#include "support.hpp"

using bifold::ErrorCode;
using bifold::FusionResult;
using bifold::Method;
using bifold::ModelProfile;
using bifold::ProbabilityVector;
using bifold::Stage;
using bifold::WeightVector;
using Catch::Matchers::WithinAbs;
using oracle::make_probs;

namespace {

const std::vector<ProbabilityVector> kBinaryTrio{
    make_probs({0.8, 0.2}),
    make_probs({0.7, 0.3}),
    make_probs({0.1, 0.9}),
};

} // namespace

TEST_CASE("soft vote averages the model probabilities") {
    FusionResult r = bifold::soft_vote(kBinaryTrio);
    CHECK(r.method == Method::soft);
    CHECK(r.predicted_class == 0);
    CHECK_FALSE(r.tie_broken);
    CHECK_FALSE(r.winning_model.has_value());
    CHECK_THAT(r.fused_scores[0], WithinAbs(1.6 / 3.0, 1e-12));
    CHECK_THAT(r.fused_scores[1], WithinAbs(1.4 / 3.0, 1e-12));
}

TEST_CASE("weighted soft vote can overturn the unweighted winner") {
    WeightVector w(Stage::detection, {0.2, 0.2, 0.6});
    FusionResult r = bifold::weighted_soft_vote(kBinaryTrio, w);
    CHECK(r.method == Method::uwm);
    CHECK(r.predicted_class == 1);
    CHECK_THAT(r.fused_scores[0], WithinAbs(0.36, 1e-12));
    CHECK_THAT(r.fused_scores[1], WithinAbs(0.64, 1e-12));
}

TEST_CASE("weighted soft vote handles three classes") {
    std::vector<ProbabilityVector> preds{
        make_probs({0.5, 0.3, 0.2}),
        make_probs({0.2, 0.5, 0.3}),
        make_probs({0.1, 0.2, 0.7}),
    };
    FusionResult r = bifold::weighted_soft_vote(preds, WeightVector::uniform(Stage::classification, 3));
    CHECK(r.predicted_class == 2);
    CHECK_THAT(r.fused_scores[0], WithinAbs(0.8 / 3.0, 1e-12));
    CHECK_THAT(r.fused_scores[1], WithinAbs(1.0 / 3.0, 1e-12));
    CHECK_THAT(r.fused_scores[2], WithinAbs(1.2 / 3.0, 1e-12));
}

TEST_CASE("uniform weighted soft vote equals the unweighted soft vote") {
    bifold::Rng rng(303);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t models = 1 + rng.uniform_index(5);
        std::size_t k = 2 + rng.uniform_index(3);
        std::vector<ProbabilityVector> preds;
        for (std::size_t m = 0; m < models; ++m)
            preds.push_back(oracle::random_distribution(rng, k));
        FusionResult plain = bifold::soft_vote(preds);
        FusionResult weighted =
            bifold::weighted_soft_vote(preds, WeightVector::uniform(Stage::detection, models));
        CHECK(plain.predicted_class == weighted.predicted_class);
        for (std::size_t c = 0; c < k; ++c)
            CHECK_THAT(plain.fused_scores[c], WithinAbs(weighted.fused_scores[c], 1e-12));
    }
}

TEST_CASE("run averaging is the per-class mean") {
    std::vector<ProbabilityVector> runs{make_probs({0.9, 0.1}), make_probs({0.2, 0.8})};
    ProbabilityVector mean = bifold::average_runs(runs);
    CHECK_THAT(mean[0], WithinAbs(0.55, 1e-12));
    CHECK_THAT(mean[1], WithinAbs(0.45, 1e-12));
    expect_error(ErrorCode::MissingPredictions,
                 [] { bifold::average_runs(std::vector<ProbabilityVector>{}); });
}

TEST_CASE("hard vote counts per-model winners") {
    std::vector<ProbabilityVector> preds{
        make_probs({0.6, 0.4}),
        make_probs({0.9, 0.1}),
        make_probs({0.2, 0.8}),
    };
    FusionResult r = bifold::hard_vote(preds);
    CHECK(r.method == Method::hard);
    CHECK(r.predicted_class == 0);
    CHECK_FALSE(r.tie_broken);
    CHECK_THAT(r.fused_scores[0], WithinAbs(2.0 / 3.0, 1e-12));
    CHECK_THAT(r.fused_scores[1], WithinAbs(1.0 / 3.0, 1e-12));
}

TEST_CASE("hard vote flags a modal tie and keeps the first class") {
    std::vector<ProbabilityVector> preds{
        make_probs({0.6, 0.4}),
        make_probs({0.2, 0.8}),
    };
    FusionResult r = bifold::hard_vote(preds);
    CHECK(r.predicted_class == 0);
    CHECK(r.tie_broken);
}

TEST_CASE("F1-weighted fusion derives its weights from the profiles") {
    std::vector<ModelProfile> profiles{
        ModelProfile::from_average("a", Stage::detection, 0.3),
        ModelProfile::from_average("b", Stage::detection, 0.3),
        ModelProfile::from_average("c", Stage::detection, 0.9),
    };
    FusionResult r = bifold::esvt_fuse(kBinaryTrio, profiles);
    CHECK(r.method == Method::esvt);
    CHECK(r.predicted_class == 1);           // weights collapse to 0.2/0.2/0.6
    CHECK_THAT(r.fused_scores[1], WithinAbs(0.64, 1e-12));
    expect_error(ErrorCode::ShapeMismatch, [&] {
        bifold::esvt_fuse(kBinaryTrio, std::vector<ModelProfile>(profiles.begin(),
                                                                 profiles.begin() + 2));
    });
}

TEST_CASE("max-entry fusion picks the largest weighted entry") {
    WeightVector w(Stage::detection, {0.2, 0.2, 0.6});
    // Weighted grid: [0.16 0.04 | 0.14 0.06 | 0.06 0.54]; 0.54 wins.
    FusionResult r = bifold::nwm_fuse(kBinaryTrio, w);
    CHECK(r.method == Method::nwm);
    CHECK(r.predicted_class == 1);
    REQUIRE(r.winning_model.has_value());
    CHECK(*r.winning_model == 2);
    CHECK_FALSE(r.tie_broken);
    CHECK_THAT(r.fused_scores[0], WithinAbs(0.16, 1e-12));
    CHECK_THAT(r.fused_scores[1], WithinAbs(0.54, 1e-12));
}

TEST_CASE("max-entry fusion can disagree with the weighted soft vote") {
    std::vector<ProbabilityVector> preds{
        make_probs({0.92, 0.08}),
        make_probs({0.1, 0.9}),
        make_probs({0.1, 0.9}),
    };
    WeightVector w = WeightVector::uniform(Stage::detection, 3);
    FusionResult averaged = bifold::weighted_soft_vote(preds, w);
    FusionResult peak = bifold::nwm_fuse(preds, w);
    CHECK(averaged.predicted_class == 1);
    CHECK(peak.predicted_class == 0);        // 0.92/3 beats 0.9/3
    CHECK(*peak.winning_model == 0);
}

TEST_CASE("flat index decoding is model-major") {
    // Three models, two classes: class 0 entries sit at flats 0, 2, 4.
    for (std::size_t model = 0; model < 3; ++model) {
        bifold::NwmIndex idx = bifold::decode_flat_index(model * 2, 2);
        CHECK(idx.model == model);
        CHECK(idx.cls == 0);
    }
    // Three models, three classes: class 0 entries sit at flats 0, 3, 6.
    for (std::size_t model = 0; model < 3; ++model) {
        bifold::NwmIndex idx = bifold::decode_flat_index(model * 3, 3);
        CHECK(idx.model == model);
        CHECK(idx.cls == 0);
    }
    bifold::NwmIndex idx = bifold::decode_flat_index(5, 2);
    CHECK(idx.model == 2);
    CHECK(idx.cls == 1);
    expect_error(ErrorCode::ShapeMismatch, [] { bifold::decode_flat_index(3, 0); });
}

TEST_CASE("max-entry fusion ties report the first flat entry") {
    std::vector<ProbabilityVector> preds{
        make_probs({0.5, 0.5}),
        make_probs({0.5, 0.5}),
    };
    FusionResult r = bifold::nwm_fuse(preds, WeightVector::uniform(Stage::detection, 2));
    CHECK(r.tie_broken);
    CHECK(r.predicted_class == 0);
    CHECK(*r.winning_model == 0);
}

TEST_CASE("max-entry fusion matches an exhaustive scan") {
    bifold::Rng rng(404);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t models = 1 + rng.uniform_index(5);
        std::size_t k = 2 + rng.uniform_index(3);
        std::vector<ProbabilityVector> preds;
        for (std::size_t m = 0; m < models; ++m)
            preds.push_back(oracle::random_distribution(rng, k));
        std::vector<double> weights(models, 0.0);
        double sum = 0.0;
        for (double& v : weights) { v = rng.uniform() + 0.01; sum += v; }
        for (double& v : weights) v /= sum;

        WeightVector w(Stage::detection, weights);
        FusionResult r = bifold::nwm_fuse(preds, w);
        oracle::NwmExpectation expect = oracle::nwm_scan(preds, weights);
        CHECK(r.predicted_class == expect.cls);
        CHECK(*r.winning_model == expect.model);
        CHECK(r.tie_broken == expect.tie);
        for (std::size_t c = 0; c < k; ++c)
            CHECK_THAT(r.fused_scores[c], WithinAbs(expect.per_class_max[c], 0.0));
    }
}

TEST_CASE("fusion rejects malformed input") {
    expect_error(ErrorCode::MissingPredictions,
                 [] { bifold::soft_vote(std::vector<ProbabilityVector>{}); });
    std::vector<ProbabilityVector> mixed{make_probs({0.5, 0.5}), make_probs({0.2, 0.3, 0.5})};
    expect_error(ErrorCode::ShapeMismatch, [&] { bifold::soft_vote(mixed); });
    expect_error(ErrorCode::ShapeMismatch, [&] {
        bifold::weighted_soft_vote(kBinaryTrio, WeightVector::uniform(Stage::detection, 2));
    });
    expect_error(ErrorCode::ShapeMismatch, [&] {
        bifold::nwm_fuse(kBinaryTrio, WeightVector::uniform(Stage::detection, 2));
    });
}
