#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "tcnids/pipeline.hpp"

using tcnids::CategoricalColumn;
using tcnids::ChiSquaredRanking;
using tcnids::Column;
using tcnids::EncodingMap;
using tcnids::FeatureMatrix;
using tcnids::Fixture;
using tcnids::FixtureConfig;
using tcnids::LoadedCsv;
using tcnids::NumericColumn;
using tcnids::PipelineConfig;
using tcnids::PipelineResult;
using tcnids::RawTable;
using tcnids::Rng;
using tcnids::ScalerParams;
using tcnids::Tensor;

namespace {

Column numeric_col(std::string name, std::vector<double> values) {
    Column c;
    c.name = std::move(name);
    c.data = NumericColumn{std::move(values)};
    return c;
}

Column text_col(std::string name, std::vector<std::string> values) {
    Column c;
    c.name = std::move(name);
    c.data = CategoricalColumn{std::move(values)};
    return c;
}

FeatureMatrix matrix(std::vector<std::string> names, std::size_t rows,
                     std::vector<double> values) {
    FeatureMatrix m;
    m.data = Tensor({rows, names.size()}, std::move(values));
    m.names = std::move(names);
    return m;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

double chi2_stat_for(const ChiSquaredRanking& ranking, const std::string& name) {
    for (const auto& [n, s] : ranking.entries) {
        if (n == name) return s;
    }
    ADD_FAILURE() << "feature '" << name << "' not ranked";
    return -1.0;
}

// Plain contingency-style evaluation via the algebraic identity
// sum((O-E)^2/E) = sum(O^2/E) - T, kept deliberately different from the
// library's accumulation order.
double chi2_oracle(const FeatureMatrix& X, const std::vector<int>& y, std::size_t classes,
                   std::size_t feature) {
    std::vector<double> mass(classes, 0.0);
    std::vector<double> prior(classes, 0.0);
    for (int label : y) prior[static_cast<std::size_t>(label)] += 1.0;
    for (double& p : prior) p /= static_cast<double>(y.size());
    double total = 0.0;
    for (std::size_t r = 0; r < X.rows(); ++r) {
        mass[static_cast<std::size_t>(y[r])] += X.data(r, feature);
        total += X.data(r, feature);
    }
    if (total == 0.0) return 0.0;
    double acc = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (prior[c] > 0.0) acc += mass[c] * mass[c] / (prior[c] * total);
    }
    return acc - total;
}

}  // namespace

// ---------------------------------------------------------------------------
// one-hot encoding
// ---------------------------------------------------------------------------

TEST(Encoding, TwoCategoryColumnExpands) {
    RawTable t;
    t.rows = 3;
    t.columns.push_back(text_col("proto", {"a", "b", "a"}));
    auto [X, map] = tcnids::encode_categoricals(t, 24);
    ASSERT_EQ(X.names, (std::vector<std::string>{"proto_0", "proto_1", "proto_rare"}));
    EXPECT_DOUBLE_EQ(X.data(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(X.data(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(X.data(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(X.data(1, 1), 1.0);
    EXPECT_DOUBLE_EQ(X.data(2, 0), 1.0);
    for (std::size_t r = 0; r < 3; ++r) EXPECT_DOUBLE_EQ(X.data(r, 2), 0.0);
}

TEST(Encoding, IndicatorRowsSumToOne) {
    RawTable t;
    t.rows = 5;
    t.columns.push_back(text_col("a", {"x", "y", "z", "x", "w"}));
    t.columns.push_back(text_col("b", {"p", "p", "q", "q", "p"}));
    auto [X, map] = tcnids::encode_categoricals(t, 3);
    // Columns of a: 3 indicators + rare; columns of b: 2 indicators + rare.
    ASSERT_EQ(X.names.size(), 7u);
    for (std::size_t r = 0; r < 5; ++r) {
        double sum_a = 0.0, sum_b = 0.0;
        for (std::size_t f = 0; f < 4; ++f) sum_a += X.data(r, f);
        for (std::size_t f = 4; f < 7; ++f) sum_b += X.data(r, f);
        EXPECT_DOUBLE_EQ(sum_a, 1.0);
        EXPECT_DOUBLE_EQ(sum_b, 1.0);
    }
}

TEST(Encoding, FrequencyRankedWithNameTiebreak) {
    RawTable t;
    t.rows = 4;
    t.columns.push_back(text_col("c", {"b", "b", "z", "a"}));
    EncodingMap map = tcnids::fit_encoding(t, iota_indices(4), 2);
    ASSERT_EQ(map.encodings.size(), 1u);
    // b wins on frequency; a beats z on the name tiebreak; z goes rare.
    EXPECT_EQ(map.encodings[0].categories, (std::vector<std::string>{"b", "a"}));
    FeatureMatrix X = tcnids::apply_encoding(t, map);
    EXPECT_DOUBLE_EQ(X.data(2, 2), 1.0);  // z lands in c_rare
}

TEST(Encoding, UnseenCategoryGoesToRareBucket) {
    RawTable fit_t;
    fit_t.rows = 2;
    fit_t.columns.push_back(text_col("c", {"a", "b"}));
    EncodingMap map = tcnids::fit_encoding(fit_t, iota_indices(2), 24);

    RawTable apply_t;
    apply_t.rows = 1;
    apply_t.columns.push_back(text_col("c", {"never_seen"}));
    FeatureMatrix X = tcnids::apply_encoding(apply_t, map);
    EXPECT_DOUBLE_EQ(X.data(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(X.data(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(X.data(0, 2), 1.0);
}

TEST(Encoding, NumericColumnsPassThrough) {
    RawTable t;
    t.rows = 2;
    t.columns.push_back(numeric_col("n", {1.5, 2.5}));
    t.columns.push_back(text_col("c", {"a", "a"}));
    auto [X, map] = tcnids::encode_categoricals(t, 24);
    ASSERT_EQ(X.names[0], "n");
    EXPECT_DOUBLE_EQ(X.data(1, 0), 2.5);
}

TEST(Encoding, RejectsTinyMaxCategories) {
    RawTable t;
    t.rows = 1;
    t.columns.push_back(text_col("c", {"a"}));
    EXPECT_THROW(tcnids::fit_encoding(t, iota_indices(1), 1), tcnids::ArgumentError);
}

TEST(Encoding, ApplyWithoutFitThrows) {
    RawTable t;
    t.rows = 1;
    t.columns.push_back(text_col("c", {"a"}));
    EXPECT_THROW(tcnids::apply_encoding(t, EncodingMap{}), tcnids::ArgumentError);
}

// ---------------------------------------------------------------------------
// chi-squared ranking
// ---------------------------------------------------------------------------

TEST(ChiSquared, ConstantFeatureScoresExactlyZero) {
    FeatureMatrix X = matrix({"ones"}, 4, {1, 1, 1, 1});
    auto ranking = tcnids::chi2_rank(X, {0, 1, 0, 1}, 2);
    EXPECT_EQ(ranking.entries[0].second, 0.0);
}

TEST(ChiSquared, HandComputedTwoRowExample) {
    FeatureMatrix X = matrix({"f"}, 2, {2, 0});
    auto ranking = tcnids::chi2_rank(X, {0, 1}, 2);
    // Priors 1/2 each, total mass 2, E = [1,1]: (2-1)^2 + (0-1)^2 = 2.
    EXPECT_NEAR(ranking.entries[0].second, 2.0, 1e-12);
}

TEST(ChiSquared, MatchesOracleOnRandomMatrices) {
    Rng rng(555);
    const std::size_t rows = 50, feats = 8, classes = 4;
    std::vector<std::string> names;
    for (std::size_t f = 0; f < feats; ++f) names.push_back("f" + std::to_string(f));
    std::vector<double> values(rows * feats);
    for (double& v : values) v = rng.uniform(0.0, 2.0);
    FeatureMatrix X = matrix(names, rows, values);
    std::vector<int> y(rows);
    for (int& l : y) l = static_cast<int>(rng.below(classes));

    auto ranking = tcnids::chi2_rank(X, y, classes);
    for (std::size_t f = 0; f < feats; ++f) {
        const double expect = chi2_oracle(X, y, classes, f);
        EXPECT_NEAR(chi2_stat_for(ranking, names[f]), expect, 1e-9) << names[f];
    }
    // Returned order is non-increasing.
    for (std::size_t i = 1; i < ranking.entries.size(); ++i) {
        EXPECT_GE(ranking.entries[i - 1].second, ranking.entries[i].second);
    }
}

TEST(ChiSquared, RowOrderDoesNotMatter) {
    Rng rng(808);
    const std::size_t rows = 40;
    std::vector<double> a(rows), b(rows);
    std::vector<int> y(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        y[i] = static_cast<int>(rng.below(3));
        a[i] = rng.uniform(0.0, 1.0) + y[i];
        b[i] = rng.uniform(0.0, 1.0);
    }
    std::vector<double> packed;
    for (std::size_t i = 0; i < rows; ++i) {
        packed.push_back(a[i]);
        packed.push_back(b[i]);
    }
    FeatureMatrix X = matrix({"a", "b"}, rows, packed);
    auto base = tcnids::chi2_rank(X, y, 3);

    std::vector<std::size_t> perm = iota_indices(rows);
    Rng shuffle_rng(9);
    tcnids::fisher_yates_shuffle(perm, shuffle_rng);
    std::vector<double> packed2;
    std::vector<int> y2;
    for (std::size_t i : perm) {
        packed2.push_back(a[i]);
        packed2.push_back(b[i]);
        y2.push_back(y[i]);
    }
    FeatureMatrix X2 = matrix({"a", "b"}, rows, packed2);
    auto permuted = tcnids::chi2_rank(X2, y2, 3);

    ASSERT_EQ(base.entries.size(), permuted.entries.size());
    for (std::size_t i = 0; i < base.entries.size(); ++i) {
        EXPECT_EQ(base.entries[i].first, permuted.entries[i].first);
        EXPECT_NEAR(base.entries[i].second, permuted.entries[i].second, 1e-9);
    }
}

TEST(ChiSquared, NegativeValueNamesTheFeature) {
    FeatureMatrix X = matrix({"ok", "bad"}, 2, {1, -0.5, 1, 1});
    try {
        tcnids::chi2_rank(X, {0, 1}, 2);
        FAIL() << "expected ArgumentError";
    } catch (const tcnids::ArgumentError& e) {
        EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
    }
}

TEST(ChiSquared, SelectTopK) {
    FeatureMatrix X = matrix({"low", "high"}, 2, {1, 2, 1, 0});
    auto ranking = tcnids::chi2_rank(X, {0, 1}, 2);
    EXPECT_TRUE(tcnids::select_top_k(ranking, 0).empty());
    EXPECT_EQ(tcnids::select_top_k(ranking, 1), std::vector<std::string>{"high"});
    EXPECT_EQ(tcnids::select_top_k(ranking, 2), (std::vector<std::string>{"high", "low"}));
    EXPECT_EQ(tcnids::select_top_k(ranking, 99).size(), 2u);
}

TEST(ChiSquared, SelectFeaturesProjectsColumns) {
    FeatureMatrix X = matrix({"a", "b", "c"}, 2, {1, 2, 3, 4, 5, 6});
    FeatureMatrix picked = tcnids::select_features(X, {"c", "a"});
    EXPECT_EQ(picked.names, (std::vector<std::string>{"c", "a"}));
    EXPECT_DOUBLE_EQ(picked.data(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(picked.data(1, 1), 4.0);
    EXPECT_THROW(tcnids::select_features(X, {"ghost"}), tcnids::ArgumentError);
}

// ---------------------------------------------------------------------------
// stratified sampling
// ---------------------------------------------------------------------------

TEST(StratifiedSample, FullFractionIsIdentity) {
    std::vector<int> labels = {0, 1, 0, 2, 1};
    Rng rng(3);
    auto keep = tcnids::stratified_sample_indices(labels, 3, 1.0, rng);
    EXPECT_EQ(keep, iota_indices(5));
}

TEST(StratifiedSample, QuarterOfHundredAndTwenty) {
    std::vector<int> labels;
    labels.insert(labels.end(), 100, 0);
    labels.insert(labels.end(), 20, 1);
    Rng rng(11);
    auto keep = tcnids::stratified_sample_indices(labels, 2, 0.25, rng);
    std::size_t c0 = 0, c1 = 0;
    for (std::size_t i : keep) (labels[i] == 0 ? c0 : c1)++;
    EXPECT_EQ(c0, 25u);
    EXPECT_EQ(c1, 5u);
}

TEST(StratifiedSample, TinyClassKeepsAtLeastOneRow) {
    std::vector<int> labels = {0, 0, 0, 0, 0, 0, 0, 0, 1};
    Rng rng(7);
    auto keep = tcnids::stratified_sample_indices(labels, 2, 0.1, rng);
    // round(0.1*8)=1 for class 0, round(0.1*1)=0 bumped to the 1 minimum.
    EXPECT_EQ(keep.size(), 2u);
    EXPECT_EQ(keep.back(), 8u);
}

TEST(StratifiedSample, SharesStayProportional) {
    FixtureConfig cfg;
    cfg.per_class = 300;
    Rng fixture_rng(21);
    Fixture fx = tcnids::generate_fixture(cfg, fixture_rng);
    Rng rng(22);
    auto keep = tcnids::stratified_sample_indices(fx.labels, 15, 0.25, rng);
    std::map<int, std::size_t> counts;
    for (std::size_t i : keep) ++counts[fx.labels[i]];
    for (const auto& [label, count] : counts) {
        EXPECT_EQ(count, 75u) << "class " << label;
    }
    EXPECT_TRUE(std::is_sorted(keep.begin(), keep.end()));
}

TEST(StratifiedSample, RejectsBadFraction) {
    std::vector<int> labels = {0};
    Rng rng(1);
    EXPECT_THROW(tcnids::stratified_sample_indices(labels, 1, 0.0, rng),
                 tcnids::ArgumentError);
    EXPECT_THROW(tcnids::stratified_sample_indices(labels, 1, 1.5, rng),
                 tcnids::ArgumentError);
}

TEST(StratifiedSample, TableWrapperGathersRows) {
    RawTable t;
    t.rows = 4;
    t.columns.push_back(numeric_col("v", {10, 11, 12, 13}));
    std::vector<int> labels = {0, 0, 1, 1};
    Rng rng(5);
    auto sampled = tcnids::stratified_sample(t, labels, 2, 1.0, rng);
    EXPECT_EQ(sampled.table.rows, 4u);
    EXPECT_EQ(sampled.labels, labels);
}

// ---------------------------------------------------------------------------
// stratified split
// ---------------------------------------------------------------------------

TEST(StratifiedSplit, TenRowsSplitSevenOneTwo) {
    std::vector<int> labels(10, 0);
    Rng rng(17);
    auto parts = tcnids::stratified_split_indices(labels, 1, {0.7, 0.1, 0.2}, rng);
    EXPECT_EQ(parts.train.size(), 7u);
    EXPECT_EQ(parts.validation.size(), 1u);
    EXPECT_EQ(parts.test.size(), 2u);
}

TEST(StratifiedSplit, PartitionsAreDisjointAndExhaustive) {
    Rng label_rng(23);
    std::vector<int> labels(500);
    for (int& l : labels) l = static_cast<int>(label_rng.below(5));
    Rng rng(29);
    auto parts = tcnids::stratified_split_indices(labels, 5, {0.7, 0.1, 0.2}, rng);
    std::vector<std::size_t> all;
    all.insert(all.end(), parts.train.begin(), parts.train.end());
    all.insert(all.end(), parts.validation.begin(), parts.validation.end());
    all.insert(all.end(), parts.test.begin(), parts.test.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, iota_indices(500));
}

TEST(StratifiedSplit, LargestRemainderOnNormalClassCount) {
    std::vector<int> labels(349906, 0);
    Rng rng(31);
    auto parts = tcnids::stratified_split_indices(labels, 1, {0.7, 0.1, 0.2}, rng);
    EXPECT_EQ(parts.train.size(), 244934u);
    EXPECT_EQ(parts.validation.size(), 34991u);
    EXPECT_EQ(parts.test.size(), 69981u);
}

TEST(StratifiedSplit, TinyClassGoesEntirelyToTrain) {
    std::vector<int> labels = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1};
    Rng rng(37);
    auto parts = tcnids::stratified_split_indices(labels, 2, {0.7, 0.1, 0.2}, rng);
    std::size_t train_ones = 0;
    for (std::size_t i : parts.train) train_ones += labels[i] == 1;
    EXPECT_EQ(train_ones, 2u);
    ASSERT_EQ(parts.warnings.size(), 1u);
    EXPECT_NE(parts.warnings[0].find("class 1"), std::string::npos);
}

TEST(StratifiedSplit, RejectsFractionsNotSummingToOne) {
    std::vector<int> labels = {0};
    Rng rng(1);
    EXPECT_THROW(tcnids::stratified_split_indices(labels, 1, {0.5, 0.1, 0.2}, rng),
                 tcnids::ArgumentError);
    EXPECT_THROW(tcnids::stratified_split_indices(labels, 1, {0.8, 0.0, 0.2}, rng),
                 tcnids::ArgumentError);
}

// ---------------------------------------------------------------------------
// scaler
// ---------------------------------------------------------------------------

TEST(Scaler, HandComputedTwoRowColumn) {
    FeatureMatrix X = matrix({"f"}, 2, {0, 2});
    ScalerParams params = tcnids::fit_scaler(X);
    EXPECT_DOUBLE_EQ(params.means[0], 1.0);
    EXPECT_DOUBLE_EQ(params.stds[0], 1.0);
    FeatureMatrix scaled = tcnids::apply_scaler(params, X);
    EXPECT_DOUBLE_EQ(scaled.data(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(scaled.data(1, 0), 1.0);
}

TEST(Scaler, ConstantColumnMapsToZeroAndIsFlagged) {
    FeatureMatrix X = matrix({"c", "v"}, 3, {5, 1, 5, 2, 5, 3});
    ScalerParams params = tcnids::fit_scaler(X);
    EXPECT_EQ(params.constant_features(), std::vector<std::string>{"c"});
    FeatureMatrix scaled = tcnids::apply_scaler(params, X);
    for (std::size_t r = 0; r < 3; ++r) EXPECT_DOUBLE_EQ(scaled.data(r, 0), 0.0);
}

TEST(Scaler, TransformedTrainIsStandardized) {
    Rng rng(61);
    const std::size_t rows = 200, feats = 5;
    std::vector<double> values(rows * feats);
    for (double& v : values) v = rng.uniform(-3.0, 9.0);
    std::vector<std::string> names;
    for (std::size_t f = 0; f < feats; ++f) names.push_back("f" + std::to_string(f));
    FeatureMatrix X = matrix(names, rows, values);
    FeatureMatrix scaled = tcnids::apply_scaler(tcnids::fit_scaler(X), X);
    for (std::size_t f = 0; f < feats; ++f) {
        double mean = 0.0;
        for (std::size_t r = 0; r < rows; ++r) mean += scaled.data(r, f);
        mean /= rows;
        double var = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            var += (scaled.data(r, f) - mean) * (scaled.data(r, f) - mean);
        }
        var /= rows;
        EXPECT_LT(std::fabs(mean), 1e-9);
        EXPECT_LT(std::fabs(std::sqrt(var) - 1.0), 1e-9);
    }
}

TEST(Scaler, NameMismatchAtApplyThrows) {
    FeatureMatrix X = matrix({"a"}, 1, {1});
    ScalerParams params = tcnids::fit_scaler(X);
    FeatureMatrix other = matrix({"b"}, 1, {1});
    EXPECT_THROW(tcnids::apply_scaler(params, other), tcnids::ArgumentError);
}

TEST(Scaler, RefusesEmptyFit) {
    FeatureMatrix X;
    X.names = {"a"};
    EXPECT_THROW(tcnids::fit_scaler(X), tcnids::ArgumentError);
}

// ---------------------------------------------------------------------------
// fixture generator
// ---------------------------------------------------------------------------

TEST(Fixture, SameSeedSameBytes) {
    FixtureConfig cfg;
    cfg.per_class = 20;
    Rng a(99), b(99);
    Fixture fa = tcnids::generate_fixture(cfg, a);
    Fixture fb = tcnids::generate_fixture(cfg, b);
    ASSERT_EQ(fa.labels, fb.labels);
    ASSERT_EQ(fa.table.cols(), fb.table.cols());
    for (std::size_t c = 0; c < fa.table.cols(); ++c) {
        if (fa.table.columns[c].is_numeric()) {
            EXPECT_EQ(fa.table.columns[c].numeric(), fb.table.columns[c].numeric());
        } else {
            EXPECT_EQ(fa.table.columns[c].categorical(), fb.table.columns[c].categorical());
        }
    }
}

TEST(Fixture, LabelsAreShuffledNotGrouped) {
    FixtureConfig cfg;
    cfg.per_class = 50;
    Rng rng(5);
    Fixture fx = tcnids::generate_fixture(cfg, rng);
    std::set<int> first_thirty(fx.labels.begin(), fx.labels.begin() + 30);
    EXPECT_GT(first_thirty.size(), 1u);
}

TEST(Fixture, SeparatedClassesAreNearestCentroidLearnable) {
    FixtureConfig cfg;
    cfg.per_class = 300;
    cfg.separation = 4.0;
    Rng rng(123);
    Fixture fx = tcnids::generate_fixture(cfg, rng);

    const std::size_t n = fx.labels.size();
    std::vector<std::vector<double>> centroid(15,
                                              std::vector<double>(cfg.numeric_features, 0.0));
    std::vector<std::size_t> counts(15, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(fx.labels[i]);
        ++counts[c];
        for (std::size_t f = 0; f < cfg.numeric_features; ++f) {
            centroid[c][f] += fx.table.columns[f].numeric()[i];
        }
    }
    for (std::size_t c = 0; c < 15; ++c) {
        for (double& v : centroid[c]) v /= static_cast<double>(counts[c]);
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = 1e300;
        std::size_t arg = 0;
        for (std::size_t c = 0; c < 15; ++c) {
            double d = 0.0;
            for (std::size_t f = 0; f < cfg.numeric_features; ++f) {
                const double diff = fx.table.columns[f].numeric()[i] - centroid[c][f];
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                arg = c;
            }
        }
        hits += arg == static_cast<std::size_t>(fx.labels[i]);
    }
    EXPECT_GE(static_cast<double>(hits) / static_cast<double>(n), 0.95);
}

TEST(Fixture, ZeroSeparationCarriesNoSignal) {
    FixtureConfig cfg;
    cfg.per_class = 300;
    cfg.separation = 0.0;
    Rng rng(321);
    Fixture fx = tcnids::generate_fixture(cfg, rng);

    // Same nearest-centroid probe; with identical class distributions it can
    // only chase noise.
    const std::size_t n = fx.labels.size();
    std::vector<std::vector<double>> centroid(15,
                                              std::vector<double>(cfg.numeric_features, 0.0));
    std::vector<std::size_t> counts(15, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(fx.labels[i]);
        ++counts[c];
        for (std::size_t f = 0; f < cfg.numeric_features; ++f) {
            centroid[c][f] += fx.table.columns[f].numeric()[i];
        }
    }
    for (std::size_t c = 0; c < 15; ++c) {
        for (double& v : centroid[c]) v /= static_cast<double>(counts[c]);
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = 1e300;
        std::size_t arg = 0;
        for (std::size_t c = 0; c < 15; ++c) {
            double d = 0.0;
            for (std::size_t f = 0; f < cfg.numeric_features; ++f) {
                const double diff = fx.table.columns[f].numeric()[i] - centroid[c][f];
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                arg = c;
            }
        }
        hits += arg == static_cast<std::size_t>(fx.labels[i]);
    }
    const double accuracy = static_cast<double>(hits) / static_cast<double>(n);
    EXPECT_NEAR(accuracy, 1.0 / 15.0, 0.05);
}

TEST(Fixture, ValuesAreNonNegative) {
    FixtureConfig cfg;
    cfg.per_class = 30;
    Rng rng(77);
    Fixture fx = tcnids::generate_fixture(cfg, rng);
    for (std::size_t f = 0; f < cfg.numeric_features; ++f) {
        for (double v : fx.table.columns[f].numeric()) EXPECT_GE(v, 0.0);
    }
}

TEST(Fixture, RejectsBadConfig) {
    Rng rng(1);
    FixtureConfig cfg;
    cfg.per_class = 0;
    EXPECT_THROW(tcnids::generate_fixture(cfg, rng), tcnids::ArgumentError);
    cfg.per_class = 1;
    cfg.classes = 16;
    EXPECT_THROW(tcnids::generate_fixture(cfg, rng), tcnids::ArgumentError);
    cfg.classes = 15;
    cfg.numeric_features = 0;
    EXPECT_THROW(tcnids::generate_fixture(cfg, rng), tcnids::ArgumentError);
}

TEST(Fixture, LabelColumnHelperAppendsNames) {
    FixtureConfig cfg;
    cfg.per_class = 2;
    cfg.classes = 3;
    Rng rng(4);
    Fixture fx = tcnids::generate_fixture(cfg, rng);
    RawTable t = tcnids::fixture_table_with_labels(fx);
    ASSERT_EQ(t.cols(), cfg.numeric_features + cfg.categorical_features + 1);
    const Column& label = t.columns.back();
    EXPECT_EQ(label.name, "Attack_type");
    for (std::size_t i = 0; i < t.rows; ++i) {
        EXPECT_EQ(label.categorical()[i],
                  fx.vocabulary.name(static_cast<std::size_t>(fx.labels[i])));
    }
}

// ---------------------------------------------------------------------------
// leak guards
// ---------------------------------------------------------------------------

TEST(LeakGuard, TrainOnlyFitDiffersFromFullFit) {
    // Rows 0-3 are "train", rows 4-5 carry a category and a value range the
    // training rows never see.
    RawTable t;
    t.rows = 6;
    t.columns.push_back(numeric_col("v", {1, 2, 3, 4, 100, 200}));
    t.columns.push_back(text_col("c", {"a", "a", "b", "b", "zzz", "zzz"}));
    std::vector<std::size_t> train_rows = {0, 1, 2, 3};

    EncodingMap train_fit = tcnids::fit_encoding(t, train_rows, 24);
    EncodingMap full_fit = tcnids::fit_encoding(t, iota_indices(6), 24);
    EXPECT_NE(train_fit.encodings[0].categories, full_fit.encodings[0].categories);

    FeatureMatrix X = tcnids::apply_encoding(t, train_fit);
    FeatureMatrix train_X = tcnids::take_feature_rows(X, train_rows);
    ScalerParams on_train = tcnids::fit_scaler(train_X);
    ScalerParams on_full = tcnids::fit_scaler(X);
    EXPECT_NE(on_train.means[0], on_full.means[0]);
}

// ---------------------------------------------------------------------------
// driver
// ---------------------------------------------------------------------------

namespace {

LoadedCsv fixture_as_loaded(const Fixture& fx) {
    LoadedCsv loaded;
    loaded.table = tcnids::fixture_table_with_labels(fx);
    loaded.stats.rows_read = loaded.table.rows;
    return loaded;
}

}  // namespace

TEST(Pipeline, EndToEndOnFixture) {
    FixtureConfig fcfg;
    fcfg.per_class = 300;
    Rng rng(2024);
    Fixture fx = tcnids::generate_fixture(fcfg, rng);
    LoadedCsv loaded = fixture_as_loaded(fx);

    PipelineConfig cfg;
    cfg.seed = 7;
    PipelineResult result = tcnids::run_pipeline(loaded, cfg);

    EXPECT_EQ(result.report.rows_in, 4500u);
    EXPECT_EQ(result.report.rows_out, 1125u);  // 0.25 of 300 per class
    EXPECT_EQ(result.report.dropped_rows, 3375u);
    EXPECT_EQ(result.split.train.size(), 795u);       // 53 per class
    EXPECT_EQ(result.split.validation.size(), 105u);  // 7 per class
    EXPECT_EQ(result.split.test.size(), 225u);        // 15 per class
    EXPECT_EQ(result.split.vocabulary.names(), tcnids::edge_iiot_classes());
    EXPECT_FALSE(result.split.feature_names.empty());
    EXPECT_EQ(result.split.train.features.extent(1), result.split.feature_names.size());
    EXPECT_TRUE(result.split.train.features.all_finite());

    // Scaler was fitted on the training partition: train columns are
    // standardized, and at least one feature's pooled mean drifts from zero.
    const std::size_t feats = result.split.feature_names.size();
    double max_train_mean = 0.0, max_pooled_mean = 0.0;
    for (std::size_t f = 0; f < feats; ++f) {
        double train_mean = 0.0;
        for (std::size_t r = 0; r < result.split.train.size(); ++r) {
            train_mean += result.split.train.features(r, f);
        }
        train_mean /= static_cast<double>(result.split.train.size());
        max_train_mean = std::max(max_train_mean, std::fabs(train_mean));

        double pooled = train_mean * static_cast<double>(result.split.train.size());
        for (std::size_t r = 0; r < result.split.validation.size(); ++r) {
            pooled += result.split.validation.features(r, f);
        }
        for (std::size_t r = 0; r < result.split.test.size(); ++r) {
            pooled += result.split.test.features(r, f);
        }
        pooled /= 1125.0;
        max_pooled_mean = std::max(max_pooled_mean, std::fabs(pooled));
    }
    EXPECT_LT(max_train_mean, 1e-9);
    EXPECT_GT(max_pooled_mean, 1e-6);
}

TEST(Pipeline, DeterministicUnderFixedSeed) {
    FixtureConfig fcfg;
    fcfg.per_class = 40;
    fcfg.classes = 5;
    Rng rng(88);
    Fixture fx = tcnids::generate_fixture(fcfg, rng);
    LoadedCsv loaded = fixture_as_loaded(fx);

    PipelineConfig cfg;
    cfg.seed = 5;
    PipelineResult a = tcnids::run_pipeline(loaded, cfg);
    PipelineResult b = tcnids::run_pipeline(loaded, cfg);
    EXPECT_EQ(a.split.train.features.values(), b.split.train.features.values());
    EXPECT_EQ(a.split.test.labels, b.split.test.labels);
    EXPECT_EQ(a.artifacts.selected, b.artifacts.selected);
    EXPECT_EQ(a.artifacts.scaler.means, b.artifacts.scaler.means);

    PipelineConfig other = cfg;
    other.seed = 6;
    PipelineResult c = tcnids::run_pipeline(loaded, other);
    EXPECT_NE(a.split.train.features.values(), c.split.train.features.values());
}

TEST(Pipeline, DropListAndDedupFeedTheReport) {
    RawTable t;
    t.rows = 4;
    t.columns.push_back(numeric_col("keep", {1, 2, 3, 3}));
    t.columns.push_back(numeric_col("noise", {9, 9, 9, 9}));
    t.columns.push_back(numeric_col("copy", {1, 2, 3, 3}));
    t.columns.push_back(text_col("Attack_type", {"Normal", "Backdoor", "Normal", "Normal"}));
    LoadedCsv loaded;
    loaded.table = t;
    loaded.stats.rows_read = 4;

    PipelineConfig cfg;
    cfg.drop_list = {"noise", "ghost"};
    cfg.reduce_fraction = 1.0;
    PipelineResult result = tcnids::run_pipeline(loaded, cfg);

    // Row 3 duplicates row 2 (keep=3, copy=3, Normal) and is removed.
    EXPECT_EQ(result.report.rows_out, 3u);
    EXPECT_EQ(result.report.dropped_rows, 1u);
    ASSERT_EQ(result.report.dropped_columns.size(), 2u);
    EXPECT_EQ(result.report.dropped_columns[0], "noise");
    EXPECT_EQ(result.report.dropped_columns[1], "copy");
    bool warned_ghost = false;
    for (const auto& w : result.report.warnings) {
        warned_ghost |= w.find("ghost") != std::string::npos;
    }
    EXPECT_TRUE(warned_ghost);
}

TEST(Pipeline, InferenceTransformMatchesSplitRows) {
    FixtureConfig fcfg;
    fcfg.per_class = 60;
    fcfg.classes = 4;
    fcfg.numeric_features = 6;
    fcfg.categorical_features = 2;
    Rng rng(31);
    Fixture fx = tcnids::generate_fixture(fcfg, rng);
    LoadedCsv loaded = fixture_as_loaded(fx);

    PipelineConfig cfg;
    cfg.reduce_fraction = 0.5;
    cfg.seed = 9;
    PipelineResult result = tcnids::run_pipeline(loaded, cfg);

    FeatureMatrix all = tcnids::transform_for_inference(loaded.table, result.artifacts);
    ASSERT_EQ(all.rows(), loaded.table.rows);
    ASSERT_EQ(all.names, result.split.feature_names);

    ASSERT_EQ(result.train_origin.size(), result.split.train.size());
    for (std::size_t i = 0; i < result.split.train.size(); ++i) {
        const std::size_t src = result.train_origin[i];
        for (std::size_t f = 0; f < all.names.size(); ++f) {
            ASSERT_DOUBLE_EQ(result.split.train.features(i, f), all.data(src, f))
                << "row " << i << " feature " << f;
        }
    }
    for (std::size_t i = 0; i < result.split.test.size(); ++i) {
        const std::size_t src = result.test_origin[i];
        for (std::size_t f = 0; f < all.names.size(); ++f) {
            ASSERT_DOUBLE_EQ(result.split.test.features(i, f), all.data(src, f));
        }
    }
}

TEST(Pipeline, InferenceSchemaMismatchThrows) {
    FixtureConfig fcfg;
    fcfg.per_class = 20;
    fcfg.classes = 3;
    fcfg.numeric_features = 4;
    fcfg.categorical_features = 1;
    Rng rng(12);
    Fixture fx = tcnids::generate_fixture(fcfg, rng);
    LoadedCsv loaded = fixture_as_loaded(fx);
    PipelineConfig cfg;
    cfg.reduce_fraction = 1.0;
    PipelineResult result = tcnids::run_pipeline(loaded, cfg);

    RawTable missing = loaded.table;
    missing.columns.erase(missing.columns.begin());
    EXPECT_THROW(tcnids::transform_for_inference(missing, result.artifacts),
                 tcnids::CompatibilityError);

    RawTable extra = loaded.table;
    extra.columns.push_back(numeric_col("surprise", std::vector<double>(extra.rows, 1.0)));
    EXPECT_THROW(tcnids::transform_for_inference(extra, result.artifacts),
                 tcnids::CompatibilityError);

    RawTable retyped = loaded.table;
    std::vector<std::string> as_text;
    for (double v : retyped.columns[0].numeric()) as_text.push_back(std::to_string(v));
    retyped.columns[0].data = CategoricalColumn{std::move(as_text)};
    EXPECT_THROW(tcnids::transform_for_inference(retyped, result.artifacts),
                 tcnids::CompatibilityError);
}

TEST(Pipeline, SelectKLimitsFeatures) {
    FixtureConfig fcfg;
    fcfg.per_class = 40;
    fcfg.classes = 3;
    fcfg.numeric_features = 8;
    fcfg.categorical_features = 1;
    Rng rng(44);
    Fixture fx = tcnids::generate_fixture(fcfg, rng);
    LoadedCsv loaded = fixture_as_loaded(fx);

    PipelineConfig cfg;
    cfg.reduce_fraction = 1.0;
    cfg.select_k = 5;
    PipelineResult result = tcnids::run_pipeline(loaded, cfg);
    EXPECT_EQ(result.split.feature_names.size(), 5u);
    EXPECT_EQ(result.split.train.features.extent(1), 5u);

    cfg.select_k = 10000;
    PipelineResult all = tcnids::run_pipeline(loaded, cfg);
    bool warned = false;
    for (const auto& w : all.report.warnings) {
        warned |= w.find("available") != std::string::npos;
    }
    EXPECT_TRUE(warned);
}

TEST(Pipeline, MissingLabelColumnAfterDropsThrows) {
    RawTable t;
    t.rows = 2;
    t.columns.push_back(numeric_col("a", {1, 2}));
    t.columns.push_back(text_col("Attack_type", {"Normal", "Backdoor"}));
    LoadedCsv loaded;
    loaded.table = t;
    loaded.stats.rows_read = 2;
    PipelineConfig cfg;
    cfg.drop_list = {"Attack_type"};
    EXPECT_THROW(tcnids::run_pipeline(loaded, cfg), tcnids::IngestionError);
}
