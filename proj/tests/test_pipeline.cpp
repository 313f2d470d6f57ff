#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "geosurv/pipeline.hpp"
#include "oracles.hpp"

using namespace geosurv;
namespace fs = std::filesystem;

namespace {

SyntheticData small_cohort(std::uint64_t seed = 3, std::size_t n = 120) {
    SynthSpec s;
    s.rows = 2;
    s.cols = 2;
    s.patients = n;
    s.horizon = 6;
    s.seed = seed;
    return generate_synthetic(s);
}

/// Predicts exactly the held-out actual curves; only possible with access to
/// the full dataset, which the learner closes over.
Learner oracle_learner(const PatientDataset& data) {
    return [&data](const FoldData& fd) {
        FoldPrediction out;
        for (auto i : fd.test_index) out.curves.push_back(rerepresent(data.rows[i].outcome, *fd.estimate));
        return out;
    };
}

NetworkGrid tiny_grid() {
    NetworkGrid g;
    g.hidden_sizes = {{3}};
    g.epochs = {15};
    g.batch_fractions = {0.25};
    return g;
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("geosurv_test_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST(BuildFeatures, LengthsPerVariant) {
    const auto map = oracle::grid_map(2, 2);
    const auto emb = rr_sa_embedding(map, 2);
    const GeoArtifacts art{&map, &emb, OutsidePolicy::Error};
    const PatientRow row{{0.1, 0.2, 0.3}, GeoPoint(1.5, 0.5), {1, 2}};

    EXPECT_EQ(build_features(row, Variant::NoGeo, art), (std::vector<double>{0.1, 0.2, 0.3}));

    const auto sbr = build_features(row, Variant::Sbr, art);
    ASSERT_EQ(sbr.size(), 7u);
    EXPECT_EQ(std::accumulate(sbr.begin() + 3, sbr.end(), 0.0), 1.0);
    EXPECT_EQ(sbr[3 + *map.index_of("g1_0")], 1.0);

    const auto rr = build_features(row, Variant::RrSa, art);
    ASSERT_EQ(rr.size(), 5u);
    const auto expected = emb.row(*map.index_of("g1_0"));
    EXPECT_EQ(rr[3], expected[0]);
    EXPECT_EQ(rr[4], expected[1]);
}

TEST(BuildFeatures, MissingArtifactsAndOutsidePoints) {
    const auto map = oracle::grid_map(2, 2);
    const PatientRow row{{0.1}, GeoPoint(1.5, 0.5), {1, 2}};
    EXPECT_THROW(build_features(row, Variant::Sbr, {}), InvalidArgument);
    EXPECT_THROW(build_features(row, Variant::RrSa, {&map, nullptr, OutsidePolicy::Error}), InvalidArgument);
    const PatientRow far{{0.1}, GeoPoint(10, 10), {1, 2}};
    EXPECT_THROW(build_features(far, Variant::Sbr, {&map, nullptr, OutsidePolicy::Error}), OutsideMapError);
    EXPECT_EQ(build_features(far, Variant::Sbr, {&map, nullptr, OutsidePolicy::NearestCentroid}).size(), 5u);
}

TEST(AssignFolds, DisjointBalancedCover) {
    for (std::size_t n : {10u, 11u, 57u, 2000u}) {
        for (int k : {2, 3, 10}) {
            const auto fold = assign_folds(n, k, 42);
            std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
            for (int f : fold) {
                ASSERT_GE(f, 0);
                ASSERT_LT(f, k);
                ++sizes[static_cast<std::size_t>(f)];
            }
            const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
            EXPECT_LE(*hi - *lo, 1u);
            EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}), n);
        }
    }
    EXPECT_EQ(assign_folds(100, 10, 5), assign_folds(100, 10, 5));
    EXPECT_NE(assign_folds(100, 10, 5), assign_folds(100, 10, 6));
    EXPECT_THROW(assign_folds(5, 10, 1), InvalidArgument);
    EXPECT_THROW(assign_folds(5, 1, 1), InvalidArgument);
}

TEST(EvaluateVariant, OracleLearnerGivesZeroAbc) {
    const auto d = small_cohort();
    const auto r = evaluate_variant(d.patients, d.map, &d.design, {Variant::Sbr, 0}, 5, 1, oracle_learner(d.patients));
    EXPECT_EQ(r.abc, 0.0);
    EXPECT_EQ(r.actual_mean, r.predicted_mean);
    EXPECT_EQ(r.folds.size(), 5u);
}

TEST(EvaluateVariant, EstimateUsesTrainingFoldOnly) {
    const auto d = small_cohort();
    std::vector<std::size_t> seen_test;
    const Learner probe = [&](const FoldData& fd) {
        std::vector<EventRecord> train;
        for (auto i : fd.train_index) train.push_back(d.patients.rows[i].outcome);
        EXPECT_EQ(fd.estimate->survival, km_estimator(train, d.patients.horizon).survival);
        for (std::size_t j = 0; j < fd.train.size(); ++j) {
            EXPECT_EQ(fd.train[j].y, rerepresent(train[j], *fd.estimate).values());
        }
        seen_test.insert(seen_test.end(), fd.test_index.begin(), fd.test_index.end());
        return oracle_learner(d.patients)(fd);
    };
    evaluate_variant(d.patients, d.map, nullptr, {Variant::NoGeo, 0}, 4, 9, probe);
    std::sort(seen_test.begin(), seen_test.end());
    std::vector<std::size_t> all(d.patients.size());
    std::iota(all.begin(), all.end(), 0);
    EXPECT_EQ(seen_test, all);
}

TEST(EvaluateVariant, FeatureLengthsMatchVariant) {
    const auto d = small_cohort();
    const std::size_t m = d.patients.feature_count(), p = d.map.size();
    for (auto [spec, expected] : {std::pair{VariantSpec{Variant::NoGeo, 0}, m},
                                  {VariantSpec{Variant::Sbr, 0}, m + p},
                                  {VariantSpec{Variant::RrSa, 2}, m + 2},
                                  {VariantSpec{Variant::RrSsaBin, 3}, m + 3},
                                  {VariantSpec{Variant::RrSsaFull, 2}, m + 2}}) {
        const Learner check = [&, expected = expected](const FoldData& fd) {
            for (const auto& ex : fd.train) EXPECT_EQ(ex.x.size(), expected);
            for (const auto& x : fd.test_features) EXPECT_EQ(x.size(), expected);
            return oracle_learner(d.patients)(fd);
        };
        evaluate_variant(d.patients, d.map, &d.design, spec, 3, 1, check);
    }
}

TEST(EvaluateVariant, ErrorsNameVariantAndFold) {
    const auto d = small_cohort();
    const Learner broken = [](const FoldData&) { return FoldPrediction{}; };
    try {
        evaluate_variant(d.patients, d.map, nullptr, {Variant::Sbr, 0}, 3, 1, broken);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("variant sbr, fold 0"), std::string::npos) << e.what();
    }
    EXPECT_THROW(evaluate_variant(d.patients, d.map, nullptr, {Variant::RrSsaFull, 2}, 3, 1, broken),
                 InvalidArgument);
}

TEST(EvaluateVariant, NetworkLearnerIsDeterministic) {
    const auto d = small_cohort(5, 80);
    const auto run = [&] {
        return evaluate_variant(d.patients, d.map, &d.design, {Variant::RrSsaFull, 2}, 4, 11,
                                network_learner(tiny_grid(), 11), OutsidePolicy::Error, true);
    };
    const auto a = run(), b = run();
    EXPECT_EQ(a.abc, b.abc);
    EXPECT_EQ(a.predicted_mean, b.predicted_mean);
    ASSERT_TRUE(a.clusters && b.clusters);
    EXPECT_EQ(a.clusters->labels, b.clusters->labels);
    EXPECT_GE(a.abc, 0.0);
    for (const auto& f : a.folds) {
        EXPECT_EQ(f.hidden_sizes, std::vector<std::size_t>{3});
        EXPECT_GT(f.epochs_run, 0);
    }
}

TEST(ExperimentConfig, ParsesAndValidates) {
    const auto cfg = parse_experiment_config(R"({
        "patients": "p.csv", "map": "m.json", "design": "d.csv", "horizon": 8,
        "variants": ["no_geo", {"name": "rr_sa", "k": 4}], "folds": 5, "seed": 3,
        "output_dir": "out", "export_clusters": true, "outside_policy": "nearest_centroid",
        "network": {"hidden_sizes": [[8]], "epochs": [1000], "batch_fractions": [0.1], "learning_rate": 0.05}
    })",
                                             "base");
    EXPECT_EQ(cfg.patients_path, fs::path("base/p.csv"));
    ASSERT_TRUE(cfg.design_path);
    EXPECT_EQ(cfg.variants.size(), 2u);
    EXPECT_EQ(cfg.variants[1].k, 4u);
    EXPECT_EQ(cfg.folds, 5);
    EXPECT_EQ(cfg.outside_policy, OutsidePolicy::NearestCentroid);
    EXPECT_EQ(cfg.grid.learning_rate, 0.05);

    const auto single = parse_experiment_config(
        R"({"patients": "p", "map": "m", "horizon": 4, "variant": "rr_ssa_bin", "k": 2})");
    EXPECT_EQ(single.variants.at(0).label(), "rr_ssa_bin_k2");
    EXPECT_EQ(single.folds, 10);
}

TEST(ExperimentConfig, Rejections) {
    const std::string base = R"("patients": "p", "map": "m", "horizon": 4)";
    EXPECT_THROW(parse_experiment_config("{" + base + R"(, "variant": "rr_sa"})"), InvalidArgument);
    EXPECT_THROW(parse_experiment_config("{" + base + R"(, "variant": "sbr", "k": 3})"), InvalidArgument);
    EXPECT_THROW(parse_experiment_config("{" + base + R"(, "variant": "geo"})"), InvalidArgument);
    EXPECT_THROW(parse_experiment_config("{" + base + R"(, "variant": "sbr", "folds": 1})"), InvalidArgument);
    EXPECT_THROW(parse_experiment_config(R"({"map": "m", "horizon": 4, "variant": "sbr"})"), ParseError);
    EXPECT_THROW(parse_experiment_config("not json"), ParseError);
}

TEST(Patients, ParseAndRoundTrip) {
    const auto ds = parse_patients("f_a,lat,lon,event,time,f_b\n1,0.5,0.5,1,3,0\n0,1.5,0.5,0,4,1\n", 4);
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"f_a", "f_b"}));
    EXPECT_EQ(ds.rows[1].features, (std::vector<double>{0, 1}));
    const auto again = parse_patients(patients_csv(ds), 4);
    EXPECT_EQ(again.rows[0].outcome, ds.rows[0].outcome);
    EXPECT_EQ(again.rows[1].location, ds.rows[1].location);

    EXPECT_THROW(parse_patients("f_a,lat,lon,event\n1,0,0,1\n", 4), ParseError);
    EXPECT_THROW(parse_patients("x,lat,lon,event,time\n1,0,0,1,1\n", 4), ParseError);
    EXPECT_THROW(parse_patients("lat,lon,event,time\n0,0,1,5\n", 4), ParseError);
    EXPECT_THROW(parse_patients("lat,lon,event,time\n0,0,2,1\n", 4), ParseError);
    EXPECT_THROW(parse_patients("lat,lon,event,time\n0,zz,1,1\n", 4), ParseError);
}

TEST(Synthetic, SameSeedSameData) {
    SynthSpec s;
    s.patients = 300;
    const auto a = generate_synthetic(s), b = generate_synthetic(s);
    EXPECT_EQ(patients_csv(a.patients), patients_csv(b.patients));
    EXPECT_EQ(design_csv(a.map, a.design), design_csv(b.map, b.design));
    EXPECT_EQ(dump_map(a.map), dump_map(b.map));
    s.seed = 2;
    EXPECT_NE(patients_csv(generate_synthetic(s).patients), patients_csv(a.patients));
}

TEST(Synthetic, ShapeAndLocations) {
    SynthSpec s;
    s.rows = 3;
    s.cols = 4;
    s.patients = 500;
    s.nuisance_columns = 1;
    const auto d = generate_synthetic(s);
    EXPECT_EQ(d.map.size(), 12u);
    EXPECT_EQ(d.design.features(), 4u);
    EXPECT_EQ(build_adjacency(d.map).matrix(), oracle::grid_adjacency(3, 4));
    for (const auto& row : d.patients.rows) {
        EXPECT_NO_THROW(locate(row.location, d.map));
        EXPECT_NO_THROW(validate(row.outcome, s.horizon));
    }
}

TEST(Synthetic, NoCensoringMeansEventOrHorizon) {
    SynthSpec s;
    s.censoring_rate = 0.0;
    s.patients = 2000;
    for (const auto& row : generate_synthetic(s).patients.rows) {
        EXPECT_TRUE(row.outcome.event == 1 || row.outcome.time == s.horizon);
    }
}

TEST(Synthetic, ZeroAmplitudeOutcomeIndependentOfCell) {
    SynthSpec s;
    s.geo_amplitude = 0.0;
    s.patients = 5000;
    s.seed = 17;
    const auto d = generate_synthetic(s);
    // Outcome categories: event by t<=5, by t<=10, later event, no event.
    auto category = [](const EventRecord& r) {
        if (r.event == 0) return 3;
        return r.time <= 5 ? 0 : (r.time <= 10 ? 1 : 2);
    };
    const std::size_t p = d.map.size();
    std::vector<std::array<double, 4>> counts(p, {0, 0, 0, 0});
    for (const auto& row : d.patients.rows) counts[locate_index(row.location, d.map)][category(row.outcome)] += 1;
    std::array<double, 4> col{0, 0, 0, 0};
    std::vector<double> row_total(p, 0.0);
    for (std::size_t l = 0; l < p; ++l)
        for (int c = 0; c < 4; ++c) {
            col[c] += counts[l][c];
            row_total[l] += counts[l][c];
        }
    const double n = static_cast<double>(d.patients.size());
    double stat = 0.0;
    for (std::size_t l = 0; l < p; ++l)
        for (int c = 0; c < 4; ++c) {
            const double expected = row_total[l] * col[c] / n;
            stat += (counts[l][c] - expected) * (counts[l][c] - expected) / expected;
        }
    const boost::math::chi_squared dist(static_cast<double>((p - 1) * 3));
    EXPECT_LT(stat, boost::math::quantile(dist, 0.99));
}

TEST(Synthetic, StrongAmplitudeMakesCellsDiffer) {
    SynthSpec s;
    s.geo_amplitude = 3.0;
    s.patients = 4000;
    const auto d = generate_synthetic(s);
    std::map<std::size_t, std::pair<double, double>> rate;  // events, total
    for (const auto& row : d.patients.rows) {
        auto& r = rate[locate_index(row.location, d.map)];
        r.first += row.outcome.event;
        r.second += 1;
    }
    const auto hi = std::max_element(d.cell_risk.begin(), d.cell_risk.end()) - d.cell_risk.begin();
    const auto lo = std::min_element(d.cell_risk.begin(), d.cell_risk.end()) - d.cell_risk.begin();
    const auto& h = rate[static_cast<std::size_t>(hi)];
    const auto& l = rate[static_cast<std::size_t>(lo)];
    EXPECT_GT(h.first / h.second, l.first / l.second + 0.3);
}

TEST(Synthetic, SpecParsingAndValidation) {
    const auto s = parse_synth_spec(R"({"rows": 3, "cols": 2, "n": 50, "T": 7, "seed": 9})");
    EXPECT_EQ(s.rows, 3);
    EXPECT_EQ(s.patients, 50u);
    EXPECT_EQ(s.horizon, 7);
    EXPECT_THROW(parse_synth_spec(R"({"rows": 1, "cols": 1})"), InvalidArgument);
    EXPECT_THROW(parse_synth_spec(R"({"base_hazard": 1.5})"), InvalidArgument);
    EXPECT_THROW(parse_synth_spec(R"({"rows": "x"})"), ParseError);
}

TEST(EmitOutputs, FilesAndRoundTrip) {
    const auto d = small_cohort(4, 100);
    AbcReport report;
    report.variants.push_back(evaluate_variant(d.patients, d.map, &d.design, {Variant::NoGeo, 0}, 4, 2,
                                               network_learner(tiny_grid(), 2)));
    const auto dir = fresh_dir("emit");
    EXPECT_EQ(emit_outputs(report, &d.map, dir).size(), 2u);
    EXPECT_TRUE(fs::exists(dir / "curves_no_geo.csv"));
    EXPECT_TRUE(fs::exists(dir / "abc_report.csv"));

    const auto [actual, predicted] = parse_curves_csv(csv::read_file(dir / "curves_no_geo.csv"));
    EXPECT_NEAR(abc(actual, predicted), report.variants[0].abc, 1e-9);
    const auto table = csv::parse(csv::read_file(dir / "abc_report.csv"));
    EXPECT_EQ(table.rows.at(0).at(0), "no_geo");
    EXPECT_EQ(table.rows.at(0).at(1), "");
    EXPECT_NEAR(csv::to_double(table.rows[0][2], "abc"), report.variants[0].abc, 1e-9);

    report.variants.push_back(evaluate_variant(d.patients, d.map, &d.design, {Variant::RrSa, 2}, 4, 2,
                                               network_learner(tiny_grid(), 2), OutsidePolicy::Error, true));
    const auto written = emit_outputs(report, &d.map, dir);
    EXPECT_EQ(written.size(), 4u);
    EXPECT_TRUE(fs::exists(dir / "curves_rr_sa_k2.csv"));
    EXPECT_TRUE(fs::exists(dir / "clusters_rr_sa_2.csv"));
    EXPECT_EQ(csv::parse(csv::read_file(dir / "abc_report.csv")).rows.size(), 2u);
    // Only the final files remain; temporaries are renamed away.
    EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 4);
    fs::remove_all(dir);
}

TEST(EmitOutputs, SingleVariantWithClustersGivesThreeFiles) {
    const auto d = small_cohort(6, 60);
    AbcReport report;
    report.variants.push_back(evaluate_variant(d.patients, d.map, nullptr, {Variant::RrSa, 2}, 3, 2,
                                               oracle_learner(d.patients), OutsidePolicy::Error, true));
    const auto dir = fresh_dir("emit3");
    EXPECT_EQ(emit_outputs(report, &d.map, dir).size(), 3u);
    EXPECT_THROW(emit_outputs(report, nullptr, dir), InvalidArgument);
    fs::remove_all(dir);
}

TEST(RunExperiment, FromFilesMatchesInMemory) {
    const auto d = small_cohort(8, 80);
    const auto dir = fresh_dir("run");
    fs::create_directories(dir);
    csv::write_file_atomic(dir / "patients.csv", patients_csv(d.patients));
    csv::write_file_atomic(dir / "map.json", dump_map(d.map));
    csv::write_file_atomic(dir / "design.csv", design_csv(d.map, d.design));
    const auto cfg = parse_experiment_config(R"({"patients": "patients.csv", "map": "map.json",
        "design": "design.csv", "horizon": 6, "variants": [{"name": "rr_ssa_bin", "k": 2}], "folds": 3,
        "seed": 4, "network": {"hidden_sizes": [[3]], "epochs": [10], "batch_fractions": [0.5]}})",
                                             dir);
    const auto from_files = run_experiment(cfg);
    const auto in_memory = run_experiment(d.patients, d.map, &d.design, cfg);
    EXPECT_EQ(from_files.variants.at(0).abc, in_memory.variants.at(0).abc);
    EXPECT_EQ(abc_report_csv(from_files), abc_report_csv(in_memory));
    fs::remove_all(dir);
}
