// Experiment orchestration: patient tables, per-variant feature assembly,
// k-fold cross-validation with ABC scoring, synthetic cohorts and CSV export.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "geosurv/core.hpp"
#include "geosurv/csv.hpp"
#include "geosurv/geo.hpp"
#include "geosurv/model.hpp"
#include "geosurv/spectral.hpp"
#include "geosurv/survival.hpp"

namespace geosurv {

enum class Variant { NoGeo, Sbr, RrSa, RrSsaBin, RrSsaFull };

inline std::string_view variant_name(Variant v) {
    switch (v) {
        case Variant::NoGeo: return "no_geo";
        case Variant::Sbr: return "sbr";
        case Variant::RrSa: return "rr_sa";
        case Variant::RrSsaBin: return "rr_ssa_bin";
        case Variant::RrSsaFull: return "rr_ssa_full";
    }
    return "unknown";
}

inline Variant parse_variant(std::string_view name) {
    for (auto v : {Variant::NoGeo, Variant::Sbr, Variant::RrSa, Variant::RrSsaBin, Variant::RrSsaFull}) {
        if (variant_name(v) == name) return v;
    }
    throw InvalidArgument("unknown variant '" + std::string(name) +
                          "' (expected no_geo, sbr, rr_sa, rr_ssa_bin or rr_ssa_full)");
}

inline bool is_spectral(Variant v) {
    return v == Variant::RrSa || v == Variant::RrSsaBin || v == Variant::RrSsaFull;
}

struct VariantSpec {
    Variant variant = Variant::NoGeo;
    std::size_t k = 0;  // spectral variants only

    void validate() const {
        if (is_spectral(variant) && k == 0) {
            throw InvalidArgument(std::string(variant_name(variant)) + " requires k >= 1");
        }
        if (!is_spectral(variant) && k != 0) {
            throw InvalidArgument(std::string(variant_name(variant)) + " does not take k");
        }
    }

    /// File-name label: the variant name, suffixed with `_k<k>` when spectral.
    std::string label() const {
        std::string s(variant_name(variant));
        if (is_spectral(variant)) s += "_k" + std::to_string(k);
        return s;
    }
};

/// Candidate architectures and schedules; every combination is trained per
/// fold and the one with the lowest final training loss is kept.
struct NetworkGrid {
    std::vector<std::vector<std::size_t>> hidden_sizes{{32}, {32, 16}};
    std::vector<int> epochs{1000, 1500, 2000, 2500};
    std::vector<double> batch_fractions{0.05, 0.1, 0.2};
    double learning_rate = 0.1;

    void validate() const {
        if (hidden_sizes.empty() || epochs.empty() || batch_fractions.empty()) {
            throw InvalidArgument("network grid: every axis needs at least one value");
        }
    }
};

struct ExperimentConfig {
    std::filesystem::path patients_path;
    std::filesystem::path map_path;
    std::optional<std::filesystem::path> design_path;
    int horizon = 0;
    std::vector<VariantSpec> variants;
    int folds = 10;
    NetworkGrid grid;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    bool export_clusters = false;
    OutsidePolicy outside_policy = OutsidePolicy::Error;

    void validate() const {
        if (horizon < 1) throw InvalidArgument("config: horizon must be positive");
        if (folds < 2) throw InvalidArgument("config: folds must be at least 2");
        if (variants.empty()) throw InvalidArgument("config: no variants requested");
        for (const auto& v : variants) v.validate();
        grid.validate();
    }
};

namespace detail {

inline VariantSpec variant_from_json(const nlohmann::json& j) {
    VariantSpec v;
    if (j.is_string()) {
        v.variant = parse_variant(j.get<std::string>());
    } else {
        v.variant = parse_variant(j.at("name").get<std::string>());
        if (j.contains("k")) v.k = j.at("k").get<std::size_t>();
    }
    v.validate();
    return v;
}

}  // namespace detail

/// Reads the JSON experiment config. Relative paths resolve against `base_dir`.
inline ExperimentConfig parse_experiment_config(std::string_view text,
                                                const std::filesystem::path& base_dir = {}) {
    ExperimentConfig cfg;
    try {
        const auto j = nlohmann::json::parse(text);
        auto path = [&](const char* key) { return base_dir / j.at(key).get<std::string>(); };
        cfg.patients_path = path("patients");
        cfg.map_path = path("map");
        if (j.contains("design") && !j["design"].is_null()) cfg.design_path = path("design");
        cfg.horizon = j.at("horizon").get<int>();
        if (j.contains("variants")) {
            for (const auto& v : j["variants"]) cfg.variants.push_back(detail::variant_from_json(v));
        } else {
            VariantSpec v{parse_variant(j.at("variant").get<std::string>()), j.value("k", std::size_t{0})};
            v.validate();
            cfg.variants.push_back(v);
        }
        cfg.folds = j.value("folds", 10);
        cfg.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("output_dir")) cfg.output_dir = path("output_dir");
        cfg.export_clusters = j.value("export_clusters", false);
        const auto policy = j.value("outside_policy", std::string("error"));
        if (policy == "nearest_centroid") {
            cfg.outside_policy = OutsidePolicy::NearestCentroid;
        } else if (policy != "error") {
            throw InvalidArgument("config: outside_policy must be 'error' or 'nearest_centroid'");
        }
        if (j.contains("network")) {
            const auto& n = j["network"];
            if (n.contains("hidden_sizes"))
                cfg.grid.hidden_sizes = n["hidden_sizes"].get<std::vector<std::vector<std::size_t>>>();
            if (n.contains("epochs")) cfg.grid.epochs = n["epochs"].get<std::vector<int>>();
            if (n.contains("batch_fractions"))
                cfg.grid.batch_fractions = n["batch_fractions"].get<std::vector<double>>();
            cfg.grid.learning_rate = n.value("learning_rate", cfg.grid.learning_rate);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("experiment config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

struct PatientRow {
    std::vector<double> features;  // non-geographic features
    GeoPoint location;
    EventRecord outcome;
};

struct PatientDataset {
    std::vector<std::string> feature_names;
    std::vector<PatientRow> rows;
    int horizon = 0;

    std::size_t size() const noexcept { return rows.size(); }
    std::size_t feature_count() const noexcept { return feature_names.size(); }
};

/// Patient CSV: `f_*` feature columns, plus `lat`, `lon`, `event`, `time`.
inline PatientDataset parse_patients(std::string_view text, int horizon) {
    const auto table = csv::parse(text);
    PatientDataset ds;
    ds.horizon = horizon;
    std::vector<std::size_t> feature_cols;
    std::optional<std::size_t> lat, lon, event, time;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const auto& name = table.header[c];
        if (name.rfind("f_", 0) == 0) {
            feature_cols.push_back(c);
            ds.feature_names.push_back(name);
        } else if (name == "lat") {
            lat = c;
        } else if (name == "lon") {
            lon = c;
        } else if (name == "event") {
            event = c;
        } else if (name == "time") {
            time = c;
        } else {
            throw ParseError("patients: unexpected column '" + name + "'");
        }
    }
    if (!lat || !lon || !event || !time) throw ParseError("patients: need lat, lon, event and time columns");
    ds.rows.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto where = "patients row " + std::to_string(r + 1);
        PatientRow p;
        for (auto c : feature_cols) p.features.push_back(csv::to_double(row[c], where));
        p.location = GeoPoint(csv::to_double(row[*lat], where), csv::to_double(row[*lon], where));
        p.outcome.event = static_cast<int>(csv::to_int(row[*event], where));
        p.outcome.time = static_cast<int>(csv::to_int(row[*time], where));
        try {
            validate(p.outcome, horizon);
        } catch (const InvalidArgument& e) {
            throw ParseError(where + ": " + e.what());
        }
        ds.rows.push_back(std::move(p));
    }
    return ds;
}

inline std::string patients_csv(const PatientDataset& ds) {
    std::string out;
    for (const auto& name : ds.feature_names) out += name + ",";
    out += "lat,lon,event,time\n";
    for (const auto& r : ds.rows) {
        for (double f : r.features) out += csv::format(f) + ",";
        out += csv::format(r.location.lat()) + "," + csv::format(r.location.lon()) + "," +
               std::to_string(r.outcome.event) + "," + std::to_string(r.outcome.time) + "\n";
    }
    return out;
}

/// Map-level artifacts shared by every instance of a variant.
struct GeoArtifacts {
    const GeoMap* map = nullptr;
    const SpectralEmbedding* embedding = nullptr;
    OutsidePolicy policy = OutsidePolicy::Error;
};

/// no_geo: x;  sbr: [x, one-hot(entity)];  spectral: [x, embedding row].
inline std::vector<double> build_features(const PatientRow& row, Variant variant, const GeoArtifacts& art) {
    std::vector<double> out = row.features;
    if (variant == Variant::NoGeo) return out;
    if (art.map == nullptr) throw InvalidArgument("build_features: variant needs a map");
    if (variant == Variant::Sbr) {
        const auto geo = one_hot(locate(row.location, *art.map, art.policy), *art.map);
        out.insert(out.end(), geo.begin(), geo.end());
        return out;
    }
    if (art.embedding == nullptr) throw InvalidArgument("build_features: spectral variant needs an embedding");
    const auto geo = enrich(row.location, *art.map, *art.embedding, art.policy);
    out.insert(out.end(), geo.begin(), geo.end());
    return out;
}

/// Seeded assignment of n instances to folds; fold sizes differ by at most one.
inline std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed) {
    if (folds < 2) throw InvalidArgument("assign_folds: need at least 2 folds");
    if (n < static_cast<std::size_t>(folds)) throw InvalidArgument("assign_folds: fewer instances than folds");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0xf01d));
    rng.shuffle(order);
    std::vector<int> fold(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    return fold;
}

/// Everything a learner sees for one fold. Test targets are deliberately absent.
struct FoldData {
    int fold = 0;
    std::vector<std::size_t> train_index;
    std::vector<std::size_t> test_index;
    std::vector<Example> train;
    std::vector<std::vector<double>> test_features;
    const PopulationEstimate* estimate = nullptr;
};

struct FoldMetadata {
    int fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::vector<std::size_t> hidden_sizes;
    int epochs = 0;
    int epochs_run = 0;
    double batch_fraction = 0.0;
    double train_loss = 0.0;
};

struct FoldPrediction {
    std::vector<SurvivalCurve> curves;  // one per test instance, in test_index order
    FoldMetadata metadata;
};

using Learner = std::function<FoldPrediction(const FoldData&)>;

/// Trains every grid combination on the fold and predicts with the one
/// whose final training loss is lowest (first wins on ties).
inline Learner network_learner(const NetworkGrid& grid, std::uint64_t seed) {
    return [grid, seed](const FoldData& data) {
        const std::size_t m = data.train.front().x.size();
        const std::size_t T = data.train.front().y.size();
        std::optional<TrainResult> best;
        FoldMetadata meta;
        std::uint64_t combo = 0;
        for (const auto& hidden : grid.hidden_sizes) {
            for (int epochs : grid.epochs) {
                for (double fraction : grid.batch_fractions) {
                    NetworkConfig cfg{m, hidden, T, grid.learning_rate, epochs, fraction,
                                      mix_seed(mix_seed(seed, static_cast<std::uint64_t>(data.fold)), combo++)};
                    auto result = train(cfg, data.train);
                    if (!best || result.final_loss < best->final_loss) {
                        meta.hidden_sizes = hidden;
                        meta.epochs = epochs;
                        meta.epochs_run = result.epochs_run;
                        meta.batch_fraction = fraction;
                        meta.train_loss = result.final_loss;
                        best = std::move(result);
                    }
                }
            }
        }
        FoldPrediction out;
        out.metadata = std::move(meta);
        out.curves.reserve(data.test_features.size());
        for (const auto& x : data.test_features) out.curves.push_back(predict(best->network, x));
        return out;
    };
}

struct VariantResult {
    VariantSpec spec;
    double abc = 0.0;
    std::vector<FoldMetadata> folds;
    SurvivalCurve actual_mean;
    SurvivalCurve predicted_mean;
    std::optional<ClusterLabels> clusters;
};

struct AbcReport {
    std::vector<VariantResult> variants;
};

/// Builds the map-level embedding a variant needs (none for no_geo / sbr).
inline std::optional<SpectralEmbedding> variant_embedding(const VariantSpec& spec, const GeoMap& map,
                                                          const DesignMatrix* design) {
    switch (spec.variant) {
        case Variant::NoGeo:
        case Variant::Sbr: return std::nullopt;
        case Variant::RrSa: return rr_sa_embedding(map, spec.k);
        case Variant::RrSsaBin:
        case Variant::RrSsaFull:
            if (design == nullptr) {
                throw InvalidArgument(std::string(variant_name(spec.variant)) + " requires a design matrix");
            }
            return rr_ssa_embedding(map, *design,
                                    spec.variant == Variant::RrSsaBin ? SsaMode::Bin : SsaMode::Full, spec.k);
    }
    return std::nullopt;
}

/// Cross-validated evaluation of one variant.
///
/// Per fold the population estimate is fitted on the training records only
/// and used both for the training targets and for the held-out actual
/// curves. Predictions of all folds are pooled and averaged; the actual mean
/// is taken over every instance's held-out curve.
inline VariantResult evaluate_variant(const PatientDataset& data, const GeoMap& map, const DesignMatrix* design,
                                      const VariantSpec& spec, int folds, std::uint64_t seed,
                                      const Learner& learner, OutsidePolicy policy = OutsidePolicy::Error,
                                      bool with_clusters = false) {
    spec.validate();
    const std::size_t n = data.size();
    const auto embedding = variant_embedding(spec, map, design);
    const GeoArtifacts art{&map, embedding ? &*embedding : nullptr, policy};

    std::vector<std::vector<double>> features(n);
    for (std::size_t i = 0; i < n; ++i) features[i] = build_features(data.rows[i], spec.variant, art);

    const auto fold_of = assign_folds(n, folds, seed);
    std::vector<SurvivalCurve> actual, predicted;
    actual.reserve(n);
    predicted.reserve(n);
    VariantResult result{spec, 0.0, {}, {}, {}, std::nullopt};

    for (int f = 0; f < folds; ++f) {
        try {
            FoldData fd;
            fd.fold = f;
            std::vector<EventRecord> train_records;
            for (std::size_t i = 0; i < n; ++i) {
                if (fold_of[i] == f) {
                    fd.test_index.push_back(i);
                } else {
                    fd.train_index.push_back(i);
                    train_records.push_back(data.rows[i].outcome);
                }
            }
            const auto estimate = km_estimator(train_records, data.horizon);
            fd.estimate = &estimate;
            fd.train.reserve(fd.train_index.size());
            for (auto i : fd.train_index) {
                fd.train.push_back({features[i], rerepresent(data.rows[i].outcome, estimate).values()});
            }
            for (auto i : fd.test_index) fd.test_features.push_back(features[i]);

            auto pred = learner(fd);
            if (pred.curves.size() != fd.test_index.size()) {
                throw Error("learner returned " + std::to_string(pred.curves.size()) + " curves for " +
                            std::to_string(fd.test_index.size()) + " test instances");
            }
            for (std::size_t j = 0; j < fd.test_index.size(); ++j) {
                actual.push_back(rerepresent(data.rows[fd.test_index[j]].outcome, estimate));
                predicted.push_back(std::move(pred.curves[j]));
            }
            pred.metadata.fold = f;
            pred.metadata.n_train = fd.train_index.size();
            pred.metadata.n_test = fd.test_index.size();
            result.folds.push_back(std::move(pred.metadata));
        } catch (const std::exception& e) {
            throw Error("variant " + spec.label() + ", fold " + std::to_string(f) + ": " + e.what());
        }
    }
    result.actual_mean = mean_curve(actual);
    result.predicted_mean = mean_curve(predicted);
    result.abc = abc(result.actual_mean, result.predicted_mean);
    if (with_clusters && embedding) result.clusters = kmeans(*embedding, spec.k, seed);
    return result;
}

inline AbcReport run_experiment(const PatientDataset& data, const GeoMap& map, const DesignMatrix* design,
                                const ExperimentConfig& config) {
    config.validate();
    if (data.horizon != config.horizon) throw InvalidArgument("dataset horizon does not match config");
    AbcReport report;
    for (const auto& spec : config.variants) {
        report.variants.push_back(evaluate_variant(data, map, design, spec, config.folds, config.seed,
                                                   network_learner(config.grid, config.seed),
                                                   config.outside_policy, config.export_clusters));
    }
    return report;
}

inline AbcReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto map = parse_map(csv::read_file(config.map_path));
    const auto data = parse_patients(csv::read_file(config.patients_path), config.horizon);
    std::optional<DesignMatrix> design;
    if (config.design_path) design = load_design_matrix(csv::read_file(*config.design_path), map);
    return run_experiment(data, map, design ? &*design : nullptr, config);
}

/// CSV `t,actual_mean,predicted_mean` for t = 1..T.
inline std::string curves_csv(const VariantResult& r) {
    std::string out = "t,actual_mean,predicted_mean\n";
    for (std::size_t t = 0; t < r.actual_mean.size(); ++t) {
        out += std::to_string(t + 1) + "," + csv::format(r.actual_mean[t]) + "," +
               csv::format(r.predicted_mean[t]) + "\n";
    }
    return out;
}

/// Reads a curves CSV back into (actual, predicted).
inline std::pair<SurvivalCurve, SurvivalCurve> parse_curves_csv(std::string_view text) {
    const auto table = csv::parse(text);
    if (table.header != std::vector<std::string>{"t", "actual_mean", "predicted_mean"}) {
        throw ParseError("curves csv: unexpected header");
    }
    std::vector<double> a, p;
    for (const auto& row : table.rows) {
        a.push_back(csv::to_double(row[1], "curves csv"));
        p.push_back(csv::to_double(row[2], "curves csv"));
    }
    return {SurvivalCurve(std::move(a)), SurvivalCurve(std::move(p))};
}

/// CSV `variant,k,abc`; k is empty for non-spectral variants.
inline std::string abc_report_csv(const AbcReport& report) {
    std::string out = "variant,k,abc\n";
    for (const auto& r : report.variants) {
        out += std::string(variant_name(r.spec.variant)) + "," +
               (is_spectral(r.spec.variant) ? std::to_string(r.spec.k) : std::string()) + "," +
               csv::format(r.abc) + "\n";
    }
    return out;
}

/// Writes curves_<label>.csv per variant, abc_report.csv, and
/// clusters_<variant>_<k>.csv for every variant carrying cluster labels.
/// Returns the written paths.
inline std::vector<std::filesystem::path> emit_outputs(const AbcReport& report, const GeoMap* map,
                                                       const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const auto& r : report.variants) {
        auto path = dir / ("curves_" + r.spec.label() + ".csv");
        csv::write_file_atomic(path, curves_csv(r));
        written.push_back(std::move(path));
    }
    auto report_path = dir / "abc_report.csv";
    csv::write_file_atomic(report_path, abc_report_csv(report));
    written.push_back(std::move(report_path));
    for (const auto& r : report.variants) {
        if (!r.clusters) continue;
        if (map == nullptr) throw InvalidArgument("emit_outputs: cluster export needs the map");
        auto path = dir / ("clusters_" + std::string(variant_name(r.spec.variant)) + "_" +
                           std::to_string(r.spec.k) + ".csv");
        csv::write_file_atomic(path, clusters_csv(*map, *r.clusters));
        written.push_back(std::move(path));
    }
    return written;
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

struct SynthSpec {
    int rows = 5;
    int cols = 5;
    std::size_t patients = 2000;
    int horizon = 20;
    double base_hazard = 0.08;
    double geo_amplitude = 1.5;
    double censoring_rate = 0.2;
    std::uint64_t seed = 1;
    int nuisance_columns = 2;

    void validate() const {
        if (rows < 1 || cols < 1 || rows * cols < 2) throw InvalidArgument("synth: grid needs at least 2 cells");
        if (patients < 1) throw InvalidArgument("synth: need at least one patient");
        if (horizon < 1) throw InvalidArgument("synth: horizon must be positive");
        if (!(base_hazard > 0.0 && base_hazard < 1.0)) throw InvalidArgument("synth: base_hazard must lie in (0, 1)");
        if (!(geo_amplitude >= 0.0) || !std::isfinite(geo_amplitude)) {
            throw InvalidArgument("synth: geo_amplitude must be finite and non-negative");
        }
        if (!(censoring_rate >= 0.0 && censoring_rate <= 1.0)) {
            throw InvalidArgument("synth: censoring_rate must lie in [0, 1]");
        }
        if (nuisance_columns < 0) throw InvalidArgument("synth: nuisance_columns must be non-negative");
    }
};

inline SynthSpec parse_synth_spec(std::string_view text) {
    SynthSpec s;
    try {
        const auto j = nlohmann::json::parse(text);
        s.rows = j.value("rows", s.rows);
        s.cols = j.value("cols", s.cols);
        s.patients = j.value("n", s.patients);
        s.horizon = j.value("T", s.horizon);
        s.base_hazard = j.value("base_hazard", s.base_hazard);
        s.geo_amplitude = j.value("geo_amplitude", s.geo_amplitude);
        s.censoring_rate = j.value("censoring_rate", s.censoring_rate);
        s.seed = j.value("seed", s.seed);
        s.nuisance_columns = j.value("nuisance_columns", s.nuisance_columns);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

struct SyntheticData {
    PatientDataset patients;
    GeoMap map;
    DesignMatrix design;
    std::vector<double> cell_risk;  // log-odds shift per map entity
};

/// Log-odds hazard shift of grid cell (r, c): a smooth wave over the grid.
inline double synthetic_cell_risk(const SynthSpec& s, int r, int c) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u = (r + 0.5) / s.rows;
    const double v = (c + 0.5) / s.cols;
    return s.geo_amplitude * 0.5 * (std::sin(two_pi * u) + std::cos(two_pi * v));
}

/// Grid of unit-square cells keyed `R<row>C<col>`; patient hazards per time
/// step are logistic(logit(base) + 0.8*f_1 - 0.5*f_2 + cell risk); f_3 is
/// noise. With probability `censoring_rate` a patient also draws a censoring
/// time uniform on {1..T-1} and is censored if that comes first.
inline SyntheticData generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    std::vector<GeoEntity> cells;
    std::vector<double> risk;
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            const double lat = r, lon = c;
            cells.push_back({"R" + std::to_string(r) + "C" + std::to_string(c),
                             {GeoPoint(lat, lon), GeoPoint(lat, lon + 1), GeoPoint(lat + 1, lon + 1),
                              GeoPoint(lat + 1, lon)}});
            risk.push_back(synthetic_cell_risk(spec, r, c));
        }
    }
    GeoMap map(std::move(cells));
    const std::size_t p = map.size();

    const std::size_t h = 3 + static_cast<std::size_t>(spec.nuisance_columns);
    Matrix a(p, h);
    std::vector<std::string> names{"center_lat", "center_lon", "risk_signal"};
    for (int j = 0; j < spec.nuisance_columns; ++j) names.push_back("nuisance_" + std::to_string(j + 1));
    for (std::size_t l = 0; l < p; ++l) {
        const auto r = static_cast<int>(l) / spec.cols;
        const auto c = static_cast<int>(l) % spec.cols;
        a(l, 0) = (r + 0.5) / spec.rows;
        a(l, 1) = (c + 0.5) / spec.cols;
        a(l, 2) = risk[l] + 0.1 * rng.normal();
        for (std::size_t j = 3; j < h; ++j) a(l, j) = rng.uniform();
    }
    DesignMatrix design(std::move(a), names);

    PatientDataset ds;
    ds.horizon = spec.horizon;
    ds.feature_names = {"f_1", "f_2", "f_3"};
    ds.rows.reserve(spec.patients);
    const double base_logit = std::log(spec.base_hazard / (1.0 - spec.base_hazard));
    for (std::size_t i = 0; i < spec.patients; ++i) {
        const auto cell = static_cast<std::size_t>(rng.below(p));
        const auto r = static_cast<int>(cell) / spec.cols;
        const auto c = static_cast<int>(cell) % spec.cols;
        PatientRow row;
        row.location = GeoPoint(r + rng.uniform(0.001, 0.999), c + rng.uniform(0.001, 0.999));
        const double f1 = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const double f2 = rng.normal();
        const double f3 = rng.uniform();
        row.features = {f1, f2, f3};

        const double hazard = logistic(base_logit + 0.8 * f1 - 0.5 * f2 + risk[cell]);
        int event_time = 0;
        for (int t = 1; t <= spec.horizon; ++t) {
            if (rng.bernoulli(hazard)) {
                event_time = t;
                break;
            }
        }
        int censor_time = spec.horizon + 1;
        if (spec.horizon > 1 && rng.bernoulli(spec.censoring_rate)) {
            censor_time = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.horizon - 1)));
        }
        if (event_time != 0 && event_time <= censor_time) {
            row.outcome = {1, event_time};
        } else if (censor_time <= spec.horizon) {
            row.outcome = {0, censor_time};
        } else {
            row.outcome = {0, spec.horizon};
        }
        ds.rows.push_back(std::move(row));
    }
    return {std::move(ds), std::move(map), std::move(design), std::move(risk)};
}

inline std::string design_csv(const GeoMap& map, const DesignMatrix& design) {
    std::string out = "key";
    for (std::size_t j = 0; j < design.features(); ++j) {
        out += "," + (design.feature_names().empty() ? "f" + std::to_string(j + 1) : design.feature_names()[j]);
    }
    out += '\n';
    for (std::size_t l = 0; l < map.size(); ++l) {
        out += map[l].key;
        for (double x : design.row(l)) out += "," + csv::format(x);
        out += '\n';
    }
    return out;
}

}  // namespace geosurv
