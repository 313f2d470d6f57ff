// geosurv command-line tool: run experiments, generate synthetic cohorts,
// and export map embeddings or cluster labels.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "geosurv/geosurv.hpp"

namespace fs = std::filesystem;
using namespace geosurv;

namespace {

std::optional<DesignMatrix> read_design(const std::string& path, const GeoMap& map) {
    if (path.empty()) return std::nullopt;
    return load_design_matrix(csv::read_file(path), map);
}

SpectralEmbedding embed_map(const GeoMap& map, const std::optional<DesignMatrix>& design, Variant variant,
                            std::size_t k) {
    const VariantSpec spec{variant, k};
    if (!is_spectral(variant)) throw InvalidArgument("variant must be rr_sa, rr_ssa_bin or rr_ssa_full");
    spec.validate();
    return *variant_embedding(spec, map, design ? &*design : nullptr);
}

int cmd_run(const std::string& config_path) {
    const auto config = parse_experiment_config(csv::read_file(config_path), fs::path(config_path).parent_path());
    const auto map = parse_map(csv::read_file(config.map_path));
    const auto report = run_experiment(config);
    emit_outputs(report, &map, config.output_dir);
    for (const auto& r : report.variants) std::cout << r.spec.label() << " abc=" << csv::format(r.abc) << '\n';
    std::cout << "wrote " << config.output_dir.string() << '\n';
    return 0;
}

int cmd_synth(const std::string& spec_path, const fs::path& out) {
    const auto spec = parse_synth_spec(csv::read_file(spec_path));
    const auto data = generate_synthetic(spec);
    fs::create_directories(out);
    csv::write_file_atomic(out / "patients.csv", patients_csv(data.patients));
    csv::write_file_atomic(out / "map.json", dump_map(data.map));
    csv::write_file_atomic(out / "design.csv", design_csv(data.map, data.design));

    // Ready-to-run config comparing every representation on this cohort.
    const nlohmann::ordered_json config{
        {"patients", "patients.csv"},
        {"map", "map.json"},
        {"design", "design.csv"},
        {"horizon", spec.horizon},
        {"variants",
         {"no_geo", "sbr", {{"name", "rr_sa"}, {"k", 5}}, {{"name", "rr_ssa_full"}, {"k", 5}}}},
        {"folds", 10},
        {"seed", spec.seed},
        {"output_dir", "results"},
        {"network", {{"hidden_sizes", {{16}}}, {"epochs", {1000}}, {"batch_fractions", {0.1}}}},
    };
    csv::write_file_atomic(out / "config.json", config.dump(2) + "\n");
    std::cout << "wrote " << data.patients.size() << " patients on " << data.map.size() << " cells to "
              << out.string() << '\n';
    return 0;
}

int cmd_embed(const std::string& map_path, const std::string& design_path, const std::string& variant,
              std::size_t k, const fs::path& out) {
    const auto map = parse_map(csv::read_file(map_path));
    const auto design = read_design(design_path, map);
    const auto emb = embed_map(map, design, parse_variant(variant), k);
    csv::write_file_atomic(out, embedding_csv(map, emb));
    return 0;
}

int cmd_clusters(const std::string& map_path, const std::string& design_path, const std::string& variant,
                 std::size_t k, std::uint64_t seed, const fs::path& out) {
    const auto map = parse_map(csv::read_file(map_path));
    const auto design = read_design(design_path, map);
    const auto emb = embed_map(map, design, parse_variant(variant), k);
    csv::write_file_atomic(out, clusters_csv(map, kmeans(emb, k, seed)));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geographic survival-curve prediction"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "Cross-validate the configured variants and write curves/ABC CSVs");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

    std::string spec_path, synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with map, design matrix and config");
    synth->add_option("--spec", spec_path, "Synthetic cohort spec (JSON)")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", synth_out, "Output directory")->required();

    std::string map_path, design_path, variant = "rr_sa", out_path;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    auto* embed = app.add_subcommand("embed", "Write the spectral embedding of a map");
    embed->add_option("--map", map_path, "Map (JSON)")->required()->check(CLI::ExistingFile);
    embed->add_option("--design", design_path, "Design matrix CSV (rr_ssa variants)")->check(CLI::ExistingFile);
    embed->add_option("--variant", variant, "rr_sa, rr_ssa_bin or rr_ssa_full")->required();
    embed->add_option("--k", k, "Embedding dimension")->required();
    embed->add_option("--out", out_path, "Output CSV")->required();

    auto* clusters = app.add_subcommand("clusters", "Cluster map entities by k-means on their embedding");
    clusters->add_option("--map", map_path, "Map (JSON)")->required()->check(CLI::ExistingFile);
    clusters->add_option("--design", design_path, "Design matrix CSV (rr_ssa variants)")->check(CLI::ExistingFile);
    clusters->add_option("--variant", variant, "rr_sa (default), rr_ssa_bin or rr_ssa_full");
    clusters->add_option("--k", k, "Embedding dimension and cluster count")->required();
    clusters->add_option("--seed", seed, "k-means seed");
    clusters->add_option("--out", out_path, "Output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path);
        if (*synth) return cmd_synth(spec_path, synth_out);
        if (*embed) return cmd_embed(map_path, design_path, variant, k, out_path);
        if (*clusters) return cmd_clusters(map_path, design_path, variant, k, seed, out_path);
    } catch (const std::exception& e) {
        std::cerr << "geosurv: error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
