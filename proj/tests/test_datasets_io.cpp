#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "imtsforge/datasets_io.hpp"
#include "imtsforge/generator.hpp"

using namespace imts;

namespace {

std::filesystem::path temp_dir(const char* name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

Dataset small_dataset(std::uint64_t seed = 42) {
    static const auto registry = systems::Registry::with_builtins();
    gen::DatasetConfig config;
    config.instances = 15;
    config.master_seed = seed;
    return gen::materialize_dataset(registry, "harmonic",
                                    {0.2, 0.1, 2.0 * std::numbers::pi}, config);
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void patch_file(const std::filesystem::path& path, const std::string& from,
                const std::string& to) {
    std::string text = slurp(path);
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, from.size(), to);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

}  // namespace

TEST_CASE("bundle round trip reconstructs every value bit-exactly") {
    const auto dir = temp_dir("imts_io_roundtrip");
    const auto dataset = small_dataset();
    const std::string hash = io::write_bundle(dataset, dir);
    CHECK(hash.size() == 16);

    const auto loaded = io::read_bundle(dir);
    CHECK(loaded.meta.system_name == dataset.meta.system_name);
    CHECK(loaded.meta.master_seed == dataset.meta.master_seed);
    CHECK(loaded.meta.sigma_dur == dataset.meta.sigma_dur);
    CHECK(loaded.meta.normalization.mean == dataset.meta.normalization.mean);
    CHECK(loaded.meta.normalization.stddev == dataset.meta.normalization.stddev);
    REQUIRE(loaded.meta.difficulty.has_value());
    CHECK(loaded.meta.difficulty->aggregated_jgd == dataset.meta.difficulty->aggregated_jgd);
    REQUIRE(loaded.instances.size() == dataset.instances.size());
    for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
        const auto& expected = dataset.instances[i];
        const auto& actual = loaded.instances[i];
        CHECK(actual.onset_index == expected.onset_index);
        CHECK(actual.ground_truth == expected.ground_truth);
        CHECK(actual.sampled_x0 == expected.sampled_x0);
        CHECK(actual.sampled_a == expected.sampled_a);
        REQUIRE(actual.observations.size() == expected.observations.size());
        for (std::size_t k = 0; k < expected.observations.size(); ++k) {
            CHECK(actual.observations[k].t == expected.observations[k].t);
            CHECK(actual.observations[k].channel == expected.observations[k].channel);
            CHECK(actual.observations[k].value == expected.observations[k].value);
        }
    }
}

TEST_CASE("rewriting the same dataset yields byte-identical files") {
    const auto dir_a = temp_dir("imts_io_rewrite_a");
    const auto dir_b = temp_dir("imts_io_rewrite_b");
    const std::string hash_a = io::write_bundle(small_dataset(), dir_a);
    const std::string hash_b = io::write_bundle(small_dataset(), dir_b);
    CHECK(hash_a == hash_b);
    for (const char* file : {io::kManifestFile, io::kObservationsFile, io::kGroundTruthFile}) {
        CHECK(slurp(dir_a / file) == slurp(dir_b / file));
    }
}

TEST_CASE("existing bundles are only overwritten with force") {
    const auto dir = temp_dir("imts_io_force");
    const auto dataset = small_dataset();
    (void)io::write_bundle(dataset, dir);
    CHECK_THROWS_AS((void)io::write_bundle(dataset, dir), io::IoError);
    CHECK_NOTHROW((void)io::write_bundle(dataset, dir, true));
}

TEST_CASE("tampered data files fail the hash check") {
    const auto dir = temp_dir("imts_io_tamper");
    (void)io::write_bundle(small_dataset(), dir);
    std::string text = slurp(dir / io::kObservationsFile);
    const auto pos = text.find_last_of("0123456789");
    text[pos] = text[pos] == '7' ? '8' : '7';
    std::ofstream(dir / io::kObservationsFile, std::ios::binary | std::ios::trunc) << text;
    CHECK_THROWS_AS((void)io::read_bundle(dir), io::HashMismatchError);
}

TEST_CASE("unknown format versions are refused explicitly") {
    const auto dir = temp_dir("imts_io_version");
    (void)io::write_bundle(small_dataset(), dir);
    patch_file(dir / io::kManifestFile, "\"format_version\": 1", "\"format_version\": 999");
    CHECK_THROWS_AS((void)io::read_bundle(dir), io::VersionError);
}

TEST_CASE("manifest counts must match the data files") {
    const auto dir = temp_dir("imts_io_counts");
    const auto dataset = small_dataset();
    (void)io::write_bundle(dataset, dir);
    std::size_t observations = 0;
    for (const auto& instance : dataset.instances) observations += instance.observations.size();
    patch_file(dir / io::kManifestFile,
               "\"observations\": " + std::to_string(observations),
               "\"observations\": " + std::to_string(observations + 1));
    CHECK_THROWS_AS((void)io::read_bundle(dir), io::IoError);
}

TEST_CASE("missing files are reported") {
    const auto dir = temp_dir("imts_io_missing");
    (void)io::write_bundle(small_dataset(), dir);
    std::filesystem::remove(dir / io::kGroundTruthFile);
    CHECK_THROWS_AS((void)io::read_bundle(dir), io::IoError);
    CHECK_THROWS_AS((void)io::read_bundle(temp_dir("imts_io_nowhere")), io::IoError);
}

TEST_CASE("verification regenerates the recorded hash") {
    const auto dir = temp_dir("imts_io_verify");
    const std::string hash = io::write_bundle(small_dataset(), dir);
    const auto result = io::verify_bundle(dir, 2);
    CHECK(result.reproduced);
    CHECK(result.recorded_hash == hash);
    CHECK(result.regenerated_hash == hash);
    CHECK(io::read_manifest_hash(dir) == hash);
}

TEST_CASE("foreign RNG algorithms load but refuse verification") {
    const auto dir = temp_dir("imts_io_rng");
    (void)io::write_bundle(small_dataset(), dir);
    patch_file(dir / io::kManifestFile, "splitmix64-ctr-v1", "other-rng-v9");
    CHECK_NOTHROW((void)io::read_bundle(dir));
    CHECK_THROWS_AS((void)io::verify_bundle(dir), io::IoError);
}

TEST_CASE("verification works for the fixed-constant chaotic protocol") {
    const auto dir = temp_dir("imts_io_verify_lorenz");
    static const auto registry = systems::Registry::with_builtins();
    gen::LorenzProtocolConfig config;
    config.instances = 20;
    config.duration = 5.0;
    config.master_seed = 9;
    const auto dataset = gen::lorenz_protocol(registry, config);
    const std::string hash = io::write_bundle(dataset, dir);
    const auto result = io::verify_bundle(dir, 2);
    CHECK(result.reproduced);
    CHECK(result.recorded_hash == hash);
}
