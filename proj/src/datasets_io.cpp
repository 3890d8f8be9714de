#include "imtsforge/datasets_io.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "imtsforge/float_text.hpp"
#include "imtsforge/generator.hpp"
#include "imtsforge/rng.hpp"

namespace imts::io {
namespace {

using nlohmann::json;

constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001B3ULL;

std::uint64_t fnv1a64_continue(std::uint64_t hash, std::string_view bytes) {
    for (const char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= kFnvPrime;
    }
    return hash;
}

std::string bundle_hash(std::string_view observations, std::string_view ground_truth) {
    std::uint64_t hash = kFnvOffset;
    hash = fnv1a64_continue(hash, observations);
    hash = fnv1a64_continue(hash, ground_truth);
    return hash_hex(hash);
}

std::string observations_csv(const Dataset& dataset) {
    std::string out = "instance_id,t,channel,value\n";
    for (const ImtsInstance& instance : dataset.instances) {
        for (const Observation& obs : instance.observations) {
            out += std::to_string(instance.id);
            out += ',';
            out += format_double(obs.t);
            out += ',';
            out += std::to_string(obs.channel);
            out += ',';
            out += format_double(obs.value);
            out += '\n';
        }
    }
    return out;
}

std::string ground_truth_csv(const Dataset& dataset) {
    const auto channels = static_cast<std::size_t>(dataset.meta.channels);
    std::string out = "instance_id,step,channel,value\n";
    for (const ImtsInstance& instance : dataset.instances) {
        for (std::size_t m = 0; m < dataset.meta.window_steps; ++m) {
            for (std::size_t c = 0; c < channels; ++c) {
                out += std::to_string(instance.id);
                out += ',';
                out += std::to_string(m);
                out += ',';
                out += std::to_string(c);
                out += ',';
                out += format_double(instance.ground_truth[m * channels + c]);
                out += '\n';
            }
        }
    }
    return out;
}

json stats_to_json(const ChannelStats& stats) {
    return json{{"mean", stats.mean}, {"std", stats.stddev}};
}

ChannelStats stats_from_json(const json& j) {
    ChannelStats stats;
    stats.mean = j.at("mean").get<std::vector<double>>();
    stats.stddev = j.at("std").get<std::vector<double>>();
    return stats;
}

json build_manifest(const Dataset& dataset, std::string_view obs_hash,
                    std::string_view truth_hash, std::string_view combined_hash) {
    const DatasetMeta& meta = dataset.meta;
    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["system_name"] = meta.system_name;
    manifest["system_source"] = meta.system_source;
    manifest["duration_unit"] = meta.duration_unit;
    manifest["default_duration"] = meta.default_duration;
    manifest["channels"] = meta.channels;
    manifest["protocol"] = meta.protocol;
    manifest["split_fraction"] = meta.split_fraction;
    manifest["rng_algorithm"] = meta.rng_algorithm;
    manifest["master_seed"] = meta.master_seed;
    manifest["spread"] = {{"sigma_initial", meta.sigma_initial},
                          {"sigma_const", meta.sigma_const},
                          {"sigma_dur", meta.sigma_dur}};
    manifest["config"] = {{"instances", meta.instances},
                          {"grid_steps", meta.grid_steps},
                          {"window_steps", meta.window_steps},
                          {"onset_range", meta.onset_range},
                          {"dropout", meta.dropout},
                          {"noise_std", meta.noise_std}};
    manifest["eval_protocol"] = {{"eval_samples", meta.eval_samples},
                                 {"eval_steps", meta.eval_steps},
                                 {"score_window", meta.score_window}};
    manifest["eval_stats"] = stats_to_json(meta.eval_stats);
    manifest["normalization"] = stats_to_json(meta.normalization);
    manifest["rejections"] = {{"solver", meta.rejected_solver},
                              {"explosion", meta.rejected_explosion},
                              {"regenerated", meta.regenerated}};
    if (meta.difficulty) {
        const grad::DifficultyReport& d = *meta.difficulty;
        manifest["difficulty"] = {{"aggregated_jgd", d.aggregated_jgd},
                                  {"per_channel_jgd", d.per_channel_jgd},
                                  {"per_channel_mpgd", d.per_channel_mpgd},
                                  {"per_channel_mgd_mean", d.per_channel_mgd_mean},
                                  {"channel_mean", d.channel_mean},
                                  {"channel_std", d.channel_std}};
    }

    std::size_t observation_count = 0;
    json provenance = json::array();
    for (const ImtsInstance& instance : dataset.instances) {
        observation_count += instance.observations.size();
        provenance.push_back({{"id", instance.id},
                              {"onset", instance.onset_index},
                              {"x0", instance.sampled_x0},
                              {"a", instance.sampled_a}});
    }
    manifest["instances"] = std::move(provenance);
    manifest["counts"] = {{"instances", dataset.instances.size()},
                          {"observations", observation_count}};
    manifest["hashes"] = {{kObservationsFile, std::string(obs_hash)},
                          {kGroundTruthFile, std::string(truth_hash)},
                          {"bundle", std::string(combined_hash)}};
    return manifest;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("missing file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return std::move(buffer).str();
}

json load_manifest(const std::filesystem::path& dir) {
    const std::string text = read_file(dir / kManifestFile);
    json manifest;
    try {
        manifest = json::parse(text);
    } catch (const json::parse_error& e) {
        throw IoError("malformed manifest: " + std::string(e.what()));
    }
    const int version = manifest.at("format_version").get<int>();
    if (version != kFormatVersion) {
        throw VersionError("unsupported bundle format version " + std::to_string(version));
    }
    return manifest;
}

DatasetMeta meta_from_manifest(const json& manifest) {
    DatasetMeta meta;
    meta.format_version = manifest.at("format_version").get<int>();
    meta.system_name = manifest.at("system_name").get<std::string>();
    meta.system_source = manifest.at("system_source").get<std::string>();
    meta.duration_unit = manifest.at("duration_unit").get<std::string>();
    meta.default_duration = manifest.at("default_duration").get<double>();
    meta.channels = manifest.at("channels").get<int>();
    meta.protocol = manifest.at("protocol").get<std::string>();
    meta.split_fraction = manifest.at("split_fraction").get<double>();
    meta.rng_algorithm = manifest.at("rng_algorithm").get<std::string>();
    meta.master_seed = manifest.at("master_seed").get<std::uint64_t>();
    const json& spread = manifest.at("spread");
    meta.sigma_initial = spread.at("sigma_initial").get<double>();
    meta.sigma_const = spread.at("sigma_const").get<double>();
    meta.sigma_dur = spread.at("sigma_dur").get<double>();
    const json& config = manifest.at("config");
    meta.instances = config.at("instances").get<std::size_t>();
    meta.grid_steps = config.at("grid_steps").get<std::size_t>();
    meta.window_steps = config.at("window_steps").get<std::size_t>();
    meta.onset_range = config.at("onset_range").get<std::size_t>();
    meta.dropout = config.at("dropout").get<double>();
    meta.noise_std = config.at("noise_std").get<double>();
    const json& protocol = manifest.at("eval_protocol");
    meta.eval_samples = protocol.at("eval_samples").get<std::size_t>();
    meta.eval_steps = protocol.at("eval_steps").get<std::size_t>();
    meta.score_window = protocol.at("score_window").get<std::size_t>();
    meta.eval_stats = stats_from_json(manifest.at("eval_stats"));
    meta.normalization = stats_from_json(manifest.at("normalization"));
    const json& rejections = manifest.at("rejections");
    meta.rejected_solver = rejections.at("solver").get<std::size_t>();
    meta.rejected_explosion = rejections.at("explosion").get<std::size_t>();
    meta.regenerated = rejections.at("regenerated").get<std::size_t>();
    if (manifest.contains("difficulty")) {
        const json& d = manifest.at("difficulty");
        grad::DifficultyReport report;
        report.aggregated_jgd = d.at("aggregated_jgd").get<double>();
        report.per_channel_jgd = d.at("per_channel_jgd").get<std::vector<double>>();
        report.per_channel_mpgd = d.at("per_channel_mpgd").get<std::vector<double>>();
        report.per_channel_mgd_mean = d.at("per_channel_mgd_mean").get<std::vector<double>>();
        report.channel_mean = d.at("channel_mean").get<std::vector<double>>();
        report.channel_std = d.at("channel_std").get<std::vector<double>>();
        meta.difficulty = std::move(report);
    }
    return meta;
}

struct CsvRow {
    int id;
    std::string_view second;
    int channel;
    double value;
};

// rows look like: <int>,<field>,<int>,<real>
CsvRow parse_row(std::string_view line, const char* file, std::size_t line_no) {
    const auto fail = [&](const char* what) -> CsvRow {
        throw IoError(std::string(file) + " line " + std::to_string(line_no) + ": " + what);
    };
    CsvRow row{};
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    const std::size_t c3 = c2 == std::string_view::npos ? c2 : line.find(',', c2 + 1);
    if (c3 == std::string_view::npos) return fail("expected 4 comma-separated fields");
    try {
        row.id = static_cast<int>(std::stol(std::string(line.substr(0, c1))));
        row.second = line.substr(c1 + 1, c2 - c1 - 1);
        row.channel = static_cast<int>(std::stol(std::string(line.substr(c2 + 1, c3 - c2 - 1))));
        row.value = parse_double(line.substr(c3 + 1));
    } catch (const std::exception&) {
        return fail("malformed field");
    }
    return row;
}

void for_each_row(const std::string& content, const char* file, std::string_view header,
                  const std::function<void(const CsvRow&)>& fn) {
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
        std::size_t nl = content.find('\n', pos);
        if (nl == std::string::npos) nl = content.size();
        const std::string_view line(content.data() + pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line_no == 1) {
            if (line != header) throw IoError(std::string(file) + ": unexpected header");
            continue;
        }
        if (line.empty()) continue;
        fn(parse_row(line, file, line_no));
    }
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    return fnv1a64_continue(kFnvOffset, bytes);
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    return fnv1a64(read_file(path));
}

std::string hash_hex(std::uint64_t hash) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kDigits[hash & 0xF];
        hash >>= 4;
    }
    return out;
}

std::string write_bundle(const Dataset& dataset, const std::filesystem::path& dir, bool force) {
    if (std::filesystem::exists(dir / kManifestFile) && !force) {
        throw IoError("bundle already exists at " + dir.string() + " (use force to overwrite)");
    }
    std::filesystem::create_directories(dir);

    const std::string observations = observations_csv(dataset);
    const std::string truth = ground_truth_csv(dataset);
    const std::string obs_hash = hash_hex(fnv1a64(observations));
    const std::string truth_hash = hash_hex(fnv1a64(truth));
    const std::string combined = bundle_hash(observations, truth);

    const json manifest = build_manifest(dataset, obs_hash, truth_hash, combined);
    write_file(dir / kObservationsFile, observations);
    write_file(dir / kGroundTruthFile, truth);
    write_file(dir / kManifestFile, manifest.dump(2) + "\n");
    return combined;
}

Dataset read_bundle(const std::filesystem::path& dir) {
    const json manifest = load_manifest(dir);
    Dataset dataset;
    dataset.meta = meta_from_manifest(manifest);
    const auto channels = static_cast<std::size_t>(dataset.meta.channels);

    const std::string observations = read_file(dir / kObservationsFile);
    const std::string truth = read_file(dir / kGroundTruthFile);
    const json& hashes = manifest.at("hashes");
    if (hash_hex(fnv1a64(observations)) != hashes.at(kObservationsFile).get<std::string>() ||
        hash_hex(fnv1a64(truth)) != hashes.at(kGroundTruthFile).get<std::string>()) {
        throw HashMismatchError("bundle data files do not match recorded hashes");
    }

    const json& counts = manifest.at("counts");
    const auto instance_count = counts.at("instances").get<std::size_t>();
    const auto observation_count = counts.at("observations").get<std::size_t>();

    dataset.instances.resize(instance_count);
    const json& provenance = manifest.at("instances");
    if (provenance.size() != instance_count) {
        throw IoError("manifest provenance entries do not match the instance count");
    }
    for (const json& p : provenance) {
        const int id = p.at("id").get<int>();
        if (id < 0 || static_cast<std::size_t>(id) >= instance_count) {
            throw IoError("instance id out of range in manifest");
        }
        ImtsInstance& instance = dataset.instances[static_cast<std::size_t>(id)];
        instance.id = id;
        instance.onset_index = p.at("onset").get<int>();
        instance.sampled_x0 = p.at("x0").get<std::vector<double>>();
        instance.sampled_a = p.at("a").get<std::vector<double>>();
        instance.ground_truth.assign(dataset.meta.window_steps * channels, 0.0);
    }

    std::size_t seen_observations = 0;
    for_each_row(observations, kObservationsFile, "instance_id,t,channel,value",
                 [&](const CsvRow& row) {
                     if (row.id < 0 || static_cast<std::size_t>(row.id) >= instance_count) {
                         throw IoError("observation references unknown instance id");
                     }
                     dataset.instances[static_cast<std::size_t>(row.id)].observations.push_back(
                         {parse_double(row.second), row.channel, row.value});
                     ++seen_observations;
                 });
    if (seen_observations != observation_count) {
        throw IoError("observations.csv row count does not match the manifest");
    }

    for_each_row(truth, kGroundTruthFile, "instance_id,step,channel,value",
                 [&](const CsvRow& row) {
                     if (row.id < 0 || static_cast<std::size_t>(row.id) >= instance_count) {
                         throw IoError("ground truth references unknown instance id");
                     }
                     std::size_t step = 0;
                     const auto res = std::from_chars(
                         row.second.data(), row.second.data() + row.second.size(), step);
                     if (res.ec != std::errc{} || step >= dataset.meta.window_steps ||
                         row.channel < 0 || static_cast<std::size_t>(row.channel) >= channels) {
                         throw IoError("ground truth row out of range");
                     }
                     dataset.instances[static_cast<std::size_t>(row.id)]
                         .ground_truth[step * channels + static_cast<std::size_t>(row.channel)] =
                         row.value;
                 });
    return dataset;
}

std::string read_manifest_hash(const std::filesystem::path& dir) {
    const json manifest = load_manifest(dir);
    return manifest.at("hashes").at("bundle").get<std::string>();
}

VerifyResult verify_bundle(const std::filesystem::path& dir, std::size_t jobs) {
    const json manifest = load_manifest(dir);
    const DatasetMeta meta = meta_from_manifest(manifest);
    if (meta.rng_algorithm != rng::kAlgorithmId) {
        throw IoError("bundle was generated with RNG '" + meta.rng_algorithm +
                      "'; this build uses '" + rng::kAlgorithmId +
                      "', so regeneration verification is refused");
    }

    systems::Registry registry;
    systems::RegistryEntry entry;
    entry.spec = dsl::parse_system(meta.system_source);
    entry.default_duration = meta.default_duration;
    registry.add(std::move(entry));

    Dataset regenerated;
    if (meta.protocol == "lorenz") {
        gen::LorenzProtocolConfig config;
        config.instances = meta.instances;
        config.duration = meta.sigma_dur;
        config.grid_steps = meta.grid_steps;
        config.window_steps = meta.window_steps;
        config.onset_range = meta.onset_range;
        config.dropout = meta.dropout;
        config.noise_std = meta.noise_std;
        config.master_seed = meta.master_seed;
        regenerated = gen::lorenz_protocol(registry, config, jobs);
    } else {
        gen::SpreadConfig spread{meta.sigma_initial, meta.sigma_const, meta.sigma_dur};
        gen::DatasetConfig config;
        config.instances = meta.instances;
        config.grid_steps = meta.grid_steps;
        config.window_steps = meta.window_steps;
        config.onset_range = meta.onset_range;
        config.dropout = meta.dropout;
        config.noise_std = meta.noise_std;
        config.master_seed = meta.master_seed;
        gen::EvalProtocol protocol{meta.eval_samples, meta.eval_steps, meta.score_window};
        regenerated =
            gen::materialize_dataset(registry, meta.system_name, spread, config, protocol, jobs);
    }

    VerifyResult result;
    result.recorded_hash = manifest.at("hashes").at("bundle").get<std::string>();
    result.regenerated_hash =
        bundle_hash(observations_csv(regenerated), ground_truth_csv(regenerated));
    result.reproduced = result.recorded_hash == result.regenerated_hash;
    return result;
}

}  // namespace imts::io
