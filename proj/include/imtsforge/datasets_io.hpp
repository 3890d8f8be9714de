#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "imtsforge/dataset.hpp"

// Bundle layout under one directory:
//   manifest.json      configuration, seeds, statistics, per-instance
//                      provenance, data-file hashes
//   observations.csv   instance_id,t,channel,value  sorted by (id, t, channel)
//   ground_truth.csv   instance_id,step,channel,value
// Reals are written in shortest round-trip decimal form, so reading a bundle
// reconstructs every value bit-exactly and regeneration can be verified by
// hash comparison alone.
namespace imts::io {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class HashMismatchError : public IoError {
public:
    using IoError::IoError;
};

class VersionError : public IoError {
public:
    using IoError::IoError;
};

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kObservationsFile = "observations.csv";
inline constexpr const char* kGroundTruthFile = "ground_truth.csv";

// FNV-1a, 64 bit, as a 16-digit hex string
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t hash);

// Writes the bundle and returns the manifest hash (combined hash over both
// data files). Refuses to overwrite an existing bundle unless force is set.
std::string write_bundle(const Dataset& dataset, const std::filesystem::path& dir,
                         bool force = false);

Dataset read_bundle(const std::filesystem::path& dir);

// The recorded manifest hash, without loading the data files.
std::string read_manifest_hash(const std::filesystem::path& dir);

struct VerifyResult {
    bool reproduced = false;
    std::string recorded_hash;
    std::string regenerated_hash;
};

// Regenerates the dataset from the manifest configuration alone and compares
// the resulting data-file hashes against the recorded ones. Refuses bundles
// written with a different RNG algorithm id.
VerifyResult verify_bundle(const std::filesystem::path& dir, std::size_t jobs = 1);

}  // namespace imts::io
