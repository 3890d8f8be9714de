#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "imtsforge/expr_dsl.hpp"

namespace imts::systems {

class RegistryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RegistryEntry {
    dsl::SystemSpec spec;
    enum class Source { builtin, dsl_file };
    Source source = Source::builtin;
    std::string path;  // for dsl_file entries
    // One unit of sigma_dur in absolute time for this system; stands in for
    // the per-model duration unit the sources would provide.
    double default_duration = 1.0;
    std::vector<std::string> tags;
};

struct ListRow {
    std::string name;
    int channels = 0;
    std::size_t constants = 0;
    RegistryEntry::Source source{};
};

// Immutable after construction/loading; concurrent reads are safe.
class Registry {
public:
    static Registry with_builtins();

    void add(RegistryEntry entry);                          // duplicate name -> RegistryError
    void load_file(const std::filesystem::path& path);      // one *.ode DSL file
    void load_directory(const std::filesystem::path& dir);  // all *.ode files, sorted

    const RegistryEntry& get(std::string_view name) const;  // not found -> RegistryError
    bool contains(std::string_view name) const;
    std::vector<ListRow> list() const;  // alphabetical

private:
    std::map<std::string, RegistryEntry, std::less<>> entries_;
};

}  // namespace imts::systems
