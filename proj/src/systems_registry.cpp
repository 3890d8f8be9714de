#include "imtsforge/systems_registry.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace imts::systems {
namespace {

struct BuiltinDef {
    const char* source;
    double default_duration;
    const char* tags;
};

// Literature parameters:
//   lin             exponential growth, unit rate
//   harmonic        unit-frequency oscillator, x = (cos t, -sin t)
//   sine            unit-frequency oscillator phased so x0 = sin(omega t)
//   vanderpol       van der Pol (1926), mu = 1
//   lotka_volterra  Lotka (1925) predator-prey, (alpha,beta,delta,gamma) = (1.5,1,1,3)
//   fitzhugh_nagumo FitzHugh (1961), a=0.7 b=0.8 tau=12.5 with tonic drive 0.5
//   sir             Kermack-McKendrick SIR, beta=0.3 gamma=0.1 (R0 = 3), unit population
//   lorenz          Lorenz (1963), rho=28 sigma=10 beta=8/3
//   lorenz96        Lorenz (1996) five-site ring, forcing F=8
//   blowup          x' = x^2, finite-time escape at t = 1; exercises rejection paths
const BuiltinDef kBuiltins[] = {
    {R"(system lin
channels 1
constants a=1.0
init 1.0
duration_unit "1"
d0 = a * x0
)",
     1.0, "linear"},
    {R"(system harmonic
channels 2
constants omega=1.0
init 1.0 0.0
duration_unit "rad"
d0 = omega * x1
d1 = -(omega * x0)
)",
     6.283185307179586, "oscillator"},
    {R"(system sine
channels 2
constants omega=1.0
init 0.0 1.0
duration_unit "rad"
d0 = omega * x1
d1 = -(omega * x0)
)",
     6.283185307179586, "oscillator"},
    {R"(system vanderpol
channels 2
constants mu=1.0
init 2.0 0.0
duration_unit "1"
d0 = x1
d1 = mu * (1 - x0^2) * x1 - x0
)",
     10.0, "oscillator nonlinear"},
    {R"(system lotka_volterra
channels 2
constants alpha=1.5 beta=1.0 delta=1.0 gamma=3.0
init 1.0 1.0
duration_unit "1"
d0 = alpha * x0 - beta * x0 * x1
d1 = delta * x0 * x1 - gamma * x1
)",
     10.0, "population nonlinear"},
    {R"(system fitzhugh_nagumo
channels 2
constants a=0.7 b=0.8 tau=12.5 i_ext=0.5
init 1.0 0.05
duration_unit "1"
d0 = x0 - x0^3 / 3 - x1 + i_ext
d1 = (x0 + a - b * x1) / tau
)",
     40.0, "neuron nonlinear"},
    {R"(system sir
channels 3
constants beta=0.3 gamma=0.1
init 0.99 0.01 0.0
duration_unit "day"
d0 = -(beta * x0 * x1)
d1 = beta * x0 * x1 - gamma * x1
d2 = gamma * x1
)",
     100.0, "epidemiology"},
    {R"(system lorenz
channels 3
constants rho=28.0 sigma=10.0 beta=8/3
init 2.0 1.0 1.0
duration_unit "1"
d0 = sigma * (x1 - x0)
d1 = x0 * (rho - x2) - x1
d2 = x0 * x1 - beta * x2
)",
     1.0, "chaotic"},
    {R"(system lorenz96
channels 5
constants f=8.0
init 8.01 8.0 8.0 8.0 8.0
duration_unit "MTU"
d0 = (x1 - x3) * x4 - x0 + f
d1 = (x2 - x4) * x0 - x1 + f
d2 = (x3 - x0) * x1 - x2 + f
d3 = (x4 - x1) * x2 - x3 + f
d4 = (x0 - x2) * x3 - x4 + f
)",
     2.0, "chaotic"},
    {R"(system blowup
channels 1
constants c=1.0
init 1.0
duration_unit "1"
d0 = c * x0^2
)",
     0.5, "singular"},
};

std::vector<std::string> split_tags(std::string_view tags) {
    std::vector<std::string> out;
    std::istringstream in{std::string(tags)};
    std::string tag;
    while (in >> tag) out.push_back(tag);
    return out;
}

}  // namespace

Registry Registry::with_builtins() {
    Registry registry;
    for (const BuiltinDef& def : kBuiltins) {
        RegistryEntry entry;
        entry.spec = dsl::parse_system(def.source);
        entry.source = RegistryEntry::Source::builtin;
        entry.default_duration = def.default_duration;
        entry.tags = split_tags(def.tags);
        registry.add(std::move(entry));
    }
    return registry;
}

void Registry::add(RegistryEntry entry) {
    const std::string name = entry.spec.name;
    if (entries_.contains(name)) {
        throw RegistryError("duplicate system name '" + name + "'");
    }
    entries_.emplace(name, std::move(entry));
}

void Registry::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RegistryError("cannot open system file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    RegistryEntry entry;
    entry.spec = dsl::parse_system(buffer.str());
    entry.source = RegistryEntry::Source::dsl_file;
    entry.path = path.string();
    entry.default_duration = 1.0;  // DSL files carry no unit table; one unit = one time unit
    add(std::move(entry));
}

void Registry::load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw RegistryError("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ode") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) load_file(path);
}

const RegistryEntry& Registry::get(std::string_view name) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw RegistryError("unknown system '" + std::string(name) + "'");
    }
    return it->second;
}

bool Registry::contains(std::string_view name) const { return entries_.contains(name); }

std::vector<ListRow> Registry::list() const {
    std::vector<ListRow> rows;
    rows.reserve(entries_.size());
    for (const auto& [name, entry] : entries_) {
        rows.push_back({name, entry.spec.channels, entry.spec.constant_names.size(),
                        entry.source});
    }
    return rows;  // std::map iteration is already alphabetical
}

}  // namespace imts::systems
