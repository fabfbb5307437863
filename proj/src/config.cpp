#include "ctex/config.hpp"

#include <fstream>

namespace ctex {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

Config::Config(std::vector<KeySpec> schema) : schema_(std::move(schema)) {
    for (const auto& ks : schema_) values_[ks.key] = ks.def;
}

const KeySpec& Config::find(const std::string& key) const {
    for (const auto& ks : schema_) {
        if (ks.key == key) return ks;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

void Config::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: " + path.string() + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        }
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void Config::set(const std::string& key, const std::string& value) {
    find(key);
    values_[key] = value;
}

std::string Config::str(const std::string& key) const {
    find(key);
    return values_.at(key);
}

long Config::integer(const std::string& key) const {
    const std::string v = str(key);
    try {
        std::size_t pos = 0;
        const long out = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
    }
}

double Config::real(const std::string& key) const {
    const std::string v = str(key);
    try {
        std::size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    }
}

std::uint64_t Config::seed(const std::string& key) const {
    const std::string v = str(key);
    try {
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);  // stoull wraps negatives
        std::size_t pos = 0;
        const unsigned long long out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(out);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not a valid seed");
    }
}

void Config::write_snapshot(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path.string());
    out << "# resolved configuration; replay with --config " << path.filename().string()
        << "\n";
    for (const auto& [key, value] : values_) {
        out << key << " = " << value << "\n";
    }
    if (!out) throw std::runtime_error("config: write failed for " + path.string());
}

}  // namespace ctex
