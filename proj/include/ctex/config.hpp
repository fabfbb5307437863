#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctex {

// Usage errors (unknown keys, malformed files); the CLI maps these to exit
// code 1 as opposed to runtime failures (exit 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct KeySpec {
    std::string key;
    std::string def;
    std::string doc;
};

// Flat key = value configuration with a fixed schema. Values resolve as
// defaults < config file < explicit sets (CLI flags). Unknown keys are
// rejected, naming the key. Nesting is encoded with dotted keys.
class Config {
public:
    explicit Config(std::vector<KeySpec> schema);

    // Parses "key = value" lines; '#' starts a comment, blank lines ignored.
    void load_file(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);

    const std::vector<KeySpec>& schema() const { return schema_; }

    std::string str(const std::string& key) const;
    long integer(const std::string& key) const;
    double real(const std::string& key) const;
    std::uint64_t seed(const std::string& key) const;

    // Sorted key = value dump; replaying a run from this file reproduces it.
    void write_snapshot(const std::filesystem::path& path) const;

private:
    const KeySpec& find(const std::string& key) const;

    std::vector<KeySpec> schema_;
    std::map<std::string, std::string> values_;
};

}  // namespace ctex
