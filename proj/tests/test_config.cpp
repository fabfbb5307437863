#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ctex/config.hpp"

using namespace ctex;

namespace {

std::vector<KeySpec> schema() {
    return {
        {"seed", "7", "global seed"},
        {"pretrain.tau", "0.5", "temperature"},
        {"pretrain.epochs", "15", "epochs"},
        {"out", "run", "output directory"},
    };
}

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "ctex_config_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("defaults are visible through typed getters") {
    const Config cfg(schema());
    CHECK(cfg.str("out") == "run");
    CHECK(cfg.integer("pretrain.epochs") == 15);
    CHECK(cfg.real("pretrain.tau") == 0.5);
    CHECK(cfg.seed("seed") == 7);
}

TEST_CASE("config files parse key = value lines with comments") {
    const auto path = temp_file("good.cfg");
    std::ofstream(path) << "# a comment\n"
                        << "pretrain.tau = 0.25   # trailing comment\n"
                        << "\n"
                        << "seed=42\n";
    Config cfg(schema());
    cfg.load_file(path);
    CHECK(cfg.real("pretrain.tau") == 0.25);
    CHECK(cfg.seed("seed") == 42);
    CHECK(cfg.integer("pretrain.epochs") == 15);  // untouched default
}

TEST_CASE("unknown keys are rejected by name") {
    const auto path = temp_file("unknown.cfg");
    std::ofstream(path) << "pretrain.taus = 0.25\n";
    Config cfg(schema());
    try {
        cfg.load_file(path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("pretrain.taus") != std::string::npos);
    }
    CHECK_THROWS_AS(cfg.set("nope", "1"), ConfigError);
    CHECK_THROWS_AS(cfg.str("nope"), ConfigError);
}

TEST_CASE("malformed lines and missing files are errors") {
    const auto path = temp_file("broken.cfg");
    std::ofstream(path) << "pretrain.tau 0.25\n";
    Config cfg(schema());
    CHECK_THROWS_AS(cfg.load_file(path), ConfigError);
    CHECK_THROWS_AS(cfg.load_file(temp_file("missing.cfg")), std::runtime_error);
}

TEST_CASE("explicit sets override file values") {
    const auto path = temp_file("layered.cfg");
    std::ofstream(path) << "seed = 1\npretrain.epochs = 3\n";
    Config cfg(schema());
    cfg.load_file(path);
    cfg.set("seed", "99");  // flag wins
    CHECK(cfg.seed("seed") == 99);
    CHECK(cfg.integer("pretrain.epochs") == 3);
}

TEST_CASE("typed getter failures name the key") {
    Config cfg(schema());
    cfg.set("pretrain.epochs", "abc");
    CHECK_THROWS_AS(cfg.integer("pretrain.epochs"), ConfigError);
    cfg.set("pretrain.tau", "not-a-number");
    CHECK_THROWS_AS(cfg.real("pretrain.tau"), ConfigError);
    cfg.set("seed", "-1");
    CHECK_THROWS_AS(cfg.seed("seed"), ConfigError);
}

TEST_CASE("snapshots replay to an identical configuration") {
    Config cfg(schema());
    cfg.set("pretrain.tau", "0.125");
    cfg.set("seed", "31");
    const auto snap = temp_file("snapshot.cfg");
    cfg.write_snapshot(snap);

    Config replay(schema());
    replay.load_file(snap);
    for (const auto& ks : replay.schema()) {
        CHECK(replay.str(ks.key) == cfg.str(ks.key));
    }
}
