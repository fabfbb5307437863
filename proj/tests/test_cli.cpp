// Exercises the installed ctex binary's interface contracts: help output,
// exit codes, the ablation CSV grid shape, and unknown-key rejection.
// Usage: test_cli <path-to-ctex>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
    if (!ok) {
        std::printf("FAILED: %s\n", what.c_str());
        ++g_failures;
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Shell {
    std::string bin;
    fs::path root;

    int run(const std::string& args, const std::string& log_name) const {
        const fs::path log = root / log_name;
        const std::string cmd =
            "\"" + bin + "\" " + args + " > " + log.string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
};

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::printf("usage: test_cli <ctex binary>\n");
        return 1;
    }
    Shell sh;
    sh.bin = argv[1];
    sh.root = fs::temp_directory_path() / "ctex_cli_test";
    fs::remove_all(sh.root);
    fs::create_directories(sh.root);

    // --version and --help exit 0
    check(sh.run("--version", "version.log") == 0, "--version should exit 0");
    check(sh.run("--help", "help.log") == 0, "--help should exit 0");

    // subcommand help lists every accepted key with its default
    check(sh.run("pretrain --help", "pretrain_help.log") == 0, "pretrain --help should exit 0");
    const std::string help = slurp(sh.root / "pretrain_help.log");
    for (const std::string key : {"--pretrain.tau", "--pretrain.lr_encoder", "--augment.k_max",
                                  "--seed", "--data", "--out"}) {
        check(help.find(key) != std::string::npos, "pretrain --help missing " + key);
    }
    check(help.find("[default: 0.5]") != std::string::npos,
          "pretrain --help missing the tau default");

    // missing required option is a usage error (exit 1)
    check(sh.run("probe --out " + (sh.root / "p").string(), "probe_usage.log") == 1,
          "probe without --checkpoint should exit 1");
    // unknown subcommand is a usage error
    check(sh.run("frobnicate", "unknown_cmd.log") == 1, "unknown subcommand should exit 1");

    // unknown config key is rejected by name (exit 1)
    {
        std::ofstream bad(sh.root / "bad.cfg");
        bad << "no.such.key = 1\n";
    }
    check(sh.run("gen-data --config " + (sh.root / "bad.cfg").string() + " --out " +
                     (sh.root / "g").string(),
                 "bad_key.log") == 1,
          "unknown config key should exit 1");
    check(slurp(sh.root / "bad_key.log").find("no.such.key") != std::string::npos,
          "unknown-key error should name the key");

    // tiny corpus for pipeline checks
    const std::string data = (sh.root / "data").string();
    check(sh.run("gen-data --out " + data +
                     " --synth.classes 2 --synth.per_class 6 --synth.size 16 --seed 3",
                 "gen.log") == 0,
          "gen-data failed");
    check(fs::exists(fs::path(data) / "manifest.csv"), "gen-data wrote no manifest");
    check(fs::exists(fs::path(data) / "run_summary.json"), "gen-data wrote no run summary");

    // ablation grid: exactly |maps| x |epochs| data rows, Table-style header
    const std::string abl = (sh.root / "abl").string();
    check(sh.run("ablate --data " + data + " --out " + abl +
                     " --ablate.maps sine,tent --ablate.epochs 1"
                     " --pretrain.batch 6 --pretrain.views_per_epoch 1 --augment.crop 12"
                     " --probe.folds 2 --probe.epochs 20",
                 "ablate.log") == 0,
          "ablate failed");
    {
        std::ifstream csv(fs::path(abl) / "ablation.csv");
        std::string line;
        std::getline(csv, line);
        check(line == "map,epochs,mean_accuracy,std_accuracy,mean_f1,std_f1",
              "ablation.csv header mismatch: " + line);
        int rows = 0;
        while (std::getline(csv, line)) {
            if (!line.empty()) ++rows;
        }
        check(rows == 2, "ablation.csv should have exactly 2 grid rows, got " +
                             std::to_string(rows));
    }
    check(slurp(fs::path(abl) / "summary.json").find("baseline_accuracy_mean") !=
              std::string::npos,
          "ablate summary missing baseline");

    if (g_failures == 0) std::printf("test_cli: all checks passed\n");
    return g_failures;
}
