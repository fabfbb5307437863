// ctex: chaotic-map contrastive texture learning pipeline.
//
// Subcommands cover the full workflow: corpus generation, map diagnostics,
// chaotic augmentation, contrastive pretraining, ensemble fine-tuning,
// linear-probe evaluation, the map/epoch ablation grid, and autograd
// self-checks. Every run resolves its configuration (defaults < config file
// < flags), snapshots it to out/resolved_config.txt, and writes a
// machine-readable run_summary.json; replaying a snapshot reproduces the
// run byte-for-byte on the same platform.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ctex/augment.hpp"
#include "ctex/config.hpp"
#include "ctex/data.hpp"
#include "ctex/dynamics.hpp"
#include "ctex/gradcheck.hpp"
#include "ctex/image_io.hpp"
#include "ctex/probe.hpp"
#include "ctex/train.hpp"

namespace fs = std::filesystem;
using namespace ctex;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// Output directory bookkeeping shared by every subcommand.
class Run {
public:
    explicit Run(const Config& cfg)
        : start_(std::chrono::steady_clock::now()), dir_(cfg.str("out")) {
        fs::create_directories(dir_);
        cfg.write_snapshot(dir_ / "resolved_config.txt");
        note(dir_ / "resolved_config.txt");
    }

    const fs::path& dir() const { return dir_; }

    fs::path path(const std::string& file) {
        note(dir_ / file);
        return dir_ / file;
    }

    void note(const fs::path& p) { outputs_.push_back(p.string()); }

    void finish() {
        nlohmann::json j;
        j["status"] = "ok";
        j["wall_time_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        j["outputs"] = outputs_;
        std::ofstream out(dir_ / "run_summary.json");
        out << j.dump(2) << "\n";
    }

private:
    std::chrono::steady_clock::time_point start_;
    fs::path dir_;
    std::vector<std::string> outputs_;
};

// Registers one --flag per schema key; after parsing, explicit flags override
// the config file, which overrides defaults.
class KeyedCommand {
public:
    KeyedCommand(CLI::App& app, const std::string& name, const std::string& desc,
                 std::vector<KeySpec> schema)
        : schema_(std::move(schema)) {
        cmd_ = app.add_subcommand(name, desc);
        cmd_->add_option("--config", config_file_, "key = value configuration file");
        values_.resize(schema_.size());
        options_.resize(schema_.size());
        for (std::size_t i = 0; i < schema_.size(); ++i) {
            options_[i] = cmd_->add_option("--" + schema_[i].key, values_[i],
                                           schema_[i].doc + " [default: " + schema_[i].def + "]");
        }
    }

    CLI::App* app() { return cmd_; }
    bool parsed() const { return cmd_->parsed(); }

    Config resolve() const {
        Config cfg(schema_);
        if (!config_file_.empty()) cfg.load_file(config_file_);
        for (std::size_t i = 0; i < schema_.size(); ++i) {
            if (options_[i]->count() > 0) cfg.set(schema_[i].key, values_[i]);
        }
        return cfg;
    }

private:
    std::vector<KeySpec> schema_;
    CLI::App* cmd_ = nullptr;
    std::string config_file_;
    std::vector<std::string> values_;
    std::vector<CLI::Option*> options_;
};

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// ---- shared schema fragments -------------------------------------------------

std::vector<KeySpec> pretrain_keys(const std::string& out_default) {
    return {
        {"data", "", "dataset directory (class folders); empty = built-in synthetic corpus"},
        {"out", out_default, "output directory"},
        {"seed", "7", "global seed; all random streams derive from it"},
        {"jobs", "1", "worker-thread cap for parallelizable stages"},
        {"synth.classes", "5", "synthetic corpus: number of classes"},
        {"synth.per_class", "40", "synthetic corpus: images per class"},
        {"synth.size", "32", "synthetic corpus: image side in pixels"},
        {"pretrain.map", "sine", "chaotic map for view generation (logistic|tent|sine)"},
        {"pretrain.tau", "0.5", "NT-Xent temperature"},
        {"pretrain.epochs", "15", "pretraining epochs"},
        {"pretrain.batch", "32", "source images per batch (two views each)"},
        {"pretrain.views_per_epoch", "4", "fixed view draws per image per epoch"},
        {"pretrain.lr_encoder", "0.003", "encoder learning rate"},
        {"pretrain.lr_projector", "0.003", "projector learning rate"},
        {"pretrain.weight_decay", "0.01", "AdamW decoupled weight decay"},
        {"augment.k_min", "1", "minimum chaotic iteration count"},
        {"augment.k_max", "5", "maximum chaotic iteration count"},
        {"augment.crop", "16", "crop side for contrastive views (0 = full image)"},
        {"augment.flip_prob", "0.5", "horizontal flip probability"},
    };
}

std::vector<KeySpec> probe_keys() {
    return {
        {"probe.folds", "4", "stratified folds for the probe"},
        {"probe.epochs", "200", "full-batch classifier epochs per fold"},
        {"probe.lr", "0.05", "probe classifier learning rate"},
        {"probe.weight_decay", "0.0001", "probe classifier weight decay"},
    };
}

// ---- config -> library structs -------------------------------------------------

LabeledDataset resolve_dataset(const Config& cfg) {
    const std::string data = cfg.str("data");
    if (!data.empty()) return load_image_folder(data);
    SynthSpec spec;
    spec.n_classes = static_cast<int>(cfg.integer("synth.classes"));
    spec.n_per_class = static_cast<int>(cfg.integer("synth.per_class"));
    spec.size = static_cast<int>(cfg.integer("synth.size"));
    spec.seed = cfg.seed("seed");
    return gen_synthetic_textures(spec);
}

PretrainConfig resolve_pretrain(const Config& cfg) {
    PretrainConfig p;
    p.tau = cfg.real("pretrain.tau");
    p.epochs = static_cast<int>(cfg.integer("pretrain.epochs"));
    p.batch = static_cast<int>(cfg.integer("pretrain.batch"));
    p.views_per_epoch = static_cast<int>(cfg.integer("pretrain.views_per_epoch"));
    p.lr_encoder = cfg.real("pretrain.lr_encoder");
    p.lr_projector = cfg.real("pretrain.lr_projector");
    p.weight_decay = cfg.real("pretrain.weight_decay");
    p.seed = cfg.seed("seed");
    p.augment.map = ChaoticMapSpec::defaults(map_kind_from_string(cfg.str("pretrain.map")));
    p.augment.k_min = cfg.integer("augment.k_min");
    p.augment.k_max = cfg.integer("augment.k_max");
    p.augment.crop_size = static_cast<int>(cfg.integer("augment.crop"));
    p.augment.flip_prob = cfg.real("augment.flip_prob");
    return p;
}

ProbeConfig resolve_probe(const Config& cfg) {
    ProbeConfig p;
    p.folds = static_cast<int>(cfg.integer("probe.folds"));
    p.epochs = static_cast<int>(cfg.integer("probe.epochs"));
    p.lr = cfg.real("probe.lr");
    p.weight_decay = cfg.real("probe.weight_decay");
    p.seed = cfg.seed("seed");
    return p;
}

void write_pretrain_metrics(const fs::path& path, const std::vector<EpochLoss>& trace) {
    std::ofstream csv(path);
    csv << "epoch,split,loss,accuracy,macro_f1\n";
    for (const auto& e : trace) {
        csv << e.epoch << ",train," << fmt(e.loss) << ",,\n";
    }
}

void write_confusion_csv(const fs::path& path, const ConfusionMatrix& cm,
                         const std::vector<std::string>& class_names) {
    std::ofstream csv(path);
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        csv << (c ? "," : "") << class_names[c];
    }
    csv << "\n";
    for (int r = 0; r < cm.n_classes(); ++r) {
        for (int c = 0; c < cm.n_classes(); ++c) {
            csv << (c ? "," : "") << cm.counts(r, c);
        }
        csv << "\n";
    }
}

// ---- subcommand bodies -----------------------------------------------------

int run_analyze_maps(const Config& cfg) {
    Run run(cfg);
    const int bins = static_cast<int>(cfg.integer("analyze.bins"));
    const long n_iter = cfg.integer("analyze.n_iter");
    const long burn_in = cfg.integer("analyze.burn_in");
    const double x0 = cfg.real("analyze.x0");

    std::ofstream csv(run.path("maps.csv"));
    csv << "map,param,lyapunov";
    for (int b = 0; b < bins; ++b) csv << ",bin_" << b;
    csv << "\n";
    for (const MapKind kind : {MapKind::Logistic, MapKind::Tent, MapKind::Sine}) {
        const ChaoticMapSpec spec = ChaoticMapSpec::defaults(kind);
        const OrbitStats stats = orbit_stats(spec, x0, n_iter, bins, burn_in);
        csv << to_string(kind) << "," << fmt(spec.param) << "," << fmt(stats.lyapunov);
        for (int b = 0; b < bins; ++b) csv << "," << fmt(stats.density[b]);
        csv << "\n";
        std::cout << to_string(kind) << ": lyapunov " << fmt(stats.lyapunov) << "\n";
    }
    run.finish();
    return 0;
}

int run_augment(const Config& cfg) {
    Run run(cfg);
    const fs::path in = cfg.str("in");
    const ChaoticMapSpec spec =
        ChaoticMapSpec::defaults(map_kind_from_string(cfg.str("map")));
    const std::string k_arg = cfg.str("k");
    const long k_min = cfg.integer("augment.k_min");
    const long k_max = cfg.integer("augment.k_max");
    const std::uint64_t seed = cfg.seed("seed");

    std::vector<fs::path> inputs;
    if (fs::is_directory(in)) {
        for (const auto& entry : fs::recursive_directory_iterator(in)) {
            if (!entry.is_regular_file()) continue;
            const std::string ext = entry.path().extension().string();
            if (ext == ".png" || ext == ".ppm") inputs.push_back(entry.path());
        }
        std::sort(inputs.begin(), inputs.end());
    } else if (fs::is_regular_file(in)) {
        inputs.push_back(in);
    } else {
        throw std::runtime_error("augment: input path " + in.string() + " does not exist");
    }
    if (inputs.empty()) {
        throw std::runtime_error("augment: no .png/.ppm inputs under " + in.string());
    }

    long fixed_k = -1;
    if (k_arg != "random") {
        try {
            fixed_k = std::stol(k_arg);
        } catch (const std::exception&) {
            throw ConfigError("config key 'k': '" + k_arg + "' is not an integer or 'random'");
        }
        if (fixed_k < 0) throw ConfigError("config key 'k': must be >= 0");
    }

    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Image img = load_image(inputs[i]);
        long k = fixed_k;
        if (k < 0) {
            Rng rng(derive_seed(seed, "cli/augment-k", i));
            k = sample_k(rng, k_min, k_max);
        }
        const Image out = chaotic_augment(img, spec, k);
        const fs::path rel = fs::is_directory(in) ? fs::relative(inputs[i], in)
                                                  : inputs[i].filename();
        const fs::path dst = run.dir() / rel;
        fs::create_directories(dst.parent_path());
        save_image(out, dst);
    }
    std::cout << "augmented " << inputs.size() << " image(s) with the " << to_string(spec.kind)
              << " map\n";
    run.finish();
    return 0;
}

int run_gen_data(const Config& cfg) {
    Run run(cfg);
    SynthSpec spec;
    spec.n_classes = static_cast<int>(cfg.integer("synth.classes"));
    spec.n_per_class = static_cast<int>(cfg.integer("synth.per_class"));
    spec.size = static_cast<int>(cfg.integer("synth.size"));
    spec.seed = cfg.seed("seed");
    const LabeledDataset ds = gen_synthetic_textures(spec);
    save_image_folder(ds, run.dir());
    run.note(run.dir() / "manifest.csv");
    std::cout << "wrote " << ds.items.size() << " images in " << spec.n_classes
              << " classes to " << run.dir().string() << "\n";
    run.finish();
    return 0;
}

int run_pretrain(const Config& cfg) {
    Run run(cfg);
    const LabeledDataset ds = resolve_dataset(cfg);
    const PretrainConfig pcfg = resolve_pretrain(cfg);
    const PretrainResult result = pretrain(ds, pcfg);
    write_pretrain_metrics(run.path("metrics.csv"), result.trace);
    save_encoder_checkpoint(result.store, result.encoder.cfg, run.path("encoder.ctex"));
    if (!result.trace.empty()) {
        std::cout << "pretrain: loss " << fmt(result.trace.front().loss) << " -> "
                  << fmt(result.trace.back().loss) << " over " << result.trace.size()
                  << " epochs\n";
    }
    run.finish();
    return 0;
}

int run_finetune(const Config& cfg) {
    Run run(cfg);
    const LabeledDataset ds = resolve_dataset(cfg);

    const LoadedEncoder chaos = load_encoder_checkpoint(cfg.str("chaos_checkpoint"));

    ParamStore<float> sup_store;
    EncoderConfig sup_cfg;
    if (!cfg.str("sup_checkpoint").empty()) {
        LoadedEncoder sup = load_encoder_checkpoint(cfg.str("sup_checkpoint"));
        sup_store = std::move(sup.store);
        sup_cfg = sup.cfg;
    } else {
        SupervisedConfig scfg;
        scfg.epochs = static_cast<int>(cfg.integer("sup.epochs"));
        scfg.batch = static_cast<int>(cfg.integer("sup.batch"));
        scfg.lr = cfg.real("sup.lr");
        scfg.weight_decay = cfg.real("sup.weight_decay");
        scfg.flip_prob = cfg.real("sup.flip_prob");
        scfg.seed = cfg.seed("seed");
        scfg.encoder.in_channels = ds.items.front().first.channels;
        SupervisedResult sup = train_supervised(ds, scfg);
        sup_store = std::move(sup.store);
        sup_cfg = sup.encoder.cfg;
        save_encoder_checkpoint(sup_store, sup_cfg, run.path("sup_encoder.ctex"));
    }

    FinetuneConfig fcfg;
    fcfg.epochs = static_cast<int>(cfg.integer("finetune.epochs"));
    fcfg.batch = static_cast<int>(cfg.integer("finetune.batch"));
    fcfg.folds = static_cast<int>(cfg.integer("finetune.folds"));
    fcfg.lr_head = cfg.real("finetune.lr_head");
    fcfg.lr_backbone = cfg.real("finetune.lr_backbone");
    fcfg.weight_decay = cfg.real("finetune.weight_decay");
    fcfg.se_ratio = static_cast<int>(cfg.integer("finetune.se_ratio"));
    fcfg.flip_prob = cfg.real("finetune.flip_prob");
    fcfg.seed = cfg.seed("seed");
    const std::string branch = cfg.str("finetune.branch");
    if (branch == "ensemble") {
        fcfg.branch = EnsembleBranch::Ensemble;
    } else if (branch == "sup") {
        fcfg.branch = EnsembleBranch::SupOnly;
    } else if (branch == "chaos") {
        fcfg.branch = EnsembleBranch::ChaosOnly;
    } else {
        throw ConfigError("config key 'finetune.branch': expected ensemble|sup|chaos");
    }
    const std::string warning = fcfg.validate();
    if (!warning.empty()) std::cerr << warning << "\n";

    const FinetuneResult result = finetune(ds, sup_store, sup_cfg, chaos.store, chaos.cfg, fcfg);

    {
        std::ofstream csv(run.path("metrics.csv"));
        csv << "epoch,split,loss,accuracy,macro_f1\n";
        for (const auto& fm : result.folds) {
            csv << fcfg.epochs << ",fold" << fm.fold << "/val,," << fmt(fm.accuracy) << ","
                << fmt(fm.f1) << "\n";
        }
        for (const auto& e : result.final_trace) {
            csv << e.epoch << ",final/train," << fmt(e.loss) << ",,\n";
        }
    }
    {
        nlohmann::json j;
        j["folds"] = fcfg.folds;
        j["accuracy_mean"] = result.acc_mean;
        j["accuracy_std"] = result.acc_std;
        j["macro_f1_mean"] = result.f1_mean;
        j["macro_f1_std"] = result.f1_std;
        j["f1_definition"] = "macro (unweighted mean of per-class F1)";
        std::ofstream out(run.path("summary.json"));
        out << j.dump(2) << "\n";
    }
    write_confusion_csv(run.path("confusion.csv"), result.combined, ds.class_names);
    save_ppm(confusion_heatmap(result.combined), run.path("confusion.ppm"));
    {
        Checkpoint ckpt = to_checkpoint(result.final_store);
        ckpt.add_text("meta.sup_arch", encoder_config_to_json(sup_cfg));
        ckpt.add_text("meta.chaos_arch", encoder_config_to_json(chaos.cfg));
        ckpt.add_text("meta.branch", branch);
        ckpt.save(run.path("model.ctex"));
    }
    std::cout << "finetune (" << branch << "): accuracy " << fmt(result.acc_mean) << " +- "
              << fmt(result.acc_std) << ", macro F1 " << fmt(result.f1_mean) << " over "
              << fcfg.folds << " folds\n";
    run.finish();
    return 0;
}

int run_probe(const Config& cfg) {
    Run run(cfg);
    const LabeledDataset ds = resolve_dataset(cfg);
    const LoadedEncoder enc = load_encoder_checkpoint(cfg.str("checkpoint"));
    const ProbeResult result = linear_probe(enc.store, enc.encoder, ds, resolve_probe(cfg));
    {
        std::ofstream csv(run.path("metrics.csv"));
        csv << "epoch,split,loss,accuracy,macro_f1\n";
        for (const auto& fm : result.folds) {
            csv << "0,fold" << fm.fold << "/val,," << fmt(fm.accuracy) << "," << fmt(fm.f1)
                << "\n";
        }
    }
    {
        nlohmann::json j;
        j["accuracy_mean"] = result.acc_mean;
        j["accuracy_std"] = result.acc_std;
        j["macro_f1_mean"] = result.f1_mean;
        j["macro_f1_std"] = result.f1_std;
        std::ofstream out(run.path("summary.json"));
        out << j.dump(2) << "\n";
    }
    std::cout << "probe: accuracy " << fmt(result.acc_mean) << " +- " << fmt(result.acc_std)
              << "\n";
    run.finish();
    return 0;
}

int run_ablate(const Config& cfg) {
    Run run(cfg);
    const LabeledDataset ds = resolve_dataset(cfg);
    const PretrainConfig base = resolve_pretrain(cfg);

    std::vector<MapKind> maps;
    for (const auto& name : split_csv(cfg.str("ablate.maps"))) {
        maps.push_back(map_kind_from_string(name));
    }
    std::vector<int> epochs;
    for (const auto& e : split_csv(cfg.str("ablate.epochs"))) {
        try {
            epochs.push_back(std::stoi(e));
        } catch (const std::exception&) {
            throw ConfigError("config key 'ablate.epochs': '" + e + "' is not an integer");
        }
    }
    const int jobs = static_cast<int>(cfg.integer("jobs"));
    const AblationResult result = ablate_maps(ds, base, maps, epochs, resolve_probe(cfg), jobs);

    {
        std::ofstream csv(run.path("ablation.csv"));
        csv << "map,epochs,mean_accuracy,std_accuracy,mean_f1,std_f1\n";
        for (const auto& cell : result.cells) {
            csv << cell.map << "," << cell.epochs << "," << fmt(cell.probe.acc_mean) << ","
                << fmt(cell.probe.acc_std) << "," << fmt(cell.probe.f1_mean) << ","
                << fmt(cell.probe.f1_std) << "\n";
        }
    }
    double best_sine = -1.0, best_other = -1.0;
    for (const auto& cell : result.cells) {
        double& slot = (cell.map == "sine") ? best_sine : best_other;
        slot = std::max(slot, cell.probe.acc_mean);
        std::cout << cell.map << " x " << cell.epochs << " epochs: accuracy "
                  << fmt(cell.probe.acc_mean) << ", F1 " << fmt(cell.probe.f1_mean) << "\n";
    }
    std::cout << "random-encoder baseline: " << fmt(result.baseline.acc_mean) << "\n";
    std::string observation = "n/a";
    if (best_sine >= 0.0 && best_other >= 0.0) {
        observation = std::string("sine best ") + fmt(best_sine) +
                      (best_sine >= best_other ? " >= " : " < ") + "best other " +
                      fmt(best_other);
        std::cout << "observation (not asserted): " << observation << "\n";
    }
    {
        nlohmann::json j;
        j["baseline_accuracy_mean"] = result.baseline.acc_mean;
        j["baseline_accuracy_std"] = result.baseline.acc_std;
        j["sine_vs_others"] = observation;
        std::ofstream out(run.path("summary.json"));
        out << j.dump(2) << "\n";
    }
    run.finish();
    return 0;
}

int run_gradcheck(const Config& cfg) {
    const double eps = cfg.real("gradcheck.eps");
    const double threshold = cfg.real("gradcheck.threshold");
    const auto checks = primitive_grad_check_battery<double>(cfg.seed("seed"), eps);
    bool ok = true;
    std::printf("%-24s %s\n", "primitive", "max relative error");
    for (const auto& c : checks) {
        std::printf("%-24s %.3e%s\n", c.name.c_str(), c.max_rel_err,
                    c.max_rel_err < threshold ? "" : "  FAIL");
        ok = ok && (c.max_rel_err < threshold);
    }
    if (!ok) {
        std::cerr << "gradcheck: at least one primitive exceeded " << threshold << "\n";
        return 2;
    }
    std::cout << "gradcheck: all " << checks.size() << " primitives below " << threshold << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chaotic contrastive texture learning pipeline"};
    app.set_version_flag("--version", std::string("ctex ") + kVersion);
    app.require_subcommand(1);

    KeyedCommand analyze(app, "analyze-maps", "per-map Lyapunov exponent and invariant density",
                         {
                             {"out", "ctex_out/analyze", "output directory"},
                             {"analyze.bins", "20", "histogram bins over [0,1]"},
                             {"analyze.n_iter", "200000", "orbit samples per map"},
                             {"analyze.burn_in", "1000", "discarded transient iterations"},
                             {"analyze.x0", "0.123456789", "orbit starting point"},
                         });
    KeyedCommand augment_cmd(app, "augment", "apply a chaotic map pixel-wise to images",
                             {
                                 {"in", "", "input image file or directory (.png/.ppm)"},
                                 {"out", "ctex_out/augment", "output directory"},
                                 {"map", "sine", "chaotic map (logistic|tent|sine)"},
                                 {"k", "random",
                                  "iteration count, or 'random' for U{k_min..k_max}"},
                                 {"augment.k_min", "1", "minimum k for random draws"},
                                 {"augment.k_max", "5", "maximum k for random draws"},
                                 {"seed", "7", "seed for random k draws"},
                             });
    augment_cmd.app()->get_option("--in")->required();
    KeyedCommand gen(app, "gen-data", "generate the synthetic texture corpus as a PNG tree",
                     {
                         {"out", "ctex_out/data", "output directory"},
                         {"seed", "7", "corpus seed"},
                         {"synth.classes", "5", "number of classes"},
                         {"synth.per_class", "40", "images per class"},
                         {"synth.size", "32", "image side in pixels"},
                     });
    KeyedCommand pre(app, "pretrain", "chaotic contrastive pretraining of the encoder",
                     pretrain_keys("ctex_out/pretrain"));
    auto finetune_schema = pretrain_keys("ctex_out/finetune");
    {
        const std::vector<KeySpec> extra = {
            {"chaos_checkpoint", "", "encoder checkpoint from pretrain (required)"},
            {"sup_checkpoint", "", "supervised encoder checkpoint; empty = train it now"},
            {"finetune.epochs", "20", "fine-tuning epochs per fold"},
            {"finetune.batch", "32", "fine-tuning batch size"},
            {"finetune.folds", "4", "cross-validation folds"},
            {"finetune.lr_head", "0.01", "learning rate for classifier and attention head"},
            {"finetune.lr_backbone", "0.00001", "learning rate for both backbones"},
            {"finetune.weight_decay", "0.01", "AdamW decoupled weight decay"},
            {"finetune.se_ratio", "4", "squeeze-and-excitation reduction ratio"},
            {"finetune.flip_prob", "0.5", "flip augmentation probability"},
            {"finetune.branch", "ensemble", "ensemble|sup|chaos (single-branch ablations)"},
            {"sup.epochs", "30", "supervised branch training epochs"},
            {"sup.batch", "32", "supervised branch batch size"},
            {"sup.lr", "0.001", "supervised branch learning rate"},
            {"sup.weight_decay", "0.01", "supervised branch weight decay"},
            {"sup.flip_prob", "0.5", "supervised branch flip probability"},
        };
        finetune_schema.insert(finetune_schema.end(), extra.begin(), extra.end());
    }
    KeyedCommand fine(app, "finetune", "supervised ensemble fine-tuning with SE attention",
                      finetune_schema);
    fine.app()->get_option("--chaos_checkpoint")->required();

    auto probe_schema = std::vector<KeySpec>{
        {"data", "", "dataset directory; empty = built-in synthetic corpus"},
        {"out", "ctex_out/probe", "output directory"},
        {"checkpoint", "", "encoder checkpoint to evaluate (required)"},
        {"seed", "7", "global seed"},
        {"synth.classes", "5", "synthetic corpus: number of classes"},
        {"synth.per_class", "40", "synthetic corpus: images per class"},
        {"synth.size", "32", "synthetic corpus: image side in pixels"},
    };
    for (const auto& k : probe_keys()) probe_schema.push_back(k);
    KeyedCommand probe_cmd(app, "probe", "linear-probe evaluation of a frozen encoder",
                           probe_schema);
    probe_cmd.app()->get_option("--checkpoint")->required();

    auto ablate_schema = pretrain_keys("ctex_out/ablate");
    ablate_schema.push_back({"ablate.maps", "logistic,tent,sine", "comma-separated map list"});
    ablate_schema.push_back({"ablate.epochs", "15,30", "comma-separated epoch grid"});
    for (const auto& k : probe_keys()) ablate_schema.push_back(k);
    KeyedCommand abl(app, "ablate", "map/epoch ablation grid with linear probes",
                     ablate_schema);

    KeyedCommand grad(app, "gradcheck", "finite-difference check of every autograd primitive",
                      {
                          {"seed", "12345", "seed for the random check inputs"},
                          {"gradcheck.eps", "0.00001", "central-difference step"},
                          {"gradcheck.threshold", "0.00001", "maximum allowed relative error"},
                      });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors exit 1; --help/--version exit 0
    }

    try {
        if (analyze.parsed()) return run_analyze_maps(analyze.resolve());
        if (augment_cmd.parsed()) return run_augment(augment_cmd.resolve());
        if (gen.parsed()) return run_gen_data(gen.resolve());
        if (pre.parsed()) return run_pretrain(pre.resolve());
        if (fine.parsed()) return run_finetune(fine.resolve());
        if (probe_cmd.parsed()) return run_probe(probe_cmd.resolve());
        if (abl.parsed()) return run_ablate(abl.resolve());
        if (grad.parsed()) return run_gradcheck(grad.resolve());
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
