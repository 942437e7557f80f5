// matad: train and evaluate matrix LSTM anomaly detectors on matrix-sequence
// data; generate the synthetic datasets and prepare ECG recordings.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "matad/ecgpipe.hpp"
#include "matad/evalmod.hpp"
#include "matad/io.hpp"
#include "matad/rng.hpp"

namespace {

using namespace matad;

struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    long seed = -1;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_path, "flat JSON config file");
    cmd->add_option("--set", args.overrides, "override a config key, key=value")->take_all();
}

cli::RunConfig resolve_config(const ConfigArgs& args, const char* seed_key) {
    auto cfg = cli::RunConfig::defaults();
    if (!args.config_path.empty()) cfg.apply_file(args.config_path);
    for (const auto& kv : args.overrides) cfg.apply_override(kv);
    if (args.seed >= 0) cfg.set(seed_key, std::to_string(args.seed));
    return cfg;
}

int label_count(const Dataset& data, int label) {
    int n = 0;
    for (const auto& s : data) n += s.label && *s.label == label;
    return n;
}

int cmd_gen(const std::string& kind, const ConfigArgs& cargs, const std::string& out_path) {
    auto cfg = resolve_config(cargs, "data.seed");
    Dataset data;
    uint8_t dtype = io::kDtypeF32;
    if (kind == "synth") {
        data = synthgen::gen_synthetic(cfg.synth_config());
        const double zero_p = cfg.num("data.zero_noise_p");
        if (zero_p > 0)
            synthgen::inject_zero_noise(data, zero_p, derive_stream(cfg.uint("data.seed"), {0x02eu}));
        const double sp = cfg.num("data.salt_pepper_p");
        if (sp > 0)
            synthgen::inject_salt_pepper(data, sp, derive_stream(cfg.uint("data.seed"), {0x5a17u}));
        dtype = io::kDtypeU8;
    } else if (kind == "sprites") {
        data = synthgen::gen_moving_sprites(cfg.sprite_config());
        dtype = io::kDtypeF32;
    } else {
        throw ContractError("gen: kind must be synth or sprites, got " + kind);
    }
    io::write_mseq(out_path, data, dtype);
    io::write_dataset_meta(out_path, cfg);
    std::cout << "wrote " << out_path << ": " << data.size() << " sequences of " << data[0].length()
              << " frames " << data[0].n_r() << "x" << data[0].n_c() << ", "
              << label_count(data, 1) << " anomalous ("
              << 100.0 * label_count(data, 1) / data.size() << "%), dtype "
              << (dtype == io::kDtypeU8 ? "u8" : "f32") << "\n";
    std::cout << "config fingerprint " << cfg.fingerprint() << "\n";
    return 0;
}

int cmd_ecg_prep(const ConfigArgs& cargs, const std::string& records_dir,
                 const std::string& manifest_path, const std::string& ann_dir,
                 const std::string& out_path) {
    auto cfg = resolve_config(cargs, "data.seed");
    std::ifstream manifest(manifest_path);
    if (!manifest) throw ParseError("ecg-prep: cannot open manifest " + manifest_path);

    const int group = cfg.integer("ecg.group");
    const int stride = cfg.integer("ecg.stride") > 0 ? cfg.integer("ecg.stride") : group;
    const int window = cfg.integer("ecg.window");
    const std::string channel = cfg.get("ecg.channel");

    std::vector<ecgpipe::BeatUnit> units;
    long n_records = 0, n_skipped = 0;
    std::string record;
    while (std::getline(manifest, record)) {
        if (record.empty() || record[0] == '#') continue;
        try {
            auto rec = ecgpipe::read_record(records_dir, record);
            size_t ch = 0;
            while (ch < rec.channel_names.size() && rec.channel_names[ch] != channel) ++ch;
            if (ch == rec.channel_names.size())
                throw ContractError("record " + record + " has no channel " + channel);
            const auto conditioned = ecgpipe::condition_signal(
                rec.channels[ch], rec.sampling_rate, cfg.integer("ecg.detrend_order"),
                cfg.num("ecg.low_hz"), cfg.num("ecg.high_hz"), cfg.integer("ecg.filter_order"),
                cfg.flag("ecg.zero_phase"));
            const auto anns = ecgpipe::read_annotation_csv(ann_dir + "/" + record + ".csv");
            const auto beats = ecgpipe::extract_beats(conditioned, anns, window);
            auto rec_units = ecgpipe::beats_to_units(beats, group, stride, record);
            std::cout << record << ": " << anns.size() << " annotations, " << beats.size()
                      << " beats, " << rec_units.size() << " units\n";
            units.insert(units.end(), rec_units.begin(), rec_units.end());
            ++n_records;
        } catch (const std::exception& e) {
            std::cerr << "skipping record " << record << ": " << e.what() << "\n";
            ++n_skipped;
        }
    }

    long normal = 0, abnormal = 0;
    for (const auto& u : units) (u.label ? abnormal : normal)++;
    std::cout << "processed " << n_records << " records (" << n_skipped << " skipped): " << normal
              << " normal units, " << abnormal << " abnormal units\n";

    const auto sequences =
        ecgpipe::units_to_sequences(units, cfg.integer("ecg.seq_len"), cfg.integer("ecg.seq_stride"));
    if (sequences.empty()) {
        std::cerr << "error: no sequences produced\n";
        return 2;
    }
    io::write_mseq(out_path, sequences, io::kDtypeF32);
    io::write_dataset_meta(out_path, cfg);
    std::cout << "wrote " << out_path << ": " << sequences.size() << " sequences of "
              << sequences[0].length() << " units, " << label_count(sequences, 1) << " abnormal\n";
    return 0;
}

int cmd_train(const ConfigArgs& cargs, const std::string& data_path, const std::string& out_path) {
    auto cfg = resolve_config(cargs, "train.seed");
    const auto data = io::read_mseq(data_path);
    const auto meta = io::read_dataset_meta(data_path);
    if (meta.found && meta.schema_fingerprint != cfg.data_schema_fingerprint())
        std::cerr << "note: adopting the training dataset's schema fingerprint\n";

    auto result = train::fit(cfg.model_spec(), data, cfg.train_config());
    io::save_model(out_path, result.model, cfg, meta.found ? meta.schema_fingerprint : "");

    nlohmann::ordered_json report;
    report["config"] = nlohmann::json::parse(cfg.canonical_json());
    report["fingerprint"] = cfg.fingerprint();
    report["param_count"] = models::param_count(result.model);
    report["best_val_loss"] = result.best_val;
    auto& hist = report["history"] = nlohmann::json::array();
    for (const auto& e : result.history)
        hist.push_back({{"layer", e.layer},
                        {"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"val_loss", e.val_loss}});
    io::atomic_write(out_path + ".report.json", report.dump(2) + "\n");

    std::cout << "trained " << models::param_count(result.model) << " parameters over "
              << result.history.size() << " epochs, best val loss " << result.best_val << "\n"
              << "wrote " << out_path << " (fingerprint " << cfg.fingerprint() << ")\n";
    return 0;
}

int cmd_score(const std::string& model_path, const std::string& data_path,
              const std::string& out_path, bool force) {
    auto loaded = io::load_model(model_path);
    io::MseqInfo info;
    const auto data = io::read_mseq(data_path, &info);

    if (static_cast<int>(info.n_r) != loaded.model.n_r) {
        std::cerr << "error: data.n_r is " << info.n_r << " but the model expects "
                  << loaded.model.n_r << "\n";
        return 2;
    }
    if (static_cast<int>(info.n_c) != loaded.model.n_c) {
        std::cerr << "error: data.n_c is " << info.n_c << " but the model expects "
                  << loaded.model.n_c << "\n";
        return 2;
    }
    const auto meta = io::read_dataset_meta(data_path);
    if (meta.found && meta.schema_fingerprint != loaded.data_schema_fingerprint) {
        if (!force) {
            std::cerr << "error: dataset schema fingerprint " << meta.schema_fingerprint
                      << " does not match the model's " << loaded.data_schema_fingerprint
                      << " (use --force to score anyway)\n";
            return 2;
        }
        std::cerr << "warning: scoring across mismatched schema fingerprints (--force)\n";
    }

    std::vector<std::string> warnings;
    auto scored = models::score_dataset(data, loaded.model, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    io::write_scores_csv(out_path, scored, loaded.fingerprint, loaded.data_schema_fingerprint);
    std::cout << "wrote " << out_path << ": " << scored.size() << " scores\n";
    return 0;
}

int cmd_eval(const std::vector<std::string>& score_paths, const std::string& report_path,
             bool force) {
    std::vector<eval::MetricReport> reports;
    std::string fp;
    for (const auto& path : score_paths) {
        const auto file = io::read_scores_csv(path);
        if (fp.empty()) fp = file.config_fingerprint;
        if (!force && file.config_fingerprint != fp)
            throw ContractError("eval: score files carry different config fingerprints (" + fp +
                                " vs " + file.config_fingerprint + "); use --force to aggregate");
        reports.push_back(eval::evaluate_scores(file.rows, 0, reports.size()));
    }

    auto mean_std = [&](auto getter) {
        double mean = 0;
        for (const auto& r : reports) mean += getter(r);
        mean /= reports.size();
        double var = 0;
        for (const auto& r : reports) var += (getter(r) - mean) * (getter(r) - mean);
        return std::pair<double, double>(mean, std::sqrt(var / reports.size()));
    };
    const auto [auc_mean, auc_std] = mean_std([](const eval::MetricReport& r) { return r.auc; });
    const auto [f1_mean, f1_std] = mean_std([](const eval::MetricReport& r) { return r.f1; });

    std::printf("AUC %.4f ± %.4f   F1 %.4f ± %.4f   (%zu run%s)\n", auc_mean, auc_std, f1_mean,
                f1_std, reports.size(), reports.size() == 1 ? "" : "s");

    if (!report_path.empty()) {
        nlohmann::ordered_json doc;
        doc["config_fingerprint"] = fp;
        doc["auc_mean"] = auc_mean;
        doc["auc_std"] = auc_std;
        doc["f1_mean"] = f1_mean;
        doc["f1_std"] = f1_std;
        auto& runs = doc["runs"] = nlohmann::json::array();
        for (size_t i = 0; i < reports.size(); ++i)
            runs.push_back({{"file", score_paths[i]},
                            {"auc", reports[i].auc},
                            {"f1", reports[i].f1},
                            {"threshold", reports[i].threshold},
                            {"n_pos", reports[i].n_pos},
                            {"n_neg", reports[i].n_neg}});
        io::atomic_write(report_path, doc.dump(2) + "\n");
        std::cout << "wrote " << report_path << "\n";
    }
    return 0;
}

std::vector<eval::HiddenGridEntry> parse_grid(const std::string& grid, bool mat) {
    std::vector<eval::HiddenGridEntry> entries;
    std::stringstream ss(grid);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        eval::HiddenGridEntry e;
        const auto x = tok.find('x');
        if (mat) {
            if (x == std::string::npos)
                throw ContractError("sweep grid entry '" + tok + "' must look like 8x8");
            e.k_r = std::stoi(tok.substr(0, x));
            e.k_c = std::stoi(tok.substr(x + 1));
        } else {
            e.k = std::stoi(tok);
        }
        entries.push_back(e);
    }
    if (entries.empty()) throw ContractError("sweep: empty grid");
    return entries;
}

int cmd_sweep(const ConfigArgs& cargs, const std::string& train_path, const std::string& test_path,
              const std::string& grid, const std::string& out_path) {
    auto cfg = resolve_config(cargs, "train.seed");
    const auto train_data = io::read_mseq(train_path);
    const auto test_data = io::read_mseq(test_path);
    const auto spec = cfg.model_spec();
    const auto entries = parse_grid(grid, spec.cell == models::CellKind::kMatLstm);
    const auto points = eval::sweep_hidden_sizes(spec, cfg.train_config(), train_data, test_data,
                                                 entries, cfg.eval_seeds());
    io::atomic_write(out_path, eval::sweep_csv(points));
    for (const auto& p : points) {
        std::printf("%8ld params  AUC %.4f ± %.4f  F1 %.4f ± %.4f", p.param_count,
                    p.report.auc_mean, p.report.auc_std, p.report.f1_mean, p.report.f1_std);
        if (p.report.partial) std::printf("  [partial]");
        std::printf("\n");
        for (const auto& f : p.report.failures) std::cerr << "  failed: " << f << "\n";
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"matrix LSTM anomaly detection on temporal two-way data"};
    app.require_subcommand(1);

    ConfigArgs gen_args, ecg_args, train_args, sweep_args;
    std::string gen_kind, out_path, data_path, model_path;
    std::string records_dir, manifest_path, ann_dir;
    std::vector<std::string> score_paths;
    std::string report_path, grid, train_data_path, test_data_path;
    bool force = false;

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset (MSEQ)");
    gen->add_option("kind", gen_kind, "synth or sprites")->required();
    gen->add_option("--out", out_path, "output .mseq path")->required();
    gen->add_option("--seed", gen_args.seed, "shorthand for --set data.seed=N");
    add_config_options(gen, gen_args);

    auto* ecg = app.add_subcommand("ecg-prep", "prepare ECG recordings into beat-unit sequences");
    ecg->add_option("--records", records_dir, "directory with .hea/.dat files")->required();
    ecg->add_option("--manifest", manifest_path, "file listing record ids, one per line")->required();
    ecg->add_option("--ann", ann_dir, "directory with <record>.csv annotation files")->required();
    ecg->add_option("--out", out_path, "output .mseq path")->required();
    add_config_options(ecg, ecg_args);

    auto* train_cmd = app.add_subcommand("train", "train a model on an MSEQ dataset");
    train_cmd->add_option("--data", data_path, "training .mseq")->required();
    train_cmd->add_option("--out", out_path, "output model path")->required();
    train_cmd->add_option("--seed", train_args.seed, "shorthand for --set train.seed=N");
    add_config_options(train_cmd, train_args);

    auto* score = app.add_subcommand("score", "score sequences with a trained model");
    score->add_option("--model", model_path, "model file")->required();
    score->add_option("--data", data_path, "test .mseq")->required();
    score->add_option("--out", out_path, "output scores CSV")->required();
    score->add_flag("--force", force, "ignore fingerprint mismatches");

    auto* eval_cmd = app.add_subcommand("eval", "AUC/F1 from one or more score CSVs");
    eval_cmd->add_option("--scores", score_paths, "score CSV files (one per seed)")
        ->required()
        ->take_all();
    eval_cmd->add_option("--report", report_path, "write a JSON report here");
    eval_cmd->add_flag("--force", force, "aggregate across mismatched fingerprints");

    auto* sweep = app.add_subcommand("sweep", "AUC vs parameter count over hidden sizes");
    sweep->add_option("--train-data", train_data_path, "training .mseq")->required();
    sweep->add_option("--test-data", test_data_path, "test .mseq")->required();
    sweep->add_option("--grid", grid, "hidden sizes, e.g. 4x4,8x8 (matlstm) or 16,32 (veclstm)")
        ->required();
    sweep->add_option("--out", out_path, "output sweep CSV")->required();
    add_config_options(sweep, sweep_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(gen_kind, gen_args, out_path);
        if (ecg->parsed()) return cmd_ecg_prep(ecg_args, records_dir, manifest_path, ann_dir, out_path);
        if (train_cmd->parsed()) return cmd_train(train_args, data_path, out_path);
        if (score->parsed()) return cmd_score(model_path, data_path, out_path, force);
        if (eval_cmd->parsed()) return cmd_eval(score_paths, report_path, force);
        if (sweep->parsed()) return cmd_sweep(sweep_args, train_data_path, test_data_path, grid, out_path);
    } catch (const matad::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
