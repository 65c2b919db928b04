// gzm: gaze-guided hand-motion prediction toolkit.
//
// Subcommands: synth, train-vqvae, train-generator, predict, evaluate,
// ablate, noise-sweep, plot. Every command is reproducible from its config
// and seed alone, refuses to overwrite outputs without --force, and writes
// its fully resolved configuration next to its outputs.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>

#include "gzm/checkpoint.hpp"
#include "gzm/config.hpp"
#include "gzm/dataset_io.hpp"
#include "gzm/harness.hpp"
#include "gzm/metrics.hpp"
#include "gzm/svg.hpp"

namespace {

using namespace gzm;

// Exit codes: 0 ok, 2 usage or bad config, 3 data error, 4 training failure
// or failed grid cells, 5 invariant violation.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;
constexpr int kExitInvariant = 5;

struct CliError {
    int code;
    std::string message;
};

int default_jobs() {
    if (const char* env = std::getenv("GZM_JOBS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void refuse_overwrite(const std::string& path, bool force) {
    if (!force && std::filesystem::exists(path)) {
        throw CliError{kExitUsage,
                       "output '" + path + "' already exists; pass --force to overwrite"};
    }
}

void write_run_sidecar(const std::string& out_path, const std::string& command,
                       const RunConfig& cfg, bool force) {
    const std::string path = out_path + ".run.json";
    refuse_overwrite(path, force);
    std::ofstream out(path);
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config"] = nlohmann::ordered_json::parse(run_config_to_json(cfg));
    out << j.dump(2) << '\n';
}

RunConfig load_config_opt(const std::string& config_path) {
    if (config_path.empty()) return RunConfig{};
    return load_run_config(config_path);
}

std::string loss_csv_path(const std::string& ckpt_path) {
    std::filesystem::path q(ckpt_path);
    q.replace_extension();
    return q.string() + "-loss.csv";
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out, int subjects, long seed,
              bool force) {
    RunConfig cfg = load_config_opt(config_path);
    if (seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.synth.seed = cfg.seed;
    }
    if (subjects >= 0) cfg.synth.subjects = subjects;
    refuse_overwrite(out, force);
    const Dataset ds = build_dataset(cfg.synth);
    write_dataset(ds, out);
    write_run_sidecar(out, "synth", cfg, force);

    std::map<std::string, int> histogram;
    for (const auto& s : ds.samples) ++histogram[motion_name(s.scene.motion)];
    std::cout << "wrote " << ds.size() << " samples to " << out << "\n";
    for (const auto& [motion, count] : histogram) {
        std::cout << "  " << motion << ": " << count << "\n";
    }
    return kExitOk;
}

int cmd_train_vqvae(const std::string& config_path, const std::string& data,
                    const std::string& out, long seed, int epochs, bool force) {
    RunConfig cfg = load_config_opt(config_path);
    if (seed >= 0) cfg.vqvae.seed = static_cast<std::uint64_t>(seed);
    if (epochs > 0) cfg.vqvae.epochs = epochs;
    refuse_overwrite(out, force);
    refuse_overwrite(loss_csv_path(out), force);

    const Dataset ds = read_dataset(data);
    std::vector<int> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

    VqVaeTrainLog log;
    VqVae model = train_vqvae(ds, idx, cfg.vqvae, &log);

    nlohmann::ordered_json log_json;
    log_json["epochs"] = cfg.vqvae.epochs;
    log_json["final_loss"] = log.epochs.back().total;
    log_json["final_recon"] = log.epochs.back().recon;
    log_json["dead_reseeds"] = log.dead_reseeds;
    log_json["codebook_usage"] = log.usage;
    Checkpoint ckpt;
    ckpt.sections.push_back(vqvae_to_section(model, log_json.dump()));
    write_checkpoint(ckpt, out);

    std::ofstream loss_csv(loss_csv_path(out));
    loss_csv << "epoch,total,recon,embed,commit\n";
    for (const auto& e : log.epochs) {
        loss_csv << e.epoch << ',' << e.total << ',' << e.recon << ',' << e.embed << ','
                 << e.commit << '\n';
    }
    write_run_sidecar(out, "train-vqvae", cfg, force);
    std::cout << "trained vqvae on " << ds.size() << " samples: final loss "
              << log.epochs.back().total << ", checkpoint " << out << "\n";
    return kExitOk;
}

int cmd_train_generator(const std::string& config_path, const std::string& data,
                        const std::string& vqvae_path, const std::string& out,
                        const std::string& gaze, const std::string& fusion, long seed, int epochs,
                        bool force) {
    RunConfig cfg = load_config_opt(config_path);
    if (seed >= 0) cfg.generator.seed = static_cast<std::uint64_t>(seed);
    if (epochs > 0) cfg.generator.epochs = epochs;
    if (!gaze.empty()) {
        if (gaze != "on" && gaze != "off") {
            throw CliError{kExitUsage, "--gaze expects 'on' or 'off'"};
        }
        cfg.generator.use_gaze = gaze == "on";
    }
    if (!fusion.empty()) cfg.generator.fusion = fusion_mode_from_name(fusion);
    refuse_overwrite(out, force);
    refuse_overwrite(loss_csv_path(out), force);

    if (!std::filesystem::exists(vqvae_path)) {
        throw CliError{kExitData, "train-generator requires a trained vqvae checkpoint; '" +
                                      vqvae_path + "' does not exist"};
    }
    const Checkpoint vq_ckpt = read_checkpoint(vqvae_path);
    VqVae vqvae = vqvae_from_section(vq_ckpt.require("vqvae"));

    const Dataset ds = read_dataset(data);
    std::vector<int> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

    GeneratorTrainLog log;
    Generator gen = train_generator(vqvae, ds, idx, cfg.generator, &log);

    nlohmann::ordered_json log_json;
    log_json["epochs"] = cfg.generator.epochs;
    log_json["final_loss"] = log.epochs.back().loss;
    log_json["final_token_accuracy"] = log.epochs.back().token_accuracy;
    Checkpoint ckpt;
    ckpt.sections.push_back(vqvae_to_section(vqvae));
    ckpt.sections.push_back(generator_to_section(gen, log_json.dump()));
    write_checkpoint(ckpt, out);

    std::ofstream loss_csv(loss_csv_path(out));
    loss_csv << "epoch,loss,token_accuracy\n";
    for (const auto& e : log.epochs) {
        loss_csv << e.epoch << ',' << e.loss << ',' << e.token_accuracy << '\n';
    }
    write_run_sidecar(out, "train-generator", cfg, force);
    std::cout << "trained generator (" << fusion_mode_name(cfg.generator.fusion) << ", gaze "
              << (cfg.generator.use_gaze ? "on" : "off") << "): final loss "
              << log.epochs.back().loss << ", token accuracy " << log.epochs.back().token_accuracy
              << ", checkpoint " << out << "\n";
    return kExitOk;
}

int cmd_predict(const std::string& ckpt_path, const std::string& input_path, int frames,
                const std::string& out, bool force) {
    const Checkpoint ckpt = read_checkpoint(ckpt_path);
    const VqVae vqvae = vqvae_from_section(ckpt.require("vqvae"));
    const Generator gen = generator_from_section(ckpt.require("generator"), vqvae);
    const int l = vqvae.config().downsample;
    if (frames < l || frames % l != 0) {
        throw CliError{kExitUsage,
                       "--frames must be a positive multiple of the downsample factor l=" +
                           std::to_string(l)};
    }
    refuse_overwrite(out, force);

    const Dataset ds = read_dataset(input_path);
    if (ds.empty()) throw CliError{kExitData, "input '" + input_path + "' holds no samples"};
    const TrajectorySample& sample = ds.samples.front();
    if (frames >= sample.length()) {
        throw CliError{kExitUsage, "--frames " + std::to_string(frames) +
                                       " leaves nothing to predict in a " +
                                       std::to_string(sample.length()) + "-frame sample"};
    }

    MotionSequence input(frames, sample.fps());
    GazeSequence gaze_in(frames);
    for (int t = 0; t < frames; ++t) {
        for (int d = 0; d < kPoseDim; ++d) input.frames.at(t, d) = sample.hands.frames.at(t, d);
        gaze_in.set(t, sample.gaze.at(t));
    }
    const int total_tokens = sample.length() / l;
    const GenerateResult res =
        generate(vqvae, gen, input, gaze_in, sample.scene.objects, total_tokens - frames / l);

    // Output sample: observed frames followed by the prediction, in the
    // dataset schema (gaze and objects pass through).
    TrajectorySample out_sample = sample;
    for (int t = frames; t < total_tokens * l; ++t) {
        for (int d = 0; d < kPoseDim; ++d) {
            out_sample.hands.frames.at(t, d) = res.frames.frames.at(t - frames, d);
        }
    }
    Dataset out_ds;
    out_ds.samples.push_back(out_sample);
    write_dataset(out_ds, out);

    // Waypoints at 0.3 s granularity for the top-view plot.
    const int step = std::max(1, static_cast<int>(std::lround(0.3 * sample.fps())));
    nlohmann::ordered_json meta;
    meta["input_frames"] = frames;
    meta["fps"] = sample.fps();
    meta["step_frames"] = step;
    meta["no_context"] = res.no_context;
    auto waypoints = [&](Hand hand) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        int last_emitted = -1;
        for (int t = frames - 1; t < out_sample.length(); t += step) {
            const Vec3 p = palm_position(out_sample.hands, t, hand);
            arr.push_back({p.x, p.y, p.z});
            last_emitted = t;
        }
        if (last_emitted != out_sample.length() - 1) {
            const Vec3 p = palm_position(out_sample.hands, out_sample.length() - 1, hand);
            arr.push_back({p.x, p.y, p.z});
        }
        return arr;
    };
    meta["right_waypoints"] = waypoints(Hand::right);
    meta["left_waypoints"] = waypoints(Hand::left);
    nlohmann::ordered_json objs = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < sample.scene.objects.objects.size(); ++i) {
        const Vec3 c = sample.scene.objects.objects[i].centroid();
        objs.push_back({{"centroid", {c.x, c.y, c.z}},
                        {"target", static_cast<int>(i) == sample.scene.objects.target}});
    }
    meta["objects"] = std::move(objs);
    meta["target_zone_radius"] = 0.06;
    const std::string meta_path = out + ".meta.json";
    refuse_overwrite(meta_path, force);
    std::ofstream meta_out(meta_path);
    meta_out << meta.dump(2) << '\n';

    RunConfig cfg;
    cfg.vqvae = vqvae.config();
    cfg.generator = gen.config();
    write_run_sidecar(out, "predict", cfg, force);
    std::cout << "predicted " << res.frames.length() << " frames from " << frames
              << " input frames; wrote " << out << " and " << meta_path << "\n";
    return kExitOk;
}

int run_grid_command(const std::string& command, const RunConfig& cfg, const GridConfig& grid,
                     const std::string& data, const std::string& out, int jobs,
                     const std::string& ckpt_dir, bool jsonl, bool force, bool square_values) {
    refuse_overwrite(out, force);
    const Dataset ds = read_dataset(data);

    HarnessConfig hc;
    hc.vqvae = cfg.vqvae;
    hc.generator = cfg.generator;
    hc.jobs = jobs;
    hc.checkpoint_dir = ckpt_dir;
    if (!ckpt_dir.empty()) std::filesystem::create_directories(ckpt_dir);

    const InvariantCheck splits = check_split_soundness(ds);
    MetricReport report = run_grid(grid, ds, hc);
    if (square_values) {
        // The noise study reports MSE values; square the distance metrics.
        for (auto& row : report.rows) {
            if (row.units == "m" || row.units == "rad") {
                row.value *= row.value;
                row.units += "2";
            }
        }
    }
    write_report_csv(report, out);
    const std::filesystem::path parent = std::filesystem::path(out).parent_path();
    const std::string stem = std::filesystem::path(out).stem().string();
    const std::string mean_path = (parent / (stem + "-mean.csv")).string();
    refuse_overwrite(mean_path, force);
    write_report_csv(aggregate_mean(report), mean_path);
    if (jsonl) {
        const std::string jsonl_path = (parent / (stem + ".jsonl")).string();
        refuse_overwrite(jsonl_path, force);
        write_report_jsonl(report, jsonl_path);
    }
    write_run_sidecar(out, command, cfg, force);

    const InvariantCheck floors = square_values ? InvariantCheck{} : check_floor_dominance(report);
    std::cout << "wrote " << report.rows.size() << " rows to " << out << " (means in " << mean_path
              << ")\n";
    if (report.degenerate_angle_skips > 0) {
        std::cout << "skipped " << report.degenerate_angle_skips
                  << " degenerate angle rows (undefined key-pose angle)\n";
    }
    int code = kExitOk;
    if (report.failed_cells > 0) {
        std::cout << report.failed_cells << " grid cells failed; see 'error' rows\n";
        code = kExitTraining;
    }
    for (const auto& v : splits.violations) std::cout << "split violation: " << v << "\n";
    for (const auto& v : floors.violations) std::cout << "floor violation: " << v << "\n";
    for (const auto& n : floors.notes) std::cout << "floor note: " << n << "\n";
    if (!splits.ok || !floors.ok) code = kExitInvariant;
    return code;
}

int cmd_ablate(const std::string& config_path, const std::string& data, const std::string& out,
               int jobs, const std::string& ckpt_dir, bool force) {
    RunConfig cfg = load_config_opt(config_path);
    GridConfig grid = cfg.grid;
    grid.fusions = {FusionMode::linear, FusionMode::convolution, FusionMode::summation};
    grid.gaze_flags = {true};
    grid.noise_levels = {0.0};
    if (config_path.empty()) grid.folds = {0};  // one fold by default, six trainings

    refuse_overwrite(out, force);
    const std::filesystem::path parent = std::filesystem::path(out).parent_path();
    const std::string stem = std::filesystem::path(out).stem().string();
    const std::string report_path = (parent / (stem + "-rows.csv")).string();
    const int code =
        run_grid_command("ablate", cfg, grid, data, report_path, jobs, ckpt_dir, false, force,
                         false);
    write_ablation_table(read_report_csv(report_path), out);
    std::cout << "wrote fusion ablation table to " << out << "\n";
    return code;
}

int cmd_noise_sweep(const std::string& config_path, const std::string& data,
                    const std::string& out, int jobs, const std::string& ckpt_dir, bool force) {
    RunConfig cfg = load_config_opt(config_path);
    GridConfig grid = cfg.grid;
    if (config_path.empty() || grid.noise_levels == std::vector<double>{0.0}) {
        grid.noise_levels = {0.0, 0.1, 0.15, 0.2, 0.25, 0.3};
    }
    grid.input_frames = {8};  // the shortest input sequence
    if (config_path.empty()) grid.folds = {0};
    return run_grid_command("noise-sweep", cfg, grid, data, out, jobs, ckpt_dir, false, force,
                            true);
}

int cmd_plot(const std::string& report_path, const std::string& out_dir,
             const std::string& pred_path, const std::string& out_svg, bool force) {
    if (!report_path.empty()) {
        if (out_dir.empty()) throw CliError{kExitUsage, "plot --report needs --out-dir"};
        std::filesystem::create_directories(out_dir);
        const MetricReport report = read_report_csv(report_path);
        if (report.rows.empty()) {
            std::cout << "report is empty, nothing to plot\n";
            return kExitOk;
        }
        const auto written = write_report_charts(report, out_dir);
        for (const auto& p : written) std::cout << "wrote " << p << "\n";
        return kExitOk;
    }
    if (pred_path.empty()) throw CliError{kExitUsage, "plot needs either --report or --pred"};
    if (out_svg.empty()) throw CliError{kExitUsage, "plot --pred needs --out"};
    refuse_overwrite(out_svg, force);

    const Dataset ds = read_dataset(pred_path);
    if (ds.empty()) throw CliError{kExitData, "prediction file holds no samples"};
    const TrajectorySample& sample = ds.samples.front();

    std::ifstream meta_in(pred_path + ".meta.json");
    if (!meta_in) {
        throw CliError{kExitData,
                       "missing sidecar '" + pred_path + ".meta.json' (run predict first)"};
    }
    nlohmann::json meta = nlohmann::json::parse(meta_in);
    const int input_frames = meta.at("input_frames").get<int>();

    TopViewPlot plot;
    plot.title = "hand position predictions (top view), " + motion_name(sample.scene.motion);
    plot.target_zone_radius = meta.at("target_zone_radius").get<double>();
    for (int t = 0; t < input_frames; ++t) {
        plot.right_input.push_back(palm_position(sample.hands, t, Hand::right));
        plot.left_input.push_back(palm_position(sample.hands, t, Hand::left));
    }
    for (const auto& p : meta.at("right_waypoints")) {
        plot.right_pred.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    for (const auto& p : meta.at("left_waypoints")) {
        plot.left_pred.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    for (const auto& o : meta.at("objects")) {
        const auto& c = o.at("centroid");
        plot.objects.emplace_back(Vec3{c[0].get<double>(), c[1].get<double>(), c[2].get<double>()},
                                  o.at("target").get<bool>());
    }
    write_top_view_svg(plot, out_svg);
    std::cout << "wrote " << out_svg << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gaze-guided hand motion prediction: synthetic data, discrete hand-pose "
                 "codebook, autoregressive generator, and the evaluation harness"};
    app.require_subcommand(1);

    std::string config_path, data, out, vqvae_path, ckpt_path, input_path, gaze, fusion;
    std::string ckpt_dir, report_path, out_dir, pred_path, grid_path;
    int subjects = -1, frames = 8, epochs = -1;
    long seed = -1;
    int jobs = default_jobs();
    bool force = false, jsonl = false;

    auto* synth = app.add_subcommand("synth", "generate a synthetic eye-hand-object dataset");
    synth->add_option("--config", config_path, "run config JSON");
    synth->add_option("--out", out, "output dataset (JSON lines)")->required();
    synth->add_option("--subjects", subjects, "override subject count");
    synth->add_option("--seed", seed, "override seed");
    synth->add_flag("--force", force, "overwrite existing outputs");

    auto* tv = app.add_subcommand("train-vqvae", "train the hand-motion codebook");
    tv->add_option("--config", config_path, "run config JSON");
    tv->add_option("--data", data, "training dataset")->required();
    tv->add_option("--out", out, "output checkpoint")->required();
    tv->add_option("--seed", seed, "override seed");
    tv->add_option("--epochs", epochs, "override epochs");
    tv->add_flag("--force", force, "overwrite existing outputs");

    auto* tg = app.add_subcommand("train-generator", "train the autoregressive motion generator");
    tg->add_option("--config", config_path, "run config JSON");
    tg->add_option("--data", data, "training dataset")->required();
    tg->add_option("--vqvae", vqvae_path, "frozen vqvae checkpoint")->required();
    tg->add_option("--out", out, "output checkpoint")->required();
    tg->add_option("--gaze", gaze, "on|off");
    tg->add_option("--fusion", fusion, "linear|convolution|summation");
    tg->add_option("--seed", seed, "override seed");
    tg->add_option("--epochs", epochs, "override epochs");
    tg->add_flag("--force", force, "overwrite existing outputs");

    auto* pr = app.add_subcommand("predict", "roll out a prediction for one sample");
    pr->add_option("--ckpt", ckpt_path, "generator checkpoint")->required();
    pr->add_option("--input", input_path, "sample file (first record is used)")->required();
    pr->add_option("--frames", frames, "observed input frames")->required();
    pr->add_option("--out", out, "output prediction (JSON lines)")->required();
    pr->add_flag("--force", force, "overwrite existing outputs");

    auto* ev = app.add_subcommand("evaluate", "run the cross-validation grid");
    ev->add_option("--config", config_path, "run config JSON (grid section)");
    ev->add_option("--grid", grid_path, "grid JSON object (overrides the config's grid)");
    ev->add_option("--data", data, "dataset")->required();
    ev->add_option("--out", out, "report CSV")->required();
    ev->add_option("--jobs", jobs, "parallel training units (env GZM_JOBS)");
    ev->add_option("--ckpt-dir", ckpt_dir, "cache directory for trained units");
    ev->add_flag("--jsonl", jsonl, "also write the report as JSON lines");
    ev->add_flag("--force", force, "overwrite existing outputs");

    auto* ab = app.add_subcommand("ablate", "compare the three gaze fusion variants");
    ab->add_option("--config", config_path, "run config JSON");
    ab->add_option("--data", data, "dataset")->required();
    ab->add_option("--out", out, "ablation table CSV")->required();
    ab->add_option("--jobs", jobs, "parallel training units");
    ab->add_option("--ckpt-dir", ckpt_dir, "cache directory for trained units");
    ab->add_flag("--force", force, "overwrite existing outputs");

    auto* ns = app.add_subcommand("noise-sweep", "evaluate under test-time joint noise");
    ns->add_option("--config", config_path, "run config JSON");
    ns->add_option("--data", data, "dataset")->required();
    ns->add_option("--out", out, "report CSV (squared errors)")->required();
    ns->add_option("--jobs", jobs, "parallel training units");
    ns->add_option("--ckpt-dir", ckpt_dir, "cache directory for trained units");
    ns->add_flag("--force", force, "overwrite existing outputs");

    auto* pl = app.add_subcommand("plot", "render SVG charts from reports or predictions");
    pl->add_option("--report", report_path, "report CSV to chart");
    pl->add_option("--out-dir", out_dir, "chart output directory");
    pl->add_option("--pred", pred_path, "prediction file from `predict`");
    pl->add_option("--out", out, "output SVG for --pred");
    pl->add_flag("--force", force, "overwrite existing outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(config_path, out, subjects, seed, force);
        if (tv->parsed()) return cmd_train_vqvae(config_path, data, out, seed, epochs, force);
        if (tg->parsed()) {
            return cmd_train_generator(config_path, data, vqvae_path, out, gaze, fusion, seed,
                                       epochs, force);
        }
        if (pr->parsed()) return cmd_predict(ckpt_path, input_path, frames, out, force);
        if (ev->parsed()) {
            const RunConfig cfg = load_config_opt(config_path);
            const GridConfig grid = grid_path.empty() ? cfg.grid : load_grid_config(grid_path);
            return run_grid_command("evaluate", cfg, grid, data, out, jobs, ckpt_dir, jsonl,
                                    force, false);
        }
        if (ab->parsed()) return cmd_ablate(config_path, data, out, jobs, ckpt_dir, force);
        if (ns->parsed()) return cmd_noise_sweep(config_path, data, out, jobs, ckpt_dir, force);
        if (pl->parsed()) return cmd_plot(report_path, out_dir, pred_path, out, force);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const param_error& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const train_error& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return kExitTraining;
    } catch (const error& e) {  // data, shape, index, numerics
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
