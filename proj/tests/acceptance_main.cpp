// Acceptance suite: runs every shipping criterion at its stated tolerance and
// prints one pass/fail line each. Heavy criteria train real models on the
// full synthetic corpus; expect roughly twenty minutes on two cores.
//
// Usage: gzm_acceptance --cli <path-to-gzm> [--workdir DIR] [--jobs N] [--only 1,2,...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "grad_check.hpp"
#include "gzm/checkpoint.hpp"
#include "gzm/config.hpp"
#include "gzm/dataset_io.hpp"
#include "gzm/generator.hpp"
#include "gzm/harness.hpp"
#include "gzm/metrics.hpp"
#include "gzm/synth.hpp"
#include "gzm/vqvae.hpp"

using namespace gzm;

namespace {

struct Options {
    std::string cli;
    std::string workdir = "/tmp/gzm_acceptance";
    int jobs = 2;
    std::set<int> only;  // empty: run everything
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

Tensor random_tensor(std::vector<int> dims, Rng& rng, double scale = 1.0, bool grad = true) {
    Tensor x(std::move(dims), grad);
    for (double& v : x.v) v = rng.normal(0.0, scale);
    return x;
}

// Shared context so expensive artifacts are built once.
struct Context {
    Options opt;
    Dataset dataset;          // default 465-sample corpus
    MetricReport trend_report;  // filled by criterion 7, reused by 8
    bool trend_ready = false;
};

// --- 1. gradient suite -----------------------------------------------------

Outcome criterion_gradients(Context&) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    int checked = 0;
    auto track = [&](const gzm::test::GradCheckResult& r) {
        worst = std::max(worst, r.max_rel_err);
        checked += r.checked;
    };
    Rng rng(2024);

    {  // linear
        Tensor x = random_tensor({4, 6}, rng);
        Tensor w = random_tensor({6, 5}, rng, 0.5);
        Tensor b = random_tensor({5}, rng, 0.5);
        track(gzm::test::grad_check(
            [&](Tape& t) { return sum(t, relu(t, linear(t, &x, &w, &b))); }, {&x, &w, &b}));
    }
    {  // conv1d, both strides
        Tensor x = random_tensor({3, 12}, rng);
        Tensor k1 = random_tensor({4, 3, 3}, rng, 0.4);
        Tensor k2 = random_tensor({2, 4, 3}, rng, 0.4);
        track(gzm::test::grad_check(
            [&](Tape& t) {
                Tensor* h = relu(t, conv1d(t, &x, &k1, 2, 1));
                return mean(t, mul(t, conv1d(t, h, &k2, 1, 1), conv1d(t, h, &k2, 1, 1)));
            },
            {&x, &k1, &k2}));
    }
    {  // attention block
        Rng brng(7);
        TransformerBlock block(8, 2, 2, brng);
        Tensor x = random_tensor({4, 8}, rng);
        NamedParams named;
        block.collect("b", named);
        std::vector<Tensor*> params{&x};
        for (auto& [n, p] : named) params.push_back(p);
        track(gzm::test::grad_check(
            [&](Tape& t) {
                Tensor* y = block.forward(t, &x);
                return mean(t, mul(t, y, y));
            },
            params));
    }
    {  // fusion layers, all three modes, through the full sequence loss
        for (FusionMode mode :
             {FusionMode::linear, FusionMode::convolution, FusionMode::summation}) {
            GeneratorConfig cfg;
            cfg.fusion = mode;
            cfg.use_gaze = true;
            cfg.gaze_dim = 4;
            cfg.model_dim = 16;
            cfg.layers = 1;
            cfg.heads = 2;
            cfg.ffn_mult = 2;
            cfg.seed = 11;
            Tensor codebook = random_tensor({8, 4}, rng, 0.5, false);
            Generator gen(cfg, codebook);
            std::vector<int> tokens{2, 5, 1};
            Tensor gaze = random_tensor({3, 3}, rng, 0.3, false);
            ObjectSet objects;
            SceneObject obj;
            obj.kind = ObjectKind::pen;
            obj.points = {{0.1, 0.2, 0.0}, {0.15, 0.25, 0.0}};
            objects.objects = {obj};
            NamedParams named = gen.named_params();
            track(gzm::test::grad_check(
                [&](Tape& t) { return gen.sequence_loss(t, tokens, &gaze, objects); },
                params_of(named)));
        }
    }
    {  // smooth-L1 across both branches
        Tensor pred({6}, {0.3, -0.2, 1.7, -2.4, 0.05, 0.9}, true);
        Tensor target({6}, {0.0, 0.1, 0.2, 0.3, -0.3, 0.0}, true);
        track(gzm::test::grad_check(
            [&](Tape& t) { return smooth_l1(t, &pred, &target, 1.0); }, {&pred, &target}));
    }
    {  // weighted cross entropy
        Tensor logits = random_tensor({5, 7}, rng, 2.0);
        std::vector<int> ys{1, 6, 0, 3, 2};
        std::vector<double> ws{1, 1, 1, 1, 2};
        track(gzm::test::grad_check(
            [&](Tape& t) { return cross_entropy(t, &logits, ys, ws); }, {&logits}));
    }
    {  // straight-through VQ path: analytic dE equals finite differences in Q
        const int td = 3, d = 4;
        Tensor e = random_tensor({td, d}, rng, 0.5);
        Tensor codebook = random_tensor({6, d}, rng, 0.5, false);
        Tensor target = random_tensor({td, d}, rng, 1.0, false);
        Tensor mixer = random_tensor({d, d}, rng, 0.5, false);
        const QuantizationResult qr = quantize(e, codebook);
        e.zero_grad();
        {
            Tape t;
            Tensor* q_rows = embedding_lookup(t, &codebook, qr.indices);
            Tensor* st = straight_through(t, &e, q_rows);
            Tensor* diff = sub(t, matmul(t, st, &mixer), constant(t, target.shape, target.v));
            t.backward(mean(t, mul(t, diff, diff)));
        }
        Tensor q_free = qr.embeddings;
        auto forward = [&](Tape& t) {
            Tensor* q_node = constant(t, q_free.shape, q_free.v);
            Tensor* diff = sub(t, matmul(t, q_node, &mixer), constant(t, target.shape, target.v));
            return mean(t, mul(t, diff, diff));
        };
        const double eps = 1e-5;
        for (std::size_t i = 0; i < q_free.v.size(); ++i) {
            const double keep = q_free.v[i];
            q_free.v[i] = keep + eps;
            Tape tp;
            const double fp = forward(tp)->scalar();
            q_free.v[i] = keep - eps;
            Tape tm;
            const double fm = forward(tm)->scalar();
            q_free.v[i] = keep;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double rel = std::abs(e.g[i] - numeric) /
                               std::max({1.0, std::abs(e.g[i]), std::abs(numeric)});
            worst = std::max(worst, rel);
            ++checked;
        }
    }

    const double elapsed = seconds_since(t0);
    Outcome out;
    out.pass = worst < 1e-5 && elapsed < 60.0;
    out.detail = std::to_string(checked) + " partials, max rel err " + fmt(worst, 2) + ", " +
                 fmt(elapsed, 3) + " s";
    return out;
}

// --- 2. quantization oracle ------------------------------------------------

Outcome criterion_quantize(Context&) {
    Rng rng(31);
    const int k = 32, d = 8, n = 1000;
    Tensor codebook = random_tensor({k, d}, rng, 1.0, false);
    // duplicate a row to force exact ties
    for (int j = 0; j < d; ++j) codebook.at(9, j) = codebook.at(4, j);
    Tensor e = random_tensor({n, d}, rng, 1.0, false);
    // a handful of rows snapped onto the duplicated entry: exact tie
    for (int t = 0; t < 10; ++t) {
        for (int j = 0; j < d; ++j) e.at(t, j) = codebook.at(4, j);
    }
    const QuantizationResult qr = quantize(e, codebook);
    int mismatches = 0;
    for (int t = 0; t < n; ++t) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < k; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) {
                acc += (e.at(t, j) - codebook.at(i, j)) * (e.at(t, j) - codebook.at(i, j));
            }
            const double dist = std::sqrt(acc);
            if (dist < best_d) {
                best_d = dist;
                best = i;
            }
        }
        if (qr.indices[static_cast<std::size_t>(t)] != best) ++mismatches;
    }
    // the duplicated-row ties must resolve to index 4, never 9
    bool ties_ok = true;
    for (int t = 0; t < 10; ++t) ties_ok = ties_ok && qr.indices[static_cast<std::size_t>(t)] == 4;
    // the documented equidistant case
    Tensor cb2({2, 2}, {0, 0, 1, 1});
    Tensor mid({1, 2}, {0.5, 0.5});
    ties_ok = ties_ok && quantize(mid, cb2).indices[0] == 0;

    Outcome out;
    out.pass = mismatches == 0 && ties_ok;
    out.detail = std::to_string(n) + " vectors, " + std::to_string(mismatches) +
                 " oracle mismatches, tie rule " + (ties_ok ? "exact" : "VIOLATED");
    return out;
}

// --- 3. causality ----------------------------------------------------------

Outcome criterion_causality(Context&) {
    GeneratorConfig cfg;
    cfg.model_dim = 32;
    cfg.gaze_dim = 8;
    cfg.layers = 2;
    cfg.heads = 4;
    cfg.seed = 5;
    Rng rng(77);
    Tensor codebook = random_tensor({16, 8}, rng, 0.5, false);
    Generator gen(cfg, codebook);
    ObjectSet objects;
    SceneObject obj;
    obj.kind = ObjectKind::bottle;
    obj.points = {{0.1, 0.1, 0.0}, {0.1, 0.1, 0.2}};
    objects.objects = {obj};

    int violations = 0;
    const int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
        const int n = 3 + rng.uniform_int(10);
        std::vector<int> tokens(static_cast<std::size_t>(n));
        for (int& s : tokens) s = rng.uniform_int(16);
        Tensor gaze = random_tensor({n, 3}, rng, 0.3, false);

        Tape t1;
        Tensor* base = gen.forward_logits(t1, gen.build_input(t1, tokens, &gaze, objects));

        const int cut = rng.uniform_int(n - 1);
        std::vector<int> mutated = tokens;
        Tensor gaze2 = gaze;
        for (int i = cut + 1; i < n; ++i) {
            mutated[static_cast<std::size_t>(i)] = rng.uniform_int(16);
            for (int j = 0; j < 3; ++j) gaze2.at(i, j) += rng.normal(0.0, 1.0);
        }
        Tape t2;
        Tensor* other = gen.forward_logits(t2, gen.build_input(t2, mutated, &gaze2, objects));
        for (int row = 0; row <= cut + 1 && violations == 0; ++row) {
            for (int kk = 0; kk < 16; ++kk) {
                if (base->at(row, kk) != other->at(row, kk)) {  // bitwise
                    ++violations;
                    break;
                }
            }
        }
        if (violations > 0) break;
    }
    Outcome out;
    out.pass = violations == 0;
    out.detail = std::to_string(trials) + " perturbation trials, " + std::to_string(violations) +
                 " bitwise violations";
    return out;
}

// --- 4. metric oracles -----------------------------------------------------

Outcome criterion_metrics(Context&) {
    Rng rng(41);
    auto random_track = [&](int n) {
        std::vector<Vec3> t(static_cast<std::size_t>(n));
        for (auto& p : t) p = {rng.normal(0, 0.4), rng.normal(0, 0.4), rng.normal(0, 0.4)};
        return t;
    };
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + rng.uniform_int(40);
        const auto a = random_track(n), b = random_track(n);
        double oracle_avg = 0.0;
        for (int i = 0; i < n; ++i) {
            const double dx = a[i].x - b[i].x, dy = a[i].y - b[i].y, dz = a[i].z - b[i].z;
            oracle_avg += std::sqrt(dx * dx + dy * dy + dz * dz);
        }
        oracle_avg /= n;
        worst = std::max(worst, std::abs(avg_position_error(a, b) - oracle_avg));
        const double dx = a.back().x - b.back().x, dy = a.back().y - b.back().y,
                     dz = a.back().z - b.back().z;
        worst = std::max(worst,
                         std::abs(end_pose_error(a, b) - std::sqrt(dx * dx + dy * dy + dz * dz)));
        const Vec3 s = a.front();
        const double ax = a.back().x - s.x, ay = a.back().y - s.y, az = a.back().z - s.z;
        const double bx = b.back().x - s.x, by = b.back().y - s.y, bz = b.back().z - s.z;
        const double na = std::sqrt(ax * ax + ay * ay + az * az);
        const double nb = std::sqrt(bx * bx + by * by + bz * bz);
        if (na > 0 && nb > 0) {
            const double c = std::clamp((ax * bx + ay * by + az * bz) / (na * nb), -1.0, 1.0);
            worst = std::max(worst,
                             std::abs(key_pose_angle_error(s, a.back(), b.back()) - std::acos(c)));
        }
    }
    const auto track = random_track(6);
    auto shifted = track;
    for (auto& p : shifted) p.z += 0.1;
    const bool hand_ok =
        avg_position_error(track, track) == 0.0 &&
        std::abs(avg_position_error(track, shifted) - 0.1) < 1e-15 &&
        std::abs(key_pose_angle_error({0, 0, 0}, {1, 0, 0}, {0, 1, 0}) - std::numbers::pi / 2) <
            1e-15;
    Outcome out;
    out.pass = worst < 1e-12 && hand_ok;
    out.detail = "100 random pairs, max oracle gap " + fmt(worst, 2) +
                 (hand_ok ? ", hand cases exact" : ", HAND CASES WRONG");
    return out;
}

// --- 5. noise calibration --------------------------------------------------

Outcome criterion_noise(Context&) {
    Outcome out;
    out.pass = true;
    std::string parts;
    for (double e : {0.1, 0.2, 0.3}) {
        Rng rng(static_cast<std::uint64_t>(e * 1000) + 17);
        const double sigma = noise_sigma(e);
        double acc = 0.0;
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) {
            const Vec3 d{rng.normal(0.0, sigma), rng.normal(0.0, sigma), rng.normal(0.0, sigma)};
            acc += d.norm();
        }
        const double mean_norm = acc / draws;
        const double rel = std::abs(mean_norm - e) / e;
        out.pass = out.pass && rel < 0.02;
        if (!parts.empty()) parts += ", ";
        parts += "e=" + fmt(e, 2) + ": " + fmt(mean_norm, 4) + " (" + fmt(rel * 100, 2) + "%)";
    }
    out.detail = "1e5 draws each; " + parts;
    return out;
}

// --- 6. VQ-VAE desk training -----------------------------------------------

Outcome criterion_vqvae_training(Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    const Split split = split_cs_cm_csm(ctx.dataset, 0, SplitMode::CS);
    VqVaeConfig cfg;  // defaults: K=64, D_c=32
    const VqVae model = train_vqvae(ctx.dataset, split.train, cfg);

    // mean training pose as the baseline predictor
    Tensor mean_pose({kPoseDim});
    std::int64_t frames = 0;
    for (int i : split.train) {
        const Tensor& f = ctx.dataset.samples[static_cast<std::size_t>(i)].hands.frames;
        for (int t = 0; t < f.dim(0); ++t) {
            for (int d = 0; d < kPoseDim; ++d) mean_pose.v[static_cast<std::size_t>(d)] += f.at(t, d);
        }
        frames += f.dim(0);
    }
    for (double& v : mean_pose.v) v /= static_cast<double>(frames);

    double err = 0.0, baseline = 0.0;
    for (int i : split.test) {
        const auto& s = ctx.dataset.samples[static_cast<std::size_t>(i)];
        const MotionSequence recon = model.reconstruct(s.hands);
        const auto gt = palm_track(s.hands, s.scene.handedness);
        err += avg_position_error(gt, palm_track(recon, s.scene.handedness));
        MotionSequence mean_seq(s.length(), s.fps());
        for (int t = 0; t < s.length(); ++t) {
            for (int d = 0; d < kPoseDim; ++d) {
                mean_seq.frames.at(t, d) = mean_pose.v[static_cast<std::size_t>(d)];
            }
        }
        baseline += avg_position_error(gt, palm_track(mean_seq, s.scene.handedness));
    }
    err /= static_cast<double>(split.test.size());
    baseline /= static_cast<double>(split.test.size());
    const double elapsed = seconds_since(t0);

    Outcome out;
    out.pass = err < 0.05 && err < baseline && elapsed < 900.0;
    out.detail = "held-out avg position error " + fmt(err) + " m (< 0.05 m), mean-pose baseline " +
                 fmt(baseline) + " m, " + fmt(elapsed, 3) + " s";
    return out;
}

// --- 7. trend reproduction -------------------------------------------------

Outcome criterion_trend(Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    HarnessConfig hc;
    hc.jobs = ctx.opt.jobs;
    MetricReport merged;
    // Five seeds, each on its own cross-subject fold.
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        GridConfig grid;  // all ten input frame counts, linear fusion, both gaze flags
        grid.folds = {static_cast<int>((seed - 1) % kNumFolds)};
        grid.seeds = {seed};
        merged.append(run_grid(grid, ctx.dataset, hc));
    }
    merged.sort_canonical();
    ctx.trend_report = merged;
    ctx.trend_ready = true;
    write_report_csv(merged, (std::filesystem::path(ctx.opt.workdir) / "trend-report.csv").string());

    // mean end-pose per (mode, frames) over seeds, and gaze-vs-no-gaze at 8.
    std::map<std::pair<std::string, int>, std::pair<double, int>> per_mode_frames;
    std::map<std::pair<std::uint64_t, bool>, std::pair<double, int>> at8_by_seed;
    for (const auto& row : merged.rows) {
        if (row.metric != kMetricEndPose || row.noise_e != 0.0) continue;
        if (row.gaze) {
            auto& [sum, n] = per_mode_frames[{row.validation, row.input_frames}];
            sum += row.value;
            ++n;
        }
        if (row.input_frames == 8) {
            auto& [sum, n] = at8_by_seed[{row.seed, row.gaze}];
            sum += row.value;
            ++n;
        }
    }
    bool trend_ok = true;
    std::string detail;
    for (const std::string mode : {"CS", "CM", "CSM"}) {
        const auto at8 = per_mode_frames.at({mode, 8});
        const auto at44 = per_mode_frames.at({mode, 44});
        const double e8 = at8.first / at8.second;
        const double e44 = at44.first / at44.second;
        trend_ok = trend_ok && e44 < e8;
        detail += mode + " " + fmt(e8) + "->" + fmt(e44) + " m; ";
    }
    int gaze_wins = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto on = at8_by_seed.at({seed, true});
        const auto off = at8_by_seed.at({seed, false});
        if (on.first / on.second <= off.first / off.second) ++gaze_wins;
    }
    const double elapsed = seconds_since(t0);
    Outcome out;
    out.pass = trend_ok && gaze_wins >= 4 && elapsed < 7200.0;
    out.detail = detail + "gaze<=no-gaze @8 in " + std::to_string(gaze_wins) + "/5 seeds, " +
                 fmt(elapsed / 60.0, 3) + " min";
    return out;
}

// --- 8. floor dominance ----------------------------------------------------

Outcome criterion_floor(Context& ctx) {
    if (!ctx.trend_ready) {
        return {false, "skipped: trend grid unavailable (criterion 7 did not run)"};
    }
    // The binding comparison is between the fold/seed-averaged end-pose curve
    // and the averaged reconstruction floor (the gray dashed line the curves
    // sit above). Individual fold cells converge onto the floor at long
    // inputs and may graze it by measurement noise; count and report those.
    const MetricReport means = aggregate_mean(ctx.trend_report);
    std::map<std::string, double> agg_floor;
    for (const auto& row : means.rows) {
        if (row.metric == kMetricFloorEnd) agg_floor[row.validation] = row.value;
    }
    int agg_cells = 0, agg_violations = 0;
    double worst_margin = 1e300;
    std::string worst_cell;
    for (const auto& row : means.rows) {
        if (row.metric != kMetricEndPose) continue;
        const auto it = agg_floor.find(row.validation);
        if (it == agg_floor.end()) continue;
        ++agg_cells;
        const double margin = row.value - it->second;
        if (margin < worst_margin) {
            worst_margin = margin;
            worst_cell = row.validation + (row.gaze ? " gaze" : " no-gaze") + " @" +
                         std::to_string(row.input_frames);
        }
        if (row.value < it->second - 1e-12) ++agg_violations;
    }
    const InvariantCheck full = check_floor_dominance(ctx.trend_report);
    Outcome out;
    out.pass = agg_cells > 0 && agg_violations == 0 && full.ok;
    out.detail = std::to_string(agg_cells) + " aggregated cells, " +
                 std::to_string(agg_violations) + " below the floor, smallest margin " +
                 fmt(worst_margin) + " m (" + worst_cell + "); " +
                 std::to_string(full.notes.size()) + " fold-level grazes";
    return out;
}

// --- 9. split soundness ----------------------------------------------------

Outcome criterion_splits(Context& ctx) {
    const InvariantCheck check = check_split_soundness(ctx.dataset);
    // plus the advertised 12/3 subject partition for CS
    const Split cs = split_cs_cm_csm(ctx.dataset, 0, SplitMode::CS);
    std::set<int> train_subj, test_subj;
    for (int i : cs.train) train_subj.insert(ctx.dataset.samples[static_cast<std::size_t>(i)].scene.subject);
    for (int i : cs.test) test_subj.insert(ctx.dataset.samples[static_cast<std::size_t>(i)].scene.subject);
    const bool partition_ok = train_subj.size() == 12 && test_subj.size() == 3;
    Outcome out;
    out.pass = check.ok && partition_ok;
    out.detail = "all modes x folds checked, " + std::to_string(check.violations.size()) +
                 " violations; CS fold 0 partitions 12/3 subjects: " +
                 (partition_ok ? "yes" : "NO");
    return out;
}

// --- 10. reproducibility through the CLI ------------------------------------

Outcome criterion_reproducibility(Context& ctx) {
    if (ctx.opt.cli.empty()) return {false, "no --cli binary given"};
    namespace fs = std::filesystem;
    const fs::path work = fs::path(ctx.opt.workdir) / "repro";
    fs::remove_all(work);
    fs::create_directories(work);

    const std::string cfg_path = (work / "cfg.json").string();
    {
        std::ofstream f(cfg_path);
        f << R"({"seed": 21,
  "synth": {"subjects": 5, "seed": 21},
  "vqvae": {"codebook_size": 16, "embed_dim": 8, "hidden_channels": 24, "epochs": 6, "seed": 21},
  "generator": {"model_dim": 24, "gaze_dim": 6, "heads": 4, "layers": 1, "epochs": 3, "seed": 21},
  "grid": {"input_frames": [8], "modes": ["CS"], "folds": [0], "seeds": [21]}})";
    }
    auto sh = [&](const std::string& args) {
        const std::string cmd = ctx.opt.cli + " " + args + " >/dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    auto path = [&](const char* name) { return (work / name).string(); };

    std::string detail;
    bool ok = true;
    for (int run = 1; run <= 2; ++run) {
        const std::string suffix = std::to_string(run);
        if (sh("synth --config " + cfg_path + " --out " + path("data") + suffix + ".jsonl") != 0 ||
            sh("train-vqvae --config " + cfg_path + " --data " + path("data") + suffix +
               ".jsonl --out " + path("vq") + suffix + ".gzmv") != 0 ||
            sh("train-generator --config " + cfg_path + " --data " + path("data") + suffix +
               ".jsonl --vqvae " + path("vq") + suffix + ".gzmv --out " + path("gen") + suffix +
               ".gzmv") != 0) {
            return {false, "a CLI command failed during run " + suffix};
        }
        // The toy-scale grid may trip the embedded floor check (exit 5); the
        // reproducibility claim is about the bytes it writes either way.
        const int eval_code = sh("evaluate --config " + cfg_path + " --data " + path("data") +
                                 suffix + ".jsonl --out " + path("report") + suffix + ".csv");
        if (eval_code != 0 && eval_code != 5) {
            return {false,
                    "evaluate exited with " + std::to_string(eval_code) + " during run " + suffix};
        }
    }
    const bool data_eq = slurp(path("data1.jsonl")) == slurp(path("data2.jsonl"));
    const bool vq_eq = slurp(path("vq1.gzmv")) == slurp(path("vq2.gzmv"));
    const bool gen_eq = slurp(path("gen1.gzmv")) == slurp(path("gen2.gzmv"));
    const bool report_eq = slurp(path("report1.csv")) == slurp(path("report2.csv"));
    ok = data_eq && vq_eq && gen_eq && report_eq;
    detail = std::string("dataset ") + (data_eq ? "identical" : "DIFFERS") + ", vqvae ckpt " +
             (vq_eq ? "identical" : "DIFFERS") + ", generator ckpt " +
             (gen_eq ? "identical" : "DIFFERS") + ", report " +
             (report_eq ? "identical" : "DIFFERS");
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    Context ctx;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&]() -> std::string {
            if (i + 1 >= argc) {
                std::cerr << arg << " needs a value\n";
                std::exit(2);
            }
            return argv[++i];
        };
        if (arg == "--cli") ctx.opt.cli = next();
        else if (arg == "--workdir") ctx.opt.workdir = next();
        else if (arg == "--jobs") ctx.opt.jobs = std::max(1, std::atoi(next().c_str()));
        else if (arg == "--only") {
            std::stringstream ss(next());
            for (std::string part; std::getline(ss, part, ',');) {
                ctx.opt.only.insert(std::atoi(part.c_str()));
            }
        } else {
            std::cerr << "unknown argument " << arg << "\n";
            return 2;
        }
    }
    if (const char* env = std::getenv("GZM_JOBS")) {
        const int n = std::atoi(env);
        if (n >= 1) ctx.opt.jobs = n;
    }
    std::filesystem::create_directories(ctx.opt.workdir);

    std::cout << "building the 465-sample synthetic corpus (default config)...\n";
    ctx.dataset = build_dataset(SynthConfig{});

    struct Entry {
        int id;
        const char* name;
        Outcome (*fn)(Context&);
    };
    const Entry entries[] = {
        {1, "gradient suite matches central finite differences (rel err < 1e-5)", criterion_gradients},
        {2, "quantization matches exhaustive search with the lowest-index tie rule", criterion_quantize},
        {3, "causal masking: futures never change earlier logits (bitwise)", criterion_causality},
        {4, "position and angle metrics match brute-force oracles to 1e-12", criterion_metrics},
        {5, "joint-noise sigma calibrated: mean displacement within 2% of e", criterion_noise},
        {6, "vq-vae desk training: held-out error < 0.05 m and beats the mean pose", criterion_vqvae_training},
        {7, "trend: error shrinks with input frames; gaze wins at 8 frames", criterion_trend},
        {8, "generator end-pose error never beats the reconstruction floor", criterion_floor},
        {9, "cross-validation splits are sound in every mode and fold", criterion_splits},
        {10, "synth/train/evaluate reruns are bitwise identical", criterion_reproducibility},
    };

    int failures = 0;
    for (const Entry& entry : entries) {
        if (!ctx.opt.only.empty() && !ctx.opt.only.count(entry.id)) continue;
        Outcome outcome;
        try {
            outcome = entry.fn(ctx);
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("exception: ") + e.what();
        }
        std::cout << (outcome.pass ? "[PASS] " : "[FAIL] ") << "criterion " << entry.id << ": "
                  << entry.name << " -- " << outcome.detail << "\n";
        std::cout.flush();
        failures += outcome.pass ? 0 : 1;
    }
    if (failures > 0) {
        std::cout << failures << " criteria failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
