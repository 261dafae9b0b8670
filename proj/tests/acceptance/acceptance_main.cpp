// End-to-end acceptance run: prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Usage: tsgan_acceptance [work-dir]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "support/suites.hpp"
#include "tsgan/data.hpp"
#include "tsgan/image_io.hpp"
#include "tsgan/metrics.hpp"
#include "tsgan/trainer.hpp"

namespace fs = std::filesystem;
using namespace tsgan;
using tsgan::testing::Check;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Outcome {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string detail;
};

std::string failed_names(const std::vector<Check>& checks) {
    std::string out;
    for (const auto& c : checks)
        if (!c.ok) out += fmt(" [%s: %.3g vs tol %.3g]", c.name.c_str(), c.value, c.tolerance);
    return out;
}

double worst(const std::vector<Check>& checks) {
    double m = 0;
    for (const auto& c : checks) m = std::max(m, c.value);
    return m;
}

// The desk-scale overfit configuration shared by the end-to-end criteria.
TrainConfig overfit_config(const fs::path& work, const std::string& tag) {
    TrainConfig c;
    c.epochs = 30;
    c.batch_size = 2;
    c.dataset = "synthetic:4";
    c.synth_height = c.synth_width = 64;
    c.seed = 1;
    c.lr_g = 1e-3;
    c.loss.lambda5 = 2.4e-5;
    c.keep_checkpoints = 2;
    c.checkpoint_dir = (work / tag).string();
    c.log_path = (work / (tag + ".csv")).string();
    return c;
}

struct RunResult {
    fs::path checkpoint;
    double seconds = 0;
    double mean_cc = 0;
    double coarse_l2 = 0;  // per-item pixel L2, averaged over the training pages
    double fine_l2 = 0;
    std::vector<StepLog> log;
};

RunResult overfit_run(const TrainConfig& config) {
    RunResult r;
    const auto t0 = Clock::now();
    Trainer trainer(config);
    r.checkpoint = trainer.run();
    r.seconds = seconds_since(t0);
    r.log = read_log(config.log_path);

    auto model = load_model(r.checkpoint);
    const auto& samples = trainer.train_samples();
    for (const auto& s : samples) {
        const auto maps = predict(model, s.image);
        const imageops::Image coarse = maps.coarse.cast<double>(), fine = maps.final_map().cast<double>();
        r.coarse_l2 += l2_pixel_loss(coarse, s.saliency).item();
        r.fine_l2 += l2_pixel_loss(fine, s.saliency).item();
        r.mean_cc += metrics::cc(fine, s.saliency);
    }
    const auto n = static_cast<double>(samples.size());
    r.coarse_l2 /= n;
    r.fine_l2 /= n;
    r.mean_cc /= n;
    std::cerr << fmt("  [%s] %.1f s, CC %.4f, L2 coarse %.5f fine %.5f\n", config.checkpoint_dir.c_str(), r.seconds,
                     r.mean_cc, r.coarse_l2, r.fine_l2);
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

int run_cli(std::vector<std::string> args, std::string* err = nullptr) {
    args.insert(args.begin(), "tsgan");
    std::ostringstream out, e;
    const int code = tsgan::cli::run(args, out, e);
    if (err) *err = e.str();
    return code;
}

// A directory in the FIWI layout: odd-sized stimuli, fixation point lists
// (no fixmaps, so the ground truth comes from blurring the points) and
// category labels.
fs::path make_fiwi_like(const fs::path& root) {
    fs::remove_all(root);
    auto pages = data::synth_dataset(6, 11, 96, 128);
    const data::Category cats[] = {data::Category::textual, data::Category::pictorial, data::Category::mixed};
    for (std::size_t i = 0; i < pages.size(); ++i) {
        pages[i].id = fmt("page%02zu", i + 1);
        pages[i].original_h = 90 - static_cast<std::int64_t>(i);
        pages[i].original_w = 121 + static_cast<std::int64_t>(i);
        pages[i].category = cats[i % 3];
    }
    data::write_dataset(pages, root);
    fs::remove_all(root / "fixmaps");
    return root;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "tsgan_acceptance";
    fs::create_directories(work);
    std::vector<Outcome> results;

    {
        const auto t0 = Clock::now();
        const auto checks = tsgan::testing::gradient_suite(1e-4, 10);
        const double secs = seconds_since(t0);
        const bool ok = tsgan::testing::all_ok(checks) && secs < 60.0;
        results.push_back({1, "gradient suite", ok,
                           fmt("%zu finite-difference checks at 10 points each, max relative error %.2e (tol 1e-4), "
                               "%.2f s (limit 60 s)",
                               checks.size(), worst(checks), secs) +
                               failed_names(checks)});
    }
    {
        const auto checks = tsgan::testing::oracle_suite();
        results.push_back({2, "oracle suite", tsgan::testing::all_ok(checks),
                           fmt("%zu loop-oracle and adjoint checks, worst error %.2e", checks.size(), worst(checks)) +
                               failed_names(checks)});
    }
    {
        const auto checks = tsgan::testing::metric_suite();
        results.push_back({3, "metric suite", tsgan::testing::all_ok(checks),
                           fmt("%zu checks, worst error %.2e", checks.size(), worst(checks)) + failed_names(checks)});
    }

    // The end-to-end runs feed criteria 4 and 6-9.
    std::cerr << "training the overfit model and its ablations...\n";
    const TrainConfig full_cfg = overfit_config(work, "full");
    const RunResult full = overfit_run(full_cfg);
    const RunResult repeat = overfit_run(overfit_config(work, "repeat"));
    TrainConfig no_outline_cfg = overfit_config(work, "no_outline");
    no_outline_cfg.network.use_outline = false;
    const RunResult no_outline = overfit_run(no_outline_cfg);
    TrainConfig single_cfg = overfit_config(work, "single_stage");
    single_cfg.network.two_stage = false;
    const RunResult single = overfit_run(single_cfg);

    {
        auto checks = tsgan::testing::loss_fixture_suite();
        const auto& w = full_cfg.loss;
        double identity = 0;
        for (const auto& row : full.log) {
            const auto& p = row.report;
            const double sum = w.lambda1 * p.l1 + w.lambda2 * p.l2_g + w.lambda3 * p.l3 + w.lambda4 * p.l4_g +
                               w.lambda5 * p.tv;
            identity = std::max(identity, std::abs(p.total - sum));
        }
        checks.push_back(tsgan::testing::within("logged total identity", full.log.empty() ? INFINITY : identity, 1e-10));
        results.push_back({4, "loss fixtures", tsgan::testing::all_ok(checks),
                           fmt("%zu fixtures, weighted-sum identity over %zu logged steps max error %.2e",
                               checks.size() - 1, full.log.size(), identity) +
                               failed_names(checks)});
    }
    {
        const auto checks = tsgan::testing::architecture_suite();
        std::string detail;
        for (const auto& c : checks) detail += (detail.empty() ? "" : "; ") + c.name + (c.ok ? " ok" : " FAILED");
        results.push_back({5, "architecture invariants", tsgan::testing::all_ok(checks),
                           detail + fmt(" (live gradient fraction %.4f)", checks.back().value)});
    }
    {
        const bool ok = full.fine_l2 < 0.02 && full.mean_cc > 0.9 && full.fine_l2 <= full.coarse_l2 &&
                        full.seconds <= 600.0 && full_cfg.epochs <= 30;
        results.push_back({6, "overfit run", ok,
                           fmt("synthetic:4 64x64, batch 2, %d epochs, %.1f s: stage-2 L2 %.5f (< 0.02), "
                               "mean CC %.4f (> 0.9), stage-1 L2 %.5f (stage-2 <= stage-1)",
                               full_cfg.epochs, full.seconds, full.fine_l2, full.mean_cc, full.coarse_l2)});
    }
    {
        const bool ok = full.mean_cc >= no_outline.mean_cc - 0.02 && full.mean_cc >= single.mean_cc - 0.02;
        results.push_back({7, "ablation direction", ok,
                           fmt("CC full %.4f, zeroed outline %.4f, single stage %.4f (full >= ablated - 0.02)",
                               full.mean_cc, no_outline.mean_cc, single.mean_cc)});
    }
    {
        // Logs are compared as files: byte equality of the %.17g rows.
        const bool logs_equal = !full.log.empty() && slurp(full_cfg.log_path) == slurp(work / "repeat.csv");
        const fs::path image = work / "predict_input.png";
        imageops::save_image(data::synth_webpage(42).image, image);
        std::string pngs[2];
        bool ran = true;
        for (int k = 0; k < 2; ++k) {
            const std::string tag = "predict" + std::to_string(k);
            ran = ran && run_cli({"predict", "--checkpoint", full.checkpoint.string(), "--image", image.string(),
                              "--out-coarse", (work / (tag + "_coarse.png")).string(), "--out-fine",
                              (work / (tag + "_fine.png")).string(), "--heatmap",
                              (work / (tag + "_heatmap.png")).string()}) == 0;
            pngs[k] = slurp(work / (tag + "_fine.png")) + slurp(work / (tag + "_coarse.png")) +
                      slurp(work / (tag + "_heatmap.png"));
        }
        const bool pngs_equal = ran && !pngs[0].empty() && pngs[0] == pngs[1];
        results.push_back({8, "determinism", logs_equal && pngs_equal,
                           fmt("two train runs: %zu log rows %s; two predict runs: PNGs %s", full.log.size(),
                               logs_equal ? "identical" : "DIFFER", pngs_equal ? "bit-identical" : "DIFFER")});
    }
    {
        const char* user_dir = std::getenv("TSGAN_FIWI_DIR");
        const fs::path root = user_dir ? fs::path(user_dir) : make_fiwi_like(work / "fiwi_layout");
        const fs::path report = work / "fiwi_report";
        fs::remove_all(report);
        std::string err;
        const int code = run_cli({"evaluate", "--checkpoint", full.checkpoint.string(), "--data", root.string(), "--report",
                              report.string()},
                             &err);
        bool ok = code == 0 && fs::exists(report / "scores.csv") && fs::exists(report / "summary.json");
        std::size_t rows = 0;
        std::string detail;
        if (ok) {
            std::ifstream csv(report / "scores.csv");
            std::string line;
            std::getline(csv, line);
            ok = line == "image_id,cc,nss";
            while (std::getline(csv, line)) rows += !line.empty();
            std::ifstream js(report / "summary.json");
            const auto summary = nlohmann::json::parse(js, nullptr, false);
            ok = ok && !summary.is_discarded() && summary.value("count", -1) == static_cast<int>(rows) && rows > 0;
            detail = fmt("%s: %zu images scored, summary %s", user_dir ? "user-supplied directory" : "generated FIWI-layout directory",
                         rows, summary.is_discarded() ? "unreadable" : summary.dump().c_str());
        } else {
            detail = fmt("evaluate exited %d: %s", code, err.c_str());
        }
        results.push_back({9, "FIWI pathway", ok, detail});
    }

    bool all = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << " (" << r.title << "): " << r.detail << '\n';
        all = all && r.pass;
    }
    std::cout << (all ? "all acceptance criteria passed" : "acceptance FAILED") << std::endl;
    return all ? 0 : 1;
}
