#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>

#include "tsgan/data.hpp"
#include "tsgan/error.hpp"
#include "tsgan/image_io.hpp"
#include "tsgan/metrics.hpp"
#include "tsgan/trainer.hpp"

namespace tsgan::cli {

namespace fs = std::filesystem;
using imageops::Image;

namespace {

struct TrainArgs {
    std::string config;
    std::string resume;
    int epochs = 0;
};

struct PredictArgs {
    std::string checkpoint, image, out_coarse, out_fine, heatmap;
};

struct EvaluateArgs {
    std::string checkpoint, data, report;
    double blur_sigma = 0.0;
};

struct OutlineArgs {
    std::string image, out;
    double sigma = 2.0;
    int radius = 0;
};

struct SynthArgs {
    int count = 4;
    std::string out;
    std::uint64_t seed = 1;
    int height = 64, width = 64;
};

int do_train(const TrainArgs& a, std::ostream& out) {
    std::optional<int> epochs;
    if (a.epochs > 0) epochs = a.epochs;
    if (!a.resume.empty()) {
        Trainer t = Trainer::resume(a.resume, epochs);
        out << "resuming at epoch " << t.epochs_done() << " of " << t.config().epochs << "\n";
        out << "final checkpoint: " << t.run().string() << "\n";
        return kSuccess;
    }
    if (a.config.empty()) throw ValueError("train needs --config or --resume");
    TrainConfig config = load_train_config(a.config);
    if (epochs) config.epochs = *epochs;
    Trainer t(config);
    out << "training on " << t.train_samples().size() << " image(s) for " << config.epochs << " epoch(s)\n";
    out << "final checkpoint: " << t.run().string() << "\n";
    return kSuccess;
}

int do_predict(const PredictArgs& a, std::ostream& out) {
    auto model = load_model(a.checkpoint);
    const Image image = imageops::load_image(a.image);
    const std::int64_t h = image.shape().h, w = image.shape().w;
    const Image padded = imageops::pad_to_multiple(image, kDownsampleFactor, imageops::PadMode::reflect);
    const auto maps = predict(model, padded);
    const Image coarse = imageops::crop(maps.coarse.cast<double>(), h, w);
    const Image fine = imageops::crop(maps.final_map().cast<double>(), h, w);
    imageops::save_image(coarse, a.out_coarse);
    imageops::save_image(fine, a.out_fine);
    imageops::save_heatmap(fine, image, a.heatmap);
    out << "wrote " << a.out_coarse << ", " << a.out_fine << ", " << a.heatmap << "\n";
    return kSuccess;
}

int do_evaluate(const EvaluateArgs& a, std::ostream& out) {
    auto model = load_model(a.checkpoint);
    const auto samples = data::load_dataset(a.data, a.blur_sigma);
    const auto report = metrics::evaluate_dataset(model, samples);
    metrics::write_report(report, a.report);
    {
        std::ofstream manifest(fs::path(a.report) / "manifest.json", std::ios::trunc);
        manifest << data::manifest(samples).dump(2) << '\n';
    }
    out << "images " << report.count << "  CC " << report.mean_cc << "  NSS " << report.mean_nss << "\n";
    out << "report written to " << a.report << "\n";
    return kSuccess;
}

int do_outline(const OutlineArgs& a, std::ostream& out) {
    const Image image = imageops::load_image(a.image);
    imageops::save_image(imageops::extract_outline(image, a.sigma, a.radius), a.out);
    out << "wrote " << a.out << "\n";
    return kSuccess;
}

int do_synth(const SynthArgs& a, std::ostream& out) {
    if (a.count < 1) throw ValueError("--count must be >= 1");
    const auto samples = data::synth_dataset(static_cast<std::size_t>(a.count), a.seed, a.height, a.width);
    data::write_dataset(samples, a.out);
    out << "wrote " << samples.size() << " synthetic page(s) to " << a.out << "\n";
    return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Two-stage webpage saliency prediction", args.empty() ? "tsgan" : args[0]};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train from a JSON config, or resume from a checkpoint");
    train->add_option("--config", train_args.config, "Training config (JSON)")->check(CLI::ExistingFile);
    train->add_option("--resume", train_args.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
    train->add_option("--epochs", train_args.epochs, "Override the epoch budget")->check(CLI::PositiveNumber);

    PredictArgs predict_args;
    auto* pred = app.add_subcommand("predict", "Predict coarse and fine saliency maps for one image");
    pred->add_option("--checkpoint", predict_args.checkpoint)->required()->check(CLI::ExistingFile);
    pred->add_option("--image", predict_args.image)->required()->check(CLI::ExistingFile);
    pred->add_option("--out-coarse", predict_args.out_coarse)->required();
    pred->add_option("--out-fine", predict_args.out_fine)->required();
    pred->add_option("--heatmap", predict_args.heatmap)->required();

    EvaluateArgs eval_args;
    auto* eval = app.add_subcommand("evaluate", "Score a checkpoint on a dataset directory (CC, NSS)");
    eval->add_option("--checkpoint", eval_args.checkpoint)->required()->check(CLI::ExistingFile);
    eval->add_option("--data", eval_args.data)->required()->check(CLI::ExistingDirectory);
    eval->add_option("--report", eval_args.report, "Output directory for scores.csv and summary.json")->required();
    eval->add_option("--blur-sigma", eval_args.blur_sigma, "Fixation blur in pixels (default: width-scaled)");

    OutlineArgs outline_args;
    auto* outline = app.add_subcommand("outline", "Write the LoG outline map of an image");
    outline->add_option("--image", outline_args.image)->required()->check(CLI::ExistingFile);
    outline->add_option("--sigma", outline_args.sigma)->check(CLI::PositiveNumber);
    outline->add_option("--radius", outline_args.radius, "Kernel radius (default ceil(3 sigma))")
        ->check(CLI::NonNegativeNumber);
    outline->add_option("--out", outline_args.out)->required();

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic webpage dataset directory");
    synth->add_option("--count", synth_args.count)->required()->check(CLI::PositiveNumber);
    synth->add_option("--out", synth_args.out)->required();
    synth->add_option("--seed", synth_args.seed);
    synth->add_option("--height", synth_args.height);
    synth->add_option("--width", synth_args.width);

    std::vector<std::string> argv(args.rbegin(), args.rend());
    if (!argv.empty()) argv.pop_back();  // program name
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto* active = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << active->help();
        return kUsageError;
    }

    try {
        if (*train) return do_train(train_args, out);
        if (*pred) return do_predict(predict_args, out);
        if (*eval) return do_evaluate(eval_args, out);
        if (*outline) return do_outline(outline_args, out);
        if (*synth) return do_synth(synth_args, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}

}  // namespace tsgan::cli
