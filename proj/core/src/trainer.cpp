#include "tsgan/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tsgan/error.hpp"

namespace tsgan {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ValueError("invalid train config: " + msg); };
    if (epochs < 1) fail("epochs must be >= 1");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (!(lr_g > 0) || !(lr_d > 0)) fail("learning rates must be > 0");
    const bool adversarial = loss.lambda2 > 0 || loss.lambda4 > 0;
    if (n_critic < 0 || (adversarial && n_critic < 1)) fail("n_critic must be >= 1 while adversarial weights are set");
    if (!(clip_value > 0)) fail("clip_value must be > 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("Adam betas must be in [0,1)");
    if (dataset.empty()) fail("dataset is empty");
    if (synth_height < 64 || synth_width < 64 || synth_height % 16 != 0 || synth_width % 16 != 0)
        fail("synthetic page dims must be multiples of 16 and >= 64");
    if (train_count < 0) fail("train_count must be >= 0");
    if (keep_checkpoints < 0) fail("keep_checkpoints must be >= 0");
    loss.validate();
    network.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"lr_g", c.lr_g},
                       {"lr_d", c.lr_d},
                       {"n_critic", c.n_critic},
                       {"clip_value", c.clip_value},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"loss", c.loss},
                       {"network", c.network},
                       {"blur_sigma", c.blur_sigma},
                       {"seed", c.seed},
                       {"dataset", c.dataset},
                       {"synth_height", c.synth_height},
                       {"synth_width", c.synth_width},
                       {"train_count", c.train_count},
                       {"checkpoint_dir", c.checkpoint_dir},
                       {"log_path", c.log_path},
                       {"keep_checkpoints", c.keep_checkpoints},
                       {"stagewise", c.stagewise},
                       {"lr_decay", c.lr_decay}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (!j.is_object()) throw ValueError("train config must be a JSON object");
    static const std::set<std::string> known{"epochs",     "batch_size", "lr_g",         "lr_d",        "n_critic",
                                             "clip_value", "beta1",      "beta2",        "loss",        "network",
                                             "blur_sigma", "seed",       "dataset",      "synth_height", "synth_width",
                                             "train_count", "checkpoint_dir", "log_path", "keep_checkpoints", "stagewise", "lr_decay"};
    for (const auto& item : j.items())
        if (!known.count(item.key())) throw ValueError("unknown train config key '" + item.key() + "'");
    const TrainConfig d;
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.lr_g = j.value("lr_g", d.lr_g);
    c.lr_d = j.value("lr_d", d.lr_d);
    c.n_critic = j.value("n_critic", d.n_critic);
    c.clip_value = j.value("clip_value", d.clip_value);
    c.beta1 = j.value("beta1", d.beta1);
    c.beta2 = j.value("beta2", d.beta2);
    c.loss = j.contains("loss") ? j.at("loss").get<LossWeights>() : d.loss;
    c.network = j.contains("network") ? j.at("network").get<NetworkConfig>() : d.network;
    c.blur_sigma = j.value("blur_sigma", d.blur_sigma);
    c.seed = j.value("seed", d.seed);
    c.dataset = j.value("dataset", d.dataset);
    c.synth_height = j.value("synth_height", d.synth_height);
    c.synth_width = j.value("synth_width", d.synth_width);
    c.train_count = j.value("train_count", d.train_count);
    c.checkpoint_dir = j.value("checkpoint_dir", d.checkpoint_dir);
    c.log_path = j.value("log_path", d.log_path);
    c.keep_checkpoints = j.value("keep_checkpoints", d.keep_checkpoints);
    c.stagewise = j.value("stagewise", d.stagewise);
    c.lr_decay = j.value("lr_decay", d.lr_decay);
}

TrainConfig load_train_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    TrainConfig c = j.get<TrainConfig>();
    c.validate();
    return c;
}

std::vector<StepLog> read_log(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open training log " + path.string());
    std::string line;
    std::getline(is, line);
    if (line != kLogHeader) throw FormatError("unexpected log header in " + path.string());
    std::vector<StepLog> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() != 9) throw FormatError("malformed log row in " + path.string() + ": " + line);
        StepLog r;
        r.step = std::stoll(cells[0]);
        r.epoch = std::stoi(cells[1]);
        double* fields[] = {&r.report.l1, &r.report.l2_g, &r.report.l3,    &r.report.l4_g,
                            &r.report.tv, &r.report.total, &r.report.d_loss};
        for (std::size_t k = 0; k < 7; ++k) *fields[k] = std::stod(cells[k + 2]);
        rows.push_back(r);
    }
    return rows;
}

std::vector<data::WebpageSample> resolve_dataset(const TrainConfig& config) {
    const std::string prefix = "synthetic:";
    if (config.dataset.rfind(prefix, 0) == 0) {
        const std::string count = config.dataset.substr(prefix.size());
        std::size_t n = 0;
        try {
            std::size_t used = 0;
            n = std::stoul(count, &used);
            if (used != count.size()) throw std::invalid_argument(count);
        } catch (const std::exception&) {
            throw ValueError("bad synthetic dataset spec '" + config.dataset + "' (expected synthetic:N)");
        }
        if (n == 0) throw ValueError("synthetic dataset needs at least one page");
        return data::synth_dataset(n, config.seed, config.synth_height, config.synth_width);
    }
    return data::load_dataset(config.dataset, config.blur_sigma);
}

namespace {

std::string format_row(const StepLog& r) {
    char buf[512];
    const auto& p = r.report;
    std::snprintf(buf, sizeof buf, "%lld,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                  static_cast<long long>(r.step), r.epoch, p.l1, p.l2_g, p.l3, p.l4_g, p.tv, p.total, p.d_loss);
    return buf;
}

// Stacks per-sample (1,c,h,w) tensors of equal shape along the batch axis.
Tensor<float> stack(const std::vector<const Tensor<float>*>& parts) {
    const Shape s = parts.front()->shape();
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(s.numel()) * parts.size());
    for (const auto* p : parts) out.insert(out.end(), p->data().begin(), p->data().end());
    return Tensor<float>::from_data({static_cast<std::int64_t>(parts.size()), s.c, s.h, s.w}, std::move(out));
}

void copy_into(Tensor<float>& dst, const Checkpoint::Entry& src) {
    if (!(dst.shape() == src.shape))
        throw FormatError("checkpoint tensor '" + src.name + "' has shape " + src.shape.str() + ", model expects " +
                          dst.shape().str());
    std::copy(src.values.begin(), src.values.end(), dst.mutable_data().begin());
}

void restore_model(TwoStageModel<float>& model, const Checkpoint& ckpt) {
    for (auto& e : model.params.unique()) {
        if (!ckpt.contains(e.name)) throw FormatError("checkpoint lacks parameter '" + e.name + "'");
        Tensor<float> t = e.tensor;
        copy_into(t, ckpt.get(e.name));
    }
    for (const auto& [alias, target] : ckpt.aliases()) {
        if (!model.params.contains(alias) || model.params.canonical(alias) != target)
            throw FormatError("checkpoint alias '" + alias + "' -> '" + target + "' does not match the model");
    }
    for (auto& [name, state] : model.norm_state) {
        const std::string key = "bn." + name;
        if (!ckpt.contains(key + ".mean") || !ckpt.contains(key + ".var"))
            throw FormatError("checkpoint lacks batch-norm state '" + name + "'");
        const auto& m = ckpt.get(key + ".mean").values;
        const auto& v = ckpt.get(key + ".var").values;
        if (m.size() != state.mean.size() || v.size() != state.var.size())
            throw FormatError("checkpoint batch-norm state '" + name + "' has the wrong width");
        state.mean.assign(m.begin(), m.end());
        state.var.assign(v.begin(), v.end());
    }
}

void put_optimizer(Checkpoint& ckpt, const std::string& prefix, const Optimizer<float>& opt) {
    nlohmann::json steps = nlohmann::json::object();
    for (const auto& [name, slot] : opt.state()) {
        const auto n = static_cast<std::int64_t>(slot.m.size());
        ckpt.put(prefix + "." + name + ".m", {n, 1, 1, 1}, slot.m);
        ckpt.put(prefix + "." + name + ".v", {n, 1, 1, 1}, slot.v);
        steps[name] = slot.steps;
    }
    ckpt.metadata[prefix + "_steps"] = steps;
}

void restore_optimizer(const Checkpoint& ckpt, const std::string& prefix, Optimizer<float>& opt) {
    opt.state().clear();
    for (const auto& item : ckpt.metadata.at(prefix + "_steps").items()) {
        AdamSlot<float> slot;
        slot.m = ckpt.get(prefix + "." + item.key() + ".m").values;
        slot.v = ckpt.get(prefix + "." + item.key() + ".v").values;
        slot.steps = item.value().get<std::int64_t>();
        opt.state()[item.key()] = std::move(slot);
    }
}

double grad_norm(const Tensor<float>& t) {
    if (!t.has_grad()) return 0.0;
    double acc = 0;
    for (float g : t.grad()) acc += static_cast<double>(g) * static_cast<double>(g);
    return std::sqrt(acc);
}

}  // namespace

Trainer::Trainer(TrainConfig config) : Trainer(std::move(config), true) {}

Trainer::Trainer(TrainConfig config, bool fresh)
    : config_(std::move(config)),
      model_(build_model<float>((config_.validate(), config_.network), config_.seed)),
      opt_g_({.method = OptimizerMethod::adam, .lr = config_.lr_g, .beta1 = config_.beta1, .beta2 = config_.beta2}),
      opt_d_({.method = OptimizerMethod::adam, .lr = config_.lr_d, .beta1 = config_.beta1, .beta2 = config_.beta2}) {
    auto samples = resolve_dataset(config_);
    if (config_.train_count > 0) {
        const auto split = data::split_dataset(samples, static_cast<std::size_t>(config_.train_count), config_.seed);
        const std::set<std::string> train_ids(split.train.begin(), split.train.end());
        for (auto& s : samples) (train_ids.count(s.id) ? train_ : test_).push_back(std::move(s));
    } else {
        train_ = std::move(samples);
    }
    for (const auto& s : train_) outlines_.push_back(outline_levels<float>(config_.network, s.image));

    fs::create_directories(config_.checkpoint_dir);
    {
        std::ofstream manifest(fs::path(config_.checkpoint_dir) / "manifest.json", std::ios::trunc);
        nlohmann::json m = data::manifest(train_);
        m["test"] = data::manifest(test_);
        manifest << m.dump(2) << '\n';
    }
    if (fresh) {
        if (const auto parent = fs::path(config_.log_path).parent_path(); !parent.empty()) fs::create_directories(parent);
        std::ofstream log(config_.log_path, std::ios::trunc);
        if (!log) throw IoError("cannot write training log " + config_.log_path);
        log << kLogHeader << '\n';
    }
}

Trainer Trainer::resume(const fs::path& checkpoint, std::optional<int> epochs) {
    const Checkpoint ckpt = Checkpoint::load(checkpoint);
    if (!ckpt.metadata.contains("train_config"))
        throw FormatError(checkpoint.string() + " is not a training checkpoint");
    TrainConfig config = ckpt.metadata.at("train_config").get<TrainConfig>();
    if (epochs) config.epochs = *epochs;
    Trainer t(std::move(config), false);
    restore_model(t.model_, ckpt);
    restore_optimizer(ckpt, "adam_g", t.opt_g_);
    restore_optimizer(ckpt, "adam_d", t.opt_d_);
    t.epoch_ = ckpt.metadata.at("epoch").get<int>();
    t.step_ = ckpt.metadata.at("step").get<std::int64_t>();

    // Drop log rows written after the checkpoint so the CSV stays one row per step.
    std::vector<StepLog> kept;
    if (fs::exists(t.config_.log_path))
        for (const auto& r : read_log(t.config_.log_path))
            if (r.step < t.step_) kept.push_back(r);
    std::ofstream log(t.config_.log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write training log " + t.config_.log_path);
    log << kLogHeader << '\n';
    for (const auto& r : kept) log << format_row(r) << '\n';
    return t;
}

fs::path Trainer::epoch_checkpoint_path(int epoch) const {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%04d.ckpt", epoch);
    return fs::path(config_.checkpoint_dir) / name;
}

Checkpoint Trainer::to_checkpoint() const {
    Checkpoint ckpt;
    for (const auto& e : model_.params.entries()) {
        if (model_.params.is_alias(e.name)) {
            ckpt.put_alias(e.name, model_.params.canonical(e.name));
        } else {
            const auto d = e.tensor.data();
            ckpt.put(e.name, e.tensor.shape(), {d.begin(), d.end()});
        }
    }
    for (const auto& [name, state] : model_.norm_state) {
        const auto c = static_cast<std::int64_t>(state.mean.size());
        ckpt.put("bn." + name + ".mean", {c, 1, 1, 1}, state.mean);
        ckpt.put("bn." + name + ".var", {c, 1, 1, 1}, state.var);
    }
    put_optimizer(ckpt, "adam_g", opt_g_);
    put_optimizer(ckpt, "adam_d", opt_d_);
    ckpt.metadata["kind"] = "tsgan-train";
    ckpt.metadata["train_config"] = config_;
    ckpt.metadata["network"] = config_.network;
    ckpt.metadata["sigma"] = config_.network.sigma;
    ckpt.metadata["log_radius"] = config_.network.log_radius > 0 ? config_.network.log_radius
                                                                  : imageops::default_log_radius(config_.network.sigma);
    ckpt.metadata["epoch"] = epoch_;
    ckpt.metadata["step"] = step_;
    return ckpt;
}

void Trainer::append_log(const StepLog& row) {
    std::ofstream log(config_.log_path, std::ios::app);
    if (!log) throw IoError("cannot append to training log " + config_.log_path);
    log << format_row(row) << '\n';
}

void Trainer::abort_non_finite(const std::string& what, int epoch, const LossReport& partial) {
    const fs::path dump = fs::path(config_.checkpoint_dir) / ("nonfinite_step_" + std::to_string(step_) + ".json");
    nlohmann::json j{{"step", step_},
                     {"epoch", epoch},
                     {"reason", what},
                     {"terms",
                      {{"l1", partial.l1},
                       {"l2_g", partial.l2_g},
                       {"l3", partial.l3},
                       {"l4_g", partial.l4_g},
                       {"tv", partial.tv},
                       {"d_loss", partial.d_loss}}},
                     {"grad_norms", last_grad_norms_}};
    std::ofstream os(dump, std::ios::trunc);
    os << j.dump(2) << '\n';
    throw TrainingError("training aborted at step " + std::to_string(step_) + ": " + what + " (dump: " +
                            dump.string() + ")",
                        dump);
}

std::vector<Tensor<float>> Trainer::batch_outline(const std::vector<std::size_t>& indices,
                                                  const data::Batch& batch) const {
    const bool cached = std::all_of(indices.begin(), indices.end(), [&](std::size_t i) {
        return train_[i].image.shape().h == batch.images.shape().h && train_[i].image.shape().w == batch.images.shape().w;
    });
    if (!cached) return outline_levels<float>(config_.network, batch.images);
    std::vector<Tensor<float>> outline;
    for (std::size_t level = 0; level < outlines_.front().size(); ++level) {
        std::vector<const Tensor<float>*> parts;
        for (auto i : indices) parts.push_back(&outlines_[i][level]);
        outline.push_back(stack(parts));
    }
    return outline;
}

// Replaces the exponential running moments with the plain average of the
// batch statistics of the finished epoch's weights, so eval-mode predictions
// match what the last updates were fitted under.
void Trainer::refresh_norm_statistics(int epoch) {
    NoGradGuard no_grad;
    for (auto& [name, state] : model_.norm_state) state = RunningMoments<float>(state.mean.size());
    const BatchNormOptions saved = model_.norm_options;
    int k = 0;
    for (const auto& indices : data::batch_order(train_.size(), static_cast<std::size_t>(config_.batch_size),
                                                 config_.seed, static_cast<std::uint64_t>(epoch))) {
        const data::Batch batch = data::make_batch(train_, indices);
        model_.norm_options.momentum = 1.0 / ++k;
        generate(model_, batch.images.cast<float>(), batch_outline(indices, batch), NormMode::train);
    }
    model_.norm_options = saved;
}

StepLog Trainer::train_step(const std::vector<std::size_t>& indices, int epoch) {
    const data::Batch batch = data::make_batch(train_, indices);
    const Tensor<float> x = batch.images.cast<float>();
    const Tensor<float> s = batch.saliency.cast<float>();

    const std::vector<Tensor<float>> outline = batch_outline(indices, batch);
    if (config_.lr_decay) {
        const auto per_epoch = static_cast<std::int64_t>((train_.size() + config_.batch_size - 1) / config_.batch_size);
        const double left = 1.0 - static_cast<double>(step_) / static_cast<double>(per_epoch * config_.epochs);
        opt_g_.set_lr(config_.lr_g * std::max(left, 0.0));
        opt_d_.set_lr(config_.lr_d * std::max(left, 0.0));
    }

    const bool stage1_only = config_.stagewise && epoch < config_.epochs / 2;
    const bool two = config_.network.two_stage && !stage1_only;
    LossWeights w = config_.loss;
    if (!two) w.lambda3 = w.lambda4 = 0;
    const bool adversarial = (w.lambda2 > 0 || w.lambda4 > 0) && config_.n_critic > 0;
    const DiscMode dmode = w.gan_mode == GanMode::wgan_clip ? DiscMode::critic : DiscMode::probability;
    const double slope = config_.network.disc_leaky_slope;
    const auto disc_params = model_.params.unique_with_prefix("disc.");
    auto D = [&](const Tensor<float>& map) { return discriminator_forward(model_.params, map, dmode, slope); };

    Tensor<float> coarse = decoder_forward(model_, 1, encoder_forward(model_, 1, x), outline, NormMode::train);
    Tensor<float> fine;
    if (two) {
        fine = decoder_forward(model_, 2, encoder_forward(model_, 2, concat_channels<float>({x, coarse})), outline,
                               NormMode::train);
    }

    LossReport report;
    if (adversarial) {
        const Tensor<float> coarse_fake = coarse.detach();
        const Tensor<float> fine_fake = two ? fine.detach() : Tensor<float>{};
        for (int k = 0; k < config_.n_critic; ++k) {
            const Tensor<float> real = D(s);
            Tensor<float> d_loss = adversarial_losses(real, D(coarse_fake), w.gan_mode).d_loss;
            if (two) d_loss = add(d_loss, adversarial_losses(real, D(fine_fake), w.gan_mode).d_loss);
            report.d_loss = static_cast<double>(d_loss.item());
            if (!std::isfinite(report.d_loss)) abort_non_finite("non-finite discriminator loss", epoch, report);
            d_loss.backward();
            opt_d_.step(disc_params);
            if (w.gan_mode == GanMode::wgan_clip) clip_values<float>(disc_params, static_cast<float>(config_.clip_value));
        }
    }

    LossTerms<float> terms;
    terms.l1 = l2_pixel_loss(coarse, s);
    Tensor<float> real_scores;
    if (adversarial) {
        NoGradGuard no_grad;
        real_scores = D(s);
    }
    if (adversarial && w.lambda2 > 0) terms.l2_g = adversarial_losses(real_scores, D(coarse), w.gan_mode).g_loss;
    if (two) {
        terms.l3 = l2_pixel_loss(fine, s);
        if (adversarial && w.lambda4 > 0) terms.l4_g = adversarial_losses(real_scores, D(fine), w.gan_mode).g_loss;
    }
    terms.tv = tv_loss(two ? fine : coarse, w.alpha);

    WeightedLoss<float> total;
    try {
        total = total_loss(terms, w);
    } catch (const ValueError& e) {
        auto value = [](const Tensor<float>& t) { return t.defined() ? static_cast<double>(t.item()) : 0.0; };
        LossReport partial{value(terms.l1), value(terms.l2_g), value(terms.l3), value(terms.l4_g),
                           value(terms.tv), 0.0, report.d_loss};
        abort_non_finite(e.what(), epoch, partial);
    }
    const double d_loss = report.d_loss;
    report = total.report;
    report.d_loss = d_loss;
    total.total.backward();

    std::vector<NamedTensor<float>> gen;
    for (const auto& p : model_.params.unique()) {
        if (p.name.starts_with("disc.")) continue;
        if (!two && p.name.starts_with("stage2.")) continue;
        gen.push_back(p);
    }
    last_grad_norms_.clear();
    bool finite = true;
    for (const auto& p : gen) {
        const double n = grad_norm(p.tensor);
        last_grad_norms_[p.name] = n;
        finite = finite && std::isfinite(n);
    }
    if (!finite) abort_non_finite("non-finite generator gradient", epoch, report);
    opt_g_.step(gen);
    for (const auto& p : disc_params) {
        Tensor<float> t = p.tensor;
        t.zero_grad();
    }
    return {step_, epoch, report};
}

fs::path Trainer::run_epoch() {
    const int epoch = epoch_;
    for (const auto& indices : data::batch_order(train_.size(), static_cast<std::size_t>(config_.batch_size),
                                                 config_.seed, static_cast<std::uint64_t>(epoch))) {
        StepLog row = train_step(indices, epoch);
        append_log(row);
        log_.push_back(row);
        ++step_;
    }
    refresh_norm_statistics(epoch);
    ++epoch_;
    const fs::path path = epoch_checkpoint_path(epoch_);
    to_checkpoint().save(path);
    if (config_.keep_checkpoints > 0 && epoch_ > config_.keep_checkpoints) {
        std::error_code ignored;
        fs::remove(epoch_checkpoint_path(epoch_ - config_.keep_checkpoints), ignored);
    }
    return path;
}

fs::path Trainer::run() {
    while (epoch_ < config_.epochs) run_epoch();
    const fs::path final_path = fs::path(config_.checkpoint_dir) / "final.ckpt";
    to_checkpoint().save(final_path);
    return final_path;
}

fs::path train(const TrainConfig& config) { return Trainer(config).run(); }

TwoStageModel<float> load_model(const fs::path& checkpoint) {
    const Checkpoint ckpt = Checkpoint::load(checkpoint);
    if (!ckpt.metadata.contains("network")) throw FormatError(checkpoint.string() + " has no network config");
    TwoStageModel<float> model = build_model<float>(ckpt.metadata.at("network").get<NetworkConfig>(), 0);
    restore_model(model, ckpt);
    return model;
}

}  // namespace tsgan
