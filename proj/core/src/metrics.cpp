#include "tsgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "tsgan/error.hpp"

namespace tsgan::metrics {

namespace {

struct Moments {
    double mean = 0;
    double std = 0;
};

Moments moments(std::span<const double> v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - m) * (x - m);
    return {m, std::sqrt(var / static_cast<double>(v.size()))};
}

bool constant(std::span<const double> v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo == *hi;
}

void check_same_plane(const Image& a, const Image& b, const char* what) {
    if (a.numel() != b.numel() || a.shape().h != b.shape().h || a.shape().w != b.shape().w)
        throw ShapeError(std::string(what) + ": " + a.shape().str() + " vs " + b.shape().str());
    if (a.numel() == 0) throw ShapeError(std::string(what) + ": empty map");
}

}  // namespace

double cc(const Image& pred, const Image& truth) {
    check_same_plane(pred, truth, "cc");
    const auto p = pred.data(), t = truth.data();
    const Moments mp = moments(p), mt = moments(t);
    if (constant(p) || constant(t)) throw UndefinedMetricError("cc is undefined for a constant map");
    double cov = 0;
    for (std::size_t i = 0; i < p.size(); ++i) cov += (p[i] - mp.mean) * (t[i] - mt.mean);
    cov /= static_cast<double>(p.size());
    return cov / (mp.std * mt.std);
}

double nss(const Image& pred, const Image& fixations) {
    check_same_plane(pred, fixations, "nss");
    const auto p = pred.data(), f = fixations.data();
    const Moments mp = moments(p);
    double acc = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (f[i] == 0) continue;
        acc += p[i] - mp.mean;
        ++hits;
    }
    if (hits == 0) throw UndefinedMetricError("nss is undefined without fixations");
    if (constant(p)) throw UndefinedMetricError("nss is undefined for a constant prediction");
    return acc / static_cast<double>(hits) / mp.std;
}

MetricReport summarize(std::vector<ImageScore> scores) {
    MetricReport r;
    r.count = scores.size();
    std::vector<double> ccs, nsss;
    for (const auto& s : scores) {
        if (std::isnan(s.cc)) {
            ++r.excluded_cc;
        } else {
            ccs.push_back(s.cc);
        }
        if (std::isnan(s.nss)) {
            ++r.excluded_nss;
        } else {
            nsss.push_back(s.nss);
        }
    }
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    const Moments c = ccs.empty() ? Moments{nan, nan} : moments(ccs);
    const Moments n = nsss.empty() ? Moments{nan, nan} : moments(nsss);
    r.mean_cc = c.mean;
    r.std_cc = c.std;
    r.mean_nss = n.mean;
    r.std_nss = n.std;
    r.images = std::move(scores);
    return r;
}

nlohmann::json summary_json(const MetricReport& r) {
    auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    return {{"count", r.count},
            {"cc", {{"mean", num(r.mean_cc)}, {"std", num(r.std_cc)}, {"excluded", r.excluded_cc}}},
            {"nss", {{"mean", num(r.mean_nss)}, {"std", num(r.std_nss)}, {"excluded", r.excluded_nss}}},
            {"excluded_images", std::count_if(r.images.begin(), r.images.end(), [](const ImageScore& s) {
                 return std::isnan(s.cc) || std::isnan(s.nss);
             })}};
}

void write_report(const MetricReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "scores.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (dir / "scores.csv").string());
    csv << "image_id,cc,nss\n" << std::setprecision(17);
    for (const auto& s : report.images) {
        csv << s.id << ',';
        if (!std::isnan(s.cc)) csv << s.cc;
        csv << ',';
        if (!std::isnan(s.nss)) csv << s.nss;
        csv << '\n';
    }
    std::ofstream js(dir / "summary.json", std::ios::trunc);
    if (!js) throw IoError("cannot write " + (dir / "summary.json").string());
    js << summary_json(report).dump(2) << '\n';
}

ImageScore score_prediction(const data::WebpageSample& sample, const Image& prediction) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    const Image truth = imageops::crop(sample.saliency, sample.original_h, sample.original_w);
    ImageScore s{sample.id, nan, nan};
    try {
        s.cc = cc(prediction, truth);
    } catch (const UndefinedMetricError&) {
    }
    if (sample.fixation_mask) {
        try {
            s.nss = nss(prediction, imageops::crop(*sample.fixation_mask, sample.original_h, sample.original_w));
        } catch (const UndefinedMetricError&) {
        }
    }
    return s;
}

template <typename T>
MetricReport evaluate_dataset(TwoStageModel<T>& model, const std::vector<data::WebpageSample>& samples) {
    if (samples.empty()) throw ValueError("evaluate_dataset: no samples");
    std::vector<ImageScore> scores;
    scores.reserve(samples.size());
    for (const auto& sample : samples) {
        if (!sample.saliency.defined()) throw ValueError("sample '" + sample.id + "' has no ground truth");
        const auto out = predict(model, sample.image);
        const Image map = out.final_map().template cast<double>();
        scores.push_back(score_prediction(sample, imageops::crop(map, sample.original_h, sample.original_w)));
    }
    return summarize(std::move(scores));
}

template MetricReport evaluate_dataset(TwoStageModel<float>&, const std::vector<data::WebpageSample>&);
template MetricReport evaluate_dataset(TwoStageModel<double>&, const std::vector<data::WebpageSample>&);

}  // namespace tsgan::metrics
