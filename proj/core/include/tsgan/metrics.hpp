#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsgan/data.hpp"
#include "tsgan/networks.hpp"

namespace tsgan::metrics {

using imageops::Image;

/// Pearson correlation over all pixels (population moments). Throws
/// UndefinedMetricError when either map is constant.
double cc(const Image& pred, const Image& truth);

/// Mean z-score of `pred` at the nonzero pixels of `fixations`. Throws
/// UndefinedMetricError without fixations or for a constant prediction.
double nss(const Image& pred, const Image& fixations);

/// NaN marks a metric that was undefined for the image.
struct ImageScore {
    std::string id;
    double cc = 0;
    double nss = 0;
};

struct MetricReport {
    std::vector<ImageScore> images;
    double mean_cc = 0, std_cc = 0;
    double mean_nss = 0, std_nss = 0;
    std::size_t count = 0;
    std::size_t excluded_cc = 0;
    std::size_t excluded_nss = 0;
};

/// Means and population stds over the defined per-image values, in order.
MetricReport summarize(std::vector<ImageScore> scores);

nlohmann::json summary_json(const MetricReport& report);

/// Writes `scores.csv` (image_id,cc,nss) and `summary.json` into `dir`.
void write_report(const MetricReport& report, const std::filesystem::path& dir);

/// Scores one predicted map (already cropped to the sample's original dims)
/// against the sample's ground truth.
ImageScore score_prediction(const data::WebpageSample& sample, const Image& prediction);

/// Predicts every sample and scores the final map, cropped back to the
/// original image size.
template <typename T>
MetricReport evaluate_dataset(TwoStageModel<T>& model, const std::vector<data::WebpageSample>& samples);

}  // namespace tsgan::metrics
