#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace spherecal {

struct PredictionRecord {
    std::vector<double> probabilities;
    std::size_t predicted = 0;   // argmax, ties broken to the lowest index
    std::size_t true_class = 0;
    double confidence = 0.0;     // max probability

    static PredictionRecord from_probabilities(std::vector<double> probs, std::size_t true_class);
};

struct CalibrationBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
};

struct CalibrationReport {
    int n_bins = 0;
    std::vector<CalibrationBin> bins;  // all bins, empties included with count 0
    double ece = 0.0;
    double sce = 0.0;
    double accuracy = 0.0;
};

// Equal-width binning over (0, 1]: confidence c lands in bin ceil(c * n_bins).
int bin_index(double confidence, int n_bins);

CalibrationReport compute_ece(const std::vector<PredictionRecord>& records, int n_bins = 15);
double compute_sce(const std::vector<PredictionRecord>& records, int n_bins = 15);

// Sum(size_i * metric_i) / Sum(size_i).
double weighted_average(const std::vector<std::pair<std::size_t, double>>& per_dataset);

struct ReliabilityRow {
    double bin_center = 0.0;
    double accuracy = 0.0;
    double mean_confidence = 0.0;
    std::size_t count = 0;
};

// One row per non-empty bin, for reliability diagrams and the companion
// confidence histogram.
std::vector<ReliabilityRow> reliability_data(const CalibrationReport& report);
std::string reliability_csv(const std::vector<ReliabilityRow>& rows);

// Prediction-log CSV: header "true_class,p_0,...,p_{K-1}", one record per row.
std::vector<PredictionRecord> parse_prediction_log(const std::string& csv);
std::vector<PredictionRecord> load_prediction_log(const std::filesystem::path& path);
std::string prediction_log_csv(const std::vector<PredictionRecord>& records);

nlohmann::json report_to_json(const CalibrationReport& report);

}  // namespace spherecal
