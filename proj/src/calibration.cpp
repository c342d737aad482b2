#include "spherecal/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "spherecal/errors.hpp"
#include "spherecal/io.hpp"

namespace spherecal {

namespace {

// Kahan-compensated accumulator so parallel/merged binning can match serial
// results to 1e-12.
struct CompensatedSum {
    double sum = 0.0;
    double c = 0.0;
    void add(double v) {
        const double y = v - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

void validate_record(const PredictionRecord& r, std::size_t idx, std::size_t expected_k) {
    if (r.probabilities.size() != expected_k)
        throw RaggedProbabilities("record " + std::to_string(idx) + " has " +
                                  std::to_string(r.probabilities.size()) +
                                  " probabilities, expected " + std::to_string(expected_k));
    double sum = 0.0;
    for (double p : r.probabilities) {
        if (!std::isfinite(p) || p < 0.0)
            throw DegenerateProbability("record " + std::to_string(idx) +
                                        " has a negative or non-finite probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw DegenerateProbability("record " + std::to_string(idx) +
                                    " probabilities do not sum to 1");
}

}  // namespace

PredictionRecord PredictionRecord::from_probabilities(std::vector<double> probs,
                                                      std::size_t true_class) {
    if (probs.empty()) throw DegenerateProbability("empty probability vector");
    PredictionRecord r;
    r.predicted = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
        if (probs[k] > probs[r.predicted]) r.predicted = k;  // strict: ties keep lowest
    r.confidence = probs[r.predicted];
    r.true_class = true_class;
    r.probabilities = std::move(probs);
    return r;
}

int bin_index(double confidence, int n_bins) {
    const int b = static_cast<int>(std::ceil(confidence * n_bins));
    return std::clamp(b, 1, n_bins);
}

CalibrationReport compute_ece(const std::vector<PredictionRecord>& records, int n_bins) {
    if (records.empty()) throw EmptyLog();
    if (n_bins < 1) throw Error("n_bins must be >= 1");
    const std::size_t k = records.front().probabilities.size();
    for (std::size_t i = 0; i < records.size(); ++i) validate_record(records[i], i, k);

    CalibrationReport rep;
    rep.n_bins = n_bins;
    rep.bins.resize(static_cast<std::size_t>(n_bins));
    std::vector<CompensatedSum> conf_sum(static_cast<std::size_t>(n_bins));
    std::vector<std::size_t> correct(static_cast<std::size_t>(n_bins), 0);
    for (int b = 0; b < n_bins; ++b) {
        rep.bins[b].lower = static_cast<double>(b) / n_bins;
        rep.bins[b].upper = static_cast<double>(b + 1) / n_bins;
    }

    std::size_t total_correct = 0;
    for (const auto& r : records) {
        const int b = bin_index(r.confidence, n_bins) - 1;
        rep.bins[b].count += 1;
        conf_sum[b].add(r.confidence);
        if (r.predicted == r.true_class) {
            correct[b] += 1;
            ++total_correct;
        }
    }

    const double m = static_cast<double>(records.size());
    double ece = 0.0;
    for (int b = 0; b < n_bins; ++b) {
        auto& bin = rep.bins[b];
        if (bin.count == 0) continue;
        bin.mean_confidence = conf_sum[b].sum / static_cast<double>(bin.count);
        bin.accuracy = static_cast<double>(correct[b]) / static_cast<double>(bin.count);
        ece += (static_cast<double>(bin.count) / m) * std::abs(bin.accuracy - bin.mean_confidence);
    }
    rep.ece = ece;
    rep.accuracy = static_cast<double>(total_correct) / m;
    rep.sce = compute_sce(records, n_bins);
    return rep;
}

double compute_sce(const std::vector<PredictionRecord>& records, int n_bins) {
    if (records.empty()) throw EmptyLog();
    if (n_bins < 1) throw Error("n_bins must be >= 1");
    const std::size_t k = records.front().probabilities.size();
    for (std::size_t i = 0; i < records.size(); ++i) validate_record(records[i], i, k);

    const double m = static_cast<double>(records.size());
    double sce = 0.0;
    for (std::size_t cls = 0; cls < k; ++cls) {
        std::vector<CompensatedSum> conf_sum(static_cast<std::size_t>(n_bins));
        std::vector<std::size_t> count(static_cast<std::size_t>(n_bins), 0);
        std::vector<std::size_t> correct(static_cast<std::size_t>(n_bins), 0);
        for (const auto& r : records) {
            const double p = r.probabilities[cls];
            const int b = bin_index(p, n_bins) - 1;
            count[b] += 1;
            conf_sum[b].add(p);
            if (r.true_class == cls) correct[b] += 1;
        }
        for (int b = 0; b < n_bins; ++b) {
            if (count[b] == 0) continue;
            const double conf = conf_sum[b].sum / static_cast<double>(count[b]);
            const double acc = static_cast<double>(correct[b]) / static_cast<double>(count[b]);
            sce += (static_cast<double>(count[b]) / m) * std::abs(acc - conf);
        }
    }
    return sce / static_cast<double>(k);
}

double weighted_average(const std::vector<std::pair<std::size_t, double>>& per_dataset) {
    if (per_dataset.empty()) throw EmptySet();
    double num = 0.0, den = 0.0;
    for (const auto& [size, metric] : per_dataset) {
        if (size == 0) throw Error("dataset sizes must be positive");
        num += static_cast<double>(size) * metric;
        den += static_cast<double>(size);
    }
    return num / den;
}

std::vector<ReliabilityRow> reliability_data(const CalibrationReport& report) {
    std::vector<ReliabilityRow> rows;
    for (const auto& bin : report.bins) {
        if (bin.count == 0) continue;
        rows.push_back({(bin.lower + bin.upper) / 2.0, bin.accuracy, bin.mean_confidence,
                        bin.count});
    }
    return rows;
}

std::string reliability_csv(const std::vector<ReliabilityRow>& rows) {
    std::string out = "bin_center,accuracy,mean_confidence,count\n";
    for (const auto& r : rows) {
        out += format_shortest(r.bin_center);
        out += ',';
        out += format_shortest(r.accuracy);
        out += ',';
        out += format_shortest(r.mean_confidence);
        out += ',';
        out += std::to_string(r.count);
        out += '\n';
    }
    return out;
}

std::vector<PredictionRecord> parse_prediction_log(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty prediction log", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "true_class")
        throw ParseError("expected header true_class,p_0,...", 1);
    for (std::size_t i = 1; i < header.size(); ++i)
        if (header[i] != "p_" + std::to_string(i - 1))
            throw ParseError("expected column p_" + std::to_string(i - 1) + ", got '" +
                                 header[i] + "'",
                             1);
    const std::size_t k = header.size() - 1;

    std::vector<PredictionRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != k + 1)
            throw ParseError("expected " + std::to_string(k + 1) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        std::size_t true_class = 0;
        {
            auto [p, ec] = std::from_chars(fields[0].data(),
                                           fields[0].data() + fields[0].size(), true_class);
            if (ec != std::errc() || p != fields[0].data() + fields[0].size())
                throw ParseError("bad class index '" + fields[0] + "'", line_no);
        }
        std::vector<double> probs(k);
        for (std::size_t i = 0; i < k; ++i) {
            auto [p, ec] = std::from_chars(fields[i + 1].data(),
                                           fields[i + 1].data() + fields[i + 1].size(), probs[i]);
            if (ec != std::errc() || p != fields[i + 1].data() + fields[i + 1].size())
                throw ParseError("bad probability '" + fields[i + 1] + "'", line_no);
        }
        if (true_class >= k) throw ParseError("class index out of range", line_no);
        records.push_back(PredictionRecord::from_probabilities(std::move(probs), true_class));
    }
    if (records.empty()) throw EmptyLog();
    return records;
}

std::vector<PredictionRecord> load_prediction_log(const std::filesystem::path& path) {
    return parse_prediction_log(read_file(path));
}

std::string prediction_log_csv(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw EmptyLog();
    const std::size_t k = records.front().probabilities.size();
    std::string out = "true_class";
    for (std::size_t i = 0; i < k; ++i) out += ",p_" + std::to_string(i);
    out += '\n';
    for (const auto& r : records) {
        out += std::to_string(r.true_class);
        for (double p : r.probabilities) {
            out += ',';
            out += format_shortest(p);
        }
        out += '\n';
    }
    return out;
}

nlohmann::json report_to_json(const CalibrationReport& report) {
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : report.bins) {
        bins.push_back({{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"mean_confidence", b.mean_confidence},
                        {"accuracy", b.accuracy}});
    }
    return {{"n_bins", report.n_bins}, {"bins", bins},      {"ece", report.ece},
            {"sce", report.sce},       {"accuracy", report.accuracy}};
}

}  // namespace spherecal
