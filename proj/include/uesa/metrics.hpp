#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "uesa/tensor.hpp"

namespace uesa {

/// mask[e] = 1 iff prob[e] >= cutoff.
Tensor binarize(const Tensor& prob, double cutoff = 0.5);

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o);
};

/// Throws std::invalid_argument for shape mismatch or values other than 0 and 1.
ConfusionCounts confusion(const Tensor& pred, const Tensor& gt);

// A zero denominator means the counted set is empty on both sides, which scores 1.
double dsc(const ConfusionCounts& c);
double iou(const ConfusionCounts& c);
double sen(const ConfusionCounts& c);
double spec(const ConfusionCounts& c);
double acc(const ConfusionCounts& c);

inline constexpr std::size_t kMetricCount = 5;
inline constexpr std::array<const char*, kMetricCount> kMetricNames = {"dsc", "iou", "sen", "spec", "acc"};

struct MetricRow {
    std::string id;
    std::array<double, kMetricCount> values{};  // dsc, iou, sen, spec, acc
};

MetricRow metric_row(std::string id, const ConfusionCounts& c);

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;  // population
};

enum class Aggregation { per_image, pooled_pixels };

struct MetricReport {
    std::vector<MetricRow> rows;
    std::array<MetricSummary, kMetricCount> summary{};

    const MetricSummary& of(const std::string& metric) const;
};

/// Per-metric mean and population standard deviation over rows. Throws on empty input.
MetricReport aggregate(std::vector<MetricRow> rows);

/// Pools every image's counts and evaluates each metric once; stddev is 0.
MetricReport aggregate_pooled(std::vector<MetricRow> rows, const std::vector<ConfusionCounts>& counts);

/// "m±s" with four decimals.
std::string format_summary(const MetricSummary& s);

/// Header `image,dsc,iou,sen,spec,acc`, one row per image, then `AGGREGATE,m±s,...`.
std::string report_csv(const MetricReport& report);

}  // namespace uesa
