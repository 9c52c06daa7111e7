#include "uesa/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace uesa {

Tensor binarize(const Tensor& prob, double cutoff) {
    std::vector<double> mask(prob.numel());
    const auto p = prob.data();
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = p[i] >= cutoff ? 1.0 : 0.0;
    return Tensor(prob.shape(), std::move(mask));
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

ConfusionCounts confusion(const Tensor& pred, const Tensor& gt) {
    if (pred.shape() != gt.shape()) {
        throw std::invalid_argument("confusion: shape mismatch " + shape_to_string(pred.shape()) + " vs " +
                                    shape_to_string(gt.shape()));
    }
    ConfusionCounts c;
    const auto p = pred.data();
    const auto g = gt.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool pv = p[i] == 1.0;
        const bool gv = g[i] == 1.0;
        if ((!pv && p[i] != 0.0) || (!gv && g[i] != 0.0)) {
            throw std::invalid_argument("confusion: masks must be binary (element " + std::to_string(i) + ")");
        }
        if (pv && gv) ++c.tp;
        else if (pv) ++c.fp;
        else if (gv) ++c.fn;
        else ++c.tn;
    }
    return c;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double dsc(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }
double iou(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp + c.fn); }
double sen(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
double spec(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp); }
double acc(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }

MetricRow metric_row(std::string id, const ConfusionCounts& c) {
    return {std::move(id), {dsc(c), iou(c), sen(c), spec(c), acc(c)}};
}

const MetricSummary& MetricReport::of(const std::string& metric) const {
    for (std::size_t k = 0; k < kMetricCount; ++k)
        if (metric == kMetricNames[k]) return summary[k];
    throw std::invalid_argument("unknown metric '" + metric + "'");
}

MetricReport aggregate(std::vector<MetricRow> rows) {
    if (rows.empty()) throw std::invalid_argument("aggregate: no rows");
    MetricReport report;
    const double n = static_cast<double>(rows.size());
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        double m = 0.0;
        for (const auto& r : rows) m += r.values[k];
        m /= n;
        double v = 0.0;
        for (const auto& r : rows) v += (r.values[k] - m) * (r.values[k] - m);
        report.summary[k] = {m, std::sqrt(v / n)};
    }
    report.rows = std::move(rows);
    return report;
}

MetricReport aggregate_pooled(std::vector<MetricRow> rows, const std::vector<ConfusionCounts>& counts) {
    if (rows.empty() || counts.size() != rows.size()) {
        throw std::invalid_argument("aggregate_pooled: need one count tuple per row");
    }
    ConfusionCounts total;
    for (const auto& c : counts) total += c;
    const auto pooled = metric_row("", total);
    MetricReport report;
    for (std::size_t k = 0; k < kMetricCount; ++k) report.summary[k] = {pooled.values[k], 0.0};
    report.rows = std::move(rows);
    return report;
}

std::string format_summary(const MetricSummary& s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f±%.4f", s.mean, s.stddev);
    return buf;
}

std::string report_csv(const MetricReport& report) {
    std::ostringstream os;
    os << "image";
    for (const char* name : kMetricNames) os << ',' << name;
    os << '\n';
    char buf[32];
    for (const auto& row : report.rows) {
        os << row.id;
        for (double v : row.values) {
            std::snprintf(buf, sizeof buf, "%.4f", v);
            os << ',' << buf;
        }
        os << '\n';
    }
    os << "AGGREGATE";
    for (const auto& s : report.summary) os << ',' << format_summary(s);
    os << '\n';
    return os.str();
}

}  // namespace uesa
