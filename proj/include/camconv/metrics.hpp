#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "camconv/depth_map.hpp"

namespace camconv {

// Standard single-view depth error metrics on metric depth. Errors are
// measured against the ground truth d_gt; delta_k is the fraction of pixels
// with max(d/d_gt, d_gt/d) < 1.25^k.
struct MetricReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;      // m
  double rmse_inv = 0.0;  // 1/m
  double l1_inv = 0.0;    // 1/m
  double sc_inv = 0.0;    // log m
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t n_valid = 0;
};

// Metrics over pixels valid in both maps. Throws std::invalid_argument on shape
// mismatch or an empty intersection.
MetricReport evaluate(const DepthMap& pred, const DepthMap& gt);

// Elementwise mean / median of each metric field; n_valid is summed.
MetricReport mean_report(const std::vector<MetricReport>& reports);
MetricReport median_report(const std::vector<MetricReport>& reports);

nlohmann::json metrics_to_json(const MetricReport& m);
MetricReport metrics_from_json(const nlohmann::json& j);

// Column names in CSV order.
const std::vector<std::string>& metric_columns();
std::vector<double> metric_values(const MetricReport& m);
// Shortest round-trippable decimal text for a metric value.
std::string format_metric(double v);

}  // namespace camconv
