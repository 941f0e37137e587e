#include "camconv/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace camconv {

MetricReport evaluate(const DepthMap& pred, const DepthMap& gt) {
  require_shape(pred.values.same_shape(gt.values),
                "evaluate " + shape_string(pred.values.shape()) + " vs " + shape_string(gt.values.shape()));
  double abs_rel = 0, sq_rel = 0, sq = 0, sq_inv = 0, l1_inv = 0, z = 0, z2 = 0;
  std::size_t n = 0, d1 = 0, d2 = 0, d3 = 0;
  for (std::size_t p = 0; p < gt.values.size(); ++p) {
    if (!pred.mask.bits[p] || !gt.mask.bits[p]) continue;
    const double d = pred.values[p], g = gt.values[p];
    const double e = d - g;
    abs_rel += std::abs(e) / g;
    sq_rel += e * e / g;
    sq += e * e;
    const double ei = 1.0 / d - 1.0 / g;
    sq_inv += ei * ei;
    l1_inv += std::abs(ei);
    const double lz = std::log(d) - std::log(g);
    z += lz;
    z2 += lz * lz;
    const double ratio = std::max(d / g, g / d);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("evaluate: no pixel is valid in both maps");
  const double nn = static_cast<double>(n);
  MetricReport m;
  m.abs_rel = abs_rel / nn;
  m.sq_rel = sq_rel / nn;
  m.rmse = std::sqrt(sq / nn);
  m.rmse_inv = std::sqrt(sq_inv / nn);
  m.l1_inv = l1_inv / nn;
  const double mean_z = z / nn;
  m.sc_inv = std::sqrt(std::max(0.0, z2 / nn - mean_z * mean_z));
  m.delta1 = static_cast<double>(d1) / nn;
  m.delta2 = static_cast<double>(d2) / nn;
  m.delta3 = static_cast<double>(d3) / nn;
  m.n_valid = n;
  return m;
}

namespace {

MetricReport from_values(const std::vector<double>& v, std::size_t n_valid) {
  MetricReport m;
  m.abs_rel = v[0];
  m.sq_rel = v[1];
  m.rmse = v[2];
  m.rmse_inv = v[3];
  m.l1_inv = v[4];
  m.sc_inv = v[5];
  m.delta1 = v[6];
  m.delta2 = v[7];
  m.delta3 = v[8];
  m.n_valid = n_valid;
  return m;
}

template <typename Reduce>
MetricReport reduce(const std::vector<MetricReport>& reports, Reduce fn) {
  if (reports.empty()) throw std::invalid_argument("cannot aggregate an empty report list");
  const std::size_t k = metric_columns().size();
  std::vector<double> out(k);
  std::size_t n_valid = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> col;
    for (const auto& r : reports) col.push_back(metric_values(r)[c]);
    out[c] = fn(col);
  }
  for (const auto& r : reports) n_valid += r.n_valid;
  return from_values(out, n_valid);
}

}  // namespace

MetricReport mean_report(const std::vector<MetricReport>& reports) {
  return reduce(reports, [](std::vector<double> col) {
    double s = 0;
    for (double v : col) s += v;
    return s / static_cast<double>(col.size());
  });
}

MetricReport median_report(const std::vector<MetricReport>& reports) {
  return reduce(reports, [](std::vector<double> col) {
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    return n % 2 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  });
}

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {"abs_rel", "sq_rel", "rmse",   "rmse_inv", "l1_inv",
                                                "sc_inv",  "delta1", "delta2", "delta3"};
  return cols;
}

std::vector<double> metric_values(const MetricReport& m) {
  return {m.abs_rel, m.sq_rel, m.rmse, m.rmse_inv, m.l1_inv, m.sc_inv, m.delta1, m.delta2, m.delta3};
}

nlohmann::json metrics_to_json(const MetricReport& m) {
  nlohmann::json j;
  const auto vals = metric_values(m);
  for (std::size_t c = 0; c < vals.size(); ++c) j[metric_columns()[c]] = vals[c];
  j["n_valid"] = m.n_valid;
  return j;
}

MetricReport metrics_from_json(const nlohmann::json& j) {
  std::vector<double> v;
  for (const auto& c : metric_columns()) v.push_back(j.at(c).get<double>());
  return from_values(v, j.at("n_valid").get<std::size_t>());
}

std::string format_metric(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace camconv
