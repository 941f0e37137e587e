#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "camconv/dataset.hpp"
#include "camconv/metrics.hpp"
#include "camconv/network.hpp"
#include "camconv/train.hpp"

namespace camconv::harness {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Variant { Plain, PlainFocalNorm, CamConvs, CamConvsFocalNorm };

std::string variant_name(Variant v);
// Accepts "plain", "plain+focalnorm", "camconvs", "camconvs+focalnorm".
Variant parse_variant(const std::string& s);
net::NetConfig apply_variant(net::NetConfig base, Variant v);

struct RunSpec {
  std::string name;
  Variant variant = Variant::Plain;
  std::vector<std::string> train;  // dataset ids
};

// better must beat worse on the test dataset in median sc_inv and rmse.
struct OrderingSpec {
  std::string name;
  std::string test;
  std::string better;  // run name
  std::string worse;   // run name
};

struct ExperimentSpec {
  std::string name;
  std::map<std::string, synth::DatasetSpec> datasets;
  std::vector<RunSpec> runs;
  std::vector<std::string> tests;
  std::vector<std::uint64_t> seeds;
  net::TrainConfig train;
  net::NetConfig net;
  std::vector<OrderingSpec> orderings;

  // Throws ConfigError: unknown ids, no seeds, train/test scene overlap, ...
  void validate() const;
};

// Dataset entries inherit a top-level "resolution_scale" unless they set one.
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);
nlohmann::json experiment_spec_to_json(const ExperimentSpec& spec);

struct Cell {
  std::string run;
  std::string test;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string note;
  // Mean over the test samples.
  MetricReport metrics;
};

struct Aggregate {
  std::string run;
  std::string test;
  std::size_t seeds = 0;  // non-diverged
  MetricReport mean;
  MetricReport median;
};

struct OrderingOutcome {
  OrderingSpec spec;
  bool pass = false;
  double better_sc_inv = 0, worse_sc_inv = 0;
  double better_rmse = 0, worse_rmse = 0;
};

struct RunReport {
  std::string name;
  std::vector<Cell> cells;
  std::vector<Aggregate> aggregates;
  std::vector<OrderingOutcome> orderings;

  bool all_orderings_pass() const;
  const Aggregate& aggregate(const std::string& run, const std::string& test) const;
};

// Progress lines go to log when non-null.
RunReport run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                         std::ostream* log = nullptr);

// Medians of both metrics must be strictly lower for better, except a run
// compared with itself, which passes vacuously. Throws std::invalid_argument if
// a needed aggregate is missing or every seed of it diverged.
std::vector<OrderingOutcome> assert_orderings(const std::vector<Aggregate>& aggregates,
                                              const std::vector<OrderingSpec>& orderings);

std::vector<Aggregate> aggregate_cells(const std::vector<Cell>& cells);

nlohmann::json report_to_json(const RunReport& report);
// RFC 4180, one row per cell.
std::string cells_csv(const RunReport& report);
// One row per (run, test, statistic).
std::string summary_csv(const RunReport& report);
std::string orderings_csv(const RunReport& report);

// Writes report.json, cells.csv, summary.csv and orderings.csv.
void write_report(const RunReport& report, const std::filesystem::path& dir);

// Mean metrics of a model over a dataset. Throws std::invalid_argument when a
// sample's sensor size is incompatible with the model.
MetricReport evaluate_model(const net::ModelParams& model, const std::vector<synth::Sample>& samples);

}  // namespace camconv::harness
