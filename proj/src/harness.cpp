#include "camconv/harness.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace camconv::harness {

using nlohmann::json;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Plain: return "plain";
    case Variant::PlainFocalNorm: return "plain+focalnorm";
    case Variant::CamConvs: return "camconvs";
    case Variant::CamConvsFocalNorm: return "camconvs+focalnorm";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::Plain, Variant::PlainFocalNorm, Variant::CamConvs, Variant::CamConvsFocalNorm}) {
    if (variant_name(v) == s) return v;
  }
  throw ConfigError("unknown model variant '" + s + "'");
}

net::NetConfig apply_variant(net::NetConfig base, Variant v) {
  base.use_camconvs = v == Variant::CamConvs || v == Variant::CamConvsFocalNorm;
  base.use_focal_norm = v == Variant::PlainFocalNorm || v == Variant::CamConvsFocalNorm;
  return base;
}

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
  if (runs.empty()) throw ConfigError("experiment has no runs");
  if (tests.empty()) throw ConfigError("experiment has no test datasets");
  auto known = [&](const std::string& id) {
    if (!datasets.contains(id)) throw ConfigError("unknown dataset id '" + id + "'");
  };
  auto overlap = [](const synth::DatasetSpec& a, const synth::DatasetSpec& b) {
    return a.first_scene < b.first_scene + b.scene_count && b.first_scene < a.first_scene + a.scene_count;
  };
  std::set<std::string> names;
  for (const auto& r : runs) {
    if (!names.insert(r.name).second) throw ConfigError("duplicate run name '" + r.name + "'");
    if (r.train.empty()) throw ConfigError("run '" + r.name + "' has no training data");
    for (const auto& id : r.train) {
      known(id);
      for (const auto& t : tests) {
        known(t);
        if (overlap(datasets.at(id), datasets.at(t))) {
          throw ConfigError("train set '" + id + "' and test set '" + t + "' share scene seeds");
        }
      }
    }
  }
  for (const auto& o : orderings) {
    if (!names.contains(o.better) || !names.contains(o.worse)) throw ConfigError("ordering '" + o.name + "' names an unknown run");
    if (std::find(tests.begin(), tests.end(), o.test) == tests.end()) {
      throw ConfigError("ordering '" + o.name + "' names a dataset that is not a test set");
    }
  }
  try {
    train.validate();
    net.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentSpec experiment_spec_from_json(const json& j) {
  ExperimentSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    const double scale = j.value("resolution_scale", 1.0);
    for (const auto& [id, d] : j.at("datasets").items()) {
      json dj = d;
      if (!dj.contains("resolution_scale")) dj["resolution_scale"] = scale;
      if (!dj.contains("name")) dj["name"] = id;
      s.datasets[id] = synth::dataset_spec_from_json(dj);
    }
    for (const auto& r : j.at("runs")) {
      s.runs.push_back({r.at("name").get<std::string>(), parse_variant(r.at("variant").get<std::string>()),
                        r.at("train").get<std::vector<std::string>>()});
    }
    s.tests = j.at("tests").get<std::vector<std::string>>();
    s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    s.train = net::train_config_from_json(j.value("train", json::object()));
    s.net = net::net_config_from_json(j.value("net", json::object()));
    for (const auto& o : j.value("orderings", json::array())) {
      s.orderings.push_back({o.at("name").get<std::string>(), o.at("test").get<std::string>(),
                             o.at("better").get<std::string>(), o.at("worse").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed experiment spec: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  s.validate();
  return s;
}

json experiment_spec_to_json(const ExperimentSpec& s) {
  json datasets = json::object();
  for (const auto& [id, d] : s.datasets) datasets[id] = synth::dataset_spec_to_json(d);
  json runs = json::array();
  for (const auto& r : s.runs) runs.push_back({{"name", r.name}, {"variant", variant_name(r.variant)}, {"train", r.train}});
  json orderings = json::array();
  for (const auto& o : s.orderings) {
    orderings.push_back({{"name", o.name}, {"test", o.test}, {"better", o.better}, {"worse", o.worse}});
  }
  json train = net::train_config_to_json(s.train);
  train.erase("datasets");
  return json{{"name", s.name}, {"datasets", datasets}, {"runs", runs},           {"tests", s.tests},
              {"seeds", s.seeds}, {"train", train},       {"net", net::net_config_to_json(s.net)}, {"orderings", orderings}};
}

bool RunReport::all_orderings_pass() const {
  return std::all_of(orderings.begin(), orderings.end(), [](const auto& o) { return o.pass; });
}

const Aggregate& RunReport::aggregate(const std::string& run, const std::string& test) const {
  for (const auto& a : aggregates) {
    if (a.run == run && a.test == test) return a;
  }
  throw std::invalid_argument("no aggregate for run '" + run + "' on '" + test + "'");
}

MetricReport evaluate_model(const net::ModelParams& model, const std::vector<synth::Sample>& samples) {
  if (samples.empty()) throw std::invalid_argument("evaluate_model: no samples");
  std::vector<MetricReport> reports;
  for (const auto& s : samples) reports.push_back(evaluate(net::predict_depth(model, s), s.depth));
  return mean_report(reports);
}

std::vector<Aggregate> aggregate_cells(const std::vector<Cell>& cells) {
  std::vector<Aggregate> out;
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& c : cells) {
    const std::pair<std::string, std::string> k{c.run, c.test};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  for (const auto& [run, test] : keys) {
    std::vector<MetricReport> reports;
    for (const auto& c : cells) {
      if (c.run == run && c.test == test && !c.diverged) reports.push_back(c.metrics);
    }
    Aggregate a{run, test, reports.size(), {}, {}};
    if (!reports.empty()) {
      a.mean = mean_report(reports);
      a.median = median_report(reports);
    }
    out.push_back(a);
  }
  return out;
}

std::vector<OrderingOutcome> assert_orderings(const std::vector<Aggregate>& aggregates,
                                              const std::vector<OrderingSpec>& orderings) {
  auto find = [&](const std::string& run, const std::string& test) -> const Aggregate& {
    for (const auto& a : aggregates) {
      if (a.run == run && a.test == test) {
        if (a.seeds == 0) throw std::invalid_argument("every seed of '" + run + "' on '" + test + "' diverged");
        return a;
      }
    }
    throw std::invalid_argument("incomplete grid: no cells for '" + run + "' on '" + test + "'");
  };
  std::vector<OrderingOutcome> out;
  for (const auto& o : orderings) {
    const Aggregate& b = find(o.better, o.test);
    const Aggregate& w = find(o.worse, o.test);
    OrderingOutcome r{o, false, b.median.sc_inv, w.median.sc_inv, b.median.rmse, w.median.rmse};
    r.pass = o.better == o.worse || (r.better_sc_inv < r.worse_sc_inv && r.better_rmse < r.worse_rmse);
    out.push_back(r);
  }
  return out;
}

RunReport run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir, std::ostream* log) {
  spec.validate();
  std::map<std::string, std::vector<synth::Sample>> data;
  for (const auto& [id, ds] : spec.datasets) {
    const auto dir = out_dir / "datasets" / id;
    synth::build_dataset(ds, dir);
    data[id] = synth::load_dataset(dir).samples;
    if (log) *log << "dataset " << id << ": " << data[id].size() << " samples\n";
  }
  RunReport report{spec.name, {}, {}, {}};
  for (const auto& run : spec.runs) {
    std::vector<synth::Sample> train_samples;
    for (const auto& id : run.train) train_samples.insert(train_samples.end(), data[id].begin(), data[id].end());
    for (const std::uint64_t seed : spec.seeds) {
      net::NetConfig nc = apply_variant(spec.net, run.variant);
      nc.seed = seed;
      net::TrainConfig tc = spec.train;
      tc.seed = seed;
      std::optional<net::ModelParams> model;
      std::string note;
      try {
        model = net::train(tc, nc, train_samples).model;
      } catch (const net::DivergenceError& e) {
        note = e.what();
      }
      for (const auto& test : spec.tests) {
        Cell cell{run.name, test, seed, !model.has_value(), note, {}};
        if (model) cell.metrics = evaluate_model(*model, data[test]);
        report.cells.push_back(cell);
      }
      if (log) {
        *log << "run " << run.name << " seed " << seed << (model ? " done" : " diverged") << '\n';
        log->flush();
      }
    }
  }
  report.aggregates = aggregate_cells(report.cells);
  report.orderings = assert_orderings(report.aggregates, spec.orderings);
  return report;
}

json report_to_json(const RunReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    json j{{"run", c.run}, {"test", c.test}, {"seed", c.seed}, {"status", c.diverged ? "diverged" : "ok"}};
    if (c.diverged) {
      j["note"] = c.note;
    } else {
      j["metrics"] = metrics_to_json(c.metrics);
    }
    cells.push_back(j);
  }
  json aggregates = json::array();
  for (const auto& a : r.aggregates) {
    aggregates.push_back({{"run", a.run},
                          {"test", a.test},
                          {"seeds", a.seeds},
                          {"mean", metrics_to_json(a.mean)},
                          {"median", metrics_to_json(a.median)}});
  }
  json orderings = json::array();
  for (const auto& o : r.orderings) {
    orderings.push_back({{"name", o.spec.name},
                         {"test", o.spec.test},
                         {"better", o.spec.better},
                         {"worse", o.spec.worse},
                         {"pass", o.pass},
                         {"median_sc_inv", {o.better_sc_inv, o.worse_sc_inv}},
                         {"median_rmse", {o.better_rmse, o.worse_rmse}}});
  }
  return json{{"name", r.name}, {"cells", cells}, {"aggregates", aggregates}, {"orderings", orderings}};
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

void csv_row(std::ostringstream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << csv_field(fields[i]);
  }
  os << "\r\n";
}

std::vector<std::string> with_metrics(std::vector<std::string> head, const MetricReport& m, bool empty = false) {
  for (double v : metric_values(m)) head.push_back(empty ? "" : format_metric(v));
  return head;
}

}  // namespace

std::string cells_csv(const RunReport& r) {
  std::ostringstream os;
  std::vector<std::string> header = {"run", "test", "seed", "status"};
  header.insert(header.end(), metric_columns().begin(), metric_columns().end());
  csv_row(os, header);
  for (const auto& c : r.cells) {
    csv_row(os, with_metrics({c.run, c.test, std::to_string(c.seed), c.diverged ? "diverged" : "ok"}, c.metrics,
                             c.diverged));
  }
  return os.str();
}

std::string summary_csv(const RunReport& r) {
  std::ostringstream os;
  std::vector<std::string> header = {"run", "test", "statistic", "seeds"};
  header.insert(header.end(), metric_columns().begin(), metric_columns().end());
  csv_row(os, header);
  for (const auto& a : r.aggregates) {
    const bool empty = a.seeds == 0;
    csv_row(os, with_metrics({a.run, a.test, "median", std::to_string(a.seeds)}, a.median, empty));
    csv_row(os, with_metrics({a.run, a.test, "mean", std::to_string(a.seeds)}, a.mean, empty));
  }
  return os.str();
}

std::string orderings_csv(const RunReport& r) {
  std::ostringstream os;
  csv_row(os, {"ordering", "test", "better", "worse", "better_sc_inv", "worse_sc_inv", "better_rmse", "worse_rmse",
               "result"});
  for (const auto& o : r.orderings) {
    csv_row(os, {o.spec.name, o.spec.test, o.spec.better, o.spec.worse, format_metric(o.better_sc_inv),
                 format_metric(o.worse_sc_inv), format_metric(o.better_rmse), format_metric(o.worse_rmse),
                 o.pass ? "pass" : "fail"});
  }
  return os.str();
}

void write_report(const RunReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream os(dir / name, std::ios::binary);
    os << text;
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  };
  write("report.json", report_to_json(r).dump(2) + "\n");
  write("cells.csv", cells_csv(r));
  write("summary.csv", summary_csv(r));
  write("orderings.csv", orderings_csv(r));
}

}  // namespace camconv::harness
