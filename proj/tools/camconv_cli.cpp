#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "camconv/camera.hpp"
#include "camconv/dataset.hpp"
#include "camconv/gradcheck.hpp"
#include "camconv/harness.hpp"
#include "camconv/image_io.hpp"
#include "camconv/maps.hpp"
#include "camconv/train.hpp"

namespace {

using nlohmann::json;
using namespace camconv;

enum Exit { kOk = 0, kOrderingFailure = 1, kConfigError = 2, kRuntimeError = 3 };

struct ConfigFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigFailure("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigFailure(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path);
}

int cmd_synth(const std::string& spec_path, const std::string& out) {
  synth::DatasetSpec spec;
  try {
    spec = synth::dataset_spec_from_json(read_json(spec_path));
  } catch (const std::invalid_argument& e) {
    throw ConfigFailure(e.what());
  }
  synth::build_dataset(spec, out);
  std::cout << "wrote dataset " << out << '\n';
  return kOk;
}

int cmd_maps(const std::string& cam_path, const std::string& size, const std::string& out) {
  CameraIntrinsics cam;
  std::size_t h = 0, w = 0;
  try {
    cam = intrinsics_from_json(read_json(cam_path)).cam;
    const auto x = size.find('x');
    if (x == std::string::npos) throw std::invalid_argument("size must be HxW");
    h = std::stoul(size.substr(0, x));
    w = std::stoul(size.substr(x + 1));
    if (h == 0 || w == 0) throw std::invalid_argument("size must be positive");
  } catch (const std::logic_error& e) {
    throw ConfigFailure(e.what());
  }
  const ChannelStack stack = make_stack(cam, h, w);
  write_pfm_planes(out, stack.channels.cast<float>());
  std::cout << "wrote " << h << "x" << w << "x" << kNumMapChannels << " maps to " << out << '\n';
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& out) {
  const json j = read_json(config_path);
  net::TrainConfig tc;
  net::NetConfig nc;
  try {
    tc = net::train_config_from_json(j);
    nc = net::net_config_from_json(j.value("net", json::object()));
  } catch (const std::invalid_argument& e) {
    throw ConfigFailure(e.what());
  }
  const auto result = net::train(tc, nc);
  net::save_checkpoint(result.model, out);
  std::cout << "loss " << result.loss_curve.front() << " -> " << result.loss_curve.back() << " over "
            << result.loss_curve.size() << " steps\n";
  return kOk;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& report) {
  const net::ModelParams model = net::load_checkpoint(ckpt);
  const synth::Dataset ds = synth::load_dataset(data);
  MetricReport m;
  try {
    m = harness::evaluate_model(model, ds.samples);
  } catch (const std::invalid_argument& e) {
    throw ConfigFailure(std::string("checkpoint does not fit the data: ") + e.what());
  }
  write_text(report, metrics_to_json(m).dump(2) + "\n");
  std::cout << "sc_inv " << format_metric(m.sc_inv) << " rmse " << format_metric(m.rmse) << '\n';
  return kOk;
}

int cmd_gradcheck(bool full) {
  bool ok = true;
  for (const auto& e : run_gradient_suite(full)) {
    std::printf("%-34s %s  max_rel=%.3e checked=%zu skipped=%zu\n", e.name.c_str(), e.pass ? "PASS" : "FAIL",
                e.result.max_rel_error, e.result.checked, e.result.skipped_kinks);
    ok = ok && e.pass;
  }
  return ok ? kOk : kRuntimeError;
}

int cmd_experiment(const std::string& spec_path, const std::string& out) {
  harness::ExperimentSpec spec;
  try {
    spec = harness::experiment_spec_from_json(read_json(spec_path));
  } catch (const harness::ConfigError& e) {
    throw ConfigFailure(e.what());
  }
  const auto report = harness::run_experiment(spec, out, &std::cerr);
  harness::write_report(report, out);
  for (const auto& o : report.orderings) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << o.spec.name << " sc_inv " << format_metric(o.better_sc_inv) << " vs "
              << format_metric(o.worse_sc_inv) << ", rmse " << format_metric(o.better_rmse) << " vs "
              << format_metric(o.worse_rmse) << '\n';
  }
  return report.all_orderings_pass() ? kOk : kOrderingFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"camera-conditioned depth prediction toolkit"};
  app.require_subcommand(1);
  std::string spec, out, cam, size, config, ckpt, data, report;
  bool full = false;

  auto* synth_cmd = app.add_subcommand("synth", "render a synthetic dataset");
  synth_cmd->add_option("--spec", spec, "dataset spec JSON")->required();
  synth_cmd->add_option("--out", out, "output directory")->required();

  auto* maps_cmd = app.add_subcommand("maps", "write the six camera channels as PFM");
  maps_cmd->add_option("--cam", cam, "intrinsics JSON")->required();
  maps_cmd->add_option("--size", size, "target resolution HxW")->required();
  maps_cmd->add_option("--out", out, "output PFM")->required();

  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", config, "train config JSON")->required();
  train_cmd->add_option("--out", out, "checkpoint path")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--ckpt", ckpt, "checkpoint")->required();
  eval_cmd->add_option("--data", data, "dataset directory")->required();
  eval_cmd->add_option("--report", report, "metrics JSON")->required();

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  grad_cmd->add_flag("--full", full, "check every element of the network parameters");

  auto* exp_cmd = app.add_subcommand("experiment", "run an experiment and check its orderings");
  exp_cmd->add_option("--spec", spec, "experiment spec JSON")->required();
  exp_cmd->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*synth_cmd) return cmd_synth(spec, out);
    if (*maps_cmd) return cmd_maps(cam, size, out);
    if (*train_cmd) return cmd_train(config, out);
    if (*eval_cmd) return cmd_eval(ckpt, data, report);
    if (*grad_cmd) return cmd_gradcheck(full);
    if (*exp_cmd) return cmd_experiment(spec, out);
  } catch (const ConfigFailure& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kConfigError;
}
