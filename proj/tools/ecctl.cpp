// SPDX-License-Identifier: Apache-2.0
// ecctl: command-line driver for the edge-cloud pipeline.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <edgecloud/arch/model_spec.hpp>
#include <edgecloud/bytes.hpp>
#include <edgecloud/error.hpp>
#include <edgecloud/gate/gate.hpp>
#include <edgecloud/io/config.hpp>
#include <edgecloud/io/data.hpp>
#include <edgecloud/io/pipeline.hpp>
#include <edgecloud/nn/serialize.hpp>
#include <edgecloud/nn/train.hpp>
#include <edgecloud/rl/reinforce.hpp>
#include <edgecloud/runtime/cloud.hpp>
#include <edgecloud/runtime/edge.hpp>

using namespace edgecloud;

namespace {

void write_text(const std::string &path, const std::string &text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

nn::Shape parse_dims(const std::string &text) {
  nn::Shape dims;
  std::istringstream in(text);
  for (std::string part; std::getline(in, part, 'x');) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(part, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used != part.size() || v == 0)
      fail(ErrorKind::Config, "bad dims \"" + text + "\" (expected e.g. 1x8x8)");
    dims.push_back(v);
  }
  if (dims.empty())
    fail(ErrorKind::Config, "bad dims \"" + text + "\" (expected e.g. 1x8x8)");
  return dims;
}

io::Config load_or_default(const std::string &path) {
  return path.empty() ? io::Config{} : io::load_config(path);
}

/// [bench] of the profile file when given, else of the main config.
runtime::NetProfile profile_of(const std::string &profile_path, const io::Config &cfg) {
  return profile_path.empty() ? cfg.bench : io::load_config(profile_path).bench;
}

void log_line(const std::string &line) { std::cerr << line << std::endl; }

std::string fmt(const char *format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct GateChoice {
  std::string gate_path;
  bool oracle = false;

  runtime::OffloadPolicy policy(std::optional<gate::GateModel> &holder) const {
    if (oracle)
      return runtime::OffloadPolicy::oracle();
    if (gate_path.empty())
      fail(ErrorKind::Config, "cooperation needs --gate or --oracle");
    holder = gate::load_gate(gate_path);
    return runtime::OffloadPolicy::learned(*holder);
  }
};

int run(int argc, char **argv) {
  CLI::App app{"Edge-cloud cooperative inference: teacher training, RL compression, "
               "offload gating and runtime benchmarks"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, teacher_path, student_path, gate_path;
  std::string report_path, history_path, profile_path, cloud_addr, spec_path;

  // gen-data
  std::size_t classes = 4, per_class = 200;
  std::string dims_text = "1x8x8";
  double separation = 4.0;
  std::uint64_t seed = 1;
  auto *gen = app.add_subcommand("gen-data", "Generate a synthetic Gaussian-blob dataset");
  gen->add_option("--classes", classes, "Class count")->capture_default_str();
  gen->add_option("--per-class", per_class, "Samples per class")->capture_default_str();
  gen->add_option("--dims", dims_text, "Sample dims, e.g. 1x8x8 or 16")->capture_default_str();
  gen->add_option("--separation", separation, "Distance between class means in sigmas")
    ->capture_default_str();
  gen->add_option("--seed", seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", out_path, "Dataset cache to write")->required();

  // import-idx
  std::string images_path, labels_path;
  std::size_t limit = 0;
  auto *imp = app.add_subcommand("import-idx", "Convert IDX image/label files to a dataset cache");
  imp->add_option("--images", images_path, "IDX image file")->required();
  imp->add_option("--labels", labels_path, "IDX label file")->required();
  imp->add_option("--limit", limit, "Keep only the first N samples (0 = all)");
  imp->add_option("--seed", seed, "Split seed")->capture_default_str();
  imp->add_option("--out", out_path, "Dataset cache to write")->required();

  // train-teacher
  auto *tt = app.add_subcommand("train-teacher", "Train the cloud teacher model");
  tt->add_option("--config", config_path, "Config file");
  tt->add_option("--data", data_path, "Dataset cache")->required();
  tt->add_option("--spec", spec_path, "Model spec text file (default teacher when omitted)");
  tt->add_option("--out", out_path, "Network file to write")->required();

  // compress
  auto *comp = app.add_subcommand("compress", "Search a compressed student with the RL agent");
  comp->add_option("--config", config_path, "Config file");
  comp->add_option("--teacher", teacher_path, "Teacher network")->required();
  comp->add_option("--data", data_path, "Dataset cache")->required();
  comp->add_option("--out", out_path, "Student network to write")->required();
  comp->add_option("--history", history_path, "Per-episode CSV to write");

  // train-gate
  std::string kind_text;
  auto *tg = app.add_subcommand("train-gate", "Label student errors, select with QBC, train the gate");
  tg->add_option("--config", config_path, "Config file");
  tg->add_option("--student", student_path, "Student network")->required();
  tg->add_option("--data", data_path, "Dataset cache")->required();
  tg->add_option("--kind", kind_text, "svm, knn or rf (overrides [gate] kind)");
  tg->add_option("--out", out_path, "Gate file to write")->required();
  tg->add_option("--report", report_path, "Gate report CSV to write");

  // serve-cloud
  std::string bind = "127.0.0.1:7070";
  auto *sc = app.add_subcommand("serve-cloud", "Serve teacher inference until a shutdown frame");
  sc->add_option("--teacher", teacher_path, "Teacher network")->required();
  sc->add_option("--bind", bind, "host:port to listen on")->capture_default_str();
  sc->add_option("--profile", profile_path, "Config file whose [bench] section sets the link");
  sc->add_option("--config", config_path, "Config file");

  // run-edge
  std::string strategy_text = "coop";
  GateChoice choice;
  auto *re = app.add_subcommand("run-edge", "Run one inference strategy on the edge");
  re->add_option("--student", student_path, "Student network")->required();
  re->add_option("--gate", choice.gate_path, "Gate file (cooperation)");
  re->add_flag("--oracle", choice.oracle, "Offload exactly the student's mistakes");
  re->add_option("--data", data_path, "Dataset cache")->required();
  re->add_option("--cloud", cloud_addr, "Cloud host:port (cloud and coop)");
  re->add_option("--strategy", strategy_text, "edge, cloud or coop")->capture_default_str();
  re->add_option("--profile", profile_path, "Config file whose [bench] section sets the link");
  re->add_option("--config", config_path, "Config file");
  re->add_option("--report", report_path, "Bench CSV to write");
  bool stop_cloud = false;
  re->add_flag("--stop-cloud", stop_cloud, "Send a shutdown frame to --cloud afterwards");

  // bench
  auto *bench = app.add_subcommand("bench", "Compare edge_only, cloud_only and cooperation");
  bench->add_option("--teacher", teacher_path, "Teacher network (in-process cloud)");
  bench->add_option("--student", student_path, "Student network")->required();
  bench->add_option("--gate", choice.gate_path, "Gate file");
  bench->add_flag("--oracle", choice.oracle, "Offload exactly the student's mistakes");
  bench->add_option("--data", data_path, "Dataset cache")->required();
  bench->add_option("--cloud", cloud_addr, "Remote cloud host:port instead of an in-process one");
  bench->add_option("--profile", profile_path, "Config file whose [bench] section sets the link");
  bench->add_option("--config", config_path, "Config file");
  bench->add_option("--report", report_path, "Bench CSV to write");
  bench->add_flag("--stop-cloud", stop_cloud, "Send a shutdown frame to --cloud afterwards");

  // describe
  std::string model_path;
  auto *desc = app.add_subcommand("describe", "Print a network's layer spec and size");
  desc->add_option("model", model_path, "Network file")->required();

  // show-config
  auto *showc = app.add_subcommand("show-config", "Print every config key with its value");
  showc->add_option("--config", config_path, "Config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::Config);
  }

  if (*gen) {
    auto d = io::gen_synthetic(classes, per_class, parse_dims(dims_text), separation, seed);
    io::save_dataset(d, out_path);
    log_line(fmt("gen-data: %zu samples of %s, %zu classes", d.size(),
                 nn::shape_string(d.sample_shape()).c_str(), d.class_count));
  } else if (*imp) {
    auto d = io::load_idx(images_path, labels_path);
    if (limit > 0 && limit < d.size()) {
      std::vector<std::size_t> idx(limit);
      for (std::size_t i = 0; i < limit; ++i)
        idx[i] = i;
      const auto classes_before = d.class_count;
      d = d.select(idx);
      d.class_count = classes_before;
    }
    io::stratified_split(d, seed);
    io::save_dataset(d, out_path);
    log_line(fmt("import-idx: %zu samples of %s, %zu classes", d.size(),
                 nn::shape_string(d.sample_shape()).c_str(), d.class_count));
  } else if (*tt) {
    auto cfg = load_or_default(config_path);
    const auto data = io::load_dataset(data_path);
    const auto spec = spec_path.empty()
                        ? io::default_teacher_spec(data.sample_shape(), data.class_count)
                        : arch::parse_spec([&] {
                            const auto b = read_file(spec_path);
                            return std::string(b.begin(), b.end());
                          }());
    auto net = arch::realize(spec, cfg.train.seed).net;
    cfg.train.on_epoch = [&](const nn::EpochStats &s) {
      log_line(fmt("train-teacher: epoch %zu/%zu loss %.4f acc %.4f", s.epoch + 1,
                   cfg.train.epochs, s.loss, s.accuracy));
    };
    net = nn::train(std::move(net), data.subset(nn::Split::Train), cfg.train).net;
    nn::save_network(net, out_path);
    log_line(fmt("train-teacher: %zu params, test accuracy %.4f", arch::param_count(net),
                 nn::evaluate(net, io::evaluation_rows(data))));
  } else if (*comp) {
    const auto cfg = load_or_default(config_path);
    const auto teacher = nn::load_network(teacher_path);
    const auto data = io::load_dataset(data_path);
    const auto result =
      rl::compress(teacher, data, cfg.compress, [&](std::size_t i, const rl::Episode &ep) {
        log_line(fmt("compress: episode %zu/%zu C %.4f A %.4f R %.4e", i + 1,
                     cfg.compress.episodes, ep.C, ep.A, ep.R));
      });
    nn::save_network(result.best_student, out_path);
    if (!history_path.empty())
      write_text(history_path, rl::history_csv(result.history));
    const auto &best = result.history[result.best_episode];
    log_line(fmt("compress: best episode %zu C %.4f A %.4f, test accuracy %.4f",
                 result.best_episode, best.C, best.A,
                 nn::evaluate(result.best_student, io::evaluation_rows(data))));
  } else if (*tg) {
    auto cfg = load_or_default(config_path);
    if (!kind_text.empty())
      cfg.gate.kind = gate::parse_gate_kind(kind_text);
    const auto student = nn::load_network(student_path);
    const auto data = io::load_dataset(data_path);
    const auto g = io::train_gate_pipeline(student, data, cfg.gate);
    gate::save_gate(g.model, out_path);
    if (!report_path.empty())
      write_text(report_path, gate::gate_report_csv(std::span(&g.report, 1)));
    log_line(fmt("train-gate: %s on M = %zu per class, test accuracy %.4f",
                 gate::to_string(g.report.kind), g.report.train_m, g.report.eval.accuracy));
  } else if (*sc) {
    const auto cfg = load_or_default(config_path);
    runtime::CloudServer server(nn::load_network(teacher_path), runtime::parse_endpoint(bind),
                                profile_of(profile_path, cfg));
    log_line(fmt("serve-cloud: listening on port %u", static_cast<unsigned>(server.port())));
    server.run();
    log_line(fmt("serve-cloud: served %zu requests", server.requests_served()));
  } else if (*re) {
    const auto cfg = load_or_default(config_path);
    const auto profile = profile_of(profile_path, cfg);
    const auto strategy = runtime::parse_strategy(strategy_text);
    const auto student = nn::load_network(student_path);
    const auto data = io::evaluation_rows(io::load_dataset(data_path));
    std::optional<gate::GateModel> holder;
    const auto policy = strategy == runtime::Strategy::Cooperation
                          ? choice.policy(holder)
                          : runtime::OffloadPolicy::always_local();
    std::optional<runtime::CloudClient> cloud;
    if (strategy != runtime::Strategy::EdgeOnly) {
      if (cloud_addr.empty())
        fail(ErrorKind::Config, std::string(runtime::to_string(strategy)) + " needs --cloud");
      cloud.emplace(runtime::parse_endpoint(cloud_addr));
    }
    const auto r =
      runtime::edge_run(student, policy, data, cloud ? &*cloud : nullptr, strategy, profile);
    if (cloud && stop_cloud)
      cloud->send_shutdown();
    std::cout << runtime::bench_table(std::span(&r, 1));
    if (!report_path.empty())
      write_text(report_path, runtime::bench_csv(std::span(&r, 1)));
  } else if (*bench) {
    const auto cfg = load_or_default(config_path);
    const auto profile = profile_of(profile_path, cfg);
    const auto student = nn::load_network(student_path);
    const auto data = io::evaluation_rows(io::load_dataset(data_path));
    std::optional<gate::GateModel> holder;
    const auto policy = choice.policy(holder);
    std::optional<runtime::CloudServer> server;
    runtime::Endpoint ep;
    if (cloud_addr.empty()) {
      if (teacher_path.empty())
        fail(ErrorKind::Config, "bench needs --teacher or --cloud");
      server.emplace(nn::load_network(teacher_path), runtime::Endpoint{"127.0.0.1", 0}, profile);
      server->start();
      ep = {"127.0.0.1", server->port()};
    } else {
      ep = runtime::parse_endpoint(cloud_addr);
    }
    runtime::CloudClient cloud(ep);
    const auto reports = runtime::bench_compare(student, policy, data, cloud, profile);
    if (server || stop_cloud)
      cloud.send_shutdown();
    if (server)
      server->stop();
    std::cout << runtime::bench_table(reports);
    if (!report_path.empty())
      write_text(report_path, runtime::bench_csv(reports));
  } else if (*desc) {
    const auto net = nn::load_network(model_path);
    std::cout << arch::format_spec(arch::describe(net));
    std::cout << "# params " << arch::param_count(net) << ", file bytes "
              << arch::serialized_size_bytes(net) << "\n";
  } else if (*showc) {
    std::cout << io::format_config(load_or_default(config_path));
  }
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  try {
    return run(argc, argv);
  } catch (const Error &e) {
    std::cerr << "ecctl: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception &e) {
    std::cerr << "ecctl: " << e.what() << "\n";
    return 1;
  }
}
