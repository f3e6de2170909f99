// slotpath: command-line entry point for the forwarder, trainer and experiments.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "slotpath/bnn.hpp"
#include "slotpath/error.hpp"
#include "slotpath/harness.hpp"
#include "slotpath/io_udp.hpp"
#include "slotpath/model_bank.hpp"
#include "slotpath/pipeline.hpp"
#include "slotpath/report_json.hpp"
#include "slotpath/trainer.hpp"

namespace {

using nlohmann::json;
using namespace slotpath;

bool g_verbose = false;

void log_line(const char* level, const std::string& message, json fields = json::object()) {
  fields["level"] = level;
  fields["message"] = message;
  std::cerr << fields.dump() << '\n';
}

void info(const std::string& message, json fields = json::object()) {
  if (g_verbose) log_line("info", message, std::move(fields));
}

// Effective value of every named option of a subcommand.
json effective_config(const CLI::App& app) {
  json config = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty()) {
      if (opt->get_name().empty()) continue;
    }
    std::string key = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (key == "help" || key == "config") continue;
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    std::vector<std::string> values;
    if (opt->count() > 0) {
      values = opt->as<std::vector<std::string>>();
    } else if (!opt->get_default_str().empty()) {
      values.push_back(opt->get_default_str());
    }
    if (opt->get_expected_max() > 1) {
      config[key] = values;
    } else if (opt->get_type_size() == 0) {
      config[key] = opt->count() > 0;
    } else if (!values.empty()) {
      config[key] = values.front();
    } else {
      config[key] = nullptr;
    }
  }
  return config;
}

struct Output {
  std::string report_path;
  std::string csv_path;
};

void add_output_flags(CLI::App* sub, Output& out, bool with_csv) {
  sub->add_option("--report", out.report_path, "Write the JSON report here instead of stdout");
  if (with_csv) sub->add_option("--csv", out.csv_path, "Write per-packet records as CSV");
}

void emit(const CLI::App& sub, const Output& out, json result) {
  const auto report = make_report(sub.get_name(), effective_config(sub), std::move(result));
  if (out.report_path.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    std::ofstream f(out.report_path);
    if (!f) throw Error(Errc::Io, "cannot open " + out.report_path);
    f << report.dump(2) << '\n';
    if (!f) throw Error(Errc::Io, "write failed: " + out.report_path);
    info("report written", {{"path", out.report_path}});
  }
}

void maybe_csv(const Output& out, std::span<const PacketRecord> records) {
  if (out.csv_path.empty()) return;
  write_records_csv(out.csv_path, records);
  info("records written", {{"path", out.csv_path}, {"rows", records.size()}});
}

std::vector<ModelWeights> load_models(const std::vector<std::string>& paths, std::size_t input_bits) {
  std::vector<ModelWeights> models;
  for (const auto& p : paths) models.push_back(load_model(p, input_bits));
  return models;
}

json summarize_values(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  const auto s = summarize(v);
  return json{{"count", s.count}, {"min", s.min}, {"mean", s.mean}, {"max", s.max}};
}

json model_json(const ModelWeights& m, std::uintmax_t size_bytes) {
  std::vector<double> b1(m.b1().begin(), m.b1().end());
  std::vector<double> w2(m.w2().begin(), m.w2().end());
  return json{{"size_bytes", size_bytes},
              {"input_bits", m.shape().input_bits},
              {"hidden_width", m.shape().hidden_width},
              {"b1", summarize_values(b1)},
              {"w2", summarize_values(w2)},
              {"b2", m.b2()},
              {"cost_model", cost_model(m)}};
}

// Trace from --trace, or generated when absent.
struct TraceArgs {
  std::string path;
  std::size_t packets = 8192;
  std::size_t boundary = 0;  // 0: packets / 2
  std::uint64_t pacing_ns = kDefaultPacingNs;
  std::size_t payloads = 256;
  std::uint64_t seed = 1;
  std::uint32_t before_slot = 0;
  std::uint32_t after_slot = 1;
};

void add_trace_gen_flags(CLI::App* sub, TraceArgs& t) {
  sub->add_option("--packets", t.packets, "Packets in the generated trace")->capture_default_str();
  sub->add_option("--boundary", t.boundary, "First index carrying the after-slot (default packets/2)")
      ->capture_default_str();
  sub->add_option("--pacing-ns", t.pacing_ns, "Emit-time spacing of the generated trace")->capture_default_str();
  sub->add_option("--payloads", t.payloads, "Distinct random payloads cycled through the trace")
      ->capture_default_str();
  sub->add_option("--seed", t.seed, "Payload seed")->capture_default_str();
  sub->add_option("--before-slot", t.before_slot, "Slot id before the boundary")->capture_default_str();
  sub->add_option("--after-slot", t.after_slot, "Slot id from the boundary on")->capture_default_str();
}

std::vector<TraceRecord> obtain_trace(const TraceArgs& t) {
  if (!t.path.empty()) return read_trace(t.path);
  const auto payloads = random_payloads(std::max<std::size_t>(t.payloads, 1), t.seed);
  const auto boundary = t.boundary == 0 ? t.packets / 2 : t.boundary;
  return gen_boundary_trace(t.packets, boundary, payloads, t.pacing_ns, t.before_slot, t.after_slot);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"slot-selected binarized classifier forwarder and experiment harness", "slotpath"};
  app.set_config("--config", "", "Read options from a key=value file");
  app.add_flag("-v,--verbose", g_verbose, "Structured progress logs on stderr");
  app.require_subcommand(1);
  app.fallthrough();

  std::size_t input_bits = kPayloadBits;
  std::function<void()> action;
  auto add_input_bits = [&](CLI::App* sub) {
    sub->add_option("--input-bits", input_bits, "Model input width d")->capture_default_str();
  };

  // train
  DatasetParams train_data;
  TrainConfig train_cfg;
  std::string train_metric = "recall";
  std::string train_out, train_dataset_path;
  Output train_output;
  auto* train = app.add_subcommand("train", "Train one slot model on synthetic or stored data");
  train->add_option("--seed", train_cfg.seed, "Training seed (also seeds the generator)")->capture_default_str();
  train->add_option("--samples", train_data.samples, "Synthetic samples")->capture_default_str();
  train->add_option("--bias", train_data.bias, "Per-bit class bias of the generator")->capture_default_str();
  train->add_option("--prior", train_data.malicious_prior, "Malicious prior")->capture_default_str();
  train->add_option("--informative", train_data.informative_fraction, "Fraction of informative bits")
      ->capture_default_str();
  train->add_option("--data", train_dataset_path, "Dataset file instead of synthetic data");
  train->add_option("--validation-fraction", train_cfg.validation_fraction, "Held-out fraction")
      ->capture_default_str();
  train->add_option("--pos-weight", train_cfg.pos_weight, "Loss weight of malicious samples")->capture_default_str();
  train->add_option("--epochs", train_cfg.epochs, "Epochs")->capture_default_str();
  train->add_option("--lr", train_cfg.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--bias-lr", train_cfg.bias_learning_rate, "Learning rate of the hidden biases")
      ->capture_default_str();
  train->add_option("--batch-size", train_cfg.batch_size, "Minibatch size")->capture_default_str();
  train->add_option("--hidden", train_cfg.hidden_width, "Hidden width h")->capture_default_str();
  train->add_option("--metric", train_metric, "Checkpoint selection metric")
      ->check(CLI::IsMember({"recall", "precision"}))
      ->capture_default_str();
  train->add_option("--out", train_out, "Output weight file")->required();
  add_output_flags(train, train_output, false);
  train->callback([&] {
    action = [&] {
      train_cfg.selection_metric = parse_selection_metric(train_metric);
      train_data.seed = train_cfg.seed;
      TrainResult result = [&] {
        if (!train_dataset_path.empty()) {
          const auto samples = read_dataset(train_dataset_path);
          const auto [tr, va] = split_dataset(samples, train_cfg.validation_fraction, train_cfg.seed);
          return train_bnn(tr, va, train_cfg);
        }
        return train_bnn(generate_dataset(train_data), train_cfg);
      }();
      save_model(result.model, train_out);
      info("model written", {{"path", train_out}});
      emit(*train, train_output,
           json{{"model_path", train_out},
                {"size_bytes", result.model.shape().serialized_bytes()},
                {"selected_epoch", result.selected_epoch},
                {"validation", result.validation},
                {"history", result.history}});
    };
  });

  // gen-data
  DatasetParams gen_data;
  std::string gen_data_out;
  Output gen_data_output;
  auto* gendata = app.add_subcommand("gen-data", "Write a synthetic labelled dataset");
  gendata->add_option("--seed", gen_data.seed, "Generator seed")->capture_default_str();
  gendata->add_option("--samples", gen_data.samples, "Samples")->capture_default_str();
  gendata->add_option("--bias", gen_data.bias, "Per-bit class bias")->capture_default_str();
  gendata->add_option("--prior", gen_data.malicious_prior, "Malicious prior")->capture_default_str();
  gendata->add_option("--informative", gen_data.informative_fraction, "Fraction of informative bits")
      ->capture_default_str();
  gendata->add_option("--out", gen_data_out, "Output dataset file")->required();
  add_output_flags(gendata, gen_data_output, false);
  gendata->callback([&] {
    action = [&] {
      const auto ds = generate_dataset(gen_data);
      write_dataset(gen_data_out, ds.samples);
      const auto malicious = std::count_if(ds.samples.begin(), ds.samples.end(),
                                           [](const Sample& s) { return s.label == Label::Malicious; });
      emit(*gendata, gen_data_output,
           json{{"path", gen_data_out}, {"samples", ds.samples.size()}, {"malicious", malicious}});
    };
  });

  // gen-trace
  TraceArgs gen_trace;
  std::string gen_trace_out;
  Output gen_trace_output;
  auto* gentrace = app.add_subcommand("gen-trace", "Write a two-slot boundary trace");
  add_trace_gen_flags(gentrace, gen_trace);
  gentrace->add_option("--out", gen_trace_out, "Output trace file")->required();
  add_output_flags(gentrace, gen_trace_output, false);
  gentrace->callback([&] {
    action = [&] {
      const auto trace = obtain_trace(gen_trace);
      write_trace(gen_trace_out, trace);
      emit(*gentrace, gen_trace_output,
           json{{"path", gen_trace_out},
                {"records", trace.size()},
                {"boundary_index", find_boundary(trace)},
                {"size_bytes", trace_file_bytes(trace.size())}});
    };
  });

  // run
  std::vector<std::string> run_models;
  std::string run_source = "ring", run_sink = "null", run_trace, run_host = "127.0.0.1", run_sink_host = "127.0.0.1",
              run_sink_trace, run_pattern = "round_robin";
  std::uint16_t run_port = 0, run_sink_port = 0;
  std::uint64_t run_packets = 0, run_seed = 1;
  std::size_t run_pool = 1024, run_warmup = 64;
  int run_idle_ms = 500;
  bool run_paced = false;
  Output run_output;
  auto* run = app.add_subcommand("run", "Run the forwarder over a source");
  run->add_option("--model", run_models, "Weight files, one per slot in order")->required()->expected(1, -1);
  add_input_bits(run);
  run->add_option("--source", run_source, "Packet source")
      ->check(CLI::IsMember({"ring", "udp", "trace"}))
      ->capture_default_str();
  run->add_option("--trace", run_trace, "Trace file for the trace source, or to fill the ring");
  run->add_option("--packets", run_packets, "Packet limit (0: until the source ends)")->capture_default_str();
  run->add_flag("--paced", run_paced, "Release trace records at their emit times");
  run->add_option("--pattern", run_pattern, "Slot pattern of a generated ring")->capture_default_str();
  run->add_option("--pool", run_pool, "Distinct frames in a generated ring")->capture_default_str();
  run->add_option("--seed", run_seed, "Seed of a generated ring")->capture_default_str();
  run->add_option("--host", run_host, "UDP source bind address")->capture_default_str();
  run->add_option("--port", run_port, "UDP source port")->capture_default_str();
  run->add_option("--idle-ms", run_idle_ms, "UDP source idle timeout")->capture_default_str();
  run->add_option("--sink", run_sink, "Packet sink")
      ->check(CLI::IsMember({"null", "udp", "trace"}))
      ->capture_default_str();
  run->add_option("--sink-host", run_sink_host, "UDP sink address")->capture_default_str();
  run->add_option("--sink-port", run_sink_port, "UDP sink port")->capture_default_str();
  run->add_option("--sink-trace", run_sink_trace, "Trace file collecting forwarded frames");
  run->add_option("--warmup", run_warmup, "Records excluded from latency statistics")->capture_default_str();
  add_output_flags(run, run_output, true);
  run->callback([&] {
    action = [&] {
      ModelBank bank(load_models(run_models, input_bits));
      std::unique_ptr<PacketSource> source;
      if (run_source == "udp") {
        source = std::make_unique<UdpSource>(run_host, run_port, run_idle_ms, run_packets);
      } else if (run_source == "trace") {
        if (run_trace.empty()) throw CLI::RequiredError("--trace");
        source = std::make_unique<TraceFileSource>(run_trace, run_paced);
      } else if (!run_trace.empty()) {
        source = std::make_unique<RingSource>(read_trace(run_trace), run_paced);
      } else {
        const auto n = run_packets == 0 ? std::uint64_t{100000} : run_packets;
        const auto payloads = random_payloads(std::max<std::size_t>(run_pool, 1), run_seed);
        const auto ids = generate_slot_ids(parse_access_pattern(run_pattern), bank.size(), payloads.size());
        std::vector<PacketFrame> pool;
        for (std::size_t i = 0; i < payloads.size(); ++i) pool.push_back(build_frame(ids[i], payloads[i]));
        std::vector<TraceRecord> records;
        records.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) records.push_back({i * kDefaultPacingNs, pool[i % pool.size()]});
        source = std::make_unique<RingSource>(std::move(records), run_paced);
      }
      std::unique_ptr<PacketSink> sink;
      TraceFileSink* trace_sink = nullptr;
      if (run_sink == "udp") {
        sink = std::make_unique<UdpSink>(run_sink_host, run_sink_port);
      } else if (run_sink == "trace") {
        if (run_sink_trace.empty()) throw CLI::RequiredError("--sink-trace");
        auto ts = std::make_unique<TraceFileSink>(run_sink_trace);
        trace_sink = ts.get();
        sink = std::move(ts);
      } else {
        sink = std::make_unique<NullSink>();
      }
      const Pipeline pipeline(bank);
      auto report = run_pipeline(pipeline, *source, *sink,
                                 RunOptions{run_packets, run_warmup, !run_output.csv_path.empty()});
      if (trace_sink != nullptr) trace_sink->flush();
      maybe_csv(run_output, report.records);
      emit(*run, run_output, json(report));
      if (!report.complete) throw Error(Errc::SinkFailure, report.error);
    };
  });

  // inspect-model
  std::string inspect_path;
  Output inspect_output;
  auto* inspect = app.add_subcommand("inspect-model", "Describe a weight file");
  inspect->add_option("model", inspect_path, "Weight file")->required();
  add_input_bits(inspect);
  add_output_flags(inspect, inspect_output, false);
  inspect->callback([&] {
    action = [&] {
      const auto model = load_model(inspect_path, input_bits);
      emit(*inspect, inspect_output, model_json(model, std::filesystem::file_size(inspect_path)));
    };
  });

  // bank-info
  std::vector<std::string> bank_models;
  Output bank_output;
  auto* bankinfo = app.add_subcommand("bank-info", "Load a resident bank and report its footprint");
  bankinfo->add_option("models", bank_models, "Weight files, one per slot in order")->required()->expected(1, -1);
  add_input_bits(bankinfo);
  add_output_flags(bankinfo, bank_output, false);
  bankinfo->callback([&] {
    action = [&] {
      const ModelBank bank(load_models(bank_models, input_bits));
      emit(*bankinfo, bank_output,
           json{{"slots", bank.size()},
                {"input_bits", bank.shape().input_bits},
                {"hidden_width", bank.shape().hidden_width},
                {"generation", bank.generation()},
                {"footprint_bytes", bank.footprint_bytes()}});
    };
  });

  // bench-breakdown
  std::vector<std::string> bd_models;
  std::uint64_t bd_packets = 100000, bd_seed = 1;
  std::size_t bd_pool = 1024;
  std::string bd_pattern = "round_robin";
  Output bd_output;
  auto* breakdown = app.add_subcommand("bench-breakdown", "Time selection, inference and the full pipeline");
  breakdown->add_option("--model", bd_models, "Weight files, one per slot")->required()->expected(1, -1);
  add_input_bits(breakdown);
  breakdown->add_option("--packets", bd_packets, "Packets per measurement")->capture_default_str();
  breakdown->add_option("--pool", bd_pool, "Distinct frames cycled")->capture_default_str();
  breakdown->add_option("--pattern", bd_pattern, "Slot pattern")->capture_default_str();
  breakdown->add_option("--seed", bd_seed, "Payload seed")->capture_default_str();
  add_output_flags(breakdown, bd_output, false);
  breakdown->callback([&] {
    action = [&] {
      const ModelBank bank(load_models(bd_models, input_bits));
      const auto payloads = random_payloads(std::max<std::size_t>(bd_pool, 1), bd_seed);
      const auto ids = generate_slot_ids(parse_access_pattern(bd_pattern), bank.size(), payloads.size());
      std::vector<PacketFrame> frames;
      for (std::size_t i = 0; i < payloads.size(); ++i) frames.push_back(build_frame(ids[i], payloads[i]));
      emit(*breakdown, bd_output, json(bench_breakdown(bank, bd_packets, frames)));
    };
  });

  // bench-scaling
  std::vector<std::string> sc_models;
  std::vector<std::string> sc_patterns{"fixed:0", "round_robin", "random:1", "hotspot:0:0.9:1"};
  std::uint64_t sc_packets = 100000, sc_seed = 1;
  std::size_t sc_rounds = 20, sc_large = 16;
  Output sc_output;
  auto* scaling = app.add_subcommand("bench-scaling", "Selection cost with a small and a large resident bank");
  scaling->add_option("--model", sc_models, "Weight files of the small bank")->required()->expected(1, -1);
  add_input_bits(scaling);
  scaling->add_option("--slots", sc_large, "Slots of the large bank (filled cyclically)")->capture_default_str();
  scaling->add_option("--pattern", sc_patterns, "Access patterns")->capture_default_str();
  scaling->add_option("--packets", sc_packets, "Selections per pattern and bank")->capture_default_str();
  scaling->add_option("--rounds", sc_rounds, "Interleaved measurement rounds")->capture_default_str();
  scaling->add_option("--seed", sc_seed, "Payload seed")->capture_default_str();
  add_output_flags(scaling, sc_output, false);
  scaling->callback([&] {
    action = [&] {
      auto small_models = load_models(sc_models, input_bits);
      std::vector<ModelWeights> large_models;
      for (std::size_t k = 0; k < sc_large; ++k) large_models.push_back(small_models[k % small_models.size()]);
      const ModelBank small(std::move(small_models));
      const ModelBank large(std::move(large_models));
      std::vector<AccessPattern> patterns;
      for (const auto& p : sc_patterns) patterns.push_back(parse_access_pattern(p));
      const auto payloads = random_payloads(256, sc_seed);
      emit(*scaling, sc_output, json(bench_scaling(small, large, patterns, sc_packets, payloads, sc_rounds)));
    };
  });

  // replay-continuity
  std::vector<std::string> rc_models;
  TraceArgs rc_trace;
  ContinuityOptions rc_opts;
  bool rc_unpaced = false;
  Output rc_output;
  auto* replay = app.add_subcommand("replay-continuity", "Replay a boundary trace through a resident bank");
  replay->add_option("--model", rc_models, "Weight files, one per slot")->required()->expected(1, -1);
  add_input_bits(replay);
  replay->add_option("--trace", rc_trace.path, "Trace file (generated when absent)");
  add_trace_gen_flags(replay, rc_trace);
  replay->add_flag("--unpaced", rc_unpaced, "Ignore emit times");
  replay->add_option("--warmup", rc_opts.warmup_prefix, "Records excluded from gap statistics")
      ->capture_default_str();
  replay->add_option("--rate-window", rc_opts.rate_window, "Packets per rate window at the boundary")
      ->capture_default_str();
  add_output_flags(replay, rc_output, true);
  replay->callback([&] {
    action = [&] {
      const ModelBank bank(load_models(rc_models, input_bits));
      const auto trace = obtain_trace(rc_trace);
      rc_opts.paced = !rc_unpaced;
      const auto report = run_continuity(bank, trace, rc_opts);
      maybe_csv(rc_output, report.run.records);
      emit(*replay, rc_output, json(report));
    };
  });

  // compare-control
  std::vector<std::string> cc_models;
  TraceArgs cc_trace;
  cc_trace.pacing_ns = 100'000;
  std::uint64_t cc_delivery_us = 2000;
  std::size_t cc_warmup = 64;
  std::string cc_socket;
  Output cc_output;
  auto* compare = app.add_subcommand("compare-control", "Resident switching versus control-plane replacement");
  compare->add_option("--model", cc_models, "Slot 0 and slot 1 weight files")->required()->expected(2);
  add_input_bits(compare);
  compare->add_option("--trace", cc_trace.path, "Trace file (generated when absent)");
  add_trace_gen_flags(compare, cc_trace);
  compare->add_option("--delivery-us", cc_delivery_us, "Injected control delivery latency")->capture_default_str();
  compare->add_option("--warmup", cc_warmup, "Records excluded from gap statistics")->capture_default_str();
  compare->add_option("--socket", cc_socket, "Control socket path (temporary when absent)");
  add_output_flags(compare, cc_output, true);
  compare->callback([&] {
    action = [&] {
      const auto models = load_models(cc_models, input_bits);
      const auto trace = obtain_trace(cc_trace);
      ControlOptions opts;
      opts.delivery_latency = std::chrono::microseconds(cc_delivery_us);
      opts.warmup_prefix = cc_warmup;
      opts.socket_path = cc_socket;
      const auto report = run_control_compare(models[0], models[1], trace, opts);
      maybe_csv(cc_output, report.control_run.records);
      emit(*compare, cc_output, json(report));
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    json fields{{"kind", "usage"}, {"error", e.get_name()}};
    if (const auto extra = app.remaining(); !extra.empty()) fields["unexpected"] = extra;
    log_line("error", e.what(), std::move(fields));
    return 2;
  }

  try {
    if (action) action();
  } catch (const CLI::ParseError& e) {
    log_line("error", std::string("missing ") + e.what(), {{"kind", "usage"}, {"error", e.get_name()}});
    return 2;
  } catch (const Error& e) {
    log_line("error", e.what(), {{"kind", "operational"}, {"code", std::string(to_string(e.code()))}});
    return 1;
  } catch (const std::exception& e) {
    log_line("error", e.what(), {{"kind", "operational"}});
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
