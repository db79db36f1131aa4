#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "feedlens/corpus.hpp"
#include "feedlens/error.hpp"
#include "feedlens/event_log.hpp"
#include "feedlens/harness.hpp"
#include "feedlens/metrics.hpp"
#include "feedlens/service.hpp"

namespace fs = std::filesystem;
using namespace feedlens;

namespace {

Corpus open_corpus(const std::string& path) {
  if (path.empty()) return synthetic_corpus();
  return load_corpus_file(path);
}

int cmd_metrics(const std::string& target, bool batch, bool json_only) {
  if (!batch) {
    const auto log = load_log_file(target);
    for (const auto& w : log.warnings) std::cerr << "warning: " << w << '\n';
    if (!log.header) throw ParseError(target + ": log has no header");
    const auto m = compute_metrics(*log.header, log.stream.view());
    std::cout << to_json(m).dump() << '\n';
    if (!json_only) std::cout << '\n' << format_session(m);
    return 0;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(target)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl" &&
        entry.path().filename() != "sessions.jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<SessionMetrics> all;
  for (const auto& f : files) {
    const auto log = load_log_file(f);
    for (const auto& w : log.warnings) std::cerr << "warning: " << f.filename().string() << ": " << w << '\n';
    if (!log.header) throw ParseError(f.string() + ": log has no header");
    all.push_back(compute_metrics(*log.header, log.stream.view()));
  }
  const auto table = summarize(all);
  std::cout << to_json(table).dump() << '\n';
  if (!json_only) std::cout << '\n' << format_table(table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feedlens: feed exploration engine, study harness, and service"};
  app.require_subcommand(1);

  std::string corpus_path;
  app.add_option("--corpus", corpus_path, "Corpus file (default: built-in synthetic corpus)");

  auto* metrics = app.add_subcommand("metrics", "Compute session metrics from a log or a directory of logs");
  std::string metrics_target;
  bool batch = false;
  bool json_only = false;
  metrics->add_option("target", metrics_target, "Log file, or directory with --batch")->required();
  metrics->add_flag("--batch", batch, "Summarize every log in a directory per condition");
  metrics->add_flag("--json", json_only, "Print only the machine-readable record");

  auto* study = app.add_subcommand("run-study", "Plan and run a study");
  int n = 28;
  std::uint64_t seed = 1;
  std::string out_dir = "study_out";
  std::string durations;
  std::string mode = "simulated";
  std::string config_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  study->add_option("--n", n, "Participants (even)");
  study->add_option("--seed", seed, "Master seed");
  study->add_option("--out", out_dir, "Output directory");
  study->add_option("--durations", durations, "e.g. warmup=5m,explore=15m");
  study->add_option("--mode", mode, "simulated or live")->check(CLI::IsMember({"simulated", "live"}));
  study->add_option("--config", config_path, "key = value config file");
  study->add_option("--host", host, "Bind address in live mode");
  study->add_option("--port", port, "Port in live mode");

  auto* serve = app.add_subcommand("serve", "Run the session service");
  std::string serve_config;
  std::string log_dir = "logs";
  int max_sessions = 64;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--config", serve_config, "key = value config file");
  serve->add_option("--log-dir", log_dir, "Directory for session logs");
  serve->add_option("--max-sessions", max_sessions, "Concurrent session limit");

  auto* gen = app.add_subcommand("gen-corpus", "Write the synthetic corpus");
  std::string gen_out = "data/corpus.jsonl";
  std::uint64_t gen_seed = 7;
  int gen_items = 320;
  gen->add_option("--out", gen_out, "Output file");
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--items", gen_items, "Item count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*metrics) return cmd_metrics(metrics_target, batch, json_only);

    if (*gen) {
      const auto corpus = synthetic_corpus(gen_seed, gen_items);
      if (fs::path(gen_out).has_parent_path()) fs::create_directories(fs::path(gen_out).parent_path());
      std::ofstream f(gen_out, std::ios::binary);
      if (!f) throw IoError("cannot write " + gen_out);
      write_corpus(f, corpus);
      std::cout << "wrote " << corpus.items().size() << " items to " << gen_out << '\n';
      return 0;
    }

    const auto corpus = open_corpus(corpus_path);

    if (*study) {
      HarnessConfig config;
      if (!config_path.empty()) config = load_config_file(config_path, config);
      if (!durations.empty()) config.durations = parse_durations(durations);
      if (mode == "live") {
        const auto plans = plan_study(n, seed);
        ServiceOptions opts;
        opts.log_dir = out_dir;
        opts.config = config.session;
        opts.provider_mode = config.provider_mode;
        opts.remote = config.remote;
        opts.plans = plans;
        Service service(corpus, opts);
        fs::create_directories(out_dir);
        std::ofstream f(fs::path(out_dir) / "plan.json");
        nlohmann::ordered_json j = nlohmann::ordered_json::array();
        for (const auto& p : plans) j.push_back(to_json(p));
        f << j.dump(2) << '\n';
        std::cout << "live study with " << plans.size() << " participants on http://" << host << ':'
                  << port << '\n';
        return service.listen(host, port) ? 0 : 1;
      }
      const auto start = std::chrono::steady_clock::now();
      const auto result = run_study(corpus, n, seed, config, fs::path(out_dir));
      export_results(result, out_dir);
      const auto secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::cout << format_table(result.table) << '\n'
                << result.sessions.size() << " sessions in " << secs << " s, written to " << out_dir
                << '\n';
      return 0;
    }

    if (*serve) {
      ServiceOptions opts;
      HarnessConfig config;
      if (!serve_config.empty()) config = load_config_file(serve_config, config);
      opts.config = config.session;
      opts.provider_mode = config.provider_mode;
      opts.remote = config.remote;
      opts.log_dir = log_dir;
      opts.max_sessions = static_cast<std::size_t>(max_sessions);
      opts.use_env_provider = serve_config.empty();
      Service service(corpus, opts);
      std::cout << "listening on http://" << host << ':' << port << '\n';
      return service.listen(host, port) ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
