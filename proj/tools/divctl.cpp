#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <string>
#include <vector>

#include "divctl/api.hpp"
#include "divctl/engine.hpp"
#include "divctl/scenario.hpp"
#include "divctl/sensitivity.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kParseError = 2;
constexpr int kBackendError = 3;
constexpr int kInvariantViolation = 4;

int exit_code_for(divctl::Errc code) {
  using divctl::Errc;
  switch (code) {
    case Errc::BackendUnavailable:
    case Errc::Timeout:
    case Errc::MalformedResponse:
    case Errc::ParseFailure:
    case Errc::BindFailure:
      return kBackendError;
    case Errc::CorruptStore:
    case Errc::UnknownLabelSpace:
    case Errc::DimensionMismatch:
      return kInvariantViolation;
    default:
      return kParseError;
  }
}

struct BackendFlags {
  std::string backend = "mock";
  std::string image_endpoint;
  std::string llm_endpoint;
  std::string embed_endpoint;
  int timeout_ms = 30000;
  std::size_t concurrency = 4;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--backend", backend, "Model backend")
        ->check(CLI::IsMember({"mock", "http"}))
        ->envname("DIVCTL_BACKEND");
    cmd->add_option("--image-endpoint", image_endpoint, "Image generator base URL")->envname("DIVCTL_IMAGE_ENDPOINT");
    cmd->add_option("--llm-endpoint", llm_endpoint, "Language model base URL")->envname("DIVCTL_LLM_ENDPOINT");
    cmd->add_option("--embed-endpoint", embed_endpoint, "Embedder base URL")->envname("DIVCTL_EMBED_ENDPOINT");
    cmd->add_option("--timeout-ms", timeout_ms, "Per-call backend timeout")
        ->check(CLI::PositiveNumber)
        ->envname("DIVCTL_TIMEOUT_MS");
    cmd->add_option("--concurrency", concurrency, "Parallel backend calls per iteration")
        ->check(CLI::Range(std::size_t{1}, std::size_t{64}));
  }

  divctl::GatewayConfig config() const {
    divctl::GatewayConfig c;
    c.backend = backend == "http" ? divctl::BackendKind::Http : divctl::BackendKind::Mock;
    c.image_endpoint = image_endpoint;
    c.llm_endpoint = llm_endpoint;
    c.embed_endpoint = embed_endpoint;
    c.timeout_ms = timeout_ms;
    c.concurrency = concurrency;
    return c;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) divctl::fail(divctl::Errc::ScenarioParseError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) divctl::fail(divctl::Errc::InvalidArgument, "cannot write " + path);
}

int run_command(const std::string& scenario_path, const std::string& output, const BackendFlags& flags,
                std::size_t max_n) {
  auto scenario = divctl::load_scenario(scenario_path, max_n);
  divctl::EngineConfig cfg;
  cfg.max_n = max_n;
  auto report = divctl::run_scenario(scenario, flags.config(), cfg);
  auto text = divctl::render_report(report);
  if (auto problem = divctl::check_report(divctl::parse_report(text))) {
    std::cerr << "divctl: report failed its self-check: " << *problem << "\n";
    return kInvariantViolation;
  }
  write_output(output, text);
  return kOk;
}

int sensitivity_command(const std::vector<double>& accuracies, std::size_t n, std::size_t k,
                        std::uint64_t seed, double sigma, const std::string& output, const BackendFlags& flags) {
  if (flags.backend != "mock")
    divctl::fail(divctl::Errc::RefusesHttpBackend, "the sensitivity sweep needs the controllable mock backend");
  divctl::SensitivityScenario sc;
  sc.attributes = divctl::sensitivity_attributes(k);
  sc.seed = seed;
  sc.sigma = sigma;
  sc.concurrency = flags.concurrency;
  auto points = divctl::sensitivity_sweep(sc, accuracies, n);
  std::ostringstream out;
  out << "q\tobserved_accuracy\talignment_predicted\talignment_actual\n";
  char line[160];
  for (const auto& p : points) {
    std::snprintf(line, sizeof line, "%.6f\t%.6f\t%.9f\t%.9f\n", p.configured_q, p.observed_accuracy,
                  p.alignment_predicted, p.alignment_actual);
    out << line;
  }
  write_output(output, out.str());
  return kOk;
}

int compare_command(const std::vector<std::string>& paths, const std::string& output) {
  std::vector<divctl::Report> reports;
  for (const auto& p : paths) {
    reports.push_back(divctl::parse_report(read_file(p)));
    if (auto problem = divctl::check_report(reports.back())) {
      std::cerr << "divctl: " << p << " failed its self-check: " << *problem << "\n";
      return kInvariantViolation;
    }
  }
  write_output(output, divctl::compare_reports(reports, paths));
  return kOk;
}

int serve_command(const std::string& listen, const std::string& store, const BackendFlags& flags, double mock_q,
                  double mock_sigma, std::size_t max_n, std::uint64_t seed) {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos) divctl::fail(divctl::Errc::InvalidArgument, "--listen expects host:port");
  auto host = listen.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(listen.substr(colon + 1));
  } catch (const std::exception&) {
    divctl::fail(divctl::Errc::InvalidArgument, "--listen port is not a number");
  }
  if (port < 0 || port > 65535) divctl::fail(divctl::Errc::InvalidArgument, "--listen port out of range");

  auto gw_cfg = flags.config();
  gw_cfg.mock_q = mock_q;
  gw_cfg.mock_sigma = mock_sigma;
  gw_cfg.mock_seed = seed;
  divctl::EngineConfig cfg;
  cfg.max_n = max_n;
  divctl::Engine engine(divctl::make_gateway(gw_cfg), cfg, store);
  divctl::api::ServiceOptions options;
  options.default_seed = seed;
  options.backend_name = flags.backend;

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  divctl::api::Server server(divctl::api::Router(engine, options));
  int bound = server.start(host, port);
  std::cerr << "divctl: listening on " << host << ":" << bound << "\n";
  int received = 0;
  sigwait(&signals, &received);
  std::cerr << "divctl: shutting down\n";
  server.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate image sets, measure their attribute diversity and steer it toward target distributions."};
  app.require_subcommand(1);

  std::size_t max_n = 200;

  BackendFlags run_flags;
  std::string scenario_path, run_output;
  auto* run = app.add_subcommand("run", "Execute a scenario file and write its report");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output", run_output, "Report path (stdout when omitted)");
  run->add_option("--max-n", max_n, "Largest allowed image count")->check(CLI::PositiveNumber);
  run_flags.add_to(run);

  BackendFlags sweep_flags;
  std::vector<double> accuracies{1.0, 0.8, 0.6, 0.4};
  std::size_t sweep_n = 200, sweep_k = 5;
  std::uint64_t sweep_seed = 0;
  double sweep_sigma = 0.0;
  std::string sweep_output;
  auto* sweep = app.add_subcommand("sensitivity", "Sweep mock label accuracy and report both alignment series");
  sweep->add_option("--accuracies", accuracies, "Comma-separated accuracies in [0,1]")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--n", sweep_n, "Images per point")->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
  sweep->add_option("--k", sweep_k, "Labels per attribute")->check(CLI::Range(std::size_t{2}, std::size_t{10}));
  sweep->add_option("--seed", sweep_seed, "Seed");
  sweep->add_option("--sigma", sweep_sigma, "Mock embedding noise")->check(CLI::NonNegativeNumber);
  sweep->add_option("-o,--output", sweep_output, "Output path (stdout when omitted)");
  sweep_flags.add_to(sweep);

  std::vector<std::string> reports;
  std::string compare_output;
  auto* compare = app.add_subcommand("compare", "Tabulate span and alignment across reports of one scenario");
  compare->add_option("reports", reports, "Report files")->required()->expected(2, -1)->check(CLI::ExistingFile);
  compare->add_option("-o,--output", compare_output, "Output path (stdout when omitted)");

  BackendFlags serve_flags;
  std::string listen = "127.0.0.1:8080", store = "divctl-store";
  double mock_q = 1.0, mock_sigma = 0.0;
  std::uint64_t serve_seed = 0;
  auto* serve = app.add_subcommand("serve", "Serve the session API over HTTP");
  serve->add_option("--listen", listen, "host:port")->envname("DIVCTL_LISTEN");
  serve->add_option("--store", store, "Session store directory")->envname("DIVCTL_STORE");
  serve->add_option("--max-n", max_n, "Largest allowed image count")->check(CLI::PositiveNumber)->envname("DIVCTL_MAX_N");
  serve->add_option("--seed", serve_seed, "Default session seed and mock seed")->envname("DIVCTL_SEED");
  serve->add_option("--mock-q", mock_q, "Mock label accuracy")->check(CLI::Range(0.0, 1.0))->envname("DIVCTL_MOCK_Q");
  serve->add_option("--mock-sigma", mock_sigma, "Mock embedding noise")
      ->check(CLI::NonNegativeNumber)
      ->envname("DIVCTL_MOCK_SIGMA");
  serve_flags.add_to(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParseError;
  }

  try {
    if (*run) return run_command(scenario_path, run_output, run_flags, max_n);
    if (*sweep) return sensitivity_command(accuracies, sweep_n, sweep_k, sweep_seed, sweep_sigma, sweep_output, sweep_flags);
    if (*compare) return compare_command(reports, compare_output);
    if (*serve) return serve_command(listen, store, serve_flags, mock_q, mock_sigma, max_n, serve_seed);
  } catch (const divctl::Error& e) {
    std::cerr << "divctl: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "divctl: " << e.what() << "\n";
    return kInvariantViolation;
  }
  return kOk;
}
