// Command-line front end: single runs, multi-seed comparison tables,
// experiment-grid sweeps, and SVG accuracy curves.

#include <CLI11.hpp>

#include <algorithm>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedshap/io.hpp"
#include "fedshap/simulator.hpp"

namespace fs = std::filesystem;
using fedshap::SimConfig;

namespace {

struct Options {
  std::string dataset = "synthetic";
  std::string strategy = "greedy_fed";
  int num_clients = 30;
  int budget = 3;
  int rounds = 60;
  double alpha_dir = 1e-4;
  std::string size_law = "power_law";
  double straggler_frac = 0.0;
  double noise_sigma = 0.0;
  double mu = 0.0;
  std::string sv_mode = "mean";
  double exp_alpha = 0.5;
  double sv_epsilon = 1e-4;
  long sv_max_iters = 0;  // 0: 50 * |S|
  std::uint64_t seed = 1;
  int epochs = 5;
  int batches = 5;
  double lr = 0.01;
  double momentum = 0.5;
  std::string out_dir = "out";
  std::string data_dir;
  // synthetic generator
  int classes = 10;
  int dim = 20;
  long train_samples = 3000;
  long eval_samples = 2000;
  double separation = 3.0;
  std::vector<int> hidden;
  // strategy constants
  double ucb_c = 0.1;
  double sfedavg_beta = 10.0;
  int poc_d0 = 0;
  double poc_decay = 0.9;
  int threads = 1;
  bool exact_sv = false;
};

void add_common_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--dataset", o.dataset, "Data source")
      ->check(CLI::IsMember({"synthetic", "mnist", "fmnist"}));
  cmd->add_option("--n", o.num_clients, "Total clients N");
  cmd->add_option("--m", o.budget, "Clients selected per round M");
  cmd->add_option("--rounds", o.rounds, "Communication rounds T");
  cmd->add_option("--alpha-dir", o.alpha_dir, "Dirichlet label-skew concentration");
  cmd->add_option("--size-law", o.size_law, "Client size distribution")
      ->check(CLI::IsMember({"power_law", "uniform"}));
  cmd->add_option("--straggler-frac", o.straggler_frac, "Straggler fraction x");
  cmd->add_option("--noise-sigma", o.noise_sigma, "Privacy noise scale sigma");
  cmd->add_option("--mu", o.mu, "FedProx proximal coefficient");
  cmd->add_option("--sv-mode", o.sv_mode, "Cumulative SV averaging")
      ->check(CLI::IsMember({"mean", "exp"}));
  cmd->add_option("--exp-alpha", o.exp_alpha, "Exponential averaging alpha");
  cmd->add_option("--sv-epsilon", o.sv_epsilon, "GTG-Shapley error threshold");
  cmd->add_option("--sv-max-iters", o.sv_max_iters,
                  "GTG-Shapley sampling-round cap (0 = 50*|S|)");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--epochs", o.epochs, "Local epochs E");
  cmd->add_option("--batches", o.batches, "Mini-batches per epoch B");
  cmd->add_option("--lr", o.lr, "Learning rate");
  cmd->add_option("--momentum", o.momentum, "SGD momentum");
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--data-dir", o.data_dir,
                  "IDX file directory (default: FEDSHAP_DATA_DIR)");
  cmd->add_option("--classes", o.classes, "Synthetic classes");
  cmd->add_option("--dim", o.dim, "Synthetic feature dimension");
  cmd->add_option("--train-samples", o.train_samples, "Synthetic training samples");
  cmd->add_option("--eval-samples", o.eval_samples,
                  "Synthetic evaluation pool (split into val/test halves)");
  cmd->add_option("--separation", o.separation, "Synthetic class separation");
  cmd->add_option("--hidden", o.hidden, "Hidden layer widths")->delimiter(',');
  cmd->add_option("--ucb-c", o.ucb_c, "UCB exploration constant");
  cmd->add_option("--sfedavg-beta", o.sfedavg_beta, "S-FedAvg softmax temperature");
  cmd->add_option("--poc-d0", o.poc_d0, "Power-Of-Choice initial query size (0 = N)");
  cmd->add_option("--poc-decay", o.poc_decay, "Power-Of-Choice query decay");
  cmd->add_option("--threads", o.threads, "Client-training threads (0 = hardware)");
  cmd->add_flag("--exact-sv", o.exact_sv,
                "Use the exact Shapley oracle instead of GTG (M <= 8)");
  cmd->set_config("--config", "", "INI config file (key=value; flags override)");
}

SimConfig build_config(const Options& o, const std::string& strategy_name) {
  SimConfig cfg;
  cfg.data.source = fedshap::data_source_from_string(o.dataset);
  cfg.data.data_dir = o.data_dir;
  cfg.data.classes = o.classes;
  cfg.data.dim = o.dim;
  cfg.data.train_samples = o.train_samples;
  cfg.data.eval_samples = o.eval_samples;
  cfg.data.separation = o.separation;
  cfg.num_clients = o.num_clients;
  cfg.budget = o.budget;
  cfg.rounds = o.rounds;
  cfg.partition.dirichlet_alpha = o.alpha_dir;
  cfg.partition.num_clients = o.num_clients;
  cfg.partition.size_law = fedshap::size_law_from_string(o.size_law);
  cfg.perturb.straggler_fraction = o.straggler_frac;
  cfg.perturb.noise_scale = o.noise_sigma;
  cfg.train.epochs = o.epochs;
  cfg.train.batches_per_epoch = o.batches;
  cfg.train.learning_rate = o.lr;
  cfg.train.momentum = o.momentum;
  cfg.train.prox_mu = o.mu;
  cfg.gtg.epsilon = o.sv_epsilon;
  cfg.gtg.max_iters = o.sv_max_iters;
  cfg.sv_mode = o.sv_mode == "exp" ? fedshap::SvMode::exponential : fedshap::SvMode::mean;
  cfg.exp_alpha = o.exp_alpha;
  cfg.seed = o.seed;
  cfg.hidden_dims = o.hidden;
  cfg.strategy.ucb_c = o.ucb_c;
  cfg.strategy.softmax_beta = o.sfedavg_beta;
  cfg.strategy.poc_query_size = o.poc_d0;
  cfg.strategy.poc_decay = o.poc_decay;
  cfg.threads = o.threads;
  cfg.use_exact_sv = o.exact_sv;

  if (strategy_name == "fedprox") {
    // FedProx is uniform random selection plus the proximal pull
    cfg.strategy.kind = fedshap::StrategyKind::fedavg;
    if (cfg.train.prox_mu == 0.0) cfg.train.prox_mu = 0.1;
  } else {
    cfg.strategy.kind = fedshap::strategy_from_string(strategy_name);
  }
  return cfg;
}

const std::vector<std::string> kStrategyNames = {
    "greedy_fed", "ucb", "s_fedavg", "fedavg", "fedprox", "power_of_choice",
    "centralized"};

int cmd_run(const Options& o) {
  const SimConfig cfg = build_config(o, o.strategy);
  const fedshap::RunResult result = fedshap::run(cfg);
  const fs::path dir = fedshap::write_run_result(o.out_dir, result);
  std::cout << "run " << o.strategy << " seed=" << o.seed << " -> " << dir.string()
            << "\nfinal test accuracy: " << result.records.back().test_accuracy
            << "\n";
  return 0;
}

int cmd_compare(const Options& o, const std::vector<std::string>& strategies,
                const std::vector<std::uint64_t>& seeds) {
  std::vector<SimConfig> configs;
  configs.reserve(strategies.size());
  for (const auto& name : strategies) configs.push_back(build_config(o, name));
  fedshap::CompareSummary summary = fedshap::compare(configs, seeds);
  for (std::size_t i = 0; i < summary.rows.size(); ++i) {
    summary.rows[i].label = strategies[i];  // keep "fedprox" distinct from "fedavg"
  }

  std::cout << fedshap::format_table(summary);
  fs::create_directories(o.out_dir);
  const fs::path csv_path = fs::path(o.out_dir) / "compare.csv";
  std::ofstream csv(csv_path);
  csv << "strategy,mean_acc,std_acc,accuracies\n";
  for (std::size_t i = 0; i < summary.rows.size(); ++i) {
    const auto& row = summary.rows[i];
    csv << strategies[i] << ',' << row.mean << ',' << row.stddev << ',' << '"';
    for (std::size_t j = 0; j < row.final_accuracies.size(); ++j) {
      if (j) csv << ';';
      csv << row.final_accuracies[j];
    }
    csv << '"' << '\n';
  }
  std::cout << "wrote " << csv_path.string() << "\n";
  return 0;
}

void apply_axis(SimConfig& cfg, const std::string& axis, double value) {
  if (axis == "alpha-dir" || axis == "alpha") {
    cfg.partition.dirichlet_alpha = value;
  } else if (axis == "rounds" || axis == "T") {
    cfg.rounds = static_cast<int>(value);
  } else if (axis == "straggler-frac" || axis == "x") {
    cfg.perturb.straggler_fraction = value;
  } else if (axis == "sigma" || axis == "noise-sigma") {
    cfg.perturb.noise_scale = value;
  } else {
    throw fedshap::ConfigError("unknown sweep axis: " + axis);
  }
}

int cmd_sweep(const Options& o, const std::string& axis,
              const std::vector<double>& values,
              const std::vector<std::string>& strategies,
              const std::vector<std::uint64_t>& seeds) {
  if (values.empty()) throw fedshap::ConfigError("sweep: --values must be nonempty");
  fs::create_directories(o.out_dir);
  const fs::path summary_path = fs::path(o.out_dir) / "sweep_summary.csv";
  std::ofstream summary(summary_path);
  summary << "strategy," << "axis," << "value,mean_acc,std_acc,accuracies\n";
  for (const auto& name : strategies) {
    for (double value : values) {
      std::vector<double> accs;
      for (std::uint64_t seed : seeds) {
        SimConfig cfg = build_config(o, name);
        apply_axis(cfg, axis, value);
        cfg.seed = seed;
        const fedshap::RunResult result = fedshap::run(cfg);
        fedshap::write_run_result(o.out_dir, result);
        accs.push_back(result.records.back().test_accuracy);
      }
      double mean = 0.0;
      for (double a : accs) mean += a;
      mean /= static_cast<double>(accs.size());
      double var = 0.0;
      for (double a : accs) var += (a - mean) * (a - mean);
      const double stddev =
          accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1)) : 0.0;
      summary << name << ',' << axis << ',' << value << ',' << mean << ',' << stddev
              << ',' << '"';
      for (std::size_t j = 0; j < accs.size(); ++j) {
        if (j) summary << ';';
        summary << accs[j];
      }
      summary << '"' << '\n';
      std::cout << name << " " << axis << "=" << value << " mean_acc=" << mean
                << " std=" << stddev << "\n";
    }
  }
  std::cout << "wrote " << summary_path.string() << "\n";
  return 0;
}

std::string series_label(const fs::path& csv_path) {
  const fs::path config_path = csv_path.parent_path() / "config.json";
  if (fs::exists(config_path)) {
    try {
      std::ifstream in(config_path);
      const auto j = nlohmann::json::parse(in);
      return j.at("strategy").at("kind").get<std::string>();
    } catch (...) {
      // fall through to the filename
    }
  }
  const fs::path parent = csv_path.parent_path().filename();
  return parent.empty() ? csv_path.stem().string() : parent.string();
}

int cmd_plot(const std::vector<std::string>& csv_paths, const std::string& svg_path) {
  std::vector<fedshap::PlotSeries> series;
  for (const auto& path : csv_paths) {
    fedshap::PlotSeries s;
    s.label = series_label(path);
    for (const auto& rec : fedshap::read_round_records_csv(path)) {
      s.accuracy.push_back(rec.test_accuracy);
    }
    series.push_back(std::move(s));
  }
  const std::string svg = fedshap::render_accuracy_svg(series);
  if (const fs::path parent = fs::path(svg_path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  std::ofstream out(svg_path, std::ios::binary);
  if (!out) throw fedshap::IngestError("cannot write " + svg_path);
  out << svg;
  std::cout << "wrote " << svg_path << "\n";
  return 0;
}

}  // namespace

void print_usage() {
  std::cout << "fedshap — federated-learning simulator with Shapley-value client "
               "selection\n\n"
               "usage: fedshap <verb> [options]\n\n"
               "verbs:\n"
               "  run      execute one simulation and persist its records\n"
               "  compare  multi-seed strategy table (mean ± std of final accuracy)\n"
               "  sweep    grid over one experiment axis per strategy\n"
               "  plot     accuracy-vs-round SVG from records.csv files\n\n"
               "run 'fedshap <verb> --help' for the verb's options\n";
}

// Each verb parses as its own app so --config (flat INI, flags override the
// file) applies to its options directly.
int parse_and_dispatch(int argc, char** argv) {
  const std::string verb = argc >= 2 ? argv[1] : "";
  if (verb.empty() || verb == "-h" || verb == "--help" || verb == "help") {
    print_usage();
    return verb.empty() ? 1 : 0;
  }

  std::vector<std::string> rest(argv + 2, argv + argc);
  std::reverse(rest.begin(), rest.end());  // CLI11's vector parse pops from the back

  if (verb == "run") {
    CLI::App app{"fedshap run — execute one simulation"};
    Options opts;
    add_common_options(&app, opts);
    app.add_option("--strategy", opts.strategy, "Client selection strategy")
        ->check(CLI::IsMember(kStrategyNames));
    try {
      app.parse(rest);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }
    return cmd_run(opts);
  }
  if (verb == "compare") {
    CLI::App app{"fedshap compare — multi-seed strategy table"};
    Options opts;
    std::vector<std::string> strategies = {"greedy_fed", "fedavg"};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    add_common_options(&app, opts);
    app.add_option("--strategies", strategies, "Strategies to compare")
        ->delimiter(',')
        ->check(CLI::IsMember(kStrategyNames));
    app.add_option("--seeds", seeds, "Seeds")->delimiter(',');
    try {
      app.parse(rest);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }
    return cmd_compare(opts, strategies, seeds);
  }
  if (verb == "sweep") {
    CLI::App app{"fedshap sweep — grid over one experiment axis per strategy"};
    Options opts;
    std::string axis = "sigma";
    std::vector<double> values;
    std::vector<std::string> strategies = {"greedy_fed", "fedavg"};
    std::vector<std::uint64_t> seeds = {1};
    add_common_options(&app, opts);
    app.add_option("--axis", axis, "Swept axis")
        ->check(CLI::IsMember({"alpha-dir", "alpha", "rounds", "T", "straggler-frac",
                               "x", "sigma", "noise-sigma"}));
    app.add_option("--values", values, "Axis values")->delimiter(',')->required();
    app.add_option("--strategies", strategies, "Strategies")
        ->delimiter(',')
        ->check(CLI::IsMember(kStrategyNames));
    app.add_option("--seeds", seeds, "Seeds")->delimiter(',');
    try {
      app.parse(rest);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }
    return cmd_sweep(opts, axis, values, strategies, seeds);
  }
  if (verb == "plot") {
    CLI::App app{"fedshap plot — accuracy-vs-round SVG from records.csv files"};
    std::vector<std::string> inputs;
    std::string svg = "out/curves.svg";
    app.add_option("csv", inputs, "RoundRecord CSV files")->required();
    app.add_option("--svg", svg, "Output SVG path");
    try {
      app.parse(rest);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }
    return cmd_plot(inputs, svg);
  }

  std::cerr << "error: unknown verb '" << verb << "'\n\n";
  print_usage();
  return 1;
}

int main(int argc, char** argv) {
  try {
    return parse_and_dispatch(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
