// advreg: train, attack and evaluate adversarially robust linear regression.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 solver did not
// converge (only with --strict), 4 derivative check failed.

#include "advreg/calculus.hpp"
#include "advreg/config.hpp"
#include "advreg/sweep.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

using namespace advreg;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNotConverged = 3, kCheckFailed = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 0;
  bool strict = false;
  std::string m_list;
  std::string delta_list;
  std::string dataset;
  std::string label_column;
  std::vector<std::string> settings;
  std::string model_path;
  bool trace = false;
};

std::string default_out_dir() {
  if (const char* env = std::getenv("ADVREG_OUT"); env && *env) return env;
  return "results";
}

ExperimentConfig build_config(const Options& opt) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty()) {
    if (!std::filesystem::exists(opt.config_path)) {
      throw UsageError("config file not found: " + opt.config_path);
    }
    cfg = load_config(opt.config_path);
  }
  for (const auto& s : opt.settings) apply_setting(cfg, s);
  if (!opt.dataset.empty()) cfg.dataset_path = opt.dataset;
  if (!opt.label_column.empty()) cfg.schema.label_column = opt.label_column;
  if (opt.jobs > 0) cfg.jobs = opt.jobs;
  if (opt.seed_given) cfg.seeds = {opt.seed};
  if (!opt.m_list.empty()) {
    cfg.m_grid.clear();
    for (double v : parse_number_list(opt.m_list)) {
      if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
        throw UsageError("--m takes positive integers");
      }
      cfg.m_grid.push_back(static_cast<std::size_t>(v));
    }
  }
  if (!opt.delta_list.empty()) cfg.delta_grid = parse_number_list(opt.delta_list);
  if (cfg.dataset_path.empty()) throw UsageError("no dataset given; use --dataset or a config file");
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

LabeledData load(const ExperimentConfig& cfg) {
  if (!std::filesystem::exists(cfg.dataset_path)) {
    throw DataError("dataset file not found: " + cfg.dataset_path);
  }
  return load_dataset(cfg.dataset_path, cfg.schema);
}

nlohmann::ordered_json weights_json(const Weights& w) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < w.size(); ++i) a.push_back(w[i]);
  return a;
}

Weights weights_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_array()) throw DataError("model file lacks '" + key + "' weights");
  Weights w(static_cast<Eigen::Index>(j[key].size()));
  for (std::size_t i = 0; i < j[key].size(); ++i) w[static_cast<Eigen::Index>(i)] = j[key][i].get<double>();
  return w;
}

std::string write_json(const std::string& dir, const std::string& name,
                       const nlohmann::ordered_json& j) {
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("cannot write " + path);
  return path;
}

void print_cell(const CellRecord& c) {
  if (!c.ok()) {
    std::printf("m=%zu delta=%.4g seed=%llu FAILED: %s\n", c.m, c.delta,
                static_cast<unsigned long long>(c.seed), c.error.c_str());
  } else {
    std::printf("m=%zu delta=%.4g seed=%llu mse_bilevel=%.6g mse_linreg=%.6g mse_bs=%.6g status=%s iters=%d\n",
                c.m, c.delta, static_cast<unsigned long long>(c.seed), c.mse_bilevel, c.mse_linreg,
                c.mse_bs, c.solver_status.c_str(), c.iterations);
  }
  std::fflush(stdout);
}

bool converged(const CellRecord& c) { return c.ok() && c.solver_status == "Converged"; }

int cmd_fit(const Options& opt) {
  const ExperimentConfig cfg = build_config(opt);
  const LabeledData data = load(cfg);
  const SeedContext ctx = prepare_seed(cfg, data.data, cfg.seeds.front());
  bool all_converged = true;
  for (auto m : cfg.m_grid) {
    for (double delta : cfg.delta_grid) {
      const CellResult res = run_cell(cfg, ctx, m, delta);
      print_cell(res.record);
      all_converged = all_converged && converged(res.record);
      nlohmann::ordered_json j;
      j["config_hash"] = cfg.hash();
      j["seed"] = ctx.seed;
      j["m"] = m;
      j["delta"] = delta;
      j["feature_names"] = data.feature_names;
      j["solver_status"] = res.record.solver_status;
      j["iterations"] = res.record.iterations;
      j["residual_norm"] = res.record.residual_norm;
      j["bilevel"] = weights_json(res.outcome.point.w());
      j["linreg"] = weights_json(ctx.linreg);
      j["bs"] = weights_json(res.bs.weights);
      std::ostringstream name;
      name << "model_" << cfg.hash() << "_m" << m << "_d" << delta << ".json";
      const std::string path = write_json(opt.out_dir, name.str(), j);
      std::printf("wrote %s\n", path.c_str());
      if (opt.trace) {
        const std::string trace_path = path.substr(0, path.size() - 5) + ".trace.jsonl";
        std::ofstream t(trace_path);
        write_trace(t, res.outcome.trace);
      }
    }
  }
  return opt.strict && !all_converged ? kNotConverged : kOk;
}

int cmd_attack(const Options& opt) {
  const ExperimentConfig cfg = build_config(opt);
  const LabeledData data = load(cfg);
  const SeedContext ctx = prepare_seed(cfg, data.data, cfg.seeds.front());
  LabeledData attacked{ctx.attacked.data, data.feature_names, data.label_name};
  std::filesystem::create_directories(opt.out_dir);
  const std::string stem = "attacked_" + cfg.hash() + "_s" + std::to_string(ctx.seed);
  const std::string csv_path = (std::filesystem::path(opt.out_dir) / (stem + ".csv")).string();
  {
    std::ofstream out(csv_path);
    write_csv(out, attacked);
  }
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& r : ctx.attacked.records) {
    records.push_back({{"index", r.index},
                       {"threshold", r.threshold},
                       {"target", r.target},
                       {"similarity", r.similarity},
                       {"loss_before", r.loss_before},
                       {"loss_after", r.loss_after}});
    std::printf("row=%zu threshold=%.4f similarity=%.6f loss_before=%.6g loss_after=%.6g\n", r.index,
                r.threshold, r.similarity, r.loss_before, r.loss_after);
  }
  nlohmann::ordered_json j;
  j["config_hash"] = cfg.hash();
  j["seed"] = ctx.seed;
  j["perturbation"] = ctx.attack.delta_perturbation;
  j["records"] = records;
  const std::string json_path = write_json(opt.out_dir, stem + ".json", j);
  std::printf("attacked %zu of %zu test rows; wrote %s and %s\n", ctx.attacked.records.size(),
              ctx.test.size(), csv_path.c_str(), json_path.c_str());
  return kOk;
}

int cmd_eval(const Options& opt) {
  if (opt.model_path.empty()) throw UsageError("eval needs --model <file written by fit>");
  std::ifstream in(opt.model_path);
  if (!in) throw DataError("model file not found: " + opt.model_path);
  nlohmann::json model;
  try {
    in >> model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse model file " + opt.model_path + ": " + e.what());
  }
  Options o = opt;
  if (!o.seed_given && model.contains("seed")) {
    o.seed = model["seed"].get<std::uint64_t>();
    o.seed_given = true;
  }
  const ExperimentConfig cfg = build_config(o);
  const LabeledData data = load(cfg);
  const SeedContext ctx = prepare_seed(cfg, data.data, cfg.seeds.front());
  for (const char* key : {"bilevel", "linreg", "bs"}) {
    const Weights w = weights_from_json(model, key);
    if (static_cast<std::size_t>(w.size()) != ctx.test.features()) {
      throw DataError(std::string("model weights '") + key + "' do not match the dataset width");
    }
    std::printf("%-8s mse_attacked=%.6g mse_clean=%.6g\n", key, evaluate_mse(w, ctx.attacked.data),
                evaluate_mse(w, ctx.test));
  }
  return kOk;
}

int run_and_report(const Options& opt, bool movement_only) {
  const ExperimentConfig cfg = build_config(opt);
  const LabeledData data = load(cfg);
  const ExperimentReport report = run_sweep(cfg, data, file_checksum(cfg.dataset_path), print_cell);
  const auto [json_path, csv_path] = write_report(report, opt.out_dir);
  const std::string movement_path =
      (std::filesystem::path(opt.out_dir) / ("movement_" + report.config_hash + ".csv")).string();
  {
    std::ofstream out(movement_path);
    out << "feature,mean_abs_displacement\n" << std::setprecision(17);
    for (std::size_t f = 0; f < report.feature_names.size(); ++f) {
      out << report.feature_names[f] << ',' << report.feature_movement[static_cast<Eigen::Index>(f)] << '\n';
    }
  }
  if (movement_only) {
    for (std::size_t f = 0; f < report.feature_names.size(); ++f) {
      std::printf("%-28s %.6g\n", report.feature_names[f].c_str(),
                  report.feature_movement[static_cast<Eigen::Index>(f)]);
    }
  }
  std::printf("wrote %s, %s and %s\n", json_path.c_str(), csv_path.c_str(), movement_path.c_str());
  bool all_converged = true;
  bool any_ok = false;
  for (const auto& c : report.cells) {
    all_converged = all_converged && converged(c);
    any_ok = any_ok || c.ok();
  }
  if (!any_ok) return kData;
  return opt.strict && !all_converged ? kNotConverged : kOk;
}

int cmd_check(const Options& opt) {
  const auto checks = run_derivative_checks(opt.seed);
  bool ok = true;
  std::printf("%-34s %10s %12s %9s %s\n", "derivative", "tolerance", "max_rel_err", "failures", "result");
  for (const auto& c : checks) {
    std::printf("%-34s %10.0e %12.3e %5d/%-3d %s\n", c.name.c_str(), c.tolerance, c.max_rel_error,
                c.failures, c.instances, c.passed() ? "PASS" : "FAIL");
    ok = ok && c.passed();
  }
  return ok ? kOk : kCheckFailed;
}

void add_common(CLI::App* cmd, Options& opt, bool grids) {
  cmd->add_option("--config", opt.config_path, "Experiment config file");
  cmd->add_option("--out", opt.out_dir, "Output directory (default $ADVREG_OUT or ./results)");
  cmd->add_option("--jobs", opt.jobs, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  cmd->add_flag("--strict", opt.strict, "Exit 3 when any bilevel solve does not converge");
  cmd->add_option("--dataset", opt.dataset, "CSV file with a header row");
  cmd->add_option("--label-column", opt.label_column, "Name of the label column");
  cmd->add_option("--set", opt.settings, "Override a config key, e.g. --set solver.eps=1e-8");
  if (grids) {
    cmd->add_option("--m", opt.m_list, "Adversary sizes, comma separated");
    cmd->add_option("--delta", opt.delta_list, "Cosine thresholds, comma separated");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarially robust linear regression via a pessimistic bilevel program"};
  app.require_subcommand(1);
  Options opt;
  opt.out_dir = default_out_dir();

  auto seed_option = [&](CLI::App* cmd, const std::string& help) {
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& s) {
          opt.seed = s;
          opt.seed_given = true;
        },
        help);
  };

  auto* fit = app.add_subcommand("fit", "Fit bilevel, LinReg and B&S models for one seed");
  add_common(fit, opt, true);
  seed_option(fit, "Seed (default: first seed of the config, else 0)");
  fit->add_flag("--trace", opt.trace, "Also write the solver iteration trace");

  auto* attack = app.add_subcommand("attack", "Write the attacked test set for one seed");
  add_common(attack, opt, false);
  seed_option(attack, "Seed (default: first seed of the config, else 0)");

  auto* eval = app.add_subcommand("eval", "Score a fitted model on the clean and attacked test sets");
  add_common(eval, opt, false);
  seed_option(eval, "Seed (default: the seed stored in the model file)");
  eval->add_option("--model", opt.model_path, "Model file written by fit")->required();

  auto* sweep = app.add_subcommand("sweep", "Run the (m, delta, seed) grid and write the report");
  add_common(sweep, opt, true);
  seed_option(sweep, "Run a single seed instead of the configured list");

  auto* movement = app.add_subcommand("movement", "Run the grid and print per-feature movement");
  add_common(movement, opt, true);
  seed_option(movement, "Run a single seed instead of the configured list");

  auto* check = app.add_subcommand("check-derivatives",
                                   "Compare analytic derivatives with finite differences");
  seed_option(check, "Seed of the random instances (default 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*fit) return cmd_fit(opt);
    if (*attack) return cmd_attack(opt);
    if (*eval) return cmd_eval(opt);
    if (*sweep) return run_and_report(opt, false);
    if (*movement) return run_and_report(opt, true);
    if (*check) return cmd_check(opt);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
