#include "advreg/sweep.hpp"

#include "advreg/random.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <thread>

namespace advreg {

namespace {

// Independent random streams of one seed.
constexpr std::uint64_t kSplitStream = 0;
constexpr std::uint64_t kTrainingStream = 1;
constexpr std::uint64_t kAttackStream = 2;

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json vector_json(const Vector& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ContractError("split ratio must lie in (0, 1)");
  if (m_grid.empty() || delta_grid.empty() || seeds.empty()) {
    throw ContractError("m grid, delta grid and seed list must be nonempty");
  }
  for (auto m : m_grid) {
    if (m < 1) throw ContractError("adversary sizes must be >= 1");
  }
  for (double d : delta_grid) {
    if (!(d > -1.0 && d <= 1.0)) throw ContractError("delta values must lie in (-1, 1]");
  }
  if (!(attacked_fraction > 0.0 && attacked_fraction <= 1.0)) {
    throw ContractError("attacked fraction must lie in (0, 1]");
  }
  if (ridge && !(*ridge > 0.0)) throw ContractError("ridge weight must be > 0");
  if (nu && !(*nu >= 0.0)) throw ContractError("nu must be >= 0");
  if (!(bs.proximal > 0.0)) throw ContractError("B&S proximal weight must be > 0");
  if (jobs < 1) throw ContractError("jobs must be >= 1");
  solver.validate();
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["dataset"] = {{"path", dataset_path},
                  {"label_column", schema.label_column},
                  {"feature_columns", schema.feature_columns},
                  {"exclude_columns", schema.exclude_columns}};
  j["split"] = {{"ratio", split_ratio}};
  j["grid"] = {{"m", m_grid}, {"delta", delta_grid}, {"seeds", seeds}};
  j["attack"] = {{"fraction", attacked_fraction}};
  j["model"] = {{"ridge", optional_json(ridge)},
                {"nu", optional_json(nu)},
                {"bs_proximal", bs.proximal},
                {"bs_gradient_tol", bs.gradient_tol},
                {"bs_max_iter", bs.max_iter}};
  j["solver"] = {{"eps", solver.eps},
                 {"kappa", solver.kappa},
                 {"sigma", solver.sigma},
                 {"step_beta", solver.step_beta},
                 {"gamma1", solver.gamma1},
                 {"gamma2", solver.gamma2},
                 {"angle_rho", solver.angle_rho},
                 {"min_step", solver.min_step},
                 {"eta", solver.eta},
                 {"stall_window", solver.stall_window},
                 {"max_iter", solver.max_iter},
                 {"max_backtracks", solver.max_backtracks},
                 {"refine_steps", solver.refine_steps}};
  return j;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(to_json().dump()); }

SeedContext prepare_seed(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed) {
  SeedContext ctx;
  ctx.seed = seed;
  ctx.raw = split(data, cfg.split_ratio, derive_seed(seed, kSplitStream));
  ctx.scaler = MinMaxScaler::fit(ctx.raw.train);
  ctx.train = ctx.scaler.transform(ctx.raw.train);
  ctx.test = ctx.scaler.transform(ctx.raw.test);
  ctx.linreg = fit_linreg(ctx.train, cfg.ridge);
  ctx.attack = make_attack_spec(ctx.test, cfg.attacked_fraction, derive_seed(seed, kAttackStream));
  ctx.attacked = build_attacked_testset(ctx.test, ctx.linreg, ctx.attack);
  return ctx;
}

CellResult run_cell(const ExperimentConfig& cfg, const SeedContext& ctx, std::size_t m, double delta) {
  CellResult res;
  CellRecord& rec = res.record;
  rec.m = m;
  rec.delta = delta;
  rec.seed = ctx.seed;

  res.training = make_training_split(ctx.train, m, cfg.nu, derive_seed(ctx.seed, kTrainingStream));
  Problem problem{res.training.static_set, res.training.adversary, ModelConfig{}};
  problem.cfg.delta = delta;
  problem.cfg.ridge = cfg.ridge;
  problem.cfg.nu = res.training.nu;

  res.outcome = solve(problem, cfg.solver);
  res.bs = fit_bs(problem.static_set, problem.adversary, problem.cfg, cfg.bs);

  const Weights w_bilevel = res.outcome.point.w();
  const Dataset& attacked = ctx.attacked.data;
  rec.mse_bilevel = evaluate_mse(w_bilevel, attacked);
  rec.mse_linreg = evaluate_mse(ctx.linreg, attacked);
  rec.mse_bs = evaluate_mse(res.bs.weights, attacked);
  rec.mse_bilevel_clean = evaluate_mse(w_bilevel, ctx.test);
  rec.mse_linreg_clean = evaluate_mse(ctx.linreg, ctx.test);
  rec.mse_bs_clean = evaluate_mse(res.bs.weights, ctx.test);
  rec.solver_status = to_string(res.outcome.status);
  rec.iterations = res.outcome.iterations;
  rec.residual_norm = res.outcome.residual_norm;
  rec.bs_converged = res.bs.converged;
  rec.movement = feature_movement(res.outcome.point.X(), problem.adversary.origin);
  return res;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(workers, count); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size()));
}

}  // namespace

ExperimentReport run_sweep(const ExperimentConfig& cfg, const LabeledData& data,
                           const std::string& dataset_checksum, const CellCallback& on_cell) {
  cfg.validate();
  data.data.validate();

  ExperimentReport report;
  report.config = cfg.to_json();
  report.config_hash = cfg.hash();
  report.dataset_checksum = dataset_checksum;
  report.feature_names = data.feature_names;

  std::vector<std::optional<SeedContext>> contexts(cfg.seeds.size());
  std::vector<std::string> seed_errors(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t s) {
    try {
      contexts[s] = prepare_seed(cfg, data.data, cfg.seeds[s]);
    } catch (const std::exception& e) {
      seed_errors[s] = e.what();
    }
  });

  // Cell order: m outermost, then delta, then seed.
  struct Job {
    std::size_t m;
    double delta;
    std::size_t seed_slot;
  };
  std::vector<Job> jobs;
  for (auto m : cfg.m_grid) {
    for (double d : cfg.delta_grid) {
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) jobs.push_back({m, d, s});
    }
  }

  report.cells.resize(jobs.size());
  std::mutex callback_mutex;
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t k) {
    const Job& job = jobs[k];
    CellRecord rec;
    if (!contexts[job.seed_slot]) {
      rec.m = job.m;
      rec.delta = job.delta;
      rec.seed = cfg.seeds[job.seed_slot];
      rec.error = seed_errors[job.seed_slot];
    } else {
      try {
        rec = run_cell(cfg, *contexts[job.seed_slot], job.m, job.delta).record;
      } catch (const std::exception& e) {
        rec = CellRecord{};
        rec.m = job.m;
        rec.delta = job.delta;
        rec.seed = cfg.seeds[job.seed_slot];
        rec.error = e.what();
      }
    }
    report.cells[k] = rec;
    if (on_cell) {
      std::lock_guard<std::mutex> lock(callback_mutex);
      on_cell(report.cells[k]);
    }
  });

  const std::size_t q = data.data.features();
  report.feature_movement = Vector::Zero(static_cast<Eigen::Index>(q));
  int moved = 0;
  for (auto m : cfg.m_grid) {
    for (double d : cfg.delta_grid) {
      Aggregate agg;
      agg.m = m;
      agg.delta = d;
      std::vector<double> bi, lr, bs;
      for (const auto& c : report.cells) {
        if (c.m != m || c.delta != d || !c.ok()) continue;
        bi.push_back(c.mse_bilevel);
        lr.push_back(c.mse_linreg);
        bs.push_back(c.mse_bs);
      }
      agg.cells = static_cast<int>(bi.size());
      mean_std(bi, agg.mean_bilevel, agg.std_bilevel);
      mean_std(lr, agg.mean_linreg, agg.std_linreg);
      mean_std(bs, agg.mean_bs, agg.std_bs);
      report.aggregates.push_back(agg);
    }
  }
  for (const auto& c : report.cells) {
    if (!c.ok()) continue;
    report.feature_movement += c.movement;
    ++moved;
  }
  if (moved > 0) report.feature_movement /= static_cast<double>(moved);
  return report;
}

ExperimentReport run_sweep(const ExperimentConfig& cfg, const CellCallback& on_cell) {
  const LabeledData data = load_dataset(cfg.dataset_path, cfg.schema);
  return run_sweep(cfg, data, file_checksum(cfg.dataset_path), on_cell);
}

nlohmann::ordered_json ExperimentReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["provenance"] = {{"config_hash", config_hash}, {"dataset_checksum", dataset_checksum}};
  j["config"] = config;
  j["feature_names"] = feature_names;
  nlohmann::ordered_json cells_json = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json cj;
    cj["m"] = c.m;
    cj["delta"] = c.delta;
    cj["seed"] = c.seed;
    if (c.ok()) {
      cj["mse_bilevel"] = c.mse_bilevel;
      cj["mse_linreg"] = c.mse_linreg;
      cj["mse_bs"] = c.mse_bs;
      cj["mse_bilevel_clean"] = c.mse_bilevel_clean;
      cj["mse_linreg_clean"] = c.mse_linreg_clean;
      cj["mse_bs_clean"] = c.mse_bs_clean;
      cj["solver_status"] = c.solver_status;
      cj["iterations"] = c.iterations;
      cj["residual_norm"] = c.residual_norm;
      cj["bs_converged"] = c.bs_converged;
      cj["movement"] = vector_json(c.movement);
    } else {
      cj["error"] = c.error;
    }
    cells_json.push_back(cj);
  }
  j["cells"] = cells_json;
  nlohmann::ordered_json agg_json = nlohmann::ordered_json::array();
  for (const auto& a : aggregates) {
    agg_json.push_back({{"m", a.m},
                        {"delta", a.delta},
                        {"cells", a.cells},
                        {"mse_bilevel_mean", a.mean_bilevel},
                        {"mse_bilevel_std", a.std_bilevel},
                        {"mse_linreg_mean", a.mean_linreg},
                        {"mse_linreg_std", a.std_linreg},
                        {"mse_bs_mean", a.mean_bs},
                        {"mse_bs_std", a.std_bs}});
  }
  j["aggregates"] = agg_json;
  nlohmann::ordered_json movement = nlohmann::ordered_json::object();
  for (std::size_t f = 0; f < feature_names.size(); ++f) {
    movement[feature_names[f]] = feature_movement[static_cast<Eigen::Index>(f)];
  }
  j["feature_movement"] = movement;
  return j;
}

void ExperimentReport::write_csv(std::ostream& out) const {
  out << "m,delta,seed,mse_bilevel,mse_linreg,mse_bs,mse_bilevel_clean,mse_linreg_clean,"
         "mse_bs_clean,solver_status,iterations,residual_norm,bs_converged,error\n";
  out << std::setprecision(17);
  for (const auto& c : cells) {
    out << c.m << ',' << c.delta << ',' << c.seed << ',';
    if (c.ok()) {
      out << c.mse_bilevel << ',' << c.mse_linreg << ',' << c.mse_bs << ',' << c.mse_bilevel_clean
          << ',' << c.mse_linreg_clean << ',' << c.mse_bs_clean << ',' << c.solver_status << ','
          << c.iterations << ',' << c.residual_norm << ',' << (c.bs_converged ? 1 : 0) << ",\n";
    } else {
      std::string msg = c.error;
      for (auto& ch : msg) {
        if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
      }
      out << ",,,,,,,,,," << msg << '\n';
    }
  }
}

std::pair<std::string, std::string> write_report(const ExperimentReport& report,
                                                 const std::string& directory) {
  std::filesystem::create_directories(directory);
  const std::filesystem::path dir(directory);
  const std::string json_path = (dir / ("report_" + report.config_hash + ".json")).string();
  const std::string csv_path = (dir / ("cells_" + report.config_hash + ".csv")).string();
  {
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + json_path + "'");
    out << report.to_json().dump(2) << '\n';
  }
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + csv_path + "'");
    report.write_csv(out);
  }
  return {json_path, csv_path};
}

}  // namespace advreg
