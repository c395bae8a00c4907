// creditlab: generate a consumer-finance universe, build analytical tables,
// train scorecards, sweep profit curves and run acceptance strategies.
// Every command regenerates the world from the config and seed, so outputs
// are pure functions of their inputs; each run drops a manifest beside them.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "creditlab/abt.hpp"
#include "creditlab/csv.hpp"
#include "creditlab/engine.hpp"
#include "creditlab/finance.hpp"
#include "creditlab/reports.hpp"
#include "creditlab/scorecard.hpp"
#include "creditlab/simkernel.hpp"
#include "creditlab/world_io.hpp"

namespace {

using namespace creditlab;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> period_from, period_to;
  std::string models_dir = "data/models";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_models) {
  cmd->add_option("--config", args.config_path, "generator config JSON")->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--period-from", args.period_from, "first decision month, yyyymm");
  cmd->add_option("--period-to", args.period_to, "last decision month, yyyymm");
  if (with_models)
    cmd->add_option("--models", args.models_dir, "scorecard suite directory");
}

// Everything a command needs before doing verb-specific work.
struct RunContext {
  GenConfig cfg;
  World world;
  Period from, to;
  std::filesystem::path out;
  RunManifest manifest;
};

RunContext prepare(const CommonArgs& args, const std::string& command_line) {
  RunContext ctx;
  ctx.cfg = load_gen_config(args.config_path);
  if (args.seed) ctx.cfg.seed = *args.seed;
  ctx.from = args.period_from ? Period::from_yyyymm(*args.period_from) : ctx.cfg.start_period;
  ctx.to = args.period_to ? Period::from_yyyymm(*args.period_to) : ctx.cfg.end_period;
  if (ctx.from > ctx.to) throw ConfigError("--period-from lies after --period-to");

  ctx.out = args.out_dir;
  std::filesystem::create_directories(ctx.out);

  ctx.manifest.command = command_line;
  ctx.manifest.config_digest = hex64(fnv1a64(gen_config_to_json(ctx.cfg)));
  ctx.manifest.seed = ctx.cfg.seed;
  ctx.manifest.inputs.push_back(args.config_path);

  const auto start = Clock::now();
  ctx.world = generate_world(ctx.cfg);
  ctx.manifest.timings.emplace_back("generate", seconds_since(start));
  return ctx;
}

std::string out_file(RunContext& ctx, const std::string& name) {
  const std::string path = (ctx.out / name).string();
  ctx.manifest.outputs.push_back(path);
  return path;
}

void finish(RunContext& ctx) {
  const std::string path = (ctx.out / "manifest.json").string();
  ctx.manifest.outputs.push_back(path);
  save_manifest(ctx.manifest, path);
  std::printf("wrote %s\n", path.c_str());
}

Pricing era_pricing(const GenConfig& cfg, Product p) {
  const ProductPricing& src = p == Product::Ins ? cfg.pricing_ins : cfg.pricing_css;
  return Pricing{src.apr, src.provision, src.lgd};
}

// ---- the universe ABT, shared by abt / train / curve --------------------------

struct UniverseAbt {
  std::vector<AbtRow> rows;   // aligned with world.apps
};

UniverseAbt build_universe_abt(const World& w) {
  UniverseAbt abt;
  abt.rows.reserve(w.apps.size());
  for (const Application& a : w.apps) {
    const auto history = universe_history(w, a.account.customer_id);
    abt.rows.push_back(
        build_abt_row(a, w.profile_of(a), history, a.account.open_period));
  }
  return abt;
}

// ---- verbs ---------------------------------------------------------------------

void cmd_gen(RunContext& ctx) {
  const auto start = Clock::now();
  write_production_csv(ctx.world, Product::Ins, out_file(ctx, "production_ins.csv"));
  write_production_csv(ctx.world, Product::Css, out_file(ctx, "production_css.csv"));
  write_transactions_csv(ctx.world, Product::Ins, out_file(ctx, "transactions_ins.csv"));
  write_transactions_csv(ctx.world, Product::Css, out_file(ctx, "transactions_css.csv"));
  save_gen_config(ctx.cfg, out_file(ctx, "config.json"));
  ctx.manifest.timings.emplace_back("write", seconds_since(start));

  std::int64_t ins = 0, css = 0, snapshots = 0;
  for (std::uint32_t i = 0; i < ctx.world.apps.size(); ++i) {
    (ctx.world.apps[i].account.product == Product::Ins ? ins : css) += 1;
    snapshots += static_cast<std::int64_t>(ctx.world.snapshots_of(i).size());
  }
  ctx.manifest.metrics.emplace_back("accounts_ins", static_cast<double>(ins));
  ctx.manifest.metrics.emplace_back("accounts_css", static_cast<double>(css));
  ctx.manifest.metrics.emplace_back("snapshots", static_cast<double>(snapshots));
  ctx.manifest.metrics.emplace_back("default_12", global_default12_rate(ctx.world));
}

void cmd_abt(RunContext& ctx) {
  auto start = Clock::now();
  const UniverseAbt abt = build_universe_abt(ctx.world);
  ctx.manifest.timings.emplace_back("build_abt", seconds_since(start));

  start = Clock::now();
  CsvWriter csv(out_file(ctx, "abt.csv"), abt_csv_header(true));
  for (std::size_t i = 0; i < abt.rows.size(); ++i) {
    const Application& a = ctx.world.apps[i];
    AbtLabels labels;
    labels.product = a.account.product;
    labels.default_k = a.default_k;
    append_abt_csv_row(csv, abt.rows[i], &labels);
  }
  csv.close();
  ctx.manifest.timings.emplace_back("write", seconds_since(start));
  ctx.manifest.metrics.emplace_back("rows", static_cast<double>(abt.rows.size()));
}

// Scorecards refit from scratch on the generated universe. Each model keeps
// the variable menu of its shipped counterpart.
void cmd_train(RunContext& ctx) {
  auto start = Clock::now();
  const UniverseAbt abt = build_universe_abt(ctx.world);
  ctx.manifest.timings.emplace_back("build_abt", seconds_since(start));
  const World& w = ctx.world;
  const int horizon = w.cfg.propensity.pr_horizon_months;

  struct TrainSet {
    std::vector<AbtRow> rows;
    std::vector<int> target;
  };
  TrainSet pd_ins, pd_css, cross, pr;
  for (std::size_t i = 0; i < w.apps.size(); ++i) {
    const Application& a = w.apps[i];
    const AbtRow& row = abt.rows[i];
    if (a.account.product == Product::Css) {
      pd_css.rows.push_back(row);
      pd_css.target.push_back(a.defaulted(12) ? 1 : 0);
      continue;
    }
    pd_ins.rows.push_back(row);
    pd_ins.target.push_back(a.defaulted(12) ? 1 : 0);
    pr.rows.push_back(row);
    pr.target.push_back(future_response_target(w, a.account.customer_id,
                                               a.account.open_period, horizon)
                            ? 1
                            : 0);
    const auto cross_target = future_cash_default_target(w, a.account.customer_id,
                                                         a.account.open_period, horizon);
    if (cross_target) {
      cross.rows.push_back(row);
      cross.target.push_back(*cross_target ? 1 : 0);
    }
  }

  auto fit = [&](const char* name, TrainSet& set, std::vector<std::string> variables) {
    FitSpec spec;
    spec.model_name = name;
    spec.variables = std::move(variables);
    const Model m = fit_scorecard(set.rows, set.target, spec);
    std::vector<double> p;
    p.reserve(set.rows.size());
    std::vector<int> y;
    for (std::size_t i = 0; i < set.rows.size(); ++i) {
      const auto prob = try_probability(set.rows[i], m);
      if (!prob) continue;
      p.push_back(*prob);
      y.push_back(set.target[i]);
    }
    const auto g = try_gini(p, y);
    ctx.manifest.metrics.emplace_back(std::string("gini_") + name, g.value_or(0.0));
    return m;
  };

  start = Clock::now();
  ModelSuite suite;
  suite.pd_ins = fit("pd_ins", pd_ins,
                     {"ACT_CC", "ACT_CINS_MIN_SENIORITY", "ACT_CINS_N_LOAN", "ACT_CINS_N_STATC",
                      "APP_CHAR_JOB_CODE", "APP_CHAR_MARITAL_STATUS", "APP_LOAN_AMOUNT",
                      "APP_NUMBER_OF_CHILDREN"});
  suite.pd_css = fit("pd_css", pd_css,
                     {"ACT_AGE", "ACT_CALL_CC", "ACT_CCSS_DUEUTL", "ACT_CCSS_MIN_LNINST",
                      "ACT_CCSS_N_STATC", "AGS3_MEAN_CMAXA_DUE", "APP_NUMBER_OF_CHILDREN"});
  suite.cross_pd_css = fit("cross_pd_css", cross,
                           {"ACT12_N_GOOD_DAYS", "ACT_CCSS_MAXDUE", "ACT_CCSS_N_STATC",
                            "ACT_CCSS_UTL", "AGS3_MEAN_CMAXA_DUE", "APP_INCOME"});
  suite.pr_css = fit("pr_css", pr,
                     {"ACT_CCSS_MIN_SENIORITY", "ACT_CCSS_N_LOAN", "ACT_CCSS_N_STATC",
                      "ACT_CINS_N_STATC"});
  ctx.manifest.timings.emplace_back("fit", seconds_since(start));

  save_suite(suite, ctx.out.string());
  for (const char* name : {"pd_ins", "pd_css", "cross_pd_css", "pr_css"})
    ctx.manifest.outputs.push_back((ctx.out / (std::string(name) + ".json")).string());
}

// Full-information profit curve per product, ranked by the suite's PD score.
void cmd_curve(RunContext& ctx, const CommonArgs& args) {
  const ModelSuite suite = load_suite(args.models_dir);
  ctx.manifest.inputs.push_back(args.models_dir);
  const World& w = ctx.world;

  const auto start = Clock::now();
  const UniverseAbt abt = build_universe_abt(w);
  for (const Product p : {Product::Ins, Product::Css}) {
    const Model& model = p == Product::Ins ? suite.pd_ins : suite.pd_css;
    std::vector<double> pd;
    std::vector<LoanOutcome> loans;
    std::int64_t unscored = 0;
    for (std::size_t i = 0; i < w.apps.size(); ++i) {
      const Application& a = w.apps[i];
      if (a.account.product != p) continue;
      if (a.account.open_period < ctx.from || a.account.open_period > ctx.to) continue;
      const auto prob = try_probability(abt.rows[i], model);
      if (!prob) {
        unscored += 1;
        continue;
      }
      pd.push_back(*prob);
      loans.push_back(LoanOutcome{a.account.amount, a.account.n_installments, a.defaulted(12)});
    }
    const auto curve = profit_curve(pd, loans, era_pricing(w.cfg, p));
    const std::string name = std::string("curve_") + product_name(p) + ".csv";
    write_profit_curve_csv(curve, out_file(ctx, name));
    const CurvePoint& best = best_cutoff(curve);
    const std::string tag = product_name(p);
    ctx.manifest.metrics.emplace_back("best_profit_" + tag, best.profit);
    ctx.manifest.metrics.emplace_back("best_threshold_" + tag, best.threshold);
    ctx.manifest.metrics.emplace_back("best_acceptance_" + tag, best.acceptance_rate);
    ctx.manifest.metrics.emplace_back("unscored_" + tag, static_cast<double>(unscored));
  }
  ctx.manifest.timings.emplace_back("sweep", seconds_since(start));
}

void cmd_grid(RunContext& ctx, const CommonArgs& args, int groups) {
  const ModelSuite suite = load_suite(args.models_dir);
  ctx.manifest.inputs.push_back(args.models_dir);

  const auto start = Clock::now();
  const CutoffDerivation d = derive_cutoff_strategy(ctx.world, suite, ctx.from, ctx.to, groups);
  ctx.manifest.timings.emplace_back("derive", seconds_since(start));

  write_profit_curve_csv(d.css_curve, out_file(ctx, "css_curve.csv"));
  write_segment_grid_csv(d.grid, out_file(ctx, "segment_grid.csv"));
  save_strategy(d.strategy, out_file(ctx, "derived_strategy.json"));
  ctx.manifest.metrics.emplace_back("css_cut", d.css_cut);
  ctx.manifest.metrics.emplace_back("t0", d.t0);
  ctx.manifest.metrics.emplace_back("t1", d.t1);
  ctx.manifest.metrics.emplace_back("pr_floor", d.pr_floor);
}

void write_decisions_csv(const World& w, std::span<const AppDecision> decisions,
                         const std::string& path) {
  CsvWriter csv(path, {"cid", "product", "open_period", "accepted", "reason", "pd_ins",
                       "pd_css", "cross_pd_css", "pr_css", "missing_operand"});
  auto cell = [&](const std::optional<double>& v) { csv.field(v ? *v : missing_value()); };
  for (const AppDecision& d : decisions) {
    const Application& a = w.apps[d.app_index];
    csv.field(a.account.account_id);
    csv.field(product_name(a.account.product));
    csv.field(a.account.open_period.yyyymm());
    csv.field(d.accepted ? 1 : 0);
    csv.field(d.reason);
    cell(d.scores.pd_ins);
    cell(d.scores.pd_css);
    cell(d.scores.cross_pd_css);
    cell(d.scores.pr_css);
    csv.field(d.missing_operand ? 1 : 0);
    csv.end_row();
  }
  csv.close();
}

void cmd_strategy(RunContext& ctx, const CommonArgs& args, const std::string& strategy_path) {
  const ModelSuite suite = load_suite(args.models_dir);
  const Strategy strategy = load_strategy(strategy_path);
  ctx.manifest.inputs.push_back(args.models_dir);
  ctx.manifest.inputs.push_back(strategy_path);

  auto start = Clock::now();
  const StrategyRun run = run_strategy(ctx.world, suite, strategy, ctx.from, ctx.to);
  ctx.manifest.timings.emplace_back("decide", seconds_since(start));

  start = Clock::now();
  const RejectInferenceReport ri =
      expected_vs_realized(ctx.world, suite, strategy, ctx.from, ctx.to);
  ctx.manifest.timings.emplace_back("reject_inference", seconds_since(start));

  save_strategy_report(run.report, out_file(ctx, "strategy_report.json"));
  write_strategy_report_csv(run.report, out_file(ctx, "strategy_report.csv"));
  write_decisions_csv(ctx.world, run.decisions, out_file(ctx, "decisions.csv"));
  {
    std::ofstream out(out_file(ctx, "reject_inference.json"));
    if (!out.good()) throw DataError("cannot write reject_inference.json");
    out << reject_inference_to_json(ri);
  }
  ctx.manifest.metrics.emplace_back("accepted", static_cast<double>(run.bank.accepted_count()));
  ctx.manifest.metrics.emplace_back("expected_profit", ri.expected_profit);
  ctx.manifest.metrics.emplace_back("realized_profit", ri.realized_profit);
  ctx.manifest.metrics.emplace_back("gap", ri.gap);
  ctx.manifest.metrics.emplace_back("relative_gap", ri.relative_gap);
}

void cmd_report(RunContext& ctx, const std::vector<double>& noise_levels) {
  const World& w = ctx.world;
  const auto start = Clock::now();
  write_vintage_csv(vintage_report(w, Product::Ins), Product::Ins,
                    out_file(ctx, "vintage_ins.csv"));
  write_vintage_csv(vintage_report(w, Product::Css), Product::Css,
                    out_file(ctx, "vintage_css.csv"));

  const auto stock = stock_report(w);
  write_stock_csv(stock, out_file(ctx, "stock.csv"));
  double responses = 0.0, holders = 0.0;
  for (const StockRow& r : stock) {
    responses += static_cast<double>(r.css_apps_next);
    holders += static_cast<double>(r.active_customers);
  }
  ctx.manifest.metrics.emplace_back("mean_response_rate",
                                    holders > 0.0 ? responses / holders : 0.0);

  const auto power =
      power_profit_experiment(w, noise_levels, w.cfg.seed, era_pricing(w.cfg, Product::Ins));
  write_power_profit_csv(power, out_file(ctx, "power_profit.csv"));
  ctx.manifest.metrics.emplace_back("default_12", global_default12_rate(w));
  ctx.manifest.timings.emplace_back("report", seconds_since(start));
}

std::string join_args(int argc, char** argv) {
  std::string line = "creditlab";
  for (int i = 1; i < argc; ++i) {
    line += ' ';
    line += argv[i];
  }
  return line;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"consumer-finance simulation and credit-decisioning laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string strategy_path;
  int groups = 5;
  std::vector<double> noise_levels{0.0, 0.25, 0.5, 0.75, 1.0};

  CLI::App* gen = app.add_subcommand("gen", "generate the universe datasets");
  add_common(gen, args, false);
  CLI::App* abt = app.add_subcommand("abt", "build the analytical base table");
  add_common(abt, args, false);
  CLI::App* train = app.add_subcommand("train", "refit the scorecard suite");
  add_common(train, args, false);
  CLI::App* curve = app.add_subcommand("curve", "sweep profit curves per product");
  add_common(curve, args, true);
  CLI::App* grid = app.add_subcommand("grid", "derive cut-offs from the segment grid");
  add_common(grid, args, true);
  grid->add_option("--groups", groups, "quantile groups per axis");
  CLI::App* strategy = app.add_subcommand("strategy", "run an acceptance strategy");
  add_common(strategy, args, true);
  strategy->add_option("--strategy", strategy_path, "strategy JSON")->required();
  CLI::App* report = app.add_subcommand("report", "vintage, stock and power-profit reports");
  add_common(report, args, false);
  report->add_option("--noise", noise_levels, "noise levels for the power experiment");

  CLI11_PARSE(app, argc, argv);

  try {
    RunContext ctx = prepare(args, join_args(argc, argv));
    if (gen->parsed()) cmd_gen(ctx);
    else if (abt->parsed()) cmd_abt(ctx);
    else if (train->parsed()) cmd_train(ctx);
    else if (curve->parsed()) cmd_curve(ctx, args);
    else if (grid->parsed()) cmd_grid(ctx, args, groups);
    else if (strategy->parsed()) cmd_strategy(ctx, args, strategy_path);
    else if (report->parsed()) cmd_report(ctx, noise_levels);
    finish(ctx);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
