#include "creditlab/engine.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace creditlab {

namespace {

using ordered_json = nlohmann::ordered_json;

Pricing era_pricing(const GenConfig& cfg, Product p) {
  const ProductPricing& pp = cfg.pricing(p);
  return Pricing{pp.apr, pp.provision, pp.lgd};
}

LoanOutcome ground_truth(const Application& a) {
  return LoanOutcome{a.account.amount, a.account.n_installments, a.defaulted(12)};
}

std::string short_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw DomainError("number too long to print");
  return std::string(buf, ptr);
}

}  // namespace

// ---- strategies ------------------------------------------------------------

std::vector<const StrategyRule*> Strategy::rules_for(Product p) const {
  std::vector<const StrategyRule*> out;
  for (const StrategyRule& r : rules)
    if (r.product == p) out.push_back(&r);
  return out;
}

namespace {

void validate_strategy(const Strategy& s) {
  for (Product p : {Product::Ins, Product::Css}) {
    std::set<std::string> seen;
    for (const StrategyRule* r : s.rules_for(p)) {
      if (r->reason.empty()) throw ConfigError(s.id + ": a rule without a reason");
      if (r->reason == kNotKnownCustomer || r->reason == kAcceptedLabel ||
          r->reason == kAllLabel)
        throw ConfigError(s.id + ": rule reason '" + r->reason + "' is reserved");
      if (!seen.insert(r->reason).second)
        throw ConfigError(s.id + ": duplicate rule reason '" + r->reason + "'");
    }
  }
}

}  // namespace

Strategy strategy_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("strategy file is not valid JSON: ") + e.what());
  }
  Strategy s;
  try {
    s.id = j.at("id").get<std::string>();
    s.description = j.value("description", std::string());
    for (const ordered_json& r : j.at("rules")) {
      StrategyRule rule;
      std::string product = r.at("product").get<std::string>();
      std::transform(product.begin(), product.end(), product.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (product == "ins") rule.product = Product::Ins;
      else if (product == "css") rule.product = Product::Css;
      else throw ConfigError("unknown product '" + product + "' in strategy " + s.id);
      rule.reason = r.at("reason").get<std::string>();
      rule.rule = parse_rule(r.at("rule").get<std::string>());
      s.rules.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("strategy file is missing fields: ") + e.what());
  }
  validate_strategy(s);
  return s;
}

std::string strategy_to_json(const Strategy& s) {
  ordered_json j;
  j["id"] = s.id;
  j["description"] = s.description;
  j["rules"] = ordered_json::array();
  for (const StrategyRule& r : s.rules) {
    ordered_json jr;
    jr["product"] = product_name(r.product);
    jr["reason"] = r.reason;
    jr["rule"] = r.rule.text;
    j["rules"].push_back(std::move(jr));
  }
  return j.dump(2) + "\n";
}

Strategy load_strategy(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("cannot open strategy file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return strategy_from_json(buf.str());
}

void save_strategy(const Strategy& s, const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) throw DataError("cannot write strategy file " + path);
  out << strategy_to_json(s);
}

// ---- ground-truth outcome targets --------------------------------------------

const Application* future_cash_app(const World& w, std::int64_t customer_id, Period as_of,
                                   int horizon_months) {
  const auto& apps = w.customer_apps[static_cast<std::size_t>(customer_id) - 1];
  for (const std::uint32_t idx : apps) {
    const Application& a = w.apps[idx];
    if (a.account.product != Product::Css) continue;
    const int ahead = months_between(as_of, a.account.open_period);
    if (ahead <= 0) continue;
    if (ahead > horizon_months) break;   // open order: nothing closer follows
    return &a;
  }
  return nullptr;
}

bool future_response_target(const World& w, std::int64_t customer_id, Period as_of,
                            int horizon_months) {
  return future_cash_app(w, customer_id, as_of, horizon_months) != nullptr;
}

std::optional<bool> future_cash_default_target(const World& w, std::int64_t customer_id,
                                               Period as_of, int horizon_months) {
  const Application* a = future_cash_app(w, customer_id, as_of, horizon_months);
  if (a == nullptr) return std::nullopt;
  return a->defaulted(12);
}

// ---- bank view -----------------------------------------------------------------

BankView::BankView(const World& w)
    : world_(&w), per_customer_(w.customers.size()), accepted_(w.apps.size(), 0) {}

void BankView::accept(std::uint32_t app_index) {
  if (accepted_[app_index]) return;
  accepted_[app_index] = 1;
  ++n_accepted_;
  const Application& a = world_->apps[app_index];
  per_customer_[static_cast<std::size_t>(a.account.customer_id) - 1].push_back(app_index);
}

std::vector<VisibleAccount> BankView::history_of(std::int64_t customer_id) const {
  std::vector<VisibleAccount> out;
  for (const std::uint32_t idx : per_customer_[static_cast<std::size_t>(customer_id) - 1]) {
    const Application& a = world_->apps[idx];
    out.push_back(VisibleAccount{a.account.account_id, a.account.product,
                                 a.account.open_period, a.account.installment,
                                 world_->snapshots_of(idx)});
  }
  return out;
}

bool BankView::customer_active_at(std::int64_t customer_id, Period p) const {
  for (const std::uint32_t idx : per_customer_[static_cast<std::size_t>(customer_id) - 1]) {
    const Application& a = world_->apps[idx];
    const int k = months_between(a.account.open_period, p);
    const auto snaps = world_->snapshots_of(idx);
    if (k < 0 || k >= static_cast<int>(snaps.size())) continue;
    const MonthlySnapshot& s = snaps[static_cast<std::size_t>(k)];
    if (s.period == p && s.status == AccountStatus::A) return true;
  }
  return false;
}

namespace {

bool universe_active_at(const World& w, std::int64_t customer_id, Period p) {
  for (const std::uint32_t idx : w.customer_apps[static_cast<std::size_t>(customer_id) - 1]) {
    const Application& a = w.apps[idx];
    const int k = months_between(a.account.open_period, p);
    const auto snaps = w.snapshots_of(idx);
    if (k < 0 || k >= static_cast<int>(snaps.size())) continue;
    const MonthlySnapshot& s = snaps[static_cast<std::size_t>(k)];
    if (s.period == p && s.status == AccountStatus::A) return true;
  }
  return false;
}

}  // namespace

// ---- decision loop ---------------------------------------------------------------

ModelScores score_all(const ModelSuite& suite, const AbtRow& row) {
  ModelScores s;
  s.pd_ins = try_probability(row, suite.pd_ins);
  s.pd_css = try_probability(row, suite.pd_css);
  s.cross_pd_css = try_probability(row, suite.cross_pd_css);
  s.pr_css = try_probability(row, suite.pr_css);
  return s;
}

namespace {

enum class Visibility { Bank, Universe };

std::vector<std::vector<std::uint32_t>> apps_by_period(const World& w, Period from, Period to) {
  const int span = months_between(from, to) + 1;
  if (span <= 0) throw DomainError("strategy run needs from <= to");
  std::vector<std::vector<std::uint32_t>> buckets(static_cast<std::size_t>(span));
  for (std::uint32_t i = 0; i < w.apps.size(); ++i) {
    const Period open = w.apps[i].account.open_period;
    if (open < from || open > to) continue;
    buckets[static_cast<std::size_t>(months_between(from, open))].push_back(i);
  }
  return buckets;
}

struct RunOutput {
  BankView bank;
  std::vector<AppDecision> decisions;
};

RunOutput decide_all(const World& w, const ModelSuite& suite, const Strategy& s,
                     Period from, Period to, Visibility vis) {
  validate_strategy(s);
  const auto buckets = apps_by_period(w, from, to);
  RunOutput out{BankView(w), {}};

  for (std::size_t b = 0; b < buckets.size(); ++b) {
    const Period p = from.plus_months(static_cast<int>(b));
    std::vector<std::uint32_t> month_accepted;
    for (const std::uint32_t idx : buckets[b]) {
      const Application& app = w.apps[idx];
      const CustomerProfile& cust = w.profile_of(app);
      const std::vector<VisibleAccount> history =
          vis == Visibility::Bank ? out.bank.history_of(cust.customer_id)
                                  : universe_history(w, cust.customer_id);
      const AbtRow row = build_abt_row(app, cust, history, p);

      AppDecision d;
      d.app_index = idx;
      d.scores = score_all(suite, row);

      RuleEnv env;
      env.row = &row;
      env.set_model("PD_Ins", d.scores.pd_ins);
      env.set_model("PD_Css", d.scores.pd_css);
      env.set_model("Cross_PD_Css", d.scores.cross_pd_css);
      env.set_model("PR_Css", d.scores.pr_css);

      const bool known =
          vis == Visibility::Bank
              ? out.bank.customer_active_at(cust.customer_id, p.prev())
              : universe_active_at(w, cust.customer_id, p.prev());

      bool declined = false;
      if (app.account.product == Product::Css && !known) {
        d.reason = kNotKnownCustomer;
        declined = true;
      } else {
        for (const StrategyRule* rule : s.rules_for(app.account.product)) {
          const RuleOutcome outcome = evaluate_rule(rule->rule, env);
          d.missing_operand |= outcome.missing_operand;
          if (outcome.fired) {
            d.reason = rule->reason;
            declined = true;
            break;
          }
        }
      }
      if (!declined) {
        d.accepted = true;
        d.reason = kAcceptedLabel;
        month_accepted.push_back(idx);
      }
      out.decisions.push_back(std::move(d));
    }
    for (const std::uint32_t idx : month_accepted) out.bank.accept(idx);
  }
  return out;
}

ProductBlock product_block(const World& w, const Strategy& s, Product product,
                           std::span<const AppDecision> decisions) {
  ProductBlock block;
  block.product = product;

  std::vector<std::string> order;
  if (product == Product::Css) order.push_back(kNotKnownCustomer);
  for (const StrategyRule* r : s.rules_for(product)) order.push_back(r->reason);
  order.push_back(kAcceptedLabel);

  std::map<std::string, ReasonRow> rows;
  for (const std::string& reason : order) rows[reason].reason = reason;
  ReasonRow all;
  all.reason = kAllLabel;

  const Pricing pricing = era_pricing(w.cfg, product);
  std::int64_t defaulted_total = 0;
  std::map<std::string, std::int64_t> defaulted_by_reason;
  for (const AppDecision& d : decisions) {
    const Application& app = w.apps[d.app_index];
    if (app.account.product != product) continue;
    const LoanOutcome outcome = ground_truth(app);
    ReasonRow& row = rows.at(d.reason);
    row.count += 1;
    row.amount += outcome.amount;
    row.profit += income(outcome, pricing) - loss(outcome, pricing);
    defaulted_by_reason[d.reason] += outcome.defaulted ? 1 : 0;
    all.count += 1;
    all.amount += outcome.amount;
    all.profit += income(outcome, pricing) - loss(outcome, pricing);
    defaulted_total += outcome.defaulted ? 1 : 0;
  }

  const double total = static_cast<double>(std::max<std::int64_t>(all.count, 1));
  for (const std::string& reason : order) {
    ReasonRow row = rows.at(reason);
    row.share = static_cast<double>(row.count) / total;
    row.risk = row.count ? static_cast<double>(defaulted_by_reason[reason]) /
                               static_cast<double>(row.count)
                         : 0.0;
    block.rows.push_back(std::move(row));
  }
  all.share = all.count ? 1.0 : 0.0;
  all.risk = all.count ? static_cast<double>(defaulted_total) / static_cast<double>(all.count)
                       : 0.0;
  block.rows.push_back(std::move(all));
  return block;
}

std::vector<YearKpi> year_kpis(const World& w, std::span<const AppDecision> decisions) {
  std::map<int, YearKpi> by_year;
  for (const AppDecision& d : decisions) {
    if (!d.accepted) continue;
    const Application& app = w.apps[d.app_index];
    const Pricing pricing = era_pricing(w.cfg, app.account.product);
    const LoanOutcome outcome = ground_truth(app);
    YearKpi& k = by_year[app.account.open_period.year()];
    k.year = app.account.open_period.year();
    k.income += income(outcome, pricing);
    k.loss += loss(outcome, pricing);
  }
  std::vector<YearKpi> out;
  for (auto& [year, k] : by_year) {
    k.profit = k.income - k.loss;
    out.push_back(k);
  }
  return out;
}

struct MeanAccumulator {
  double sum = 0.0;
  std::int64_t n = 0;

  void add(const std::optional<double>& v) {
    if (!v) return;
    sum += *v;
    ++n;
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

std::vector<ParamRow> parameter_means(const World& w, std::span<const AppDecision> decisions) {
  MeanAccumulator pd_acc, pd_all, pr_acc, pr_all, cross_acc, cross_all;
  for (const AppDecision& d : decisions) {
    const Application& app = w.apps[d.app_index];
    const std::optional<double> pd =
        app.account.product == Product::Ins ? d.scores.pd_ins : d.scores.pd_css;
    pd_all.add(pd);
    if (d.accepted) pd_acc.add(pd);
    if (app.account.product == Product::Ins) {
      pr_all.add(d.scores.pr_css);
      cross_all.add(d.scores.cross_pd_css);
      if (d.accepted) {
        pr_acc.add(d.scores.pr_css);
        cross_acc.add(d.scores.cross_pd_css);
      }
    }
  }
  return {
      ParamRow{"PD (combined PD Ins and PD Css)", pd_acc.mean(), pd_all.mean()},
      ParamRow{"PR Css", pr_acc.mean(), pr_all.mean()},
      ParamRow{"Cross PD Css", cross_acc.mean(), cross_all.mean()},
  };
}

struct GiniSample {
  std::vector<double> pred_all, pred_acc;
  std::vector<int> y_all, y_acc;

  void add(const std::optional<double>& pred, bool target, bool accepted) {
    if (!pred) return;
    pred_all.push_back(*pred);
    y_all.push_back(target ? 1 : 0);
    if (accepted) {
      pred_acc.push_back(*pred);
      y_acc.push_back(target ? 1 : 0);
    }
  }
  GiniRow row(std::string model) const {
    GiniRow r;
    r.model = std::move(model);
    r.accepted = pred_acc.empty() ? std::nullopt : try_gini(pred_acc, y_acc);
    r.all = pred_all.empty() ? std::nullopt : try_gini(pred_all, y_all);
    return r;
  }
};

}  // namespace

std::vector<GiniRow> model_power_report(const World& w, std::span<const AppDecision> decisions,
                                        Period from, Period to) {
  (void)from;
  (void)to;
  const int horizon = w.cfg.propensity.pr_horizon_months;
  GiniSample cross, pd_css, pd_ins, pr_css;
  for (const AppDecision& d : decisions) {
    const Application& app = w.apps[d.app_index];
    const std::int64_t cid = app.account.customer_id;
    const Period open = app.account.open_period;
    if (app.account.product == Product::Ins) {
      pd_ins.add(d.scores.pd_ins, app.defaulted(12), d.accepted);
      pr_css.add(d.scores.pr_css, future_response_target(w, cid, open, horizon), d.accepted);
      const std::optional<bool> cross_target = future_cash_default_target(w, cid, open, horizon);
      if (cross_target) cross.add(d.scores.cross_pd_css, *cross_target, d.accepted);
    } else {
      pd_css.add(d.scores.pd_css, app.defaulted(12), d.accepted);
    }
  }
  return {cross.row("Cross PD Css"), pd_css.row("PD Css"), pd_ins.row("PD Ins"),
          pr_css.row("PR Css")};
}

namespace {

StrategyReport assemble_report(const World& w, const Strategy& s,
                               std::span<const AppDecision> decisions, Period from, Period to) {
  StrategyReport report;
  report.strategy_id = s.id;
  report.from = from;
  report.to = to;
  report.ins = product_block(w, s, Product::Ins, decisions);
  report.css = product_block(w, s, Product::Css, decisions);
  report.years = year_kpis(w, decisions);
  report.params = parameter_means(w, decisions);
  report.ginis = model_power_report(w, decisions, from, to);
  return report;
}

double accepted_profit(const StrategyReport& r) {
  double profit = 0.0;
  for (const ProductBlock* block : {&r.ins, &r.css})
    for (const ReasonRow& row : block->rows)
      if (row.reason == kAcceptedLabel) profit += row.profit;
  return profit;
}

}  // namespace

StrategyRun run_strategy(const World& w, const ModelSuite& suite, const Strategy& s,
                         Period from, Period to) {
  RunOutput out = decide_all(w, suite, s, from, to, Visibility::Bank);
  StrategyReport report = assemble_report(w, s, out.decisions, from, to);
  return StrategyRun{std::move(out.bank), std::move(out.decisions), std::move(report)};
}

RejectInferenceReport expected_vs_realized(const World& w, const ModelSuite& suite,
                                           const Strategy& s, Period from, Period to) {
  RunOutput expected = decide_all(w, suite, s, from, to, Visibility::Universe);
  RunOutput realized = decide_all(w, suite, s, from, to, Visibility::Bank);

  RejectInferenceReport report;
  report.expected = assemble_report(w, s, expected.decisions, from, to);
  report.realized = assemble_report(w, s, realized.decisions, from, to);
  report.expected_profit = accepted_profit(report.expected);
  report.realized_profit = accepted_profit(report.realized);
  report.gap = report.expected_profit - report.realized_profit;
  report.relative_gap =
      report.expected_profit != 0.0 ? report.gap / std::abs(report.expected_profit) : 0.0;
  return report;
}

// ---- cut-off derivation -------------------------------------------------------------

CutoffDerivation derive_cutoff_strategy(const World& w, const ModelSuite& suite,
                                        Period from, Period to, int groups) {
  if (groups < 2) throw DomainError("cut-off derivation needs at least two groups");
  CutoffDerivation out;

  // Cash first: sweep the profit curve on full-information cash PD.
  std::vector<double> css_pd;
  std::vector<LoanOutcome> css_outcomes;
  std::vector<std::optional<double>> css_pd_by_app(w.apps.size());
  for (std::uint32_t i = 0; i < w.apps.size(); ++i) {
    const Application& app = w.apps[i];
    if (app.account.product != Product::Css) continue;
    const Period p = app.account.open_period;
    if (p < from || p > to) continue;
    const CustomerProfile& cust = w.profile_of(app);
    const AbtRow row = build_abt_row(app, cust, universe_history(w, cust.customer_id), p);
    const std::optional<double> pd = try_probability(row, suite.pd_css);
    css_pd_by_app[i] = pd;
    if (!pd) continue;   // unscoreable stays outside the curve and passes any cut
    css_pd.push_back(*pd);
    css_outcomes.push_back(ground_truth(app));
  }
  if (css_pd.empty()) throw DataError("cut-off derivation: no scoreable cash applications");
  out.css_curve = profit_curve(css_pd, css_outcomes, era_pricing(w.cfg, Product::Css));
  const CurvePoint& best = best_cutoff(out.css_curve);
  out.css_cut = best.threshold;

  // Then the instalment grid with future cash gated behind that cut.
  std::vector<SegmentGridInput> grid_rows;
  const Pricing ins_pricing = era_pricing(w.cfg, Product::Ins);
  const Pricing css_pricing = era_pricing(w.cfg, Product::Css);
  for (std::uint32_t i = 0; i < w.apps.size(); ++i) {
    const Application& app = w.apps[i];
    if (app.account.product != Product::Ins) continue;
    const Period p = app.account.open_period;
    if (p < from || p > to) continue;
    const CustomerProfile& cust = w.profile_of(app);
    const AbtRow row = build_abt_row(app, cust, universe_history(w, cust.customer_id), p);
    const std::optional<double> pd = try_probability(row, suite.pd_ins);
    const std::optional<double> pr = try_probability(row, suite.pr_css);
    if (!pd || !pr) continue;

    SegmentGridInput cell;
    cell.pd = *pd;
    cell.pr = *pr;
    const LoanOutcome now = ground_truth(app);
    cell.profit_now = income(now, ins_pricing) - loss(now, ins_pricing);
    for (const std::uint32_t fi :
         w.customer_apps[static_cast<std::size_t>(cust.customer_id) - 1]) {
      const Application& future = w.apps[fi];
      if (future.account.product != Product::Css) continue;
      if (future.account.open_period <= p || future.account.open_period > to) continue;
      if (css_pd_by_app[fi] && *css_pd_by_app[fi] > out.css_cut) continue;   // cut rejects it
      const LoanOutcome fo = ground_truth(future);
      cell.profit_future += income(fo, css_pricing) - loss(fo, css_pricing);
    }
    grid_rows.push_back(cell);
  }
  if (grid_rows.empty()) throw DataError("cut-off derivation: no scoreable instalment applications");
  out.grid = segment_grid(grid_rows, groups);

  std::vector<double> pds, prs;
  for (const SegmentGridInput& r : grid_rows) {
    pds.push_back(r.pd);
    prs.push_back(r.pr);
  }
  const std::vector<double> pd_edges = quantile_edges(pds, groups);
  const std::vector<double> pr_edges = quantile_edges(prs, groups);
  if (pd_edges.empty())
    throw DataError("cut-off derivation: default probabilities carry no spread to group on");

  // The conditional band is the first PD group that loses money overall; every
  // riskier group is hard-declined. Mass points can collapse groups, and a
  // book that is profitable throughout still bands the group under the top.
  const int n_pd_groups = static_cast<int>(pd_edges.size()) + 1;
  std::vector<double> pd_group_profit(static_cast<std::size_t>(n_pd_groups), 0.0);
  for (const SegmentCell& c : out.grid)
    pd_group_profit[static_cast<std::size_t>(c.pd_group)] += c.global_profit;
  int band = n_pd_groups - 2;
  for (int g = 0; g < n_pd_groups; ++g)
    if (pd_group_profit[static_cast<std::size_t>(g)] < 0.0) {
      band = g;
      break;
    }
  band = std::max(std::min(band, n_pd_groups - 2), n_pd_groups > 2 ? 1 : 0);

  out.t0 = 0.0;
  out.t1 = std::numeric_limits<double>::infinity();
  out.pr_floor = std::numeric_limits<double>::infinity();
  for (const double v : pds) {
    const int g = group_of(v, pd_edges);
    if (g < band) out.t0 = std::max(out.t0, v);
    if (g > band) out.t1 = std::min(out.t1, v);
  }
  if (pr_edges.empty()) {
    // Customers without cash history all share one baseline response score,
    // and that mass can swallow every quantile. Any signal above the baseline
    // then already marks a responsive customer.
    const double base = *std::min_element(prs.begin(), prs.end());
    for (const double v : prs)
      if (v > base) out.pr_floor = std::min(out.pr_floor, v);
    if (!std::isfinite(out.pr_floor))
      throw DataError("cut-off derivation: response probabilities carry no spread at all");
  } else {
    const int pr_zone = std::max(1, static_cast<int>(pr_edges.size()) - 1);
    for (const double v : prs)
      if (group_of(v, pr_edges) >= pr_zone) out.pr_floor = std::min(out.pr_floor, v);
  }

  Strategy s;
  s.id = "derived_cutoffs";
  s.description = "profit-curve cash cut plus PR x PD band rules derived from the segment grid";
  const std::string t0 = short_number(out.t0), t1 = short_number(out.t1);
  const std::string pr_floor = short_number(out.pr_floor), cut = short_number(out.css_cut);
  s.rules.push_back(StrategyRule{"PD_Ins Cutoff", Product::Ins,
                                 parse_rule("PD_Ins > " + t1)});
  s.rules.push_back(StrategyRule{"Special for PD and PR", Product::Ins,
                                 parse_rule(t1 + " >= PD_Ins > " + t0 + " and (PR_Css < " +
                                            pr_floor + " or Cross_PD_Css > " + cut + ")")});
  s.rules.push_back(StrategyRule{"PD_Css Cutoff", Product::Css,
                                 parse_rule("PD_Css > " + cut)});
  out.strategy = std::move(s);
  return out;
}

}  // namespace creditlab
