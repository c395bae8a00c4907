#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "creditlab/engine.hpp"

using namespace creditlab;

namespace {

const ModelSuite& suite() {
  static const ModelSuite s = load_suite("data/models");
  return s;
}

// Dense little economy: enough repeat business for cross-sell to matter.
GenConfig engine_config(int customers = 300, std::uint64_t seed = 9100) {
  GenConfig cfg = default_gen_config();
  cfg.n_customers = customers;
  cfg.seed = seed;
  cfg.start_period = Period::from_yyyymm(197501);
  cfg.end_period = Period::from_yyyymm(198012);
  cfg.ins_hazard = 0.02;
  return cfg;
}

const World& engine_world() {
  static const World w = generate_world(engine_config());
  return w;
}

Strategy accept_all() {
  Strategy s;
  s.id = "accept_all";
  return s;
}

Strategy single_rule(Product p, const std::string& reason, const std::string& text) {
  Strategy s;
  s.id = "single_" + reason;
  s.rules.push_back(StrategyRule{reason, p, parse_rule(text)});
  return s;
}

const ReasonRow& row_of(const ProductBlock& b, const std::string& reason) {
  for (const ReasonRow& r : b.rows)
    if (r.reason == reason) return r;
  REQUIRE(false);
  static ReasonRow dummy;
  return dummy;
}

bool rows_equal(const ReasonRow& a, const ReasonRow& b) {
  return a.reason == b.reason && a.count == b.count && a.share == b.share &&
         a.amount == b.amount && a.risk == b.risk && a.profit == b.profit;
}

bool reports_equal(const StrategyReport& a, const StrategyReport& b) {
  if (a.strategy_id != b.strategy_id || a.from != b.from || a.to != b.to) return false;
  for (const auto* pair : {&a.ins, &a.css}) (void)pair;
  if (a.ins.rows.size() != b.ins.rows.size() || a.css.rows.size() != b.css.rows.size())
    return false;
  for (std::size_t i = 0; i < a.ins.rows.size(); ++i)
    if (!rows_equal(a.ins.rows[i], b.ins.rows[i])) return false;
  for (std::size_t i = 0; i < a.css.rows.size(); ++i)
    if (!rows_equal(a.css.rows[i], b.css.rows[i])) return false;
  if (a.years.size() != b.years.size()) return false;
  for (std::size_t i = 0; i < a.years.size(); ++i)
    if (a.years[i].year != b.years[i].year || a.years[i].income != b.years[i].income ||
        a.years[i].loss != b.years[i].loss || a.years[i].profit != b.years[i].profit)
      return false;
  if (a.params.size() != b.params.size() || a.ginis.size() != b.ginis.size()) return false;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (a.params[i].parameter != b.params[i].parameter ||
        a.params[i].accepted != b.params[i].accepted || a.params[i].all != b.params[i].all)
      return false;
  for (std::size_t i = 0; i < a.ginis.size(); ++i)
    if (a.ginis[i].model != b.ginis[i].model || a.ginis[i].accepted != b.ginis[i].accepted ||
        a.ginis[i].all != b.ginis[i].all)
      return false;
  return true;
}

// Straight rescan of the raw world; ignores customer_apps ordering on purpose.
const Application* oracle_future_css(const World& w, std::int64_t cid, Period as_of,
                                     int horizon) {
  const Application* best = nullptr;
  for (const Application& a : w.apps) {
    if (a.account.customer_id != cid || a.account.product != Product::Css) continue;
    const int ahead = months_between(as_of, a.account.open_period);
    if (ahead <= 0 || ahead > horizon) continue;
    if (best == nullptr || a.account.open_period < best->account.open_period ||
        (a.account.open_period == best->account.open_period &&
         a.account.account_id < best->account.account_id))
      best = &a;
  }
  return best;
}

bool oracle_active_at(const World& w, const std::set<std::uint32_t>& accepted,
                      std::int64_t cid, Period p) {
  for (const std::uint32_t idx : accepted) {
    const Application& a = w.apps[idx];
    if (a.account.customer_id != cid) continue;
    for (const MonthlySnapshot& s : w.snapshots_of(idx))
      if (s.period == p && s.status == AccountStatus::A) return true;
  }
  return false;
}

double profit_of(const World& w, const Application& a) {
  const ProductPricing& pp = w.cfg.pricing(a.account.product);
  const Pricing pricing{pp.apr, pp.provision, pp.lgd};
  const LoanOutcome o{a.account.amount, a.account.n_installments, a.defaulted(12)};
  return income(o, pricing) - loss(o, pricing);
}

}  // namespace

TEST_SUITE("engine strategies") {
  TEST_CASE("shipped strategy files load with canonical rule text") {
    const Strategy s1 = load_strategy("data/strategies/strategy1.json");
    CHECK(s1.id == "strategy1");
    REQUIRE(s1.rules.size() == 3);
    CHECK(s1.rules[0].reason == "PD_Ins Cutoff");
    CHECK(s1.rules[0].product == Product::Ins);
    CHECK(s1.rules[0].rule.text == "PD_Ins > 0.0819");
    CHECK(s1.rules[1].reason == "Special for PD and PR");
    CHECK(s1.rules[1].rule.text ==
          "0.0819 >= PD_Ins > 0.0218 and (PR_Css < 0.028 or Cross_PD_Css > 0.2724)");
    CHECK(s1.rules[2].product == Product::Css);
    CHECK(s1.rules[2].rule.text == "PD_Css > 0.2724");

    const Strategy s2 = load_strategy("data/strategies/strategy2.json");
    CHECK(s2.rules.size() == 2);
    const Strategy s3 = load_strategy("data/strategies/strategy3.json");
    REQUIRE(s3.rules.size() == 2);
    CHECK(s3.rules[0].rule.text == "agr12_Max_CMaxA_Due > 3");
    CHECK(s3.rules[0].rule.identifiers ==
          std::vector<std::string>{"agr12_Max_CMaxA_Due"});
    const Strategy s4 = load_strategy("data/strategies/strategy4.json");
    REQUIRE(s4.rules.size() == 5);
    CHECK(s4.rules[0].reason == "Bad customer");
    CHECK(s4.rules[2].rule.text ==
          "0.0795 >= PD_Ins > 0.028 and (PR_Css < 0.028 or Cross_PD_Css > 0.1913)");
    CHECK(s4.rules[4].rule.text == "PD_Css > 0.1913");
  }

  TEST_CASE("json round-trip preserves the strategy") {
    for (const char* name : {"strategy1", "strategy2", "strategy3", "strategy4"}) {
      const Strategy s = load_strategy(std::string("data/strategies/") + name + ".json");
      const Strategy back = strategy_from_json(strategy_to_json(s));
      CHECK(back.id == s.id);
      CHECK(back.description == s.description);
      REQUIRE(back.rules.size() == s.rules.size());
      for (std::size_t i = 0; i < s.rules.size(); ++i) {
        CHECK(back.rules[i].reason == s.rules[i].reason);
        CHECK(back.rules[i].product == s.rules[i].product);
        CHECK(back.rules[i].rule == s.rules[i].rule);
      }
      // canonical text re-emits byte-stably
      CHECK(strategy_to_json(back) == strategy_to_json(s));
    }
  }

  TEST_CASE("strategy validation rejects broken configs") {
    CHECK_THROWS_AS(strategy_from_json("not json"), ConfigError);
    CHECK_THROWS_AS(strategy_from_json("{\"id\":\"x\"}"), ConfigError);
    CHECK_THROWS_AS(
        strategy_from_json("{\"id\":\"x\",\"rules\":[{\"product\":\"card\","
                           "\"reason\":\"r\",\"rule\":\"PD_Ins > 0\"}]}"),
        ConfigError);
    CHECK_THROWS_AS(
        strategy_from_json("{\"id\":\"x\",\"rules\":[{\"product\":\"ins\","
                           "\"reason\":\"r\",\"rule\":\"PD_Ins >\"}]}"),
        ConfigError);
    // duplicate reason within one product
    CHECK_THROWS_AS(
        strategy_from_json("{\"id\":\"x\",\"rules\":["
                           "{\"product\":\"ins\",\"reason\":\"r\",\"rule\":\"PD_Ins > 0.5\"},"
                           "{\"product\":\"ins\",\"reason\":\"r\",\"rule\":\"PD_Ins > 0.6\"}]}"),
        ConfigError);
    // the same reason on different products is fine
    CHECK_NOTHROW(
        strategy_from_json("{\"id\":\"x\",\"rules\":["
                           "{\"product\":\"ins\",\"reason\":\"r\",\"rule\":\"PD_Ins > 0.5\"},"
                           "{\"product\":\"css\",\"reason\":\"r\",\"rule\":\"PD_Css > 0.6\"}]}"));
    for (const char* reserved : {"Accepted", "All", "Not known customer"}) {
      const std::string text = std::string("{\"id\":\"x\",\"rules\":[{\"product\":\"ins\","
                                           "\"reason\":\"") +
                               reserved + "\",\"rule\":\"PD_Ins > 0.5\"}]}";
      CHECK_THROWS_AS(strategy_from_json(text), ConfigError);
    }
    CHECK_THROWS_AS(load_strategy("data/strategies/no_such_file.json"), ConfigError);
    // product names are case-insensitive
    const Strategy s = strategy_from_json(
        "{\"id\":\"x\",\"rules\":[{\"product\":\"INS\",\"reason\":\"r\","
        "\"rule\":\"PD_Ins > 0.5\"}]}");
    CHECK(s.rules[0].product == Product::Ins);
  }
}

TEST_SUITE("engine outcome targets") {
  TEST_CASE("future cash lookups agree with a raw world scan") {
    const World& w = engine_world();
    const int horizon = w.cfg.propensity.pr_horizon_months;
    std::size_t with_future = 0, without = 0;
    for (const Application& a : w.apps) {
      if (a.account.product != Product::Ins) continue;
      const std::int64_t cid = a.account.customer_id;
      const Period open = a.account.open_period;
      const Application* expect = oracle_future_css(w, cid, open, horizon);
      const Application* got = future_cash_app(w, cid, open, horizon);
      if (expect == nullptr) {
        CHECK(got == nullptr);
        CHECK_FALSE(future_response_target(w, cid, open, horizon));
        CHECK_FALSE(future_cash_default_target(w, cid, open, horizon).has_value());
        ++without;
      } else {
        REQUIRE(got != nullptr);
        CHECK(got->account.account_id == expect->account.account_id);
        CHECK(future_response_target(w, cid, open, horizon));
        CHECK(future_cash_default_target(w, cid, open, horizon) == expect->defaulted(12));
        ++with_future;
      }
    }
    // the world must exercise both branches or the checks above are vacuous
    CHECK(with_future > 0);
    CHECK(without > 0);
  }

  TEST_CASE("horizon is a hard edge") {
    const World& w = engine_world();
    // find a customer's very first cash loan so no earlier one can interfere
    std::map<std::int64_t, const Application*> first_css;
    for (const Application& a : w.apps) {
      if (a.account.product != Product::Css) continue;
      auto [it, fresh] = first_css.emplace(a.account.customer_id, &a);
      if (!fresh && a.account.open_period < it->second->account.open_period) it->second = &a;
    }
    REQUIRE(!first_css.empty());
    std::size_t probed = 0;
    for (const auto& [cid, app] : first_css) {
      const Period open = app->account.open_period;
      // exactly 12 months ahead: inside a 12-month horizon
      const Application* at_edge = future_cash_app(w, cid, open.plus_months(-12), 12);
      REQUIRE(at_edge != nullptr);
      CHECK(at_edge->account.account_id == app->account.account_id);
      // 13 months ahead: outside, and nothing earlier exists for this customer
      CHECK(future_cash_app(w, cid, open.plus_months(-13), 12) == nullptr);
      // one month ahead with the minimal horizon
      const Application* near = future_cash_app(w, cid, open.plus_months(-1), 1);
      REQUIRE(near != nullptr);
      CHECK(near->account.account_id == app->account.account_id);
      if (++probed == 25) break;
    }
  }
}

TEST_SUITE("engine bank view") {
  TEST_CASE("empty bank knows nobody") {
    const World& w = engine_world();
    BankView bank(w);
    CHECK(bank.accepted_count() == 0);
    for (std::int64_t cid = 1; cid <= 5; ++cid) {
      CHECK(bank.history_of(cid).empty());
      CHECK_FALSE(bank.customer_active_at(cid, Period::from_yyyymm(197706)));
    }
    CHECK_FALSE(bank.accepted(0));
  }

  TEST_CASE("accepting everything reproduces the universe view") {
    const World& w = engine_world();
    BankView bank(w);
    for (std::uint32_t i = 0; i < w.apps.size(); ++i) bank.accept(i);
    bank.accept(0);   // idempotent
    CHECK(bank.accepted_count() == static_cast<std::int64_t>(w.apps.size()));

    for (std::int64_t cid = 1; cid <= static_cast<std::int64_t>(w.customers.size()); ++cid) {
      const auto bank_hist = bank.history_of(cid);
      const auto full_hist = universe_history(w, cid);
      REQUIRE(bank_hist.size() == full_hist.size());
      for (std::size_t i = 0; i < bank_hist.size(); ++i) {
        CHECK(bank_hist[i].account_id == full_hist[i].account_id);
        CHECK(bank_hist[i].open_period == full_hist[i].open_period);
        CHECK(bank_hist[i].snaps.size() == full_hist[i].snaps.size());
      }
    }
  }

  TEST_CASE("activity check matches a snapshot scan") {
    const World& w = engine_world();
    BankView bank(w);
    std::set<std::uint32_t> chosen;
    for (std::uint32_t i = 0; i < w.apps.size(); i += 3) {
      bank.accept(i);
      chosen.insert(i);
    }
    for (std::int64_t cid = 1; cid <= 40; ++cid)
      for (int yyyymm : {197501, 197606, 197801, 197912, 198012})
        CHECK(bank.customer_active_at(cid, Period::from_yyyymm(yyyymm)) ==
              oracle_active_at(w, chosen, cid, Period::from_yyyymm(yyyymm)));
  }
}

TEST_SUITE("engine strategy run") {
  TEST_CASE("accept-everything run takes every application") {
    const World& w = engine_world();
    const Period from = w.cfg.start_period, to = w.cfg.end_period;
    const StrategyRun run = run_strategy(w, suite(), accept_all(), from, to);

    CHECK(run.decisions.size() == w.apps.size());
    for (const AppDecision& d : run.decisions) {
      CHECK(d.accepted);
      CHECK(d.reason == kAcceptedLabel);
    }
    CHECK(run.bank.accepted_count() == static_cast<std::int64_t>(w.apps.size()));

    // All == Accepted, and profit matches the portfolio oracle exactly
    for (const ProductBlock* block : {&run.report.ins, &run.report.css}) {
      const ReasonRow& acc = row_of(*block, kAcceptedLabel);
      const ReasonRow& all = row_of(*block, kAllLabel);
      CHECK(acc.count == all.count);
      CHECK(acc.amount == all.amount);
      CHECK(acc.profit == all.profit);
      CHECK(acc.risk == all.risk);
      CHECK(all.share == 1.0);

      double profit = 0.0;
      std::int64_t count = 0, bad = 0;
      double amount = 0.0;
      for (const Application& a : w.apps) {
        if (a.account.product != block->product) continue;
        profit += profit_of(w, a);
        amount += a.account.amount;
        bad += a.defaulted(12) ? 1 : 0;
        ++count;
      }
      CHECK(all.count == count);
      CHECK(all.amount == doctest::Approx(amount).epsilon(1e-12));
      CHECK(all.profit == doctest::Approx(profit).epsilon(1e-12));
      CHECK(all.risk == doctest::Approx(static_cast<double>(bad) / static_cast<double>(count))
                            .epsilon(1e-12));
    }

    // yearly KPIs partition the accepted profit
    double year_profit = 0.0;
    for (const YearKpi& y : run.report.years) {
      CHECK(y.profit == y.income - y.loss);
      year_profit += y.profit;
    }
    CHECK(year_profit ==
          doctest::Approx(row_of(run.report.ins, kAcceptedLabel).profit +
                          row_of(run.report.css, kAcceptedLabel).profit)
              .epsilon(1e-9));
    CHECK(run.report.years.size() == 6);

    // same population on both sides of every mean and gini
    for (const ParamRow& p : run.report.params) CHECK(p.accepted == p.all);
    for (const GiniRow& g : run.report.ginis) CHECK(g.accepted == g.all);
  }

  TEST_CASE("declining every installment loan starves the cash book") {
    const World& w = engine_world();
    const Period from = w.cfg.start_period, to = w.cfg.end_period;
    Strategy s = single_rule(Product::Ins, "No installment business", "PD_Ins >= 0");
    const StrategyRun run = run_strategy(w, suite(), s, from, to);

    CHECK(run.bank.accepted_count() == 0);
    for (const AppDecision& d : run.decisions) {
      const Application& a = w.apps[d.app_index];
      CHECK_FALSE(d.accepted);
      if (a.account.product == Product::Ins) {
        CHECK(d.reason == "No installment business");
        REQUIRE(d.scores.pd_ins.has_value());   // the cutoff model always scores
      } else {
        CHECK(d.reason == kNotKnownCustomer);
      }
    }
    const ReasonRow& nkc = row_of(run.report.css, kNotKnownCustomer);
    const ReasonRow& css_all = row_of(run.report.css, kAllLabel);
    CHECK(nkc.count == css_all.count);
    CHECK(css_all.count > 0);
    CHECK(row_of(run.report.ins, kAcceptedLabel).count == 0);
    CHECK(run.report.years.empty());
  }

  TEST_CASE("first matching rule owns the decline") {
    const World& w = engine_world();
    const Period from = Period::from_yyyymm(197601), to = Period::from_yyyymm(197712);
    Strategy s;
    s.id = "overlap";
    s.rules.push_back(StrategyRule{"first", Product::Ins, parse_rule("PD_Ins >= 0")});
    s.rules.push_back(StrategyRule{"second", Product::Ins, parse_rule("PD_Ins >= 0")});
    const StrategyRun run = run_strategy(w, suite(), s, from, to);
    CHECK(row_of(run.report.ins, "first").count ==
          row_of(run.report.ins, kAllLabel).count);
    CHECK(row_of(run.report.ins, "second").count == 0);

    std::swap(s.rules[0], s.rules[1]);
    const StrategyRun swapped = run_strategy(w, suite(), s, from, to);
    CHECK(row_of(swapped.report.ins, "second").count ==
          row_of(swapped.report.ins, kAllLabel).count);
    CHECK(row_of(swapped.report.ins, "first").count == 0);
    // block rows follow attribution order
    CHECK(swapped.report.ins.rows[0].reason == "second");
    CHECK(swapped.report.ins.rows[1].reason == "first");
    CHECK(swapped.report.ins.rows[2].reason == kAcceptedLabel);
    CHECK(swapped.report.ins.rows[3].reason == kAllLabel);
  }

  TEST_CASE("a rule over an unscoreable model cannot fire but leaves a trace") {
    const World& w = engine_world();
    const Period from = w.cfg.start_period, to = w.cfg.end_period;
    // cash PD on installment applications: new customers cannot be scored
    Strategy s = single_rule(Product::Ins, "Cash risk too high", "PD_Css > 0");
    const StrategyRun run = run_strategy(w, suite(), s, from, to);
    std::size_t escaped = 0;
    for (const AppDecision& d : run.decisions) {
      if (w.apps[d.app_index].account.product != Product::Ins) continue;
      if (d.accepted) {
        // only a missing operand lets anyone past a PD_Css > 0 gate
        CHECK(d.missing_operand);
        CHECK_FALSE(d.scores.pd_css.has_value());
        ++escaped;
      } else {
        CHECK(d.scores.pd_css.has_value());
        CHECK(*d.scores.pd_css > 0.0);
      }
    }
    CHECK(escaped > 0);
  }

  TEST_CASE("decision loop replay: scores in, decisions out") {
    const World& w = engine_world();
    const Period from = w.cfg.start_period, to = w.cfg.end_period;
    const Strategy s1 = load_strategy("data/strategies/strategy1.json");
    const StrategyRun run = run_strategy(w, suite(), s1, from, to);

    // independent replay over the recorded scores, committing month by month
    std::set<std::uint32_t> accepted;
    std::vector<std::uint32_t> month_buf;
    Period current = from;
    auto flush = [&](Period upto) {
      if (upto == current) return;
      for (std::uint32_t idx : month_buf) accepted.insert(idx);
      month_buf.clear();
      current = upto;
    };
    std::size_t nkc_seen = 0, known_css = 0;
    for (const AppDecision& d : run.decisions) {
      const Application& a = w.apps[d.app_index];
      flush(a.account.open_period);
      std::string reason;
      const auto pd_i = d.scores.pd_ins, pr = d.scores.pr_css, cr = d.scores.cross_pd_css;
      if (a.account.product == Product::Css) {
        if (!oracle_active_at(w, accepted, a.account.customer_id,
                              a.account.open_period.prev())) {
          reason = kNotKnownCustomer;
          ++nkc_seen;
        } else {
          ++known_css;
          if (d.scores.pd_css && *d.scores.pd_css > 0.2724) reason = "PD_Css Cutoff";
        }
      } else {
        if (pd_i && *pd_i > 0.0819) {
          reason = "PD_Ins Cutoff";
        } else if (pd_i && 0.0819 >= *pd_i && *pd_i > 0.0218 &&
                   ((pr && *pr < 0.028) || (cr && *cr > 0.2724))) {
          reason = "Special for PD and PR";
        }
      }
      if (reason.empty()) {
        CHECK(d.accepted);
        CHECK(d.reason == kAcceptedLabel);
        month_buf.push_back(d.app_index);
      } else {
        CHECK_FALSE(d.accepted);
        CHECK(d.reason == reason);
      }
    }
    flush(to.plus_months(1));
    CHECK(accepted.size() == static_cast<std::size_t>(run.bank.accepted_count()));
    // both sides of the known-customer gate must occur for this test to bite
    CHECK(nkc_seen > 0);
    CHECK(known_css > 0);

    // partition invariants per product block
    for (const ProductBlock* block : {&run.report.ins, &run.report.css}) {
      std::int64_t count = 0;
      double amount = 0.0, profit = 0.0, share = 0.0;
      const ReasonRow& all = row_of(*block, kAllLabel);
      for (const ReasonRow& r : block->rows) {
        if (r.reason == kAllLabel) continue;
        count += r.count;
        amount += r.amount;
        profit += r.profit;
        share += r.share;
      }
      CHECK(count == all.count);
      CHECK(amount == doctest::Approx(all.amount).epsilon(1e-12));
      CHECK(profit == doctest::Approx(all.profit).epsilon(1e-9));
      CHECK(share == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("runs are deterministic") {
    const World& w = engine_world();
    const Period from = Period::from_yyyymm(197601), to = Period::from_yyyymm(197812);
    const Strategy s1 = load_strategy("data/strategies/strategy1.json");
    const StrategyRun a = run_strategy(w, suite(), s1, from, to);
    const StrategyRun b = run_strategy(w, suite(), s1, from, to);
    REQUIRE(a.decisions.size() == b.decisions.size());
    for (std::size_t i = 0; i < a.decisions.size(); ++i) {
      CHECK(a.decisions[i].app_index == b.decisions[i].app_index);
      CHECK(a.decisions[i].accepted == b.decisions[i].accepted);
      CHECK(a.decisions[i].reason == b.decisions[i].reason);
      CHECK(a.decisions[i].scores.pd_ins == b.decisions[i].scores.pd_ins);
      CHECK(a.decisions[i].scores.pd_css == b.decisions[i].scores.pd_css);
    }
    CHECK(reports_equal(a.report, b.report));
  }

  TEST_CASE("window filtering and decision order") {
    const World& w = engine_world();
    const Period from = Period::from_yyyymm(197603), to = Period::from_yyyymm(197709);
    const StrategyRun run = run_strategy(w, suite(), accept_all(), from, to);
    std::size_t expected = 0;
    for (const Application& a : w.apps)
      if (a.account.open_period >= from && a.account.open_period <= to) ++expected;
    CHECK(run.decisions.size() == expected);
    for (std::size_t i = 1; i < run.decisions.size(); ++i) {
      const Application& prev = w.apps[run.decisions[i - 1].app_index];
      const Application& cur = w.apps[run.decisions[i].app_index];
      const bool later_month = prev.account.open_period < cur.account.open_period;
      const bool same_month_ordered = prev.account.open_period == cur.account.open_period &&
                                      prev.account.account_id < cur.account.account_id;
      CHECK((later_month || same_month_ordered));
    }
    CHECK_THROWS_AS(run_strategy(w, suite(), accept_all(), to, from), DomainError);
  }

  TEST_CASE("model power report recomputes from raw scores and targets") {
    const World& w = engine_world();
    const Period from = w.cfg.start_period, to = w.cfg.end_period;
    const StrategyRun run = run_strategy(w, suite(), accept_all(), from, to);
    REQUIRE(run.report.ginis.size() == 4);
    CHECK(run.report.ginis[0].model == "Cross PD Css");
    CHECK(run.report.ginis[1].model == "PD Css");
    CHECK(run.report.ginis[2].model == "PD Ins");
    CHECK(run.report.ginis[3].model == "PR Css");

    const int horizon = w.cfg.propensity.pr_horizon_months;
    std::vector<double> pd_pred, pr_pred, cr_pred, css_pred;
    std::vector<int> pd_y, pr_y, cr_y, css_y;
    for (const AppDecision& d : run.decisions) {
      const Application& a = w.apps[d.app_index];
      if (a.account.product == Product::Ins) {
        if (d.scores.pd_ins) {
          pd_pred.push_back(*d.scores.pd_ins);
          pd_y.push_back(a.defaulted(12) ? 1 : 0);
        }
        if (d.scores.pr_css) {
          pr_pred.push_back(*d.scores.pr_css);
          pr_y.push_back(oracle_future_css(w, a.account.customer_id, a.account.open_period,
                                           horizon) != nullptr
                             ? 1
                             : 0);
        }
        const Application* fut =
            oracle_future_css(w, a.account.customer_id, a.account.open_period, horizon);
        if (fut != nullptr && d.scores.cross_pd_css) {
          cr_pred.push_back(*d.scores.cross_pd_css);
          cr_y.push_back(fut->defaulted(12) ? 1 : 0);
        }
      } else if (d.scores.pd_css) {
        css_pred.push_back(*d.scores.pd_css);
        css_y.push_back(a.defaulted(12) ? 1 : 0);
      }
    }
    CHECK(run.report.ginis[0].all == try_gini(cr_pred, cr_y));
    CHECK(run.report.ginis[1].all == try_gini(css_pred, css_y));
    CHECK(run.report.ginis[2].all == try_gini(pd_pred, pd_y));
    CHECK(run.report.ginis[3].all == try_gini(pr_pred, pr_y));

    // discrimination should be clearly positive in a world scored by its own models
    for (const GiniRow& g : run.report.ginis) {
      REQUIRE(g.all.has_value());
      CHECK(*g.all > 0.1);
    }
  }
}

TEST_SUITE("engine reject inference") {
  TEST_CASE("accepting everything closes the gap exactly") {
    const World& w = engine_world();
    const Period from = w.cfg.start_period, to = w.cfg.end_period;
    const RejectInferenceReport r = expected_vs_realized(w, suite(), accept_all(), from, to);
    CHECK(r.gap == 0.0);
    CHECK(r.relative_gap == 0.0);
    CHECK(r.expected_profit == r.realized_profit);
    CHECK(reports_equal(r.expected, r.realized));
  }

  TEST_CASE("full-information run never declines for being unknown") {
    const World& w = engine_world();
    const Period from = w.cfg.start_period, to = w.cfg.end_period;
    const Strategy s1 = load_strategy("data/strategies/strategy1.json");
    const RejectInferenceReport r = expected_vs_realized(w, suite(), s1, from, to);
    CHECK(row_of(r.expected.css, kNotKnownCustomer).count == 0);
    CHECK(row_of(r.realized.css, kNotKnownCustomer).count > 0);
    CHECK(r.gap == r.expected_profit - r.realized_profit);
    if (r.expected_profit != 0.0)
      CHECK(r.relative_gap ==
            doctest::Approx(r.gap / std::abs(r.expected_profit)).epsilon(1e-15));
    // realized side equals a plain strategy run
    const StrategyRun run = run_strategy(w, suite(), s1, from, to);
    CHECK(reports_equal(r.realized, run.report));
  }
}

TEST_SUITE("engine cutoff derivation") {
  TEST_CASE("derived thresholds match a hand-built sweep") {
    const World& w = engine_world();
    const Period from = w.cfg.start_period, to = w.cfg.end_period;
    const CutoffDerivation d = derive_cutoff_strategy(w, suite(), from, to);

    // cash side: rebuild the curve from scratch
    std::vector<double> css_pd;
    std::vector<LoanOutcome> css_outcomes;
    std::map<std::int64_t, std::optional<double>> css_pd_by_account;
    const ProductPricing& cp = w.cfg.pricing_css;
    const Pricing css_pricing{cp.apr, cp.provision, cp.lgd};
    for (const Application& a : w.apps) {
      if (a.account.product != Product::Css) continue;
      if (a.account.open_period < from || a.account.open_period > to) continue;
      const AbtRow row = build_abt_row(a, w.profile_of(a),
                                       universe_history(w, a.account.customer_id),
                                       a.account.open_period);
      const auto pd = try_probability(row, suite().pd_css);
      css_pd_by_account[a.account.account_id] = pd;
      if (!pd) continue;
      css_pd.push_back(*pd);
      css_outcomes.push_back(LoanOutcome{a.account.amount, a.account.n_installments,
                                         a.defaulted(12)});
    }
    const auto curve = profit_curve(css_pd, css_outcomes, css_pricing);
    REQUIRE(d.css_curve.size() == curve.size());
    CHECK(d.css_cut == best_cutoff(curve).threshold);
    for (std::size_t i = 0; i < curve.size(); ++i) {
      CHECK(d.css_curve[i].threshold == curve[i].threshold);
      CHECK(d.css_curve[i].profit == curve[i].profit);
    }

    // installment side: rebuild scores and group edges
    std::vector<double> pds, prs;
    std::int64_t scoreable = 0;
    double future_gated = 0.0;
    for (const Application& a : w.apps) {
      if (a.account.product != Product::Ins) continue;
      if (a.account.open_period < from || a.account.open_period > to) continue;
      const AbtRow row = build_abt_row(a, w.profile_of(a),
                                       universe_history(w, a.account.customer_id),
                                       a.account.open_period);
      const auto pd = try_probability(row, suite().pd_ins);
      const auto pr = try_probability(row, suite().pr_css);
      if (!pd || !pr) continue;
      ++scoreable;
      pds.push_back(*pd);
      prs.push_back(*pr);
      for (const std::uint32_t fi :
           w.customer_apps[static_cast<std::size_t>(a.account.customer_id) - 1]) {
        const Application& f = w.apps[fi];
        if (f.account.product != Product::Css) continue;
        if (f.account.open_period <= a.account.open_period || f.account.open_period > to)
          continue;
        const auto fpd = css_pd_by_account[f.account.account_id];
        if (fpd && *fpd > d.css_cut) continue;
        future_gated += profit_of(w, f);
      }
    }
    std::int64_t grid_count = 0;
    double grid_profit = 0.0;
    for (const SegmentCell& c : d.grid) {
      grid_count += c.count;
      grid_profit += c.global_profit;
    }
    CHECK(grid_count == scoreable);

    const auto pd_edges = quantile_edges(pds, 5);
    const auto pr_edges = quantile_edges(prs, 5);
    // band = first money-losing PD group, riskier groups are hard-declined
    const int n_pd_groups = static_cast<int>(pd_edges.size()) + 1;
    std::vector<double> pd_group_profit(static_cast<std::size_t>(n_pd_groups), 0.0);
    for (const SegmentCell& c : d.grid)
      pd_group_profit[static_cast<std::size_t>(c.pd_group)] += c.global_profit;
    int band = n_pd_groups - 2;
    for (int g = 0; g < n_pd_groups; ++g)
      if (pd_group_profit[static_cast<std::size_t>(g)] < 0.0) {
        band = g;
        break;
      }
    band = std::max(std::min(band, n_pd_groups - 2), n_pd_groups > 2 ? 1 : 0);
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    double pr_floor = std::numeric_limits<double>::infinity();
    for (const double v : pds) {
      if (group_of(v, pd_edges) < band) t0 = std::max(t0, v);
      if (group_of(v, pd_edges) > band) t1 = std::min(t1, v);
    }
    if (pr_edges.empty()) {
      const double base = *std::min_element(prs.begin(), prs.end());
      for (const double v : prs)
        if (v > base) pr_floor = std::min(pr_floor, v);
    } else {
      const int pr_zone = std::max<int>(1, static_cast<int>(pr_edges.size()) - 1);
      for (const double v : prs)
        if (group_of(v, pr_edges) >= pr_zone) pr_floor = std::min(pr_floor, v);
    }
    CHECK(d.t0 == t0);
    CHECK(d.t1 == t1);
    CHECK(d.pr_floor == pr_floor);
    CHECK(t0 < t1);

    // gated future profit shows up in the grid totals
    double now_total = 0.0;
    for (const Application& a : w.apps) {
      if (a.account.product != Product::Ins) continue;
      if (a.account.open_period < from || a.account.open_period > to) continue;
      const AbtRow row = build_abt_row(a, w.profile_of(a),
                                       universe_history(w, a.account.customer_id),
                                       a.account.open_period);
      if (!try_probability(row, suite().pd_ins) || !try_probability(row, suite().pr_css))
        continue;
      now_total += profit_of(w, a);
    }
    CHECK(grid_profit == doctest::Approx(now_total + future_gated).epsilon(1e-9));
  }

  TEST_CASE("derived strategy spells out the thresholds") {
    const World& w = engine_world();
    const Period from = w.cfg.start_period, to = w.cfg.end_period;
    const CutoffDerivation d = derive_cutoff_strategy(w, suite(), from, to);

    REQUIRE(d.strategy.rules.size() == 3);
    const StrategyRule& hard = d.strategy.rules[0];
    CHECK(hard.reason == "PD_Ins Cutoff");
    CHECK(hard.product == Product::Ins);
    REQUIRE(hard.rule.root.kind == RuleNode::Kind::Compare);
    CHECK(hard.rule.root.operands[0].identifier == "PD_Ins");
    CHECK(hard.rule.root.operands[1].literal == d.t1);

    const StrategyRule& band = d.strategy.rules[1];
    CHECK(band.reason == "Special for PD and PR");
    CHECK(band.rule.identifiers ==
          std::vector<std::string>{"PD_Ins", "PR_Css", "Cross_PD_Css"});

    const StrategyRule& cash = d.strategy.rules[2];
    CHECK(cash.product == Product::Css);
    REQUIRE(cash.rule.root.kind == RuleNode::Kind::Compare);
    CHECK(cash.rule.root.operands[0].identifier == "PD_Css");
    CHECK(cash.rule.root.operands[1].literal == d.css_cut);

    // rule text survives a save/load round trip
    const Strategy back = strategy_from_json(strategy_to_json(d.strategy));
    for (std::size_t i = 0; i < back.rules.size(); ++i)
      CHECK(back.rules[i].rule == d.strategy.rules[i].rule);

    // the derived numbers express a real ordering
    CHECK(d.t0 < d.t1);
    CHECK(d.pr_floor > 0.0);
    CHECK(d.css_cut > 0.0);

    // and the derived strategy actually runs
    const StrategyRun run = run_strategy(w, suite(), d.strategy, from, to);
    CHECK(run.decisions.size() > 0);
    CHECK(row_of(run.report.ins, "PD_Ins Cutoff").count > 0);
  }

  TEST_CASE("derivation rejects degenerate setups") {
    const World& w = engine_world();
    CHECK_THROWS_AS(derive_cutoff_strategy(w, suite(), w.cfg.start_period,
                                           w.cfg.end_period, 1),
                    DomainError);
    // a window with no cash applications at all
    CHECK_THROWS_AS(derive_cutoff_strategy(w, suite(), w.cfg.start_period,
                                           w.cfg.start_period),
                    DataError);
  }
}
