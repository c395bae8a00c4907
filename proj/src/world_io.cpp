#include "creditlab/world_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "creditlab/csv.hpp"

namespace creditlab {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json lognormal_to_json(const LognormalSpec& s) {
  return ordered_json{{"median", s.median}, {"sigma", s.sigma}, {"min", s.min}, {"max", s.max}};
}

LognormalSpec lognormal_from_json(const ordered_json& j, const LognormalSpec& base) {
  LognormalSpec s = base;
  s.median = j.value("median", s.median);
  s.sigma = j.value("sigma", s.sigma);
  s.min = j.value("min", s.min);
  s.max = j.value("max", s.max);
  return s;
}

ordered_json categorical_to_json(const CategoricalSpec& s) {
  return ordered_json{{"values", s.values}, {"probs", s.probs}, {"quality", s.quality}};
}

CategoricalSpec categorical_from_json(const ordered_json& j, const CategoricalSpec& base) {
  CategoricalSpec s = base;
  if (j.contains("values")) s.values = j.at("values").get<std::vector<std::string>>();
  if (j.contains("probs")) s.probs = j.at("probs").get<std::vector<double>>();
  if (j.contains("quality")) s.quality = j.at("quality").get<std::vector<double>>();
  return s;
}

ordered_json pricing_to_json(const ProductPricing& p) {
  return ordered_json{{"apr", p.apr}, {"provision", p.provision}, {"lgd", p.lgd}};
}

ProductPricing pricing_from_json(const ordered_json& j, const ProductPricing& base) {
  ProductPricing p = base;
  p.apr = j.value("apr", p.apr);
  p.provision = j.value("provision", p.provision);
  p.lgd = j.value("lgd", p.lgd);
  return p;
}

}  // namespace

std::string gen_config_to_json(const GenConfig& cfg) {
  ordered_json j;
  j["n_customers"] = cfg.n_customers;
  j["start_period"] = cfg.start_period.yyyymm();
  j["end_period"] = cfg.end_period.yyyymm();
  j["seed"] = cfg.seed;
  j["response_rate_target"] = cfg.response_rate_target;
  j["ins_hazard"] = cfg.ins_hazard;
  j["ins_amount"] = lognormal_to_json(cfg.ins_amount);
  j["ins_term_months"] = cfg.ins_term_months;
  j["ins_term_weights"] = cfg.ins_term_weights;
  j["cash_amount"] = cfg.cash_amount;
  j["cash_term"] = cfg.cash_term;
  ordered_json rows = ordered_json::array();
  for (const auto& row : cfg.base_matrix.p) {
    ordered_json r = ordered_json::array();
    for (const double v : row) r.push_back(v);
    rows.push_back(std::move(r));
  }
  j["base_matrix"] = std::move(rows);
  j["bracket_cuts"] = cfg.bracket_cuts;
  j["bracket_shifts"] = cfg.bracket_shifts;
  j["risk_shift"] = cfg.risk_shift;
  j["macro"] = ordered_json{{"amplitude", cfg.macro.amplitude},
                            {"period_months", cfg.macro.period_months},
                            {"phase", cfg.macro.phase}};
  j["behavior"] = ordered_json{{"max_due_prev", cfg.behavior.max_due_prev},
                               {"max_due_last3", cfg.behavior.max_due_last3},
                               {"extra_active", cfg.behavior.extra_active},
                               {"stat_b", cfg.behavior.stat_b},
                               {"burden", cfg.behavior.burden},
                               {"burden_pivot", cfg.behavior.burden_pivot},
                               {"newest", cfg.behavior.newest}};
  j["latent"] = ordered_json{{"sigma_quality", cfg.latent.sigma_quality},
                             {"income_weight", cfg.latent.income_weight},
                             {"income_pivot", cfg.latent.income_pivot},
                             {"age_weight", cfg.latent.age_weight},
                             {"children_weight", cfg.latent.children_weight}};
  j["propensity"] = ordered_json{{"past_css", cfg.propensity.past_css},
                                 {"active_css", cfg.propensity.active_css},
                                 {"risk", cfg.propensity.risk},
                                 {"sigma_appetite", cfg.propensity.sigma_appetite},
                                 {"pr_horizon_months", cfg.propensity.pr_horizon_months}};
  ordered_json demo;
  demo["income"] = lognormal_to_json(cfg.demo.income);
  demo["spendings_share_min"] = cfg.demo.spendings_share_min;
  demo["spendings_share_span"] = cfg.demo.spendings_share_span;
  demo["spendings_per_child"] = cfg.demo.spendings_per_child;
  demo["spendings_max_share"] = cfg.demo.spendings_max_share;
  demo["age_min"] = cfg.demo.age_min;
  demo["age_max"] = cfg.demo.age_max;
  demo["children_probs"] = cfg.demo.children_probs;
  demo["job_code"] = categorical_to_json(cfg.demo.job_code);
  demo["marital_status"] = categorical_to_json(cfg.demo.marital_status);
  demo["gender"] = categorical_to_json(cfg.demo.gender);
  demo["branch"] = categorical_to_json(cfg.demo.branch);
  demo["city"] = categorical_to_json(cfg.demo.city);
  demo["home_status"] = categorical_to_json(cfg.demo.home_status);
  demo["cars"] = categorical_to_json(cfg.demo.cars);
  j["demo"] = std::move(demo);
  j["pricing_ins"] = pricing_to_json(cfg.pricing_ins);
  j["pricing_css"] = pricing_to_json(cfg.pricing_css);
  j["calibration"] = ordered_json{{"lo", cfg.calibration.lo},
                                  {"hi", cfg.calibration.hi},
                                  {"max_iterations", cfg.calibration.max_iterations}};
  return j.dump(2) + "\n";
}

GenConfig gen_config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator config is not valid JSON: ") + e.what());
  }
  GenConfig cfg = default_gen_config();
  try {
    cfg.n_customers = j.value("n_customers", cfg.n_customers);
    if (j.contains("start_period"))
      cfg.start_period = Period::from_yyyymm(j.at("start_period").get<int>());
    if (j.contains("end_period"))
      cfg.end_period = Period::from_yyyymm(j.at("end_period").get<int>());
    cfg.seed = j.value("seed", cfg.seed);
    cfg.response_rate_target = j.value("response_rate_target", cfg.response_rate_target);
    cfg.ins_hazard = j.value("ins_hazard", cfg.ins_hazard);
    if (j.contains("ins_amount"))
      cfg.ins_amount = lognormal_from_json(j.at("ins_amount"), cfg.ins_amount);
    if (j.contains("ins_term_months"))
      cfg.ins_term_months = j.at("ins_term_months").get<std::vector<int>>();
    if (j.contains("ins_term_weights"))
      cfg.ins_term_weights = j.at("ins_term_weights").get<std::vector<double>>();
    cfg.cash_amount = j.value("cash_amount", cfg.cash_amount);
    cfg.cash_term = j.value("cash_term", cfg.cash_term);
    if (j.contains("base_matrix")) {
      const ordered_json& rows = j.at("base_matrix");
      if (rows.size() != static_cast<std::size_t>(kDueStates))
        throw ConfigError("base_matrix must have 8 rows");
      for (int r = 0; r < kDueStates; ++r) {
        const ordered_json& row = rows[static_cast<std::size_t>(r)];
        if (row.size() != static_cast<std::size_t>(kDueStates))
          throw ConfigError("base_matrix rows must have 8 entries");
        for (int c = 0; c < kDueStates; ++c)
          cfg.base_matrix.p[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
              row[static_cast<std::size_t>(c)].get<double>();
      }
    }
    if (j.contains("bracket_cuts"))
      cfg.bracket_cuts = j.at("bracket_cuts").get<std::vector<double>>();
    if (j.contains("bracket_shifts"))
      cfg.bracket_shifts = j.at("bracket_shifts").get<std::vector<double>>();
    cfg.risk_shift = j.value("risk_shift", cfg.risk_shift);
    if (j.contains("macro")) {
      const ordered_json& m = j.at("macro");
      cfg.macro.amplitude = m.value("amplitude", cfg.macro.amplitude);
      cfg.macro.period_months = m.value("period_months", cfg.macro.period_months);
      cfg.macro.phase = m.value("phase", cfg.macro.phase);
    }
    if (j.contains("behavior")) {
      const ordered_json& b = j.at("behavior");
      cfg.behavior.max_due_prev = b.value("max_due_prev", cfg.behavior.max_due_prev);
      cfg.behavior.max_due_last3 = b.value("max_due_last3", cfg.behavior.max_due_last3);
      cfg.behavior.extra_active = b.value("extra_active", cfg.behavior.extra_active);
      cfg.behavior.stat_b = b.value("stat_b", cfg.behavior.stat_b);
      cfg.behavior.burden = b.value("burden", cfg.behavior.burden);
      cfg.behavior.burden_pivot = b.value("burden_pivot", cfg.behavior.burden_pivot);
      cfg.behavior.newest = b.value("newest", cfg.behavior.newest);
    }
    if (j.contains("latent")) {
      const ordered_json& l = j.at("latent");
      cfg.latent.sigma_quality = l.value("sigma_quality", cfg.latent.sigma_quality);
      cfg.latent.income_weight = l.value("income_weight", cfg.latent.income_weight);
      cfg.latent.income_pivot = l.value("income_pivot", cfg.latent.income_pivot);
      cfg.latent.age_weight = l.value("age_weight", cfg.latent.age_weight);
      cfg.latent.children_weight = l.value("children_weight", cfg.latent.children_weight);
    }
    if (j.contains("propensity")) {
      const ordered_json& p = j.at("propensity");
      cfg.propensity.past_css = p.value("past_css", cfg.propensity.past_css);
      cfg.propensity.active_css = p.value("active_css", cfg.propensity.active_css);
      cfg.propensity.risk = p.value("risk", cfg.propensity.risk);
      cfg.propensity.sigma_appetite = p.value("sigma_appetite", cfg.propensity.sigma_appetite);
      cfg.propensity.pr_horizon_months =
          p.value("pr_horizon_months", cfg.propensity.pr_horizon_months);
    }
    if (j.contains("demo")) {
      const ordered_json& d = j.at("demo");
      if (d.contains("income")) cfg.demo.income = lognormal_from_json(d.at("income"), cfg.demo.income);
      cfg.demo.spendings_share_min = d.value("spendings_share_min", cfg.demo.spendings_share_min);
      cfg.demo.spendings_share_span = d.value("spendings_share_span", cfg.demo.spendings_share_span);
      cfg.demo.spendings_per_child = d.value("spendings_per_child", cfg.demo.spendings_per_child);
      cfg.demo.spendings_max_share = d.value("spendings_max_share", cfg.demo.spendings_max_share);
      cfg.demo.age_min = d.value("age_min", cfg.demo.age_min);
      cfg.demo.age_max = d.value("age_max", cfg.demo.age_max);
      if (d.contains("children_probs"))
        cfg.demo.children_probs = d.at("children_probs").get<std::vector<double>>();
      if (d.contains("job_code"))
        cfg.demo.job_code = categorical_from_json(d.at("job_code"), cfg.demo.job_code);
      if (d.contains("marital_status"))
        cfg.demo.marital_status =
            categorical_from_json(d.at("marital_status"), cfg.demo.marital_status);
      if (d.contains("gender"))
        cfg.demo.gender = categorical_from_json(d.at("gender"), cfg.demo.gender);
      if (d.contains("branch"))
        cfg.demo.branch = categorical_from_json(d.at("branch"), cfg.demo.branch);
      if (d.contains("city")) cfg.demo.city = categorical_from_json(d.at("city"), cfg.demo.city);
      if (d.contains("home_status"))
        cfg.demo.home_status = categorical_from_json(d.at("home_status"), cfg.demo.home_status);
      if (d.contains("cars")) cfg.demo.cars = categorical_from_json(d.at("cars"), cfg.demo.cars);
    }
    if (j.contains("pricing_ins"))
      cfg.pricing_ins = pricing_from_json(j.at("pricing_ins"), cfg.pricing_ins);
    if (j.contains("pricing_css"))
      cfg.pricing_css = pricing_from_json(j.at("pricing_css"), cfg.pricing_css);
    if (j.contains("calibration")) {
      const ordered_json& c = j.at("calibration");
      cfg.calibration.lo = c.value("lo", cfg.calibration.lo);
      cfg.calibration.hi = c.value("hi", cfg.calibration.hi);
      cfg.calibration.max_iterations = c.value("max_iterations", cfg.calibration.max_iterations);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator config has a malformed field: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

GenConfig load_gen_config(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return gen_config_from_json(buf.str());
}

void save_gen_config(const GenConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) throw DataError("cannot write config file " + path);
  out << gen_config_to_json(cfg);
}

// ---- universe datasets ------------------------------------------------------------

void write_production_csv(const World& w, Product p, const std::string& path) {
  CsvWriter csv(path, {"cid", "aid", "product", "open_period", "act_age", "app_income",
                       "app_spendings", "app_number_of_children", "app_char_gender",
                       "app_char_job_code", "app_char_marital_status", "app_char_branch",
                       "app_char_city", "app_char_home_status", "app_char_cars",
                       "app_loan_amount", "app_n_installments", "app_installment",
                       "default_3", "default_6", "default_9", "default_12"});
  for (const Application& a : w.apps) {
    if (a.account.product != p) continue;
    const CustomerProfile& cust = w.profile_of(a);
    csv.field(a.account.account_id);
    csv.field(a.account.customer_id);
    csv.field(product_name(p));
    csv.field(a.account.open_period.yyyymm());
    csv.field(cust.age + months_between(cust.age_period, a.account.open_period) / 12);
    csv.field(cust.income);
    csv.field(cust.spendings);
    csv.field(cust.children);
    csv.field(cust.gender);
    csv.field(cust.job_code);
    csv.field(cust.marital_status);
    csv.field(cust.branch);
    csv.field(cust.city);
    csv.field(cust.home_status);
    csv.field(cust.cars);
    csv.field(a.account.amount);
    csv.field(a.account.n_installments);
    csv.field(a.account.installment);
    csv.field(a.defaulted(3) ? 1 : 0);
    csv.field(a.defaulted(6) ? 1 : 0);
    csv.field(a.defaulted(9) ? 1 : 0);
    csv.field(a.defaulted(12) ? 1 : 0);
    csv.end_row();
  }
  csv.close();
}

void write_transactions_csv(const World& w, Product p, const std::string& path) {
  CsvWriter csv(path, {"cid", "period", "paid_installments", "due_installments",
                       "days_past_due", "left_installments", "status", "product"});
  for (std::uint32_t i = 0; i < w.apps.size(); ++i) {
    const Application& a = w.apps[i];
    if (a.account.product != p) continue;
    for (const MonthlySnapshot& s : w.snapshots_of(i)) {
      csv.field(s.account_id);
      csv.field(s.period.yyyymm());
      csv.field(s.paid_installments);
      csv.field(s.due_installments);
      csv.field(s.days_past_due);
      csv.field(s.left_installments);
      csv.field(std::string(1, static_cast<char>(s.status)));
      csv.field(product_name(p));
      csv.end_row();
    }
  }
  csv.close();
}

// ---- run manifests -----------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::string manifest_to_json(const RunManifest& m) {
  ordered_json j;
  j["command"] = m.command;
  j["config_digest"] = m.config_digest;
  j["seed"] = m.seed;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  ordered_json timings;
  for (const auto& [stage, seconds] : m.timings) timings[stage] = seconds;
  j["timings_seconds"] = std::move(timings);
  ordered_json metrics;
  for (const auto& [name, value] : m.metrics) metrics[name] = value;
  j["metrics"] = std::move(metrics);
  return j.dump(2) + "\n";
}

void save_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) throw DataError("cannot write manifest " + path);
  out << manifest_to_json(m);
}

}  // namespace creditlab
