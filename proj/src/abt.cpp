#include "creditlab/abt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "creditlab/csv.hpp"

namespace creditlab {

namespace {

const char* stat_token(Stat s) {
  switch (s) {
    case Stat::Max: return "Max";
    case Stat::Mean: return "Mean";
    case Stat::Min: return "Min";
  }
  return "";
}

const char* product_token(ProductClass p) {
  switch (p) {
    case ProductClass::Css: return "C";
    case ProductClass::Ins: return "I";
    case ProductClass::All: return "A";
  }
  return "";
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string WindowSpec::name() const {
  std::string n = mode == MissingMode::Ags ? "ags" : "agr";
  n += std::to_string(window);
  n += '_';
  n += stat_token(stat);
  n += "_CMax";
  n += product_token(product);
  n += '_';
  n += measure == Measure::Days ? "Days" : "Due";
  return n;
}

AbtSchema::AbtSchema() {
  auto add = [&](const std::string& name, ColumnKind kind, const std::string& desc) {
    names_.push_back(name);
    kinds_.push_back(kind);
    descriptions_.push_back(desc);
  };

  add("cid", ColumnKind::Id, "application (account) id");
  add("aid", ColumnKind::Id, "customer id");
  add("period", ColumnKind::Id, "decision month, YYYYMM");
  add("act_age", ColumnKind::Numeric, "customer age in full years as of the decision month");
  add("act_cc", ColumnKind::Numeric,
      "(application installment + monthly spendings) / monthly income");
  add("act_loaninc", ColumnKind::Numeric, "application loan amount / monthly income");
  add("app_income", ColumnKind::Numeric, "customer monthly income");
  add("app_loan_amount", ColumnKind::Numeric, "application loan amount");
  add("app_n_installments", ColumnKind::Numeric, "application term in monthly installments");
  add("app_number_of_children", ColumnKind::Numeric, "number of children");
  add("app_spendings", ColumnKind::Numeric, "customer monthly spendings");
  add("app_installment", ColumnKind::Numeric, "application installment amount");
  add("app_char_branch", ColumnKind::Categorical, "branch");
  add("app_char_gender", ColumnKind::Categorical, "gender");
  add("app_char_job_code", ColumnKind::Categorical, "job code");
  add("app_char_marital_status", ColumnKind::Categorical, "marital status");
  add("app_char_city", ColumnKind::Categorical, "city size class");
  add("app_char_home_status", ColumnKind::Categorical, "home status");
  add("app_char_cars", ColumnKind::Categorical, "cars owned");
  add("act_call_n_loan", ColumnKind::Numeric,
      "number of the customer's loans visible before the decision month, both products");
  add("act_ccss_n_loan", ColumnKind::Numeric, "visible cash loans, active plus closed");
  add("act_cins_n_loan", ColumnKind::Numeric, "visible installment loans, active plus closed");
  add("act_ccss_maxdue", ColumnKind::Numeric,
      "max due installments across cash accounts active one month before; missing if none");
  add("act_cins_maxdue", ColumnKind::Numeric,
      "max due installments across installment accounts active one month before; missing if none");
  add("act_ccss_n_loans_act", ColumnKind::Numeric, "cash accounts active one month before");
  add("act_cins_n_loans_act", ColumnKind::Numeric, "installment accounts active one month before");
  add("act_ccss_utl", ColumnKind::Numeric,
      "paid/total installments over active cash accounts; missing if none");
  add("act_cins_utl", ColumnKind::Numeric,
      "paid/total installments over active installment accounts; missing if none");
  add("act_call_cc", ColumnKind::Numeric,
      "(application installment + all active installments + spendings) / income");
  add("act_ccss_cc", ColumnKind::Numeric,
      "(active cash installments + spendings) / income; missing without active cash accounts");
  add("act_cins_cc", ColumnKind::Numeric,
      "(active installment-loan installments + spendings) / income; missing without active ones");
  add("act_ccss_dueutl", ColumnKind::Numeric,
      "due/total installments over active cash accounts; missing if none");
  add("act_cins_dueutl", ColumnKind::Numeric,
      "due/total installments over active installment accounts; missing if none");
  add("act_cus_active", ColumnKind::Numeric,
      "1 if the customer had any status-A account one month before, else 0");
  add("act_ccss_n_statB", ColumnKind::Numeric, "cash loans closed bad before the decision month");
  add("act_cins_n_statB", ColumnKind::Numeric,
      "installment loans closed bad before the decision month");
  add("act_ccss_n_statC", ColumnKind::Numeric,
      "cash loans repaid correctly before the decision month");
  add("act_cins_n_statC", ColumnKind::Numeric,
      "installment loans repaid correctly before the decision month");
  add("act_ccss_n_loans_hist", ColumnKind::Numeric, "closed cash loans, any closing status");
  add("act_cins_n_loans_hist", ColumnKind::Numeric, "closed installment loans, any closing status");
  add("act_ccss_min_lninst", ColumnKind::Numeric,
      "min left installments over active cash accounts; missing if none");
  add("act_cins_min_lninst", ColumnKind::Numeric,
      "min left installments over active installment accounts; missing if none");
  add("act_ccss_min_pninst", ColumnKind::Numeric,
      "min paid installments over active cash accounts; missing if none");
  add("act_cins_min_pninst", ColumnKind::Numeric,
      "min paid installments over active installment accounts; missing if none");
  add("act_ccss_min_seniority", ColumnKind::Numeric,
      "months since the newest visible cash loan opened; missing if none");
  add("act_cins_min_seniority", ColumnKind::Numeric,
      "months since the newest visible installment loan opened; missing if none");
  for (int k : {3, 6, 9, 12})
    add("act" + std::to_string(k) + "_n_arrears", ColumnKind::Numeric,
        "accounts with at least one due installment during the last " + std::to_string(k) +
            " months");
  for (int k : {3, 6, 9, 12})
    add("act" + std::to_string(k) + "_n_arrears_days", ColumnKind::Numeric,
        "account-months above 15 days past due during the last " + std::to_string(k) + " months");
  for (int k : {3, 6, 9, 12})
    add("act" + std::to_string(k) + "_n_good_days", ColumnKind::Numeric,
        "account-months below 15 days past due during the last " + std::to_string(k) + " months");
  add("act_ccss_seniority", ColumnKind::Numeric,
      "months since the oldest visible cash loan opened; missing if none");
  add("act_cins_seniority", ColumnKind::Numeric,
      "months since the oldest visible installment loan opened; missing if none");

  for (Stat st : {Stat::Max, Stat::Mean, Stat::Min}) {
    for (int w : {12, 3, 6, 9}) {
      for (MissingMode mode : {MissingMode::Ags, MissingMode::Agr}) {
        for (Measure me : {Measure::Days, Measure::Due}) {
          for (ProductClass pc : {ProductClass::Css, ProductClass::Ins, ProductClass::All}) {
            WindowSpec spec{st, w, mode, me, pc};
            std::string desc = stat_token(st);
            desc += " over the last ";
            desc += std::to_string(w);
            desc += " months of the monthly max ";
            desc += me == Measure::Days ? "days past due" : "due installments";
            desc += pc == ProductClass::Css  ? " on cash accounts"
                    : pc == ProductClass::Ins ? " on installment accounts"
                                              : " on all accounts";
            desc += mode == MissingMode::Ags ? "; missing months poison the window"
                                             : "; computed over non-missing months";
            add(spec.name(), ColumnKind::Numeric, desc);
            window_specs_.push_back(spec);
          }
        }
      }
    }
  }

  if (names_.size() != kAbtColumns) throw DomainError("column registry out of sync");
  lower_index_.reserve(names_.size());
  for (std::size_t i = 0; i < names_.size(); ++i)
    lower_index_.emplace_back(lower(names_[i]), static_cast<int>(i));
  std::sort(lower_index_.begin(), lower_index_.end());
}

int AbtSchema::index_of(std::string_view name) const {
  const std::string needle = lower(name);
  auto it = std::lower_bound(lower_index_.begin(), lower_index_.end(), needle,
                             [](const auto& kv, const std::string& v) { return kv.first < v; });
  if (it == lower_index_.end() || it->first != needle) return -1;
  return it->second;
}

const WindowSpec* AbtSchema::window_spec(int col) const {
  const int first = kAbtColumns - static_cast<int>(window_specs_.size());
  if (col < first || col >= kAbtColumns) return nullptr;
  return &window_specs_[static_cast<std::size_t>(col - first)];
}

const AbtSchema& abt_schema() {
  static const AbtSchema schema;
  return schema;
}

std::string abt_data_dictionary() {
  const AbtSchema& s = abt_schema();
  std::ostringstream out;
  out << "[\n";
  for (int c = 0; c < kAbtColumns; ++c) {
    const char* kind = s.kind(c) == ColumnKind::Id          ? "id"
                       : s.kind(c) == ColumnKind::Numeric   ? "numeric"
                                                            : "categorical";
    out << "  {\"name\": \"" << s.names()[static_cast<std::size_t>(c)] << "\", \"kind\": \"" << kind
        << "\", \"description\": \"" << s.description(c) << "\"";
    if (const WindowSpec* w = s.window_spec(c)) {
      out << ", \"statistic\": \"" << stat_token(w->stat) << "\", \"window_months\": " << w->window
          << ", \"mode\": \"" << (w->mode == MissingMode::Ags ? "ags" : "agr") << "\""
          << ", \"measure\": \"" << (w->measure == Measure::Days ? "days" : "due") << "\""
          << ", \"product\": \"" << product_token(w->product) << "\"";
    }
    out << "}" << (c + 1 < kAbtColumns ? "," : "") << "\n";
  }
  out << "]\n";
  return out.str();
}

// ---- history scans --------------------------------------------------------

namespace {

bool matches(ProductClass pc, Product p) {
  return pc == ProductClass::All || (pc == ProductClass::Css) == (p == Product::Css);
}

// Part of the trail strictly before as_of. Safe as long as the visible prefix
// is period-sorted, whatever happens at/after as_of.
std::span<const MonthlySnapshot> visible_part(std::span<const MonthlySnapshot> snaps,
                                              Period as_of) {
  auto it = std::partition_point(snaps.begin(), snaps.end(),
                                 [&](const MonthlySnapshot& s) { return s.period < as_of; });
  return snaps.first(static_cast<std::size_t>(it - snaps.begin()));
}

const MonthlySnapshot* snapshot_at(std::span<const MonthlySnapshot> snaps, Period p) {
  auto it = std::partition_point(snaps.begin(), snaps.end(),
                                 [&](const MonthlySnapshot& s) { return s.period < p; });
  if (it == snaps.end() || it->period != p) return nullptr;
  return &*it;
}

}  // namespace

std::vector<VisibleAccount> universe_history(const World& w, std::int64_t customer_id) {
  std::vector<VisibleAccount> out;
  const auto& idxs = w.customer_apps[static_cast<std::size_t>(customer_id) - 1];
  out.reserve(idxs.size());
  for (std::uint32_t i : idxs) {
    const LoanAccount& a = w.apps[i].account;
    out.push_back({a.account_id, a.product, a.open_period, a.installment, w.snapshots_of(i)});
  }
  return out;
}

double customer_month_max(std::span<const VisibleAccount> accounts, Period month,
                          ProductClass product, Measure measure) {
  double best = missing_value();
  for (const VisibleAccount& acct : accounts) {
    if (!matches(product, acct.product)) continue;
    const MonthlySnapshot* s = snapshot_at(acct.snaps, month);
    if (!s) continue;
    const double v = measure == Measure::Due ? s->due_installments : s->days_past_due;
    if (is_missing(best) || v > best) best = v;
  }
  return best;
}

double window_aggregate(const MonthlySeries& series, const WindowSpec& spec, Period as_of) {
  double acc = missing_value();
  int n = 0;
  for (int back = spec.window; back >= 1; --back) {
    const double v = series.at(as_of.plus_months(-back));
    if (is_missing(v)) {
      if (spec.mode == MissingMode::Ags) return missing_value();
      continue;
    }
    ++n;
    switch (spec.stat) {
      case Stat::Max: acc = (n == 1 || v > acc) ? v : acc; break;
      case Stat::Min: acc = (n == 1 || v < acc) ? v : acc; break;
      case Stat::Mean: acc = n == 1 ? v : acc + v; break;
    }
  }
  if (n == 0) return missing_value();
  return spec.stat == Stat::Mean ? acc / n : acc;
}

bool compute_default_target(std::span<const MonthlySnapshot> snaps, int horizon_k) {
  if (horizon_k != 3 && horizon_k != 6 && horizon_k != 9 && horizon_k != 12)
    throw DomainError("default horizon must be one of 3, 6, 9, 12");
  if (snaps.empty()) throw DomainError("default target needs at least one snapshot");
  const int threshold = horizon_k == 3 ? 2 : 3;
  const int months = std::min<int>(horizon_k, static_cast<int>(snaps.size()));
  for (int m = 0; m < months; ++m)
    if (snaps[static_cast<std::size_t>(m)].due_installments >= threshold) return true;
  return false;
}

// ---- row build -------------------------------------------------------------

namespace {

struct ProductStats {
  int n_act = 0;
  int n_hist = 0;
  int n_stat_b = 0;
  int n_stat_c = 0;
  int max_due = -1;
  long paid_sum = 0, due_sum = 0, total_sum = 0;
  double installment_sum = 0.0;
  int min_left = -1, min_paid = -1;
  int min_seniority = -1, max_seniority = -1;
};

void merge_min(int& slot, int v) {
  if (slot < 0 || v < slot) slot = v;
}

}  // namespace

AbtRow build_abt_row(const Application& app, const CustomerProfile& cust,
                     std::span<const VisibleAccount> history, Period as_of) {
  if (app.account.customer_id != cust.customer_id)
    throw DomainError("application and customer profile disagree");
  if (as_of != app.account.open_period)
    throw DomainError("rows are built as of the application month");

  const AbtSchema& schema = abt_schema();
  AbtRow row;
  row.cid = app.account.account_id;
  row.aid = cust.customer_id;
  row.period = as_of;

  auto set = [&](std::string_view name, double v) {
    const int col = schema.index_of(name);
    if (col < 0) throw DomainError("unknown column: " + std::string(name));
    row.num[static_cast<std::size_t>(col)] = v;
  };

  row.num[0] = static_cast<double>(row.cid);
  row.num[1] = static_cast<double>(row.aid);
  row.num[2] = static_cast<double>(as_of.yyyymm());

  set("act_age", cust.age + months_between(cust.age_period, as_of) / 12);
  set("act_cc", (app.account.installment + cust.spendings) / cust.income);
  set("act_loaninc", app.account.amount / cust.income);
  set("app_income", cust.income);
  set("app_loan_amount", app.account.amount);
  set("app_n_installments", app.account.n_installments);
  set("app_number_of_children", cust.children);
  set("app_spendings", cust.spendings);
  set("app_installment", app.account.installment);
  row.chars = {cust.branch, cust.gender,      cust.job_code, cust.marital_status,
               cust.city,   cust.home_status, cust.cars};

  // One pass over the visible part of every account.
  ProductStats by_product[2];   // [0] = Css, [1] = Ins
  bool cus_active = false;
  double active_installments = 0.0;
  constexpr int kLongest = 12;
  std::array<int, 4> arrears_accounts{}, arrears_months{}, good_months{};
  const std::array<int, 4> horizons{3, 6, 9, 12};
  MonthlySeries series[3][2];   // [product class][measure]
  for (auto& per_product : series)
    for (auto& s : per_product) {
      s.first = as_of.plus_months(-kLongest);
      s.values.assign(kLongest, missing_value());
    }

  for (const VisibleAccount& acct : history) {
    const auto visible = visible_part(acct.snaps, as_of);
    if (visible.empty()) continue;
    ProductStats& ps = by_product[acct.product == Product::Css ? 0 : 1];

    const MonthlySnapshot& last = visible.back();
    const bool active_prev = last.period == as_of.prev() && last.status == AccountStatus::A;
    if (active_prev) {
      cus_active = true;
      active_installments += acct.installment;
      ps.installment_sum += acct.installment;
      ++ps.n_act;
      ps.max_due = std::max(ps.max_due, last.due_installments);
      ps.paid_sum += last.paid_installments;
      ps.due_sum += last.due_installments;
      ps.total_sum += last.paid_installments + last.left_installments + last.due_installments;
      merge_min(ps.min_left, last.left_installments);
      merge_min(ps.min_paid, last.paid_installments);
    } else {
      ++ps.n_hist;
      if (last.status == AccountStatus::B) ++ps.n_stat_b;
      if (last.status == AccountStatus::C) ++ps.n_stat_c;
    }
    const int seniority = months_between(acct.open_period, as_of);
    merge_min(ps.min_seniority, seniority);
    ps.max_seniority = std::max(ps.max_seniority, seniority);

    int nearest_arrears = kLongest + 1;   // most recent month in arrears, as months back
    for (const MonthlySnapshot& s : visible) {
      const int back = months_between(s.period, as_of);
      if (back > kLongest) continue;
      for (std::size_t h = 0; h < horizons.size(); ++h) {
        if (back > horizons[h]) continue;
        if (s.days_past_due > 15) ++arrears_months[h];
        if (s.days_past_due < 15) ++good_months[h];
      }
      if (s.due_installments >= 1) nearest_arrears = std::min(nearest_arrears, back);
      const int pc = acct.product == Product::Css ? 0 : 1;
      const int off = kLongest - back;
      for (int target : {pc, 2}) {
        auto& days = series[target][0].values[static_cast<std::size_t>(off)];
        auto& due = series[target][1].values[static_cast<std::size_t>(off)];
        if (is_missing(days) || s.days_past_due > days) days = s.days_past_due;
        if (is_missing(due) || s.due_installments > due) due = s.due_installments;
      }
    }
    for (std::size_t h = 0; h < horizons.size(); ++h)
      if (nearest_arrears <= horizons[h]) ++arrears_accounts[h];
  }

  const auto count = [](int v) { return static_cast<double>(v); };
  const auto opt_min = [](int v) { return v < 0 ? missing_value() : static_cast<double>(v); };
  for (int p = 0; p < 2; ++p) {
    const ProductStats& ps = by_product[p];
    const char* tag = p == 0 ? "ccss" : "cins";
    auto named = [&](const char* suffix) { return "act_" + std::string(tag) + "_" + suffix; };
    set(named("n_loan"), count(ps.n_act + ps.n_hist));
    set(named("maxdue"), opt_min(ps.max_due));
    set(named("n_loans_act"), count(ps.n_act));
    set(named("utl"), ps.n_act ? static_cast<double>(ps.paid_sum) / ps.total_sum
                                       : missing_value());
    set(named("dueutl"), ps.n_act ? static_cast<double>(ps.due_sum) / ps.total_sum
                                          : missing_value());
    set(named("cc"), ps.n_act
                                 ? (ps.installment_sum + cust.spendings) / cust.income
                                 : missing_value());
    set(named("n_statB"), count(ps.n_stat_b));
    set(named("n_statC"), count(ps.n_stat_c));
    set(named("n_loans_hist"), count(ps.n_hist));
    set(named("min_lninst"), opt_min(ps.min_left));
    set(named("min_pninst"), opt_min(ps.min_paid));
    set(named("min_seniority"), opt_min(ps.min_seniority));
    set(named("seniority"), opt_min(ps.max_seniority));
  }
  set("act_call_n_loan", count(by_product[0].n_act + by_product[0].n_hist + by_product[1].n_act +
                               by_product[1].n_hist));
  set("act_call_cc", (app.account.installment + active_installments + cust.spendings) / cust.income);
  set("act_cus_active", cus_active ? 1.0 : 0.0);
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    const std::string k = std::to_string(horizons[h]);
    set("act" + k + "_n_arrears", count(arrears_accounts[h]));
    set("act" + k + "_n_arrears_days", count(arrears_months[h]));
    set("act" + k + "_n_good_days", count(good_months[h]));
  }

  for (int col = kAbtColumns - 144; col < kAbtColumns; ++col) {
    const WindowSpec& spec = *schema.window_spec(col);
    const MonthlySeries& s =
        series[static_cast<int>(spec.product)][spec.measure == Measure::Due ? 1 : 0];
    row.num[static_cast<std::size_t>(col)] = window_aggregate(s, spec, as_of);
  }
  return row;
}

// ---- serialization ---------------------------------------------------------

std::vector<std::string> abt_csv_header(bool with_labels) {
  std::vector<std::string> header = abt_schema().names();
  if (with_labels) {
    header.push_back("product");
    for (int k : {3, 6, 9, 12}) header.push_back("default_" + std::to_string(k));
  }
  return header;
}

void append_abt_csv_row(CsvWriter& out, const AbtRow& row, const AbtLabels* labels) {
  const AbtSchema& schema = abt_schema();
  for (int c = 0; c < kAbtColumns; ++c) {
    switch (schema.kind(c)) {
      case ColumnKind::Id:
        out.field(c == 0 ? row.cid : c == 1 ? row.aid : row.period.yyyymm());
        break;
      case ColumnKind::Categorical: out.field(row.categorical(c)); break;
      case ColumnKind::Numeric: out.field(row.numeric(c)); break;
    }
  }
  if (labels) {
    out.field(product_name(labels->product));
    for (bool b : labels->default_k) out.field(b ? 1 : 0);
  }
  out.end_row();
}

}  // namespace creditlab
