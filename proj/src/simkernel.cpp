#include "creditlab/simkernel.hpp"

#include <algorithm>
#include <cassert>
#include <numbers>

#include "creditlab/csv.hpp"
#include "creditlab/finance.hpp"
#include "creditlab/rng.hpp"

namespace creditlab {

namespace {

// rng purpose tags; every draw in the generator is keyed by
// (seed, tag, entity ids, month index) so streams are order-independent.
enum RngTag : std::uint64_t {
  kTagAge = 1,
  kTagIncome,
  kTagSpendings,
  kTagChildren,
  kTagJob,
  kTagMarital,
  kTagGender,
  kTagBranch,
  kTagCity,
  kTagHome,
  kTagCars,
  kTagQuality,
  kTagAppetite,
  kTagInsArrival,
  kTagInsAmount,
  kTagInsTerm,
  kTagCssResponse,
  kTagStep,
};

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

}  // namespace

// ---- transition matrix ----

void TransitionMatrix::validate(double tol) const {
  for (int i = 0; i < kDueStates; ++i) {
    double sum = 0.0;
    for (int j = 0; j < kDueStates; ++j) {
      if (p[i][j] < -tol)
        throw ConfigError("transition matrix has negative entry at row " + std::to_string(i));
      sum += p[i][j];
    }
    if (std::abs(sum - 1.0) > tol)
      throw ConfigError("transition matrix row " + std::to_string(i) + " sums to " +
                        format_number(sum));
  }
  if (std::abs(p[kMaxDue][kMaxDue] - 1.0) > tol)
    throw ConfigError("state 7 must be absorbing");
}

TransitionMatrix TransitionMatrix::banded(double stay0, double cure_full, double cure_one,
                                          double stay) {
  TransitionMatrix m;
  m.p[0][0] = stay0;
  m.p[0][1] = 1.0 - stay0;
  for (int d = 1; d < kMaxDue; ++d) {
    double up = 1.0 - cure_full - cure_one - stay;
    if (up < 0.0) throw ConfigError("banded matrix masses exceed 1");
    m.p[d][0] += cure_full;
    m.p[d][d - 1] += cure_one;
    m.p[d][d] += stay;
    m.p[d][d + 1] += up;
  }
  m.p[kMaxDue][kMaxDue] = 1.0;
  return m;
}

double MacroCycle::logit_shift(int months_since_start) const {
  if (amplitude == 0.0 || period_months <= 0) return 0.0;
  return amplitude *
         std::sin(2.0 * std::numbers::pi * (months_since_start - phase) / period_months);
}

double LognormalSpec::draw(std::uint64_t k) const {
  const double v = median * std::exp(sigma * rng::normal(k));
  return clamp(v, min, max);
}

// ---- config ----

void GenConfig::validate() const {
  if (n_customers <= 0) throw ConfigError("n_customers must be positive");
  if (!(start_period < end_period)) throw ConfigError("start_period must precede end_period");
  if (response_rate_target < 0.0 || response_rate_target >= 1.0)
    throw ConfigError("response_rate_target must lie in [0,1)");
  if (ins_hazard < 0.0 || ins_hazard > 1.0) throw ConfigError("ins_hazard must lie in [0,1]");
  if (cash_amount <= 0.0 || cash_term <= 0) throw ConfigError("cash product must be positive");
  if (ins_term_months.empty() || ins_term_months.size() != ins_term_weights.size())
    throw ConfigError("ins term months/weights mismatch");
  double wsum = 0.0;
  for (double w : ins_term_weights) {
    if (w < 0.0) throw ConfigError("negative term weight");
    wsum += w;
  }
  if (wsum <= 0.0) throw ConfigError("term weights sum to zero");
  base_matrix.validate();
  if (bracket_shifts.size() != bracket_cuts.size() + 1)
    throw ConfigError("bracket_shifts size must be bracket_cuts size + 1");
  if (!std::is_sorted(bracket_cuts.begin(), bracket_cuts.end()))
    throw ConfigError("bracket_cuts must ascend");
  if (!std::is_sorted(bracket_shifts.begin(), bracket_shifts.end()))
    throw ConfigError("bracket_shifts must ascend (worse bracket, higher shift)");
  for (const auto* spec :
       {&demo.job_code, &demo.marital_status, &demo.gender, &demo.branch, &demo.city,
        &demo.home_status, &demo.cars}) {
    if (spec->values.empty() || spec->values.size() != spec->probs.size() ||
        spec->values.size() != spec->quality.size())
      throw ConfigError("categorical table sizes mismatch");
  }
  if (demo.children_probs.empty()) throw ConfigError("children_probs empty");
  if (calibration.lo >= calibration.hi) throw ConfigError("calibration bounds inverted");
  if (calibration.max_iterations < 3) throw ConfigError("calibration needs >= 3 iterations");
}

// ---- effective matrix ----

TransitionMatrix effective_matrix(const TransitionMatrix& base, int bracket, int months_since_start,
                                  const GenConfig& cfg) {
  if (bracket < 0 || bracket >= static_cast<int>(cfg.bracket_shifts.size()))
    throw DomainError("bracket out of range");
  const double shift =
      cfg.bracket_shifts[static_cast<std::size_t>(bracket)] + cfg.risk_shift +
      cfg.macro.logit_shift(months_since_start);
  TransitionMatrix out = base;
  for (int d = 0; d < kMaxDue; ++d) {
    double up = 0.0;
    for (int j = d + 1; j < kDueStates; ++j) up += base.p[d][j];
    if (up <= 0.0 || up >= 1.0) continue;  // no mass to move, row unchanged
    const double up2 = sigmoid(logit(up) + shift);
    const double up_scale = up2 / up;
    const double down_scale = (1.0 - up2) / (1.0 - up);
    for (int j = 0; j < kDueStates; ++j)
      out.p[d][j] = base.p[d][j] * (j > d ? up_scale : down_scale);
  }
  return out;
}

// ---- stepping ----

MonthlySnapshot step_account(const MonthlySnapshot& snap, const TransitionMatrix& m, double u) {
  if (snap.status != AccountStatus::A)
    throw DomainError("step_account requires an active snapshot");
  if (snap.due_installments < 0 || snap.due_installments >= kMaxDue)
    throw DomainError("step_account requires due in [0,7)");

  const int new_issue = snap.left_installments > 0 ? 1 : 0;
  const int pre_due = snap.due_installments + new_issue;

  // sample the target state from the current row
  int target = kDueStates - 1;
  double acc = 0.0;
  for (int j = 0; j < kDueStates; ++j) {
    acc += m.p[snap.due_installments][j];
    if (u < acc) {
      target = j;
      break;
    }
  }
  const int due = std::min(target, pre_due);

  MonthlySnapshot next;
  next.account_id = snap.account_id;
  next.period = snap.period.next();
  next.due_installments = due;
  next.days_past_due = due * kDaysPerDue;
  next.paid_installments = snap.paid_installments + (pre_due - due);
  next.left_installments = snap.left_installments - new_issue;
  if (due == kMaxDue)
    next.status = AccountStatus::B;
  else if (next.left_installments == 0 && due == 0)
    next.status = AccountStatus::C;
  else
    next.status = AccountStatus::A;
  return next;
}

// ---- behavior score ----

double customer_score(const CustomerProfile& profile, const HistoryFeatures& f,
                      const GenConfig& cfg) {
  const BehaviorWeights& w = cfg.behavior;
  return profile.latent_quality - w.max_due_prev * f.max_due_prev -
         w.max_due_last3 * f.max_due_last3 -
         w.extra_active * std::max(0, f.n_active_prev - 1) - w.stat_b * f.n_stat_b;
}

double account_burden(double installment, const CustomerProfile& profile) {
  return (installment + profile.spendings) / profile.income;
}

int bracket_of(double score, const GenConfig& cfg) {
  const auto& cuts = cfg.bracket_cuts;
  const auto it = std::lower_bound(cuts.begin(), cuts.end(), score);
  return static_cast<int>(cuts.end() - it);  // above all cuts -> 0 (best)
}

namespace {

double account_score(double cust_score, const LoanAccount& acct, const CustomerProfile& profile,
                     bool newest, const GenConfig& cfg) {
  const double over = std::max(0.0, account_burden(acct.installment, profile) -
                                        cfg.behavior.burden_pivot);
  return cust_score - cfg.behavior.burden * over - (newest ? cfg.behavior.newest : 0.0);
}

}  // namespace

// ---- standalone account simulation ----

std::vector<MonthlySnapshot> simulate_account(const LoanAccount& acct, const CustomerContext& ctx) {
  const GenConfig& cfg = *ctx.cfg;
  const CustomerProfile& profile = *ctx.profile;
  std::vector<MonthlySnapshot> trail;

  MonthlySnapshot cur;
  cur.account_id = acct.account_id;
  cur.period = acct.open_period.prev();
  cur.due_installments = 0;
  cur.paid_installments = 0;
  cur.left_installments = acct.n_installments;
  cur.status = AccountStatus::A;

  for (Period m = acct.open_period; m <= cfg.end_period; m = m.next()) {
    HistoryFeatures f;
    int max_open_active = acct.open_period.index();
    for (const MonthlySnapshot& s : ctx.other_snaps) {
      if (s.period >= m) continue;
      if (s.status == AccountStatus::B) ++f.n_stat_b;
      if (s.period == m.prev()) {
        f.max_due_prev = std::max(f.max_due_prev, s.due_installments);
        if (s.status == AccountStatus::A) ++f.n_active_prev;
      }
      if (months_between(s.period, m) <= 3)
        f.max_due_last3 = std::max(f.max_due_last3, s.due_installments);
    }
    for (const MonthlySnapshot& s : trail) {
      if (s.period == m.prev()) {
        f.max_due_prev = std::max(f.max_due_prev, s.due_installments);
        if (s.status == AccountStatus::A) ++f.n_active_prev;
      }
      if (months_between(s.period, m) <= 3)
        f.max_due_last3 = std::max(f.max_due_last3, s.due_installments);
    }
    for (const LoanAccount& other : ctx.other_accounts) {
      bool relevant = other.open_period == m;
      if (!relevant)
        for (const MonthlySnapshot& s : ctx.other_snaps)
          if (s.account_id == other.account_id && s.period == m.prev() &&
              s.status == AccountStatus::A)
            relevant = true;
      if (relevant) max_open_active = std::max(max_open_active, other.open_period.index());
    }

    const bool newest = acct.open_period.index() >= max_open_active;
    const double score =
        account_score(customer_score(profile, f, cfg), acct, profile, newest, cfg);
    const TransitionMatrix em = effective_matrix(
        cfg.base_matrix, bracket_of(score, cfg), months_between(cfg.start_period, m), cfg);
    const double u =
        rng::u01(rng::key(cfg.seed, kTagStep, acct.customer_id, acct.account_id, m.index()));
    cur = step_account(cur, em, u);
    trail.push_back(cur);
    if (cur.status != AccountStatus::A) break;
  }
  return trail;
}

// ---- cash spawning ----

double solve_response_intercept(std::span<const double> indices, double target) {
  if (indices.empty() || target <= 0.0) return -40.0;
  auto mean_prob = [&](double c) {
    double s = 0.0;
    for (double x : indices) s += sigmoid(c + x);
    return s / static_cast<double>(indices.size());
  };
  double lo = -40.0, hi = 10.0;
  for (int it = 0; it < 48; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mean_prob(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<std::int64_t> spawn_cash_applications(std::span<const CashCandidate> eligible,
                                                  Period period, const GenConfig& cfg) {
  std::vector<std::int64_t> out;
  if (eligible.empty() || cfg.response_rate_target <= 0.0) return out;
  std::vector<double> indices;
  indices.reserve(eligible.size());
  for (const CashCandidate& c : eligible) indices.push_back(c.propensity_index);
  const double intercept = solve_response_intercept(indices, cfg.response_rate_target);
  for (const CashCandidate& c : eligible) {
    const double p = sigmoid(intercept + c.propensity_index);
    const double u =
        rng::u01(rng::key(cfg.seed, kTagCssResponse, c.customer_id, period.index()));
    if (u < p) out.push_back(c.customer_id);
  }
  return out;
}

// ---- targets ----

std::array<bool, 4> default_targets(std::span<const MonthlySnapshot> snaps) {
  std::array<bool, 4> out{false, false, false, false};
  static constexpr int horizons[4] = {3, 6, 9, 12};
  static constexpr int thresholds[4] = {2, 3, 3, 3};
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const int month_on_book = static_cast<int>(i) + 1;
    for (int t = 0; t < 4; ++t)
      if (month_on_book <= horizons[t] && snaps[i].due_installments >= thresholds[t])
        out[t] = true;
  }
  return out;
}

// ---- world generation ----

namespace {

struct LiveAccount {
  LoanAccount acct;
  MonthlySnapshot last;    // virtual pre-open snapshot until first step
  bool open = true;
  std::uint32_t app_index = 0;
};

struct CustomerState {
  CustomerProfile prof;
  std::vector<LiveAccount> accounts;
  // rolling features, stamped by month index to survive gaps
  std::array<int, 4> maxdue_ring{};
  std::array<int, 4> maxdue_stamp{-1, -1, -1, -1};
  int max_due_prev = 0;
  int n_active_prev = 0;
  bool active_prev = false;
  bool active_css_prev = false;
  int n_stat_b = 0;
  int n_css_ever = 0;
};

CustomerProfile make_profile(std::int64_t cid, const GenConfig& cfg) {
  const Demographics& d = cfg.demo;
  const std::uint64_t seed = cfg.seed;
  CustomerProfile p;
  p.customer_id = cid;
  p.age_period = cfg.start_period;

  const double ua = 0.5 * (rng::u01(rng::key(seed, kTagAge, cid, 1)) +
                           rng::u01(rng::key(seed, kTagAge, cid, 2)));
  p.age = d.age_min + static_cast<int>(ua * (d.age_max - d.age_min));
  p.income = d.income.draw(rng::key(seed, kTagIncome, cid));
  p.children = rng::categorical(rng::key(seed, kTagChildren, cid), d.children_probs);
  const double share = d.spendings_share_min +
                       d.spendings_share_span * rng::u01(rng::key(seed, kTagSpendings, cid));
  p.spendings = std::min(p.income * share + d.spendings_per_child * p.children,
                         p.income * d.spendings_max_share);

  const auto pick = [&](const CategoricalSpec& spec, RngTag tag, double& q) {
    const int i = rng::categorical(rng::key(seed, tag, cid), spec.probs);
    q += spec.quality[static_cast<std::size_t>(i)];
    return spec.values[static_cast<std::size_t>(i)];
  };
  double q = 0.0;
  p.job_code = pick(d.job_code, kTagJob, q);
  p.marital_status = pick(d.marital_status, kTagMarital, q);
  p.gender = pick(d.gender, kTagGender, q);
  p.branch = pick(d.branch, kTagBranch, q);
  p.city = pick(d.city, kTagCity, q);
  p.home_status = pick(d.home_status, kTagHome, q);
  p.cars = pick(d.cars, kTagCars, q);

  const LatentParams& lp = cfg.latent;
  q += lp.children_weight * std::min(p.children, 3);
  q += clamp(lp.income_weight * std::log(p.income / lp.income_pivot), -1.2, 1.2);
  q += clamp(lp.age_weight * (p.age - 40), -0.45, 0.45);
  q += lp.sigma_quality * rng::normal(rng::key(seed, kTagQuality, cid));
  p.latent_quality = q;
  p.cash_appetite =
      cfg.propensity.sigma_appetite * rng::normal(rng::key(seed, kTagAppetite, cid));
  return p;
}

}  // namespace

GenConfig default_gen_config() {
  GenConfig cfg;
  cfg.n_customers = 7000;
  cfg.start_period = Period::from_yyyymm(197501);
  cfg.end_period = Period::from_yyyymm(199812);
  cfg.seed = 424242;

  Demographics& d = cfg.demo;
  d.job_code = {{"Permanent", "Contract", "Owner company", "Retired"},
                {0.55, 0.20, 0.10, 0.15},
                {0.35, -0.55, 0.00, 0.25}};
  d.marital_status = {{"Maried", "Single", "Divorced", "Widowed"},
                      {0.45, 0.30, 0.15, 0.10},
                      {0.20, -0.40, -0.05, 0.25}};
  d.gender = {{"F", "M"}, {0.5, 0.5}, {0.0, 0.0}};
  d.branch = {{"Retail", "Online", "Broker", "Partner"},
              {0.45, 0.20, 0.15, 0.20},
              {0.05, 0.0, -0.10, 0.0}};
  d.city = {{"Village", "Town", "City", "Big city"},
            {0.25, 0.35, 0.25, 0.15},
            {0.0, 0.0, 0.05, 0.05}};
  d.home_status = {{"Owner", "Rented", "With family"},
                   {0.50, 0.30, 0.20},
                   {0.15, -0.10, 0.0}};
  d.cars = {{"None", "One", "Two plus"}, {0.40, 0.45, 0.15}, {0.0, 0.05, 0.05}};
  return cfg;
}

World generate_world(const GenConfig& cfg) {
  cfg.validate();
  World world;
  world.cfg = cfg;

  const int n = cfg.n_customers;
  std::vector<CustomerState> state;
  state.reserve(static_cast<std::size_t>(n));
  world.customers.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    CustomerState cs;
    cs.prof = make_profile(i + 1, cfg);
    world.customers.push_back(cs.prof);
    state.push_back(std::move(cs));
  }

  std::vector<std::vector<MonthlySnapshot>> trails;
  std::int64_t next_account_id = 1;
  const int n_brackets = static_cast<int>(cfg.bracket_shifts.size());
  std::vector<TransitionMatrix> month_matrices(static_cast<std::size_t>(n_brackets));
  std::vector<double> indices;
  std::vector<CashCandidate> eligible;

  const double ins_interest_r = cfg.pricing_ins.apr;
  const double css_interest_r = cfg.pricing_css.apr;

  for (Period m = cfg.start_period; m <= cfg.end_period; m = m.next()) {
    const int mi = months_between(cfg.start_period, m);
    for (int b = 0; b < n_brackets; ++b)
      month_matrices[static_cast<std::size_t>(b)] = effective_matrix(cfg.base_matrix, b, mi, cfg);

    // cross-sell responses are decided from the prior month's state
    eligible.clear();
    if (m > cfg.start_period && cfg.response_rate_target > 0.0) {
      for (const CustomerState& cs : state) {
        if (!cs.active_prev) continue;
        const PropensityParams& pp = cfg.propensity;
        const double x = pp.past_css * std::min(cs.n_css_ever, 6) +
                         (cs.active_css_prev ? pp.active_css : 0.0) +
                         pp.risk * (-cs.prof.latent_quality) + cs.prof.cash_appetite;
        eligible.push_back({cs.prof.customer_id, x});
      }
    }
    const std::vector<std::int64_t> cash_takers = spawn_cash_applications(eligible, m, cfg);
    std::size_t taker_pos = 0;

    for (CustomerState& cs : state) {
      const std::int64_t cid = cs.prof.customer_id;

      // open this month's new accounts (cash first: it was requested first)
      while (taker_pos < cash_takers.size() && cash_takers[taker_pos] == cid) {
        ++taker_pos;
        LiveAccount la;
        la.acct.account_id = next_account_id++;
        la.acct.customer_id = cid;
        la.acct.product = Product::Css;
        la.acct.open_period = m;
        la.acct.amount = cfg.cash_amount;
        la.acct.n_installments = cfg.cash_term;
        la.acct.installment = annuity_payment(la.acct.amount, la.acct.n_installments, css_interest_r);
        la.last = MonthlySnapshot{la.acct.account_id, m.prev(), 0, 0, 0,
                                  la.acct.n_installments, AccountStatus::A};
        la.app_index = static_cast<std::uint32_t>(world.apps.size());
        ++cs.n_css_ever;
        Application app;
        app.account = la.acct;
        world.apps.push_back(app);
        trails.emplace_back();
        cs.accounts.push_back(la);
      }
      if (rng::u01(rng::key(cfg.seed, kTagInsArrival, cid, mi)) < cfg.ins_hazard) {
        LiveAccount la;
        la.acct.account_id = next_account_id++;
        la.acct.customer_id = cid;
        la.acct.product = Product::Ins;
        la.acct.open_period = m;
        la.acct.amount = cfg.ins_amount.draw(rng::key(cfg.seed, kTagInsAmount, cid, mi));
        la.acct.n_installments = cfg.ins_term_months[static_cast<std::size_t>(
            rng::categorical(rng::key(cfg.seed, kTagInsTerm, cid, mi), cfg.ins_term_weights))];
        la.acct.installment = annuity_payment(la.acct.amount, la.acct.n_installments, ins_interest_r);
        la.last = MonthlySnapshot{la.acct.account_id, m.prev(), 0, 0, 0,
                                  la.acct.n_installments, AccountStatus::A};
        la.app_index = static_cast<std::uint32_t>(world.apps.size());
        Application app;
        app.account = la.acct;
        world.apps.push_back(app);
        trails.emplace_back();
        cs.accounts.push_back(la);
      }

      if (cs.accounts.empty()) continue;

      // behavior score inputs are strictly pre-month
      HistoryFeatures f;
      f.max_due_prev = cs.max_due_prev;
      f.n_active_prev = cs.n_active_prev;
      f.n_stat_b = cs.n_stat_b;
      for (int k = 1; k <= 3; ++k) {
        const int stamp = mi - k;
        if (stamp >= 0 && cs.maxdue_stamp[static_cast<std::size_t>(stamp % 4)] == stamp)
          f.max_due_last3 =
              std::max(f.max_due_last3, cs.maxdue_ring[static_cast<std::size_t>(stamp % 4)]);
      }
      const double cscore = customer_score(cs.prof, f, cfg);

      int max_open_live = -1;
      for (const LiveAccount& la : cs.accounts)
        if (la.open) max_open_live = std::max(max_open_live, la.acct.open_period.index());

      int month_max_due = 0;
      int month_active = 0;
      bool month_active_css = false;
      for (LiveAccount& la : cs.accounts) {
        if (!la.open) continue;
        const bool newest = la.acct.open_period.index() >= max_open_live;
        const double score = account_score(cscore, la.acct, cs.prof, newest, cfg);
        const int bracket = bracket_of(score, cfg);
        if (la.acct.open_period == m) {
          Application& app = world.apps[la.app_index];
          app.latent_risk = -score + cfg.risk_shift + cfg.macro.logit_shift(mi);
        }
        const double u = rng::u01(
            rng::key(cfg.seed, kTagStep, cid, la.acct.account_id, m.index()));
        la.last = step_account(la.last, month_matrices[static_cast<std::size_t>(bracket)], u);
        trails[la.app_index].push_back(la.last);
        month_max_due = std::max(month_max_due, la.last.due_installments);
        if (la.last.status == AccountStatus::A) {
          ++month_active;
          if (la.acct.product == Product::Css) month_active_css = true;
        } else {
          la.open = false;
          if (la.last.status == AccountStatus::B) ++cs.n_stat_b;
        }
      }

      cs.maxdue_ring[static_cast<std::size_t>(mi % 4)] = month_max_due;
      cs.maxdue_stamp[static_cast<std::size_t>(mi % 4)] = mi;
      cs.max_due_prev = month_max_due;
      cs.n_active_prev = month_active;
      cs.active_prev = month_active > 0;
      cs.active_css_prev = month_active_css;
    }
    if (taker_pos != cash_takers.size())
      throw DomainError("cash takers not consumed in customer order");
  }

  // freeze trails in account-id order and derive targets
  world.snap_offset.assign(world.apps.size() + 1, 0);
  std::size_t total = 0;
  for (const auto& t : trails) total += t.size();
  world.snaps.reserve(total);
  world.customer_apps.assign(static_cast<std::size_t>(n), {});
  for (std::size_t i = 0; i < world.apps.size(); ++i) {
    world.snap_offset[i] = static_cast<std::uint32_t>(world.snaps.size());
    world.snaps.insert(world.snaps.end(), trails[i].begin(), trails[i].end());
    world.apps[i].default_k = default_targets(trails[i]);
    world.customer_apps[static_cast<std::size_t>(world.apps[i].account.customer_id) - 1]
        .push_back(static_cast<std::uint32_t>(i));
  }
  world.snap_offset[world.apps.size()] = static_cast<std::uint32_t>(world.snaps.size());
  return world;
}

std::size_t World::app_index_of(std::int64_t account_id) const {
  // account ids are assigned sequentially from 1 in app order
  const std::size_t idx = static_cast<std::size_t>(account_id) - 1;
  if (idx >= apps.size() || apps[idx].account.account_id != account_id)
    throw DataError("unknown account id " + std::to_string(account_id));
  return idx;
}

double global_default12_rate(const World& world) {
  if (world.apps.empty()) throw DataError("world has no applications");
  std::size_t bad = 0;
  for (const Application& a : world.apps) bad += a.default_k[3] ? 1 : 0;
  return static_cast<double>(bad) / static_cast<double>(world.apps.size());
}

CalibrationResult calibrate_global_risk(const GenConfig& cfg, double target, double tol) {
  cfg.validate();
  if (target <= 0.0 || target >= 1.0) throw ConfigError("calibration target outside (0,1)");
  if (tol <= 0.0) throw ConfigError("calibration tolerance must be positive");

  CalibrationResult result;
  result.cfg = cfg;
  int budget = cfg.calibration.max_iterations;

  auto rate_at = [&](double shift) {
    if (result.iterations >= budget)
      throw DataError("calibration exceeded iteration budget of " + std::to_string(budget));
    GenConfig c = cfg;
    c.risk_shift = shift;
    const double r = global_default12_rate(generate_world(c));
    ++result.iterations;
    result.trace.emplace_back(shift, r);
    return r;
  };

  const double r0 = rate_at(cfg.risk_shift);
  if (std::abs(r0 - target) <= tol) {
    result.achieved = r0;
    return result;  // already on target; risk_shift unchanged
  }

  double lo = cfg.calibration.lo, hi = cfg.calibration.hi;
  double rlo = lo == cfg.risk_shift ? r0 : rate_at(lo);
  if (std::abs(rlo - target) <= tol) {
    result.cfg.risk_shift = lo;
    result.achieved = rlo;
    return result;
  }
  double rhi = hi == cfg.risk_shift ? r0 : rate_at(hi);
  if (std::abs(rhi - target) <= tol) {
    result.cfg.risk_shift = hi;
    result.achieved = rhi;
    return result;
  }
  if (!(rlo < target && target < rhi))
    throw DataError("calibration bounds do not bracket target: default_12 in [" +
                    format_number(rlo) + ", " + format_number(rhi) + "], target " +
                    format_number(target));

  while (true) {
    const double mid = 0.5 * (lo + hi);
    const double r = rate_at(mid);
    if (std::abs(r - target) <= tol) {
      result.cfg.risk_shift = mid;
      result.achieved = r;
      return result;
    }
    if (r < target)
      lo = mid;
    else
      hi = mid;
  }
}

}  // namespace creditlab
