#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "creditlab/scorecard.hpp"

namespace creditlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct BinStat {
  double lo = -kInf, hi = kInf;           // (lo, hi] for numeric bins
  std::vector<std::string> categories;    // for categorical bins
  long n = 0, bad = 0;

  double bad_rate() const { return n ? static_cast<double>(bad) / n : 0.0; }
};

void merge_into(BinStat& a, const BinStat& b) {
  a.hi = b.hi;
  a.n += b.n;
  a.bad += b.bad;
  a.categories.insert(a.categories.end(), b.categories.begin(), b.categories.end());
}

double woe_of(const BinStat& s, long total_good, long total_bad) {
  const double good_share = (static_cast<double>(s.n - s.bad) + 0.5) / (total_good + 1.0);
  const double bad_share = (static_cast<double>(s.bad) + 0.5) / (total_bad + 1.0);
  return std::log(good_share / bad_share);
}

// Pool adjacent violators toward the dominant rate direction, then min-share
// merges, then reduce to max_bins by the smallest WoE gap. All tie-breaks go
// left, so the result is deterministic.
void coarse_class(std::vector<BinStat>& bins, long n_total, long total_good, long total_bad,
                  const BinningSpec& spec, bool enforce_monotone) {
  if (enforce_monotone && bins.size() > 1) {
    double dir = 0.0;
    double mean_i = 0.0, mean_r = 0.0;
    for (std::size_t i = 0; i < bins.size(); ++i) {
      mean_i += static_cast<double>(i) * bins[i].n;
      mean_r += bins[i].bad_rate() * bins[i].n;
    }
    const double n_sum = static_cast<double>(
        std::accumulate(bins.begin(), bins.end(), 0L,
                        [](long acc, const BinStat& b) { return acc + b.n; }));
    mean_i /= n_sum;
    mean_r /= n_sum;
    for (std::size_t i = 0; i < bins.size(); ++i)
      dir += bins[i].n * (static_cast<double>(i) - mean_i) * (bins[i].bad_rate() - mean_r);
    const double sign = dir < 0 ? -1.0 : 1.0;

    bool merged = true;
    while (merged && bins.size() > 1) {
      merged = false;
      for (std::size_t i = 0; i + 1 < bins.size(); ++i) {
        if (sign * (bins[i + 1].bad_rate() - bins[i].bad_rate()) < 0.0) {
          merge_into(bins[i], bins[i + 1]);
          bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(i) + 1);
          merged = true;
          break;
        }
      }
    }
  }

  const double min_n = spec.min_share * static_cast<double>(n_total);
  while (bins.size() > 1) {
    std::size_t worst = bins.size();
    for (std::size_t i = 0; i < bins.size(); ++i)
      if (static_cast<double>(bins[i].n) < min_n && (worst == bins.size() || bins[i].n < bins[worst].n)) worst = i;
    if (worst == bins.size()) break;
    std::size_t into = worst;
    if (worst == 0) {
      into = 0;   // merge with the right neighbor
    } else if (worst + 1 == bins.size()) {
      into = worst - 1;
    } else {
      const double dl = std::abs(bins[worst - 1].bad_rate() - bins[worst].bad_rate());
      const double dr = std::abs(bins[worst + 1].bad_rate() - bins[worst].bad_rate());
      into = dl <= dr ? worst - 1 : worst;
    }
    merge_into(bins[into], bins[into + 1]);
    bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(into) + 1);
  }

  while (static_cast<int>(bins.size()) > spec.max_bins) {
    std::size_t best = 0;
    double best_gap = kInf;
    for (std::size_t i = 0; i + 1 < bins.size(); ++i) {
      const double gap = std::abs(woe_of(bins[i], total_good, total_bad) -
                                  woe_of(bins[i + 1], total_good, total_bad));
      if (gap < best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    merge_into(bins[best], bins[best + 1]);
    bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(best) + 1);
  }
}

// Small dense symmetric solve via Cholesky with a ridge fallback.
std::vector<double> solve_spd(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t i = 0; i < n; ++i) a[i][i] += 1e-9;
  std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a[i][j];
      for (std::size_t k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
      if (i == j) {
        if (sum <= 0.0) throw DataError("logistic fit: singular normal equations");
        l[i][i] = std::sqrt(sum);
      } else {
        l[i][j] = sum / l[j][j];
      }
    }
  }
  std::vector<double> y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = b[i];
    for (std::size_t k = 0; k < i; ++k) sum -= l[i][k] * y[k];
    y[i] = sum / l[i][i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double sum = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) sum -= l[k][ii] * x[k];
    x[ii] = sum / l[ii][ii];
  }
  return x;
}

// Logistic regression with intercept in column 0 of x. Returns coefficients.
std::vector<double> logistic_fit(const std::vector<std::vector<double>>& x,
                                 std::span<const int> y, int max_iterations) {
  const std::size_t n = x.size();
  const std::size_t k = x.front().size();
  std::vector<double> beta(k, 0.0);
  for (int iter = 0; iter < max_iterations; ++iter) {
    std::vector<std::vector<double>> xtwx(k, std::vector<double>(k, 0.0));
    std::vector<double> xtz(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0.0;
      for (std::size_t j = 0; j < k; ++j) eta += beta[j] * x[i][j];
      eta = std::clamp(eta, -30.0, 30.0);
      const double p = sigmoid(eta);
      const double w = std::max(p * (1.0 - p), 1e-10);
      const double r = y[i] - p;
      for (std::size_t j = 0; j < k; ++j) {
        xtz[j] += x[i][j] * r;
        for (std::size_t l = 0; l <= j; ++l) xtwx[j][l] += w * x[i][j] * x[i][l];
      }
    }
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t l = j + 1; l < k; ++l) xtwx[j][l] = xtwx[l][j];
    const std::vector<double> delta = solve_spd(std::move(xtwx), std::move(xtz));
    double biggest = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      beta[j] += delta[j];
      biggest = std::max(biggest, std::abs(delta[j]));
    }
    if (biggest < 1e-10) break;
  }
  return beta;
}

struct FittedVariable {
  std::string name;
  int column = -1;
  bool categorical = false;
  std::vector<BinStat> bins;      // numeric: ascending cuts; categorical: rate order
  bool has_missing = false;
  BinStat missing_bin;
  std::vector<double> woe;        // aligned with bins, then missing at the end
};

int bin_index_of(const FittedVariable& v, const AbtRow& row) {
  if (v.categorical) {
    const std::string& val = row.categorical(v.column);
    for (std::size_t i = 0; i < v.bins.size(); ++i)
      if (std::find(v.bins[i].categories.begin(), v.bins[i].categories.end(), val) !=
          v.bins[i].categories.end())
        return static_cast<int>(i);
    return -1;
  }
  const double val = row.numeric(v.column);
  if (is_missing(val)) return v.has_missing ? static_cast<int>(v.bins.size()) : -1;
  for (std::size_t i = 0; i < v.bins.size(); ++i)
    if (v.bins[i].lo < val && val <= v.bins[i].hi) return static_cast<int>(i);
  return -1;
}

}  // namespace

Model fit_scorecard(std::span<const AbtRow> rows, std::span<const int> target,
                    const FitSpec& spec) {
  if (rows.size() != target.size()) throw DomainError("rows and target lengths differ");
  if (rows.empty()) throw DataError("fit needs rows");
  const long total_bad = std::accumulate(target.begin(), target.end(), 0L);
  const long total_good = static_cast<long>(rows.size()) - total_bad;
  if (total_bad == 0 || total_good == 0)
    throw DataError(spec.model_name + ": target is single-class, nothing to fit");
  if (spec.variables.empty()) throw ConfigError(spec.model_name + ": no candidate variables");

  const AbtSchema& schema = abt_schema();
  std::vector<FittedVariable> fitted;

  for (const std::string& name : spec.variables) {
    const int col = schema.index_of(name);
    if (col < 0) throw ConfigError(spec.model_name + ": unknown variable " + name);
    if (schema.kind(col) == ColumnKind::Id)
      throw ConfigError(spec.model_name + ": id column " + name + " cannot be a predictor");

    FittedVariable v;
    v.name = schema.names()[static_cast<std::size_t>(col)];
    v.column = col;
    v.categorical = schema.kind(col) == ColumnKind::Categorical;

    if (v.categorical) {
      std::map<std::string, BinStat> per_cat;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        BinStat& s = per_cat[rows[i].categorical(col)];
        ++s.n;
        s.bad += target[i];
      }
      for (auto& [cat, s] : per_cat) {
        s.categories = {cat};
        v.bins.push_back(std::move(s));
      }
      // Rate order makes category merging an ordinal problem.
      std::stable_sort(v.bins.begin(), v.bins.end(), [](const BinStat& a, const BinStat& b) {
        return a.bad_rate() < b.bad_rate();
      });
      coarse_class(v.bins, static_cast<long>(rows.size()), total_good, total_bad, spec.binning,
                   false);
    } else {
      std::vector<double> values;
      values.reserve(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double val = rows[i].numeric(col);
        if (is_missing(val)) {
          ++v.missing_bin.n;
          v.missing_bin.bad += target[i];
        } else {
          values.push_back(val);
        }
      }
      v.has_missing = v.missing_bin.n > 0;
      if (!values.empty()) {
        std::sort(values.begin(), values.end());
        std::vector<double> cuts;   // internal ascending cut points
        const std::size_t groups = static_cast<std::size_t>(spec.binning.prebins);
        for (std::size_t g = 1; g < groups; ++g) {
          const double edge = values[g * values.size() / groups];
          if (cuts.empty() || edge > cuts.back()) cuts.push_back(edge);
        }
        if (!cuts.empty() && cuts.back() >= values.back()) cuts.pop_back();

        v.bins.assign(cuts.size() + 1, BinStat{});
        for (std::size_t i = 0; i <= cuts.size(); ++i) {
          v.bins[i].lo = i == 0 ? -kInf : cuts[i - 1];
          v.bins[i].hi = i == cuts.size() ? kInf : cuts[i];
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const double val = rows[i].numeric(col);
          if (is_missing(val)) continue;
          // (lo, hi] assignment: a value sitting exactly on a cut belongs below it.
          const std::size_t b = static_cast<std::size_t>(
              std::lower_bound(cuts.begin(), cuts.end(), val) - cuts.begin());
          ++v.bins[b].n;
          v.bins[b].bad += target[i];
        }
        coarse_class(v.bins, static_cast<long>(rows.size()), total_good, total_bad, spec.binning,
                     true);
      }
    }

    const int n_effective = static_cast<int>(v.bins.size()) + (v.has_missing ? 1 : 0);
    if (n_effective < 2) continue;   // no discrimination left after merging

    for (const BinStat& b : v.bins) v.woe.push_back(woe_of(b, total_good, total_bad));
    if (v.has_missing) v.woe.push_back(woe_of(v.missing_bin, total_good, total_bad));
    fitted.push_back(std::move(v));
  }

  if (fitted.empty()) throw DataError(spec.model_name + ": no variable survived binning");

  // Logistic regression on the WoE-transformed features.
  std::vector<std::vector<double>> x(rows.size(), std::vector<double>(fitted.size() + 1, 1.0));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < fitted.size(); ++j) {
      const int b = bin_index_of(fitted[j], rows[i]);
      if (b < 0) throw DomainError("training row escaped its own binning");
      x[i][j + 1] = fitted[j].woe[static_cast<std::size_t>(b)];
    }
  const std::vector<double> beta = logistic_fit(x, target, spec.max_iterations);

  Model m;
  m.card.name = spec.model_name;
  for (std::size_t j = 0; j < fitted.size(); ++j) {
    const FittedVariable& v = fitted[j];
    std::vector<double> raw;
    for (double w : v.woe) raw.push_back(-spec.woe_scale * beta[j + 1] * w);
    const double worst = *std::min_element(raw.begin(), raw.end());

    ScoreVariable out;
    out.name = v.name;
    for (std::size_t i = 0; i < v.bins.size(); ++i) {
      ScoreBin b;
      if (v.categorical) {
        b.kind = ScoreBin::Kind::Categories;
        b.categories = v.bins[i].categories;
        std::sort(b.categories.begin(), b.categories.end());
      } else {
        b.kind = ScoreBin::Kind::Interval;
        b.gt = v.bins[i].lo;
        b.le = v.bins[i].hi;
      }
      b.points = static_cast<int>(std::lround(raw[i] - worst)) + spec.anchor;
      out.bins.push_back(std::move(b));
    }
    if (v.has_missing) {
      ScoreBin b;
      b.kind = ScoreBin::Kind::Missing;
      b.points = static_cast<int>(std::lround(raw.back() - worst)) + spec.anchor;
      out.bins.push_back(std::move(b));
    }
    m.card.variables.push_back(std::move(out));
  }
  validate_model(m);

  // Calibrate total points back to an event probability on the same rows.
  std::vector<std::vector<double>> xs(rows.size(), std::vector<double>(2, 1.0));
  for (std::size_t i = 0; i < rows.size(); ++i)
    xs[i][1] = static_cast<double>(score(rows[i], m.card));
  const std::vector<double> ab = logistic_fit(xs, target, spec.max_iterations);
  m.calibration.a = ab[1];
  m.calibration.b = ab[0];
  return m;
}

std::optional<double> try_gini(std::span<const double> predictions,
                               std::span<const int> outcomes) {
  if (predictions.size() != outcomes.size()) throw DomainError("prediction/outcome sizes differ");
  const std::size_t n = predictions.size();
  long n_pos = 0;
  for (int y : outcomes) n_pos += y;
  const long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return predictions[a] < predictions[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && predictions[order[j]] == predictions[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (outcomes[order[k]]) rank_sum_pos += midrank;
    i = j;
  }
  const double auc = (rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1)) /
                     (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return 2.0 * auc - 1.0;
}

double gini(std::span<const double> predictions, std::span<const int> outcomes) {
  const std::optional<double> g = try_gini(predictions, outcomes);
  if (!g) throw DataError("gini is undefined on a single-class sample");
  return *g;
}

double lift(std::span<const double> predictions, std::span<const int> outcomes, int percentile) {
  if (predictions.size() != outcomes.size()) throw DomainError("prediction/outcome sizes differ");
  if (percentile <= 0 || percentile > 100) throw DomainError("percentile must be in (0, 100]");
  const std::size_t n = predictions.size();
  const std::size_t n_top = n * static_cast<std::size_t>(percentile) / 100;
  if (n_top == 0) throw DataError("lift bucket is empty at this sample size");
  long n_pos = 0;
  for (int y : outcomes) n_pos += y;
  if (n_pos == 0) throw DataError("lift needs at least one positive outcome");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (predictions[a] != predictions[b]) return predictions[a] > predictions[b];
    return a < b;
  });
  long top_pos = 0;
  for (std::size_t k = 0; k < n_top; ++k) top_pos += outcomes[order[k]];
  const double top_rate = static_cast<double>(top_pos) / static_cast<double>(n_top);
  const double overall = static_cast<double>(n_pos) / static_cast<double>(n);
  return top_rate / overall;
}

}  // namespace creditlab
