#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "creditlab/abt.hpp"

namespace creditlab {

// ---- card model -----------------------------------------------------------

struct ScoreBin {
  enum class Kind : std::uint8_t { Interval, Categories, Missing };

  Kind kind = Kind::Interval;
  // Half-open interval (gt, le]; infinities mark unbounded sides.
  double gt = -std::numeric_limits<double>::infinity();
  double le = std::numeric_limits<double>::infinity();
  std::vector<std::string> categories;
  int points = 0;

  bool covers_number(double v) const { return kind == Kind::Interval && gt < v && v <= le; }
  bool covers_category(std::string_view v) const;
};

struct ScoreVariable {
  std::string name;
  int column = -1;               // resolved ABT column
  std::vector<ScoreBin> bins;    // kept in authored order

  // nullptr when no bin covers the row's value.
  const ScoreBin* match(const AbtRow& row) const;
};

// probability = 1 / (1 + exp(-(a*score + b)))
struct Calibration {
  double a = 0.0;
  double b = 0.0;
};

struct Scorecard {
  std::string name;
  std::vector<ScoreVariable> variables;
};

struct Model {
  Scorecard card;
  Calibration calibration;
};

// Binds variable names to ABT columns and checks bin sanity: interval bins
// must tile the finite line exactly once, at most one missing bin, no
// duplicate categories, bin kinds consistent with the column kind.
// Throws ConfigError on violations.
void validate_model(Model& m);

// ---- scoring ----------------------------------------------------------------

// Sum of matched partial scores. Throws DataError naming the variable and the
// value when some value is not covered by any bin.
int score(const AbtRow& row, const Scorecard& card);

// nullopt instead of throwing; rows a card cannot score stay unscored.
std::optional<int> try_score(const AbtRow& row, const Scorecard& card);

double to_probability(int points, const Calibration& cal);
std::optional<double> try_probability(const AbtRow& row, const Model& m);

// ---- the four-model battery -------------------------------------------------

struct ModelSuite {
  Model pd_ins;          // default risk of the installment application
  Model pd_css;          // default risk of the cash application
  Model cross_pd_css;    // future cash default risk seen from an installment application
  Model pr_css;          // probability of a future cash application

  const Model* by_name(std::string_view name) const;   // case-insensitive; nullptr if unknown
};

// JSON serialization; the text form is canonical and round-trips byte-stably.
std::string model_to_json(const Model& m);
Model model_from_json(const std::string& text);   // validates
Model load_model(const std::string& path);
void save_model(const Model& m, const std::string& path);

// Directory layout: pd_ins.json, pd_css.json, cross_pd_css.json, pr_css.json.
ModelSuite load_suite(const std::string& dir);
void save_suite(const ModelSuite& suite, const std::string& dir);

// ---- fitting -----------------------------------------------------------------

struct BinningSpec {
  int max_bins = 6;          // per variable, missing bin not counted
  double min_share = 0.05;   // of all training rows
  int prebins = 20;
};

struct FitSpec {
  std::string model_name;
  std::vector<std::string> variables;   // ABT columns, numeric or categorical
  BinningSpec binning;
  double woe_scale = 40.0;   // points per unit of beta*woe
  int anchor = 20;           // partial score of every variable's worst bin
  int max_iterations = 30;   // IRLS budget
};

// Supervised WoE scorecard: monotone coarse bins, logistic fit, integer
// partial scores anchored at the worst bin, plus a score-to-probability
// calibration fitted on the same rows. Deterministic given row order.
// Throws DataError on a single-class target or when no variable survives.
Model fit_scorecard(std::span<const AbtRow> rows, std::span<const int> target,
                    const FitSpec& spec);

// ---- evaluation ----------------------------------------------------------------

// 2*AUC - 1 with midrank tie handling; positive when higher predictions track
// outcome 1. nullopt when outcomes are single-class.
std::optional<double> try_gini(std::span<const double> predictions, std::span<const int> outcomes);
double gini(std::span<const double> predictions, std::span<const int> outcomes);   // throws instead

// Bad rate inside the worst-scored percentile over the overall bad rate.
// Ties break by prediction descending, then row index. Throws DataError when
// the bucket would be empty or no positives exist.
double lift(std::span<const double> predictions, std::span<const int> outcomes, int percentile);

}  // namespace creditlab
