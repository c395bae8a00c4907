#include "creditlab/scorecard.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "creditlab/csv.hpp"

namespace creditlab {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

bool ScoreBin::covers_category(std::string_view v) const {
  if (kind != Kind::Categories) return false;
  return std::find(categories.begin(), categories.end(), v) != categories.end();
}

const ScoreBin* ScoreVariable::match(const AbtRow& row) const {
  if (abt_schema().kind(column) == ColumnKind::Categorical) {
    const std::string& v = row.categorical(column);
    for (const ScoreBin& b : bins)
      if (b.covers_category(v)) return &b;
    return nullptr;
  }
  const double v = row.numeric(column);
  if (is_missing(v)) {
    for (const ScoreBin& b : bins)
      if (b.kind == ScoreBin::Kind::Missing) return &b;
    return nullptr;
  }
  for (const ScoreBin& b : bins)
    if (b.covers_number(v)) return &b;
  return nullptr;
}

void validate_model(Model& m) {
  if (m.card.name.empty()) throw ConfigError("model needs a name");
  if (m.card.variables.empty()) throw ConfigError(m.card.name + ": model has no variables");
  const AbtSchema& schema = abt_schema();
  for (ScoreVariable& var : m.card.variables) {
    const std::string where = m.card.name + ", variable " + var.name;
    var.column = schema.index_of(var.name);
    if (var.column < 0) throw ConfigError(where + ": unknown column");
    if (var.bins.empty()) throw ConfigError(where + ": no bins");

    const bool categorical = schema.kind(var.column) == ColumnKind::Categorical;
    if (!categorical && schema.kind(var.column) != ColumnKind::Numeric)
      throw ConfigError(where + ": id columns cannot be scored");

    int n_missing = 0;
    std::vector<const ScoreBin*> intervals;
    std::set<std::string> seen_categories;
    for (const ScoreBin& b : var.bins) {
      switch (b.kind) {
        case ScoreBin::Kind::Missing:
          if (categorical) throw ConfigError(where + ": missing bin on a categorical column");
          ++n_missing;
          break;
        case ScoreBin::Kind::Categories:
          if (!categorical) throw ConfigError(where + ": category bin on a numeric column");
          if (b.categories.empty()) throw ConfigError(where + ": empty category set");
          for (const std::string& c : b.categories)
            if (!seen_categories.insert(c).second)
              throw ConfigError(where + ": category listed twice: " + c);
          break;
        case ScoreBin::Kind::Interval:
          if (categorical) throw ConfigError(where + ": interval bin on a categorical column");
          if (!(b.gt < b.le)) throw ConfigError(where + ": empty interval");
          intervals.push_back(&b);
          break;
      }
    }
    if (n_missing > 1) throw ConfigError(where + ": more than one missing bin");
    if (!categorical) {
      // The interval bins must tile the finite line exactly once.
      if (intervals.empty()) throw ConfigError(where + ": no interval bins");
      std::sort(intervals.begin(), intervals.end(),
                [](const ScoreBin* a, const ScoreBin* b) { return a->gt < b->gt; });
      if (intervals.front()->gt != -kInf)
        throw ConfigError(where + ": lowest interval must be unbounded below");
      if (intervals.back()->le != kInf)
        throw ConfigError(where + ": highest interval must be unbounded above");
      for (std::size_t i = 1; i < intervals.size(); ++i)
        if (intervals[i]->gt != intervals[i - 1]->le)
          throw ConfigError(where + ": intervals leave a gap or overlap at " +
                            format_number(intervals[i]->gt));
    }
  }
}

int score(const AbtRow& row, const Scorecard& card) {
  int total = 0;
  for (const ScoreVariable& var : card.variables) {
    const ScoreBin* bin = var.match(row);
    if (!bin) {
      const bool categorical = abt_schema().kind(var.column) == ColumnKind::Categorical;
      std::string value = categorical ? row.categorical(var.column)
                          : is_missing(row.numeric(var.column))
                              ? std::string("missing")
                              : format_number(row.numeric(var.column));
      throw DataError(card.name + ": no bin of " + var.name + " covers value " + value);
    }
    total += bin->points;
  }
  return total;
}

std::optional<int> try_score(const AbtRow& row, const Scorecard& card) {
  int total = 0;
  for (const ScoreVariable& var : card.variables) {
    const ScoreBin* bin = var.match(row);
    if (!bin) return std::nullopt;
    total += bin->points;
  }
  return total;
}

double to_probability(int points, const Calibration& cal) {
  return sigmoid(cal.a * points + cal.b);
}

std::optional<double> try_probability(const AbtRow& row, const Model& m) {
  const std::optional<int> pts = try_score(row, m.card);
  if (!pts) return std::nullopt;
  return to_probability(*pts, m.calibration);
}

const Model* ModelSuite::by_name(std::string_view name) const {
  const std::string n = lower(name);
  if (n == "pd_ins") return &pd_ins;
  if (n == "pd_css") return &pd_css;
  if (n == "cross_pd_css") return &cross_pd_css;
  if (n == "pr_css") return &pr_css;
  return nullptr;
}

// ---- JSON ------------------------------------------------------------------

std::string model_to_json(const Model& m) {
  ordered_json j;
  j["name"] = m.card.name;
  j["calibration"] = {{"a", m.calibration.a}, {"b", m.calibration.b}};
  j["variables"] = ordered_json::array();
  for (const ScoreVariable& var : m.card.variables) {
    ordered_json jv;
    jv["name"] = var.name;
    jv["bins"] = ordered_json::array();
    for (const ScoreBin& b : var.bins) {
      ordered_json jb;
      switch (b.kind) {
        case ScoreBin::Kind::Interval:
          if (b.gt != -kInf) jb["gt"] = b.gt;
          if (b.le != kInf) jb["le"] = b.le;
          break;
        case ScoreBin::Kind::Categories: jb["categories"] = b.categories; break;
        case ScoreBin::Kind::Missing: jb["missing"] = true; break;
      }
      jb["points"] = b.points;
      jv["bins"].push_back(std::move(jb));
    }
    j["variables"].push_back(std::move(jv));
  }
  return j.dump(2) + "\n";
}

Model model_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
  }
  Model m;
  try {
    m.card.name = j.at("name").get<std::string>();
    m.calibration.a = j.at("calibration").at("a").get<double>();
    m.calibration.b = j.at("calibration").at("b").get<double>();
    for (const auto& jv : j.at("variables")) {
      ScoreVariable var;
      var.name = jv.at("name").get<std::string>();
      for (const auto& jb : jv.at("bins")) {
        ScoreBin b;
        if (jb.contains("missing")) {
          if (!jb.at("missing").get<bool>())
            throw ConfigError(var.name + ": \"missing\" must be true when present");
          b.kind = ScoreBin::Kind::Missing;
        } else if (jb.contains("categories")) {
          b.kind = ScoreBin::Kind::Categories;
          b.categories = jb.at("categories").get<std::vector<std::string>>();
        } else {
          b.kind = ScoreBin::Kind::Interval;
          if (jb.contains("gt")) b.gt = jb.at("gt").get<double>();
          if (jb.contains("le")) b.le = jb.at("le").get<double>();
        }
        b.points = jb.at("points").get<int>();
        var.bins.push_back(std::move(b));
      }
      m.card.variables.push_back(std::move(var));
    }
  } catch (const ordered_json::exception& e) {
    throw ConfigError(std::string("model file structure: ") + e.what());
  }
  validate_model(m);
  return m;
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file " + path);
  out << model_to_json(m);
}

ModelSuite load_suite(const std::string& dir) {
  ModelSuite s;
  s.pd_ins = load_model(dir + "/pd_ins.json");
  s.pd_css = load_model(dir + "/pd_css.json");
  s.cross_pd_css = load_model(dir + "/cross_pd_css.json");
  s.pr_css = load_model(dir + "/pr_css.json");
  return s;
}

void save_suite(const ModelSuite& suite, const std::string& dir) {
  save_model(suite.pd_ins, dir + "/pd_ins.json");
  save_model(suite.pd_css, dir + "/pd_css.json");
  save_model(suite.cross_pd_css, dir + "/cross_pd_css.json");
  save_model(suite.pr_css, dir + "/pr_css.json");
}

}  // namespace creditlab
