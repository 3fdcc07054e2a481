#include "physiodecode/eval.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "physiodecode/error.hpp"

namespace physiodecode::eval {

using ordered_json = nlohmann::ordered_json;

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (auto v : counts) s += v;
  return s;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t s = 0;
  for (int c = 0; c < n_classes; ++c) s += at(c, c);
  return s;
}

std::size_t ConfusionMatrix::false_positives(int c) const {
  std::size_t s = 0;
  for (int t = 0; t < n_classes; ++t)
    if (t != c) s += at(t, c);
  return s;
}

std::size_t ConfusionMatrix::false_negatives(int c) const {
  std::size_t s = 0;
  for (int p = 0; p < n_classes; ++p)
    if (p != c) s += at(c, p);
  return s;
}

std::size_t ConfusionMatrix::true_negatives(int c) const {
  return total() - true_positives(c) - false_positives(c) - false_negatives(c);
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<std::string> default_names(int n_classes) {
  std::vector<std::string> names;
  for (int c = 0; c < n_classes; ++c)
    names.emplace_back(n_classes == kNumClasses ? std::string(class_name(class_from_ordinal(c)))
                                                : "class" + std::to_string(c));
  return names;
}

}  // namespace

EvalReport report_from_confusion(const ConfusionMatrix& confusion, std::vector<std::string> class_names) {
  const int n = confusion.n_classes;
  EvalReport r;
  r.confusion = confusion;
  r.class_names = class_names.empty() ? default_names(n) : std::move(class_names);
  const std::size_t total = confusion.total();
  r.accuracy = ratio(confusion.trace(), total);
  for (int c = 0; c < n; ++c) {
    ClassMetrics m;
    const auto tp = confusion.true_positives(c);
    m.precision = ratio(tp, tp + confusion.false_positives(c));
    m.recall = ratio(tp, tp + confusion.false_negatives(c));
    m.f1 = (m.precision + m.recall) == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    m.support = confusion.support(c);
    r.per_class.push_back(m);
  }
  for (const auto& m : r.per_class) {
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
    const double w = ratio(m.support, total);
    r.weighted_precision += w * m.precision;
    r.weighted_recall += w * m.recall;
    r.weighted_f1 += w * m.f1;
  }
  r.macro_precision /= n;
  r.macro_recall /= n;
  r.macro_f1 /= n;
  return r;
}

EvalReport evaluate(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
  if (y_true.size() != y_pred.size() || y_true.empty())
    throw Error(ErrorKind::LengthMismatch, "y_true has " + std::to_string(y_true.size()) +
                                               " labels, y_pred has " + std::to_string(y_pred.size()));
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= n_classes || y_pred[i] < 0 || y_pred[i] >= n_classes)
      throw Error(ErrorKind::LengthMismatch, "label out of range", i);
    ++cm.at(y_true[i], y_pred[i]);
  }
  return report_from_confusion(cm);
}

EvalReport evaluate(std::span<const BehaviorClass> y_true, std::span<const BehaviorClass> y_pred) {
  std::vector<int> t(y_true.size()), p(y_pred.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = ordinal(y_true[i]);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = ordinal(y_pred[i]);
  return evaluate(t, p, kNumClasses);
}

double macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
  return evaluate(y_true, y_pred, n_classes).macro_f1;
}

double macro_average(std::span<const double> per_class_f1) {
  if (per_class_f1.empty()) return 0.0;
  double s = 0.0;
  for (double v : per_class_f1) s += v;
  return s / static_cast<double>(per_class_f1.size());
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::Json;
  if (text == "csv") return ReportFormat::Csv;
  if (text == "text" || text == "txt") return ReportFormat::Text;
  throw Error(ErrorKind::ConfigInvalid, "unknown report format '" + std::string(text) + "'");
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string to_json(const EvalReport& r, std::string_view config_hash) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["n_samples"] = r.confusion.total();
  j["accuracy"] = r.accuracy;
  j["macro_precision"] = r.macro_precision;
  j["macro_recall"] = r.macro_recall;
  j["macro_f1"] = r.macro_f1;
  j["weighted_precision"] = r.weighted_precision;
  j["weighted_recall"] = r.weighted_recall;
  j["weighted_f1"] = r.weighted_f1;
  auto classes = ordered_json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    classes.push_back({{"class", r.class_names[c]},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support}});
  }
  j["classes"] = std::move(classes);
  auto rows = ordered_json::array();
  for (int t = 0; t < r.confusion.n_classes; ++t) {
    auto row = ordered_json::array();
    for (int p = 0; p < r.confusion.n_classes; ++p) row.push_back(r.confusion.at(t, p));
    rows.push_back(std::move(row));
  }
  j["confusion"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "class,precision,recall,f1,support\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    out << r.class_names[c] << ',' << full(m.precision) << ',' << full(m.recall) << ','
        << full(m.f1) << ',' << m.support << '\n';
  }
  return out.str();
}

std::string to_text(const EvalReport& r) {
  char line[128];
  std::ostringstream out;
  std::snprintf(line, sizeof line, "%-18s %10s %10s %10s %10s\n", "Class", "Precision", "Recall",
                "F1-Score", "Support");
  out << line;
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    std::snprintf(line, sizeof line, "%-18s %10s %10s %10s %10zu\n", r.class_names[c].c_str(),
                  fixed4(m.precision).c_str(), fixed4(m.recall).c_str(), fixed4(m.f1).c_str(),
                  m.support);
    out << line;
  }
  const std::size_t total = r.confusion.total();
  std::snprintf(line, sizeof line, "%-18s %10s %10s %10s %10zu\n", "Accuracy", "", "",
                fixed4(r.accuracy).c_str(), total);
  out << line;
  std::snprintf(line, sizeof line, "%-18s %10s %10s %10s %10zu\n", "Macro Average",
                fixed4(r.macro_precision).c_str(), fixed4(r.macro_recall).c_str(),
                fixed4(r.macro_f1).c_str(), total);
  out << line;
  std::snprintf(line, sizeof line, "%-18s %10s %10s %10s %10zu\n", "Weighted Average",
                fixed4(r.weighted_precision).c_str(), fixed4(r.weighted_recall).c_str(),
                fixed4(r.weighted_f1).c_str(), total);
  out << line;
  return out.str();
}

}  // namespace

std::string emit_report(const EvalReport& report, ReportFormat format, std::string_view config_hash) {
  switch (format) {
    case ReportFormat::Json: return to_json(report, config_hash);
    case ReportFormat::Csv: return to_csv(report);
    case ReportFormat::Text: return to_text(report);
  }
  return {};
}

EvalReport report_from_json(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    if (j.at("schema_version").get<int>() != kReportSchemaVersion)
      throw Error(ErrorKind::SchemaVersionMismatch, "unsupported report schema version");
    const auto& rows = j.at("confusion");
    const int n = static_cast<int>(rows.size());
    ConfusionMatrix cm(n);
    for (int t = 0; t < n; ++t) {
      if (static_cast<int>(rows[static_cast<std::size_t>(t)].size()) != n)
        throw Error(ErrorKind::SchemaVersionMismatch, "confusion matrix is not square");
      for (int p = 0; p < n; ++p)
        cm.at(t, p) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)].get<std::size_t>();
    }
    std::vector<std::string> names;
    for (const auto& c : j.at("classes")) names.push_back(c.at("class").get<std::string>());
    if (static_cast<int>(names.size()) != n)
      throw Error(ErrorKind::SchemaVersionMismatch, "class list does not match confusion matrix");
    return report_from_confusion(cm, std::move(names));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaVersionMismatch, std::string("malformed report JSON: ") + e.what());
  }
}

}  // namespace physiodecode::eval
