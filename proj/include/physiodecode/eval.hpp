#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "physiodecode/dataset.hpp"

namespace physiodecode::eval {

// counts[t * n + p]: samples of true class t predicted as p.
struct ConfusionMatrix {
  int n_classes = kNumClasses;
  std::vector<std::size_t> counts;

  explicit ConfusionMatrix(int classes = kNumClasses)
      : n_classes(classes), counts(static_cast<std::size_t>(classes * classes), 0) {}

  std::size_t& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth * n_classes + pred)]; }
  std::size_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth * n_classes + pred)];
  }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t true_positives(int c) const { return at(c, c); }
  std::size_t false_positives(int c) const;
  std::size_t false_negatives(int c) const;
  std::size_t true_negatives(int c) const;
  std::size_t support(int c) const { return true_positives(c) + false_negatives(c); }

  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;

  bool operator==(const ClassMetrics&) const = default;
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  ConfusionMatrix confusion;

  bool operator==(const EvalReport&) const = default;
};

// Precision or recall with a zero denominator is 0, and so is F1 when both are.
// Throws LengthMismatch on unequal or empty inputs.
EvalReport evaluate(std::span<const int> y_true, std::span<const int> y_pred,
                    int n_classes = kNumClasses);
EvalReport evaluate(std::span<const BehaviorClass> y_true, std::span<const BehaviorClass> y_pred);
EvalReport report_from_confusion(const ConfusionMatrix& confusion,
                                 std::vector<std::string> class_names = {});

double macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int n_classes = kNumClasses);
// Unweighted mean of per-class F1 scores.
double macro_average(std::span<const double> per_class_f1);

enum class ReportFormat { Json, Csv, Text };
ReportFormat parse_report_format(std::string_view text);

inline constexpr int kReportSchemaVersion = 1;

// json: schema-versioned document; csv: class,precision,recall,f1,support;
// text: per-class table followed by accuracy, macro and weighted rows.
std::string emit_report(const EvalReport& report, ReportFormat format,
                        std::string_view config_hash = {});
// Inverse of the JSON form. Throws SchemaVersionMismatch.
EvalReport report_from_json(std::string_view text);

}  // namespace physiodecode::eval
