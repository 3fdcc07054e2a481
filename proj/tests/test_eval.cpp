#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "physiodecode/error.hpp"
#include "physiodecode/eval.hpp"
#include "physiodecode/rng.hpp"

using namespace physiodecode;
using namespace physiodecode::eval;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Io;
}

std::pair<std::vector<int>, std::vector<int>> noisy_labels(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> t(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<int>(rng.below(4));
    p[i] = rng.uniform() < 0.7 ? t[i] : static_cast<int>(rng.below(4));
  }
  return {t, p};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("macro average of the reference per-class scores") {
  const std::vector<double> f1 = {0.83, 0.79, 0.69, 0.81};
  CHECK(std::abs(macro_average(f1) - 0.78) <= 0.005);
}

TEST_CASE("four-sample fixture") {
  const std::vector<int> t = {0, 0, 1, 1}, p = {0, 1, 1, 1};
  const auto r = evaluate(t, p, 2);
  CHECK(r.accuracy == 0.75);
  CHECK(std::abs(r.macro_f1 - 11.0 / 15.0) <= 1e-15);
  CHECK(r.per_class[0].precision == 1.0);
  CHECK(r.per_class[0].recall == 0.5);
  CHECK(r.per_class[1].precision == doctest::Approx(2.0 / 3.0));
  CHECK(macro_f1(t, p, 2) == r.macro_f1);
}

TEST_CASE("perfect predictions and absent classes") {
  const std::vector<int> y = {0, 1, 2, 3, 3, 2};
  const auto r = evaluate(y, y);
  CHECK(r.accuracy == 1.0);
  CHECK(r.macro_f1 == 1.0);
  CHECK(r.weighted_f1 == 1.0);

  const std::vector<int> t = {0, 0}, p = {1, 1};
  const auto z = evaluate(t, p);
  CHECK(z.accuracy == 0.0);
  CHECK(z.per_class[2].f1 == 0.0);

  const std::vector<int> shorter = {0};
  CHECK(kind_of([&] { evaluate(t, shorter); }) == ErrorKind::LengthMismatch);
  CHECK(kind_of([] { evaluate(std::vector<int>{}, std::vector<int>{}); }) == ErrorKind::LengthMismatch);
}

TEST_CASE("accuracy and weighted averages follow the confusion matrix") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [t, p] = noisy_labels(300, seed);
    const auto r = evaluate(t, p);
    CHECK(r.accuracy == static_cast<double>(r.confusion.trace()) / static_cast<double>(r.confusion.total()));
    double weighted = 0.0;
    for (int c = 0; c < 4; ++c) {
      const auto& m = r.per_class[static_cast<std::size_t>(c)];
      weighted += static_cast<double>(m.support) / 300.0 * m.f1;
      const auto tp = static_cast<double>(r.confusion.true_positives(c));
      CHECK(m.precision == doctest::Approx(tp / static_cast<double>(tp + r.confusion.false_positives(c))));
      CHECK(r.confusion.true_negatives(c) + r.confusion.false_positives(c) + r.confusion.false_negatives(c) + tp ==
            300);
    }
    CHECK(std::abs(r.weighted_f1 - weighted) <= 1e-12);
    CHECK(report_from_confusion(r.confusion) == r);
  }
}

TEST_CASE("metrics are invariant to sample order") {
  auto [t, p] = noisy_labels(200, 7);
  const auto before = evaluate(t, p);
  std::vector<std::size_t> perm(t.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 37) % perm.size();
  std::vector<int> t2, p2;
  for (auto i : perm) {
    t2.push_back(t[i]);
    p2.push_back(p[i]);
  }
  CHECK(evaluate(t2, p2) == before);
}

TEST_CASE("report formats") {
  const auto [t, p] = noisy_labels(100, 3);
  const auto r = evaluate(t, p);

  const auto json = emit_report(r, ReportFormat::Json, "cafe");
  CHECK(json.find("\"schema_version\"") != std::string::npos);
  CHECK(json.find("cafe") != std::string::npos);
  CHECK(report_from_json(json) == r);
  CHECK(kind_of([&] { report_from_json(R"({"schema_version": 9})"); }) == ErrorKind::SchemaVersionMismatch);

  const auto csv = lines_of(emit_report(r, ReportFormat::Csv));
  REQUIRE(csv.size() >= 5);
  CHECK(csv[0] == "class,precision,recall,f1,support");
  CHECK(csv[1].rfind("Brake,", 0) == 0);
  CHECK(csv[4].rfind("Turn,", 0) == 0);

  const auto text = lines_of(emit_report(r, ReportFormat::Text));
  std::size_t class_rows = 0, summary_rows = 0;
  for (const auto& line : text) {
    for (const char* c : {"Brake", "Change", "Throttle", "Turn"})
      if (line.find(c) == 0) ++class_rows;
    for (const char* s : {"Accuracy", "Macro", "Weighted"})
      if (line.find(s) == 0) ++summary_rows;
  }
  CHECK(class_rows == 4);
  CHECK(summary_rows == 3);

  CHECK(parse_report_format("csv") == ReportFormat::Csv);
  CHECK(kind_of([] { parse_report_format("xml"); }) == ErrorKind::ConfigInvalid);
}
