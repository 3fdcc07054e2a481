#include "physiodecode/ensemble.hpp"

#include "json.hpp"
#include "physiodecode/error.hpp"

namespace physiodecode::ensemble {

using ordered_json = nlohmann::ordered_json;

void EnsembleModel::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error(ErrorKind::ConfigInvalid, "blend weight must lie in [0, 1]");
  if (member_a.feature_names != member_b.feature_names)
    throw Error(ErrorKind::RegistryMismatch, "ensemble members were trained on different features");
  if (member_a.n_classes != member_b.n_classes)
    throw Error(ErrorKind::RegistryMismatch, "ensemble members disagree on class count");
}

Matrix blend(const Matrix& pa, const Matrix& pb, double alpha) {
  if (pa.rows != pb.rows || pa.cols != pb.cols)
    throw Error(ErrorKind::RegistryMismatch, "probability matrices differ in shape");
  Matrix out(pa.rows, pa.cols);
  for (std::size_t i = 0; i < pa.data.size(); ++i)
    out.data[i] = alpha * pa.data[i] + (1.0 - alpha) * pb.data[i];
  return out;
}

std::vector<int> argmax_rows(const Matrix& proba) {
  std::vector<int> out(proba.rows, 0);
  for (std::size_t r = 0; r < proba.rows; ++r) {
    const auto row = proba.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

Matrix predict_proba(const EnsembleModel& ens, const Matrix& x) {
  ens.validate();
  if (x.cols != ens.member_a.n_features())
    throw Error(ErrorKind::RegistryMismatch, "input has " + std::to_string(x.cols) +
                                                 " columns, ensemble expects " +
                                                 std::to_string(ens.member_a.n_features()));
  return blend(gbdt::predict_proba(ens.member_a, x), gbdt::predict_proba(ens.member_b, x), ens.alpha);
}

std::vector<BehaviorClass> predict(const EnsembleModel& ens, const Matrix& x) {
  std::vector<BehaviorClass> out;
  for (int c : argmax_rows(predict_proba(ens, x))) out.push_back(class_from_ordinal(c));
  return out;
}

std::string to_json(const EnsembleModel& ens, int indent) {
  ordered_json j;
  j["schema_version"] = gbdt::kModelSchemaVersion;
  j["alpha"] = ens.alpha;
  j["member_a"] = ordered_json::parse(gbdt::to_json(ens.member_a));
  j["member_b"] = ordered_json::parse(gbdt::to_json(ens.member_b));
  return j.dump(indent);
}

EnsembleModel from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaVersionMismatch, std::string("malformed ensemble JSON: ") + e.what());
  }
  if (!j.contains("alpha") || !j.contains("member_a") || !j.contains("member_b") ||
      !j["alpha"].is_number())
    throw Error(ErrorKind::SchemaVersionMismatch, "ensemble JSON lacks alpha or members");
  EnsembleModel ens;
  ens.alpha = j["alpha"].get<double>();
  ens.member_a = gbdt::from_json(j["member_a"].dump());
  ens.member_b = gbdt::from_json(j["member_b"].dump());
  ens.validate();
  return ens;
}

}  // namespace physiodecode::ensemble
