#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "physiodecode/dataset.hpp"
#include "physiodecode/gbdt.hpp"
#include "physiodecode/matrix.hpp"

namespace physiodecode::ensemble {

inline constexpr double kReferenceAlpha = 0.35;

// Soft-voting pair: member_a (depth-wise) carries weight alpha, member_b
// (leaf-wise) carries 1 - alpha.
struct EnsembleModel {
  gbdt::GbdtModel member_a;
  gbdt::GbdtModel member_b;
  double alpha = kReferenceAlpha;

  // Throws RegistryMismatch when the members disagree on features or
  // classes, ConfigInvalid when alpha is outside [0, 1].
  void validate() const;
};

// alpha * pa + (1 - alpha) * pb, elementwise.
Matrix blend(const Matrix& pa, const Matrix& pb, double alpha);

// Row argmax; exact ties go to the lowest class ordinal.
std::vector<int> argmax_rows(const Matrix& proba);

// Throws RegistryMismatch when x does not match the members' feature count.
Matrix predict_proba(const EnsembleModel& ens, const Matrix& x);
std::vector<BehaviorClass> predict(const EnsembleModel& ens, const Matrix& x);

// {"schema_version", "alpha", "member_a": <model>, "member_b": <model>}
std::string to_json(const EnsembleModel& ens, int indent = -1);
EnsembleModel from_json(std::string_view text);

}  // namespace physiodecode::ensemble
