#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "copa/part_model.hpp"

namespace copa::lang {

enum class RefKind { Vector, Point, Surface };

/// Reference to an annotated element label as written in a sentence, e.g.
/// "Vector 3" or "Point 1". Labels share one id namespace.
struct PartRef {
  int id = 0;
  RefKind kind = RefKind::Vector;

  bool operator==(const PartRef&) const = default;
};

// The six constraint sentence forms. Distances are meters; the sentences
// carry centimeters and the parser converts exactly.
struct CollinearOpposite {
  PartRef a, b;
  bool operator==(const CollinearOpposite&) const = default;
};
struct TargetAlong {
  PartRef a, b, c;
  double distance_m = 0;
  bool operator==(const TargetAlong&) const = default;
};
struct ParallelToTable {
  PartRef a;
  bool operator==(const ParallelToTable&) const = default;
};
struct HeightAboveTable {
  PartRef a;
  double height_m = 0;
  bool operator==(const HeightAboveTable&) const = default;
};
struct PerpendicularToTable {
  PartRef a;
  bool operator==(const PerpendicularToTable&) const = default;
};
struct PointsDownward {
  PartRef a;
  bool operator==(const PointsDownward&) const = default;
};

using Constraint = std::variant<CollinearOpposite, TargetAlong, ParallelToTable, HeightAboveTable,
                                PerpendicularToTable, PointsDownward>;

struct MoveVerticallyDown {
  double distance_m = 0;
  bool operator==(const MoveVerticallyDown&) const = default;
};
struct MoveForward {
  double distance_m = 0;
  bool operator==(const MoveForward&) const = default;
};
struct OpenGripper {
  bool operator==(const OpenGripper&) const = default;
};
struct RotateEndEffector180 {
  bool operator==(const RotateEndEffector180&) const = default;
};

using SubsequentAction =
    std::variant<MoveVerticallyDown, MoveForward, OpenGripper, RotateEndEffector180>;

struct MotionPlan {
  std::vector<Constraint> constraints;
  std::vector<SubsequentAction> actions;
};

/// Matches one of the six constraint templates, tolerant of case, extra
/// whitespace and a trailing period. Throws UnrecognizedTemplate (naming the
/// closest template) or BadUnit.
Constraint parse_constraint(std::string_view text);

/// Matches one of the four action templates.
SubsequentAction parse_action(std::string_view text);

/// Canonical sentence. parse(format(x)) == x holds exactly for every value,
/// including the distance bits.
std::string format(const Constraint& c);
std::string format(const SubsequentAction& a);

/// Exact centimeter <-> meter conversion through decimal strings: the decimal
/// point is shifted textually, so no rounding beyond the usual
/// string<->double round trip occurs.
std::string meters_to_cm_text(double meters);
double cm_text_to_meters(std::string_view text);

using ElementTable = std::map<int, parts::GeometricElement>;

struct ResolvedSlot {
  PartRef ref;
  parts::GeometricElement element;
};

struct ResolvedConstraint {
  Constraint ir;
  /// Bound part references in template order (a, then b/c where present).
  std::vector<ResolvedSlot> slots;
};

struct ResolvedPlan {
  std::vector<ResolvedConstraint> constraints;
  std::vector<SubsequentAction> actions;
};

/// Binds every PartRef to an element and enforces kind rules: vector slots
/// reject "Point k" and accept surfaces through their normals; a "Surface k"
/// reference to a slender element is a mismatch. Throws UnknownLabel /
/// KindMismatch.
ResolvedPlan resolve(const MotionPlan& plan, const ElementTable& elements);

}  // namespace copa::lang
