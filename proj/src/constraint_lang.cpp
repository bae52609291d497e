#include "copa/constraint_lang.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <regex>

namespace copa::lang {

namespace {

constexpr size_t kMaxInputLength = 4096;

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool last_space = true;
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!last_space) {
        out.push_back(' ');
        last_space = true;
      }
    } else {
      out.push_back(char(std::tolower(c)));
      last_space = false;
    }
  }
  while (!out.empty() && (out.back() == ' ' || out.back() == '.')) out.pop_back();
  return out;
}

// --- exact decimal scaling -------------------------------------------------

struct Decimal {
  bool negative = false;
  std::string digits;  // no dot, no leading zeros (except "0")
  int exp10 = 0;       // value = digits * 10^exp10
};

bool split_decimal(std::string_view text, Decimal& out) {
  size_t i = 0;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
    out.negative = text[i] == '-';
    ++i;
  }
  std::string digits;
  int point_shift = 0;
  bool seen_digit = false, seen_point = false;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c >= '0' && c <= '9') {
      digits.push_back(c);
      if (seen_point) --point_shift;
      seen_digit = true;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!seen_digit) return false;
  int exp = 0;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    int sign = 1;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
      if (text[i] == '-') sign = -1;
      ++i;
    }
    if (i >= text.size()) return false;
    int val = 0;
    for (; i < text.size(); ++i) {
      if (text[i] < '0' || text[i] > '9') return false;
      if (val < 100000000) val = val * 10 + (text[i] - '0');
    }
    exp = sign * val;
  } else if (i != text.size()) {
    return false;
  }

  const size_t first = digits.find_first_not_of('0');
  if (first == std::string::npos) {
    out.digits = "0";
    out.exp10 = 0;
    return true;
  }
  // drop trailing zeros into the exponent
  size_t last = digits.find_last_not_of('0');
  out.exp10 = exp + point_shift + int(digits.size() - 1 - last);
  out.digits = digits.substr(first, last - first + 1);
  return true;
}

std::string render_decimal(const Decimal& d) {
  if (d.digits == "0") return "0";
  std::string out = d.negative ? "-" : "";
  const int ndigits = int(d.digits.size());
  const int point_pos = ndigits + d.exp10;  // digits before the decimal point
  if (point_pos > 21 || point_pos < -5) {
    // scientific: D.DDDDe<exp>
    out += d.digits.substr(0, 1);
    if (ndigits > 1) {
      out += '.';
      out += d.digits.substr(1);
    }
    out += 'e';
    out += std::to_string(point_pos - 1);
  } else if (point_pos <= 0) {
    out += "0.";
    out.append(size_t(-point_pos), '0');
    out += d.digits;
  } else if (point_pos >= ndigits) {
    out += d.digits;
    out.append(size_t(point_pos - ndigits), '0');
  } else {
    out += d.digits.substr(0, size_t(point_pos));
    out += '.';
    out += d.digits.substr(size_t(point_pos));
  }
  return out;
}

std::string shift_decimal_text(std::string_view text, int shift) {
  Decimal d;
  if (!split_decimal(text, d)) {
    throw Error(ErrorCode::UnrecognizedTemplate, "malformed number '" + std::string(text) + "'");
  }
  if (d.digits != "0") d.exp10 += shift;
  return render_decimal(d);
}

double parse_double(const std::string& text) {
  double value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (begin != end && *begin == '+') ++begin;  // from_chars rejects leading '+'
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::UnrecognizedTemplate, "malformed number '" + text + "'");
  }
  return value;
}

std::string shortest_double_text(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

std::string meters_to_cm_text(double meters) {
  return shift_decimal_text(shortest_double_text(meters), 2);
}

double cm_text_to_meters(std::string_view text) {
  return parse_double(shift_decimal_text(text, -2));
}

namespace {

// --- templates ---------------------------------------------------------------

const char* kKindPattern = "(vector|point|surface) ([0-9]+)";
const char* kNumPattern = "([+-]?(?:[0-9]+(?:\\.[0-9]*)?|\\.[0-9]+)(?:[eE][+-]?[0-9]+)?)";
const char* kUnitPattern = "([a-z%]+)";

struct TemplateDef {
  const char* name;
  const char* example;  // used to pick the closest template for errors
  std::regex re;
};

std::string kind_num_unit(const std::string& body) {
  std::string out = body;
  auto replace_all = [&out](const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = out.find(from, pos)) != std::string::npos) {
      out.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all("<kind>", kKindPattern);
  replace_all("<num>", kNumPattern);
  replace_all("<unit>", kUnitPattern);
  return "^" + out + "$";
}

const std::vector<TemplateDef>& constraint_templates() {
  static const std::vector<TemplateDef> defs = [] {
    std::vector<TemplateDef> v;
    v.push_back({"collinear_opposite",
                 "Vector A and Vector B are on the same line, with the opposite direction.",
                 std::regex(kind_num_unit(
                     "<kind> and <kind> are on the same line, with the opposite direction"))});
    v.push_back({"target_along",
                 "The target position of Point A is x cm along Vector B from Point C's current "
                 "position.",
                 std::regex(kind_num_unit("the target position of <kind> is <num> <unit> along "
                                          "<kind> from <kind>'s current position"))});
    v.push_back({"parallel_to_table", "Vector A is parallel to the table surface.",
                 std::regex(kind_num_unit("<kind> is parallel to the table surface"))});
    v.push_back({"height_above_table", "Point A is x cm above the table surface.",
                 std::regex(kind_num_unit("<kind> is <num> <unit> above the table surface"))});
    v.push_back({"perpendicular_to_table", "Vector A is perpendicular to the table surface.",
                 std::regex(kind_num_unit("<kind> is perpendicular to the table surface"))});
    v.push_back({"points_downward", "Vector A points downward.",
                 std::regex(kind_num_unit("<kind> points downward"))});
    return v;
  }();
  return defs;
}

const std::vector<TemplateDef>& action_templates() {
  static const std::vector<TemplateDef> defs = [] {
    std::vector<TemplateDef> v;
    v.push_back({"move_vertically_down", "Move vertically down x cm.",
                 std::regex(kind_num_unit("move vertically down <num> <unit>"))});
    v.push_back({"move_forward", "Move forward x cm.",
                 std::regex(kind_num_unit("move forward <num> <unit>"))});
    v.push_back({"open_gripper", "Open the gripper.", std::regex("^open the gripper$")});
    v.push_back({"rotate_end_effector_180", "End-effector rotates 180 degrees.",
                 std::regex("^end[- ]effector rotates 180 degrees$")});
    return v;
  }();
  return defs;
}

size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

[[noreturn]] void throw_unrecognized(const std::string& normalized,
                                     const std::vector<TemplateDef>& defs) {
  const TemplateDef* closest = nullptr;
  size_t best = std::numeric_limits<size_t>::max();
  for (const TemplateDef& def : defs) {
    const size_t d = levenshtein(normalized, normalize(def.example));
    if (d < best) {
      best = d;
      closest = &def;
    }
  }
  throw Error(ErrorCode::UnrecognizedTemplate,
              "no template matches; closest is " + std::string(closest ? closest->name : "?") +
                  " (\"" + (closest ? closest->example : "") + "\")");
}

RefKind kind_from_word(const std::string& word) {
  if (word == "vector") return RefKind::Vector;
  if (word == "point") return RefKind::Point;
  return RefKind::Surface;
}

PartRef make_ref(const std::smatch& m, size_t kind_group) {
  PartRef ref;
  ref.kind = kind_from_word(m[kind_group].str());
  const std::string id_text = m[kind_group + 1].str();
  if (id_text.size() > 9) {
    throw Error(ErrorCode::UnrecognizedTemplate, "element label too large: " + id_text);
  }
  ref.id = std::stoi(id_text);
  return ref;
}

double quantity_to_meters(const std::smatch& m, size_t num_group) {
  const std::string unit = m[num_group + 1].str();
  if (unit != "cm") {
    throw Error(ErrorCode::BadUnit, "expected 'cm', got '" + unit + "'");
  }
  return cm_text_to_meters(m[num_group].str());
}

const char* kind_word(RefKind k) {
  switch (k) {
    case RefKind::Vector: return "Vector";
    case RefKind::Point: return "Point";
    case RefKind::Surface: return "Surface";
  }
  return "Vector";
}

std::string ref_text(const PartRef& r) {
  return std::string(kind_word(r.kind)) + " " + std::to_string(r.id);
}

}  // namespace

Constraint parse_constraint(std::string_view text) {
  if (text.size() > kMaxInputLength) {
    throw Error(ErrorCode::UnrecognizedTemplate, "input too long");
  }
  const std::string s = normalize(text);
  const auto& defs = constraint_templates();
  std::smatch m;
  if (std::regex_match(s, m, defs[0].re)) {
    return CollinearOpposite{make_ref(m, 1), make_ref(m, 3)};
  }
  if (std::regex_match(s, m, defs[1].re)) {
    // groups: 1-2 kind/id A, 3 num, 4 unit, 5-6 kind/id B, 7-8 kind/id C
    TargetAlong t;
    t.a = make_ref(m, 1);
    t.distance_m = quantity_to_meters(m, 3);
    t.b = make_ref(m, 5);
    t.c = make_ref(m, 7);
    return t;
  }
  if (std::regex_match(s, m, defs[2].re)) {
    return ParallelToTable{make_ref(m, 1)};
  }
  if (std::regex_match(s, m, defs[3].re)) {
    HeightAboveTable h;
    h.a = make_ref(m, 1);
    h.height_m = quantity_to_meters(m, 3);
    return h;
  }
  if (std::regex_match(s, m, defs[4].re)) {
    return PerpendicularToTable{make_ref(m, 1)};
  }
  if (std::regex_match(s, m, defs[5].re)) {
    return PointsDownward{make_ref(m, 1)};
  }
  throw_unrecognized(s, defs);
}

SubsequentAction parse_action(std::string_view text) {
  if (text.size() > kMaxInputLength) {
    throw Error(ErrorCode::UnrecognizedTemplate, "input too long");
  }
  const std::string s = normalize(text);
  const auto& defs = action_templates();
  std::smatch m;
  if (std::regex_match(s, m, defs[0].re)) {
    const double meters = quantity_to_meters(m, 1);
    if (!(meters > 0)) {
      throw Error(ErrorCode::UnrecognizedTemplate, "action distance must be positive");
    }
    return MoveVerticallyDown{meters};
  }
  if (std::regex_match(s, m, defs[1].re)) {
    const double meters = quantity_to_meters(m, 1);
    if (!(meters > 0)) {
      throw Error(ErrorCode::UnrecognizedTemplate, "action distance must be positive");
    }
    return MoveForward{meters};
  }
  if (std::regex_match(s, m, defs[2].re)) {
    return OpenGripper{};
  }
  if (std::regex_match(s, m, defs[3].re)) {
    return RotateEndEffector180{};
  }
  throw_unrecognized(s, defs);
}

std::string format(const Constraint& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, CollinearOpposite>) {
          return ref_text(v.a) + " and " + ref_text(v.b) +
                 " are on the same line, with the opposite direction.";
        } else if constexpr (std::is_same_v<T, TargetAlong>) {
          return "The target position of " + ref_text(v.a) + " is " +
                 meters_to_cm_text(v.distance_m) + " cm along " + ref_text(v.b) + " from " +
                 ref_text(v.c) + "'s current position.";
        } else if constexpr (std::is_same_v<T, ParallelToTable>) {
          return ref_text(v.a) + " is parallel to the table surface.";
        } else if constexpr (std::is_same_v<T, HeightAboveTable>) {
          return ref_text(v.a) + " is " + meters_to_cm_text(v.height_m) +
                 " cm above the table surface.";
        } else if constexpr (std::is_same_v<T, PerpendicularToTable>) {
          return ref_text(v.a) + " is perpendicular to the table surface.";
        } else {
          return ref_text(v.a) + " points downward.";
        }
      },
      c);
}

std::string format(const SubsequentAction& a) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MoveVerticallyDown>) {
          return "Move vertically down " + meters_to_cm_text(v.distance_m) + " cm.";
        } else if constexpr (std::is_same_v<T, MoveForward>) {
          return "Move forward " + meters_to_cm_text(v.distance_m) + " cm.";
        } else if constexpr (std::is_same_v<T, OpenGripper>) {
          return "Open the gripper.";
        } else {
          return "End-effector rotates 180 degrees.";
        }
      },
      a);
}

namespace {

enum class SlotRole { VectorSlot, PointSlot };

ResolvedSlot bind(const PartRef& ref, SlotRole role, const ElementTable& table) {
  const auto it = table.find(ref.id);
  if (it == table.end()) {
    throw Error(ErrorCode::UnknownLabel, "no element with label " + std::to_string(ref.id));
  }
  const parts::GeometricElement& elem = it->second;

  if (role == SlotRole::VectorSlot && ref.kind == RefKind::Point) {
    throw Error(ErrorCode::KindMismatch,
                "'" + ref_text(ref) + "' fills a vector slot but names a point");
  }
  // "Surface k" must actually be a surface; "Vector k" may be a surface, whose
  // normal then acts as the vector.
  if (ref.kind == RefKind::Surface && elem.kind() != parts::PartKind::Surface) {
    throw Error(ErrorCode::KindMismatch,
                "'" + ref_text(ref) + "' refers to a slender element");
  }
  return ResolvedSlot{ref, elem};
}

}  // namespace

ResolvedPlan resolve(const MotionPlan& plan, const ElementTable& elements) {
  ResolvedPlan out;
  out.actions = plan.actions;
  for (const Constraint& c : plan.constraints) {
    ResolvedConstraint rc;
    rc.ir = c;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, CollinearOpposite>) {
            rc.slots.push_back(bind(v.a, SlotRole::VectorSlot, elements));
            rc.slots.push_back(bind(v.b, SlotRole::VectorSlot, elements));
          } else if constexpr (std::is_same_v<T, TargetAlong>) {
            rc.slots.push_back(bind(v.a, SlotRole::PointSlot, elements));
            rc.slots.push_back(bind(v.b, SlotRole::VectorSlot, elements));
            rc.slots.push_back(bind(v.c, SlotRole::PointSlot, elements));
          } else if constexpr (std::is_same_v<T, HeightAboveTable>) {
            rc.slots.push_back(bind(v.a, SlotRole::PointSlot, elements));
          } else {
            rc.slots.push_back(bind(v.a, SlotRole::VectorSlot, elements));
          }
        },
        c);
    out.constraints.push_back(std::move(rc));
  }
  return out;
}

}  // namespace copa::lang
