#include "evasion/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace evasion::io {

namespace {

struct Value {
  std::vector<std::pair<double, std::string>> numbers;  // (value, unit or "")
  std::string text;                                     // raw token when not numeric
  bool is_text = false;
};

struct Ctx {
  std::string origin;
  int line = 0;
  int column = 0;
};

[[noreturn]] void fail(const Ctx& c, const std::string& msg) {
  std::ostringstream os;
  os << c.origin << ":" << c.line << ":" << c.column << ": " << msg;
  throw ParseError(os.str());
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Unit tables per quantity; first entry is the canonical (SI) unit.
using UnitTable = std::vector<std::pair<std::string, double>>;
const UnitTable kLength{{"m", 1.0}, {"km", 1000.0}};
const UnitTable kSpeed{{"mps", 1.0}, {"kmh", 1.0 / 3.6}};
const UnitTable kTime{{"s", 1.0}, {"ms", 1e-3}};
const UnitTable kAngle{{"rad", 1.0}, {"deg", M_PI / 180.0}};
const UnitTable kMass{{"kg", 1.0}};
const UnitTable kInertia{{"kgm2", 1.0}};
const UnitTable kTorque{{"Nm", 1.0}};
const UnitTable kTorquePerSpeed{{"NmPerMps", 1.0}};
const UnitTable kCurvature{{"per_m", 1.0}};
const UnitTable kBare{};

double convert(const Ctx& c, const std::pair<double, std::string>& num, const UnitTable& units,
               const char* key) {
  if (units.empty()) {
    if (!num.second.empty()) fail(c, std::string("unit not allowed on '") + key + "'");
    return num.first;
  }
  if (num.second.empty())
    fail(c, std::string("missing unit on '") + key + "' (expected e.g. '" + units.front().first + "')");
  for (const auto& [name, factor] : units)
    if (name == num.second) return num.first * factor;
  fail(c, std::string("unit mismatch on '") + key + "': '" + num.second + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Key {
  const char* quantity_unit;  // canonical unit for emission ("" = bare)
  const UnitTable* units;
  int arity;  // fixed list length; 1 = scalar
  bool repeatable = false;
  std::function<void(const Ctx&, sim::Scenario&, const Value&)> apply;
  std::function<std::string(const sim::Scenario&)> emit;  // empty string = skip
};

Value parse_value(const Ctx& c, const std::string& raw) {
  Value v;
  const std::string s = trim(raw);
  if (s.empty()) fail(c, "empty value");
  //

  // Try the numeric-list grammar first: entries split on ',', each
  // '<number> [unit]'.
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) parts.push_back(trim(part));
  bool numeric = true;
  std::vector<std::pair<double, std::string>> nums;
  for (const auto& p : parts) {
    std::istringstream ps(p);
    double d;
    if (!(ps >> d)) {
      numeric = false;
      break;
    }
    std::string unit;
    ps >> unit;
    std::string extra;
    if (ps >> extra) {
      numeric = false;
      break;
    }
    nums.emplace_back(d, unit);
  }
  if (numeric) {
    v.numbers = std::move(nums);
    return v;
  }
  v.is_text = true;
  v.text = s;
  return v;
}

double scalar(const Ctx& c, const Value& v, const UnitTable& units, const char* key) {
  if (v.is_text || v.numbers.size() != 1)
    fail(c, std::string("expected a single numeric value for '") + key + "'");
  return convert(c, v.numbers[0], units, key);
}

template <typename Vec>
void fill_vector(const Ctx& c, const Value& v, int n, Vec& out, const char* key) {
  if (v.is_text || static_cast<int>(v.numbers.size()) != n) {
    std::ostringstream os;
    os << "expected " << n << " comma-separated numbers for '" << key << "'";
    fail(c, os.str());
  }
  for (int i = 0; i < n; ++i) {
    if (!v.numbers[i].second.empty()) fail(c, std::string("unit not allowed in list '") + key + "'");
    out(i) = v.numbers[i].first;
  }
}

template <typename Vec>
std::string emit_vector(const Vec& v) {
  std::string s;
  for (int i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt(v(i));
  }
  return s;
}

using S = sim::Scenario;

std::map<std::string, Key> build_schema() {
  std::map<std::string, Key> m;
  auto scalar_key = [&m](const char* dotted, const UnitTable& units, const char* unit,
                         std::function<double&(S&)> ref) {
    m[dotted] = Key{unit, &units, 1, false,
                    [&units, ref, dotted](const Ctx& c, S& sc, const Value& v) {
                      ref(sc) = scalar(c, v, units, dotted);
                    },
                    [ref, unit](const S& sc) {
                      std::string s = fmt(ref(const_cast<S&>(sc)));
                      if (unit[0]) s += std::string(" ") + unit;
                      return s;
                    }};
  };
  auto text_key = [&m](const char* dotted, std::function<void(const Ctx&, S&, const std::string&)> ap,
                       std::function<std::string(const S&)> em) {
    m[dotted] = Key{"", &kBare, 1, false,
                    [ap, dotted](const Ctx& c, S& sc, const Value& v) {
                      if (!v.is_text) fail(c, std::string("expected a word for '") + dotted + "'");
                      ap(c, sc, v.text);
                    },
                    em};
  };
  auto vec_key = [&m]<typename Getter>(const char* dotted, int n, Getter get) {
    m[dotted] = Key{"", &kBare, n, false,
                    [n, get, dotted](const Ctx& c, S& sc, const Value& v) {
                      fill_vector(c, v, n, get(sc), dotted);
                    },
                    [get](const S& sc) { return emit_vector(get(const_cast<S&>(sc))); }};
  };

  scalar_key("path.radius", kLength, "m", [](S& s) -> double& { return s.radius; });
  scalar_key("path.length", kLength, "m", [](S& s) -> double& { return s.path_length; });
  scalar_key("path.step", kLength, "m", [](S& s) -> double& { return s.path_step; });
  scalar_key("path.lane_width", kLength, "m", [](S& s) -> double& { return s.lane_width; });
  scalar_key("path.left_edge", kLength, "m", [](S& s) -> double& { return s.left_edge; });
  scalar_key("path.right_edge", kLength, "m", [](S& s) -> double& { return s.right_edge; });
  m["path.kappa_point"] = Key{
      "", &kBare, 2, true,
      [](const Ctx& c, S& sc, const Value& v) {
        if (v.is_text || v.numbers.size() != 2)
          fail(c, "kappa_point takes 's m, kappa per_m'");
        sc.kappa_points.emplace_back(convert(c, v.numbers[0], kLength, "kappa_point"),
                                     convert(c, v.numbers[1], kCurvature, "kappa_point"));
      },
      [](const S&) { return std::string(); }};

  scalar_key("subject.speed", kSpeed, "mps", [](S& s) -> double& { return s.subject_speed; });
  scalar_key("subject.start_s", kLength, "m", [](S& s) -> double& { return s.subject_start_s; });

  text_key(
      "lead.present",
      [](const Ctx& c, S& sc, const std::string& t) {
        if (t == "true") sc.lead_present = true;
        else if (t == "false") sc.lead_present = false;
        else fail(c, "lead.present must be true or false");
      },
      [](const S& sc) { return sc.lead_present ? "true" : "false"; });
  scalar_key("lead.speed", kSpeed, "mps", [](S& s) -> double& { return s.lead_speed; });
  scalar_key("lead.start_s", kLength, "m", [](S& s) -> double& { return s.lead_start_s; });
  scalar_key("lead.l_f", kLength, "m", [](S& s) -> double& { return s.lead_l_f; });
  scalar_key("lead.l_r", kLength, "m", [](S& s) -> double& { return s.lead_l_r; });
  scalar_key("lead.width", kLength, "m", [](S& s) -> double& { return s.lead_width; });

  scalar_key("vehicle.l_f", kLength, "m", [](S& s) -> double& { return s.vehicle.l_f; });
  scalar_key("vehicle.l_r", kLength, "m", [](S& s) -> double& { return s.vehicle.l_r; });
  scalar_key("vehicle.mass", kMass, "kg", [](S& s) -> double& { return s.vehicle.mass; });
  scalar_key("vehicle.i_z", kInertia, "kgm2", [](S& s) -> double& { return s.vehicle.I_z; });
  scalar_key("vehicle.lane_width", kLength, "m", [](S& s) -> double& { return s.vehicle.lane_width; });
  scalar_key("vehicle.t_s", kTime, "s", [](S& s) -> double& { return s.vehicle.t_s; });
  scalar_key("vehicle.wheel_radius", kLength, "m",
             [](S& s) -> double& { return s.vehicle.wheel_radius_eff; });
  scalar_key("vehicle.track_width", kLength, "m",
             [](S& s) -> double& { return s.vehicle.track_width; });

  text_key(
      "control.variant",
      [](const Ctx& c, S& sc, const std::string& t) {
        if (t == "nominal") sc.mpc.variant = mpc::Variant::kNominal;
        else if (t == "offset_free") sc.mpc.variant = mpc::Variant::kOffsetFree;
        else if (t == "robust") sc.mpc.variant = mpc::Variant::kRobust;
        else fail(c, "control.variant must be nominal|offset_free|robust");
      },
      [](const S& sc) { return sim::variant_name(sc.mpc.variant); });
  m["control.horizon"] = Key{"", &kBare, 1, false,
                             [](const Ctx& c, S& sc, const Value& v) {
                               const double d = scalar(c, v, kBare, "control.horizon");
                               if (d != std::floor(d)) fail(c, "horizon must be an integer");
                               sc.mpc.horizon = static_cast<int>(d);
                             },
                             [](const S& sc) { return fmt(sc.mpc.horizon); }};
  vec_key("control.q", 4, [](S& s) -> Eigen::Vector4d& { return s.mpc.q_diag; });
  vec_key("control.r", 2, [](S& s) -> Eigen::Vector2d& { return s.mpc.r_diag; });
  scalar_key("control.p_scale", kBare, "", [](S& s) -> double& { return s.mpc.p_scale; });
  vec_key("control.error_q", 2, [](S& s) -> Eigen::Vector2d& { return s.mpc.error_q_diag; });
  vec_key("control.x_lo", 4, [](S& s) -> Eigen::Vector4d& { return s.mpc.x_lo; });
  vec_key("control.x_hi", 4, [](S& s) -> Eigen::Vector4d& { return s.mpc.x_hi; });
  vec_key("control.u_lo", 2, [](S& s) -> Eigen::Vector2d& { return s.mpc.u_lo; });
  vec_key("control.u_hi", 2, [](S& s) -> Eigen::Vector2d& { return s.mpc.u_hi; });
  vec_key("control.e_lo", 2, [](S& s) -> Eigen::Vector2d& { return s.mpc.e_lo; });
  vec_key("control.e_hi", 2, [](S& s) -> Eigen::Vector2d& { return s.mpc.e_hi; });
  scalar_key("control.v_min", kSpeed, "mps", [](S& s) -> double& { return s.mpc.v_min; });
  scalar_key("control.v_max", kSpeed, "mps", [](S& s) -> double& { return s.mpc.v_max; });
  vec_key("control.gain_q", 4, [](S& s) -> Eigen::Vector4d& { return s.mpc.gain_q_diag; });
  vec_key("control.gain_r", 2, [](S& s) -> Eigen::Vector2d& { return s.mpc.gain_r_diag; });
  vec_key("control.w_floor", 4, [](S& s) -> Eigen::Vector4d& { return s.mpc.w_floor; });
  scalar_key("control.mrpi_eps", kBare, "", [](S& s) -> double& { return s.mpc.mrpi_eps; });
  scalar_key("control.slack_penalty", kBare, "",
             [](S& s) -> double& { return s.mpc.slack_penalty; });
  text_key(
      "control.torque_vectoring",
      [](const Ctx& c, S& sc, const std::string& t) {
        if (t == "true") sc.torque_vectoring = true;
        else if (t == "false") sc.torque_vectoring = false;
        else fail(c, "control.torque_vectoring must be true or false");
      },
      [](const S& sc) { return sc.torque_vectoring ? "true" : "false"; });
  text_key(
      "control.avoid_side",
      [](const Ctx& c, S& sc, const std::string& t) {
        if (t == "left") sc.avoid_side = constraint::AvoidSide::kLeft;
        else if (t == "right") sc.avoid_side = constraint::AvoidSide::kRight;
        else fail(c, "control.avoid_side must be left or right");
      },
      [](const S& sc) {
        return sc.avoid_side == constraint::AvoidSide::kLeft ? "left" : "right";
      });
  scalar_key("control.return_ey", kLength, "m",
             [](S& s) -> double& { return s.return_ey_threshold; });

  scalar_key("envelope.time_gap", kTime, "s", [](S& s) -> double& { return s.envelope.time_gap; });
  scalar_key("envelope.lead_length", kLength, "m",
             [](S& s) -> double& { return s.envelope.lead_length; });
  scalar_key("envelope.lateral_w", kLength, "m",
             [](S& s) -> double& { return s.envelope.lateral_w; });

  scalar_key("tv.k_p", kTorquePerSpeed, "NmPerMps", [](S& s) -> double& { return s.tv.K_p; });
  scalar_key("tv.k_r", kBare, "", [](S& s) -> double& { return s.tv.K_r; });
  vec_key("tv.w_e", 3, [](S& s) -> Eigen::Vector3d& { return s.tv.w_e_diag; });
  scalar_key("tv.w_f", kBare, "", [](S& s) -> double& { return s.tv.w_f; });
  scalar_key("tv.w_df", kBare, "", [](S& s) -> double& { return s.tv.w_df; });
  scalar_key("tv.torque_limit", kTorque, "Nm", [](S& s) -> double& { return s.tv.torque_limit; });

  scalar_key("plant.mu", kBare, "", [](S& s) -> double& { return s.mu; });
  scalar_key("plant.wheel_inertia", kInertia, "kgm2",
             [](S& s) -> double& { return s.wheel_inertia; });
  scalar_key("plant.body_width", kLength, "m", [](S& s) -> double& { return s.body_width; });
  scalar_key("plant.overhang_front", kLength, "m",
             [](S& s) -> double& { return s.overhang_front; });
  scalar_key("plant.overhang_rear", kLength, "m",
             [](S& s) -> double& { return s.overhang_rear; });

  scalar_key("run.duration", kTime, "s", [](S& s) -> double& { return s.duration; });
  m["run.seed"] = Key{"", &kBare, 1, false,
                      [](const Ctx& c, S& sc, const Value& v) {
                        const double d = scalar(c, v, kBare, "run.seed");
                        if (d < 0 || d != std::floor(d)) fail(c, "seed must be a nonnegative integer");
                        sc.seed = static_cast<unsigned>(d);
                      },
                      [](const S& sc) { return fmt(sc.seed); }};
  m["schema"] = Key{"", &kBare, 1, false,
                    [](const Ctx& c, S& sc, const Value& v) {
                      sc.schema = static_cast<int>(scalar(c, v, kBare, "schema"));
                      if (sc.schema != 1) fail(c, "unsupported schema version");
                    },
                    [](const S& sc) { return fmt(sc.schema); }};
  text_key(
      "name", [](const Ctx&, S& sc, const std::string& t) { sc.name = t; },
      [](const S& sc) { return sc.name; });
  return m;
}

const std::map<std::string, Key>& schema() {
  static const std::map<std::string, Key> s = build_schema();
  return s;
}

}  // namespace

sim::Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
  sim::Scenario sc;
  std::istringstream in(text);
  std::string line, section;
  Ctx c{origin, 0, 1};
  while (std::getline(in, line)) {
    ++c.line;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') fail(c, "malformed section header");
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(c, "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string dotted = section.empty() ? key : section + "." + key;
    c.column = static_cast<int>(line.find('=')) + 2;
    const auto it = schema().find(dotted);
    if (it == schema().end()) fail(c, "unknown key '" + dotted + "'");
    it->second.apply(c, sc, parse_value(c, body.substr(eq + 1)));
  }
  Ctx end{origin, c.line, 1};
  try {
    sc.validate();
  } catch (const std::exception& e) {
    fail(end, std::string("range violation: ") + e.what());
  }
  return sc;
}

sim::Scenario parse_scenario_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open scenario file: " + file);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str(), file);
}

void apply_override(sim::Scenario& sc, const std::string& dotted, const std::string& value) {
  Ctx c{"<override:" + dotted + ">", 1, 1};
  const auto it = schema().find(dotted);
  if (it == schema().end()) fail(c, "unknown key '" + dotted + "'");
  it->second.apply(c, sc, parse_value(c, value));
  sc.validate();
}

std::string emit_scenario(const sim::Scenario& sc) {
  std::ostringstream os;
  os << "# evasion scenario (schema 1, canonical SI units)\n";
  os << "schema = " << sc.schema << "\n";
  os << "name = " << sc.name << "\n";
  std::string section;
  for (const auto& [dotted, key] : schema()) {
    const auto dot = dotted.find('.');
    if (dot == std::string::npos) continue;  // top-level already written
    const std::string sec = dotted.substr(0, dot);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    if (dotted == "path.kappa_point") {
      for (const auto& [s, k] : sc.kappa_points)
        os << "kappa_point = " << fmt(s) << " m, " << fmt(k) << " per_m\n";
      continue;
    }
    os << dotted.substr(dot + 1) << " = " << key.emit(sc) << "\n";
  }
  return os.str();
}

}  // namespace evasion::io
