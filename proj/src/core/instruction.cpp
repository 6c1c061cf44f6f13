#include "core/instruction.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "core/json_util.hpp"

namespace gems {

using nlohmann::json;

std::string_view to_string(InstructionSource s) {
  switch (s) {
    case InstructionSource::Generated: return "generated";
    case InstructionSource::ConstrainedAdjusted: return "constrained-adjusted";
    case InstructionSource::GroundTruth: return "ground-truth";
  }
  return "";
}

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::AngleRange: return "angle-range";
    case ViolationKind::MissingLimb: return "missing-limb";
    case ViolationKind::UnknownToken: return "unknown-token";
    case ViolationKind::Other: return "other";
  }
  return "";
}

void FormatReport::append(const FormatReport& other) {
  violations.insert(violations.end(), other.violations.begin(), other.violations.end());
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// Brackets and commas act as separators so that the bracketed notation
// "[right][wrist][abduction][45]" reads the same as the canonical form.
std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (is_space(c) || c == '[' || c == ']' || c == ',' || c == ';') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::optional<double> parse_number(std::string_view tok) {
  if (tok.empty()) return std::nullopt;
  if (tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool is_unit_word(std::string_view tok) {
  return tok == "deg" || tok == "degree" || tok == "degrees" || tok == "°" || tok == "º";
}

// Strips a trailing degree marker glued to a number ("45°", "45deg").
bool strip_unit_suffix(std::string& tok) {
  for (std::string_view suffix : {"degrees", "degree", "deg", "°", "º"}) {
    if (tok.size() > suffix.size() && tok.compare(tok.size() - suffix.size(), suffix.size(), suffix) == 0) {
      tok.resize(tok.size() - suffix.size());
      return true;
    }
  }
  return false;
}

// "30-60" or "30–60" (en dash) split into two numbers.
std::optional<std::pair<double, double>> parse_range_token(std::string_view tok) {
  for (std::string_view sep : {"–", "—", "-", "to"}) {
    auto pos = tok.find(sep, 1);
    if (pos == std::string_view::npos) continue;
    auto a = parse_number(tok.substr(0, pos));
    auto b = parse_number(tok.substr(pos + sep.size()));
    if (a && b) return std::make_pair(*a, *b);
  }
  return std::nullopt;
}

bool is_list_marker(std::string_view tok) {
  if (tok == "-" || tok == "*" || tok == "•") return true;
  if (tok.size() >= 2 && (tok.back() == '.' || tok.back() == ')')) {
    for (std::size_t i = 0; i + 1 < tok.size(); ++i) {
      if (tok[i] < '0' || tok[i] > '9') return false;
    }
    return true;
  }
  return false;
}

struct LineParser {
  const KinematicModel& model;
  Side dominant;
  std::string raw;
  ParsedLine out;

  void violation(ViolationKind kind, bool recovered, std::string detail) {
    out.report.violations.push_back(FormatViolation{kind, raw, recovered, std::move(detail)});
  }

  // Marks every violation recorded so far as unrecovered; used when the
  // line ends up producing no instruction.
  void fail(ViolationKind kind, std::string detail) {
    for (auto& v : out.report.violations) v.recovered = false;
    violation(kind, false, std::move(detail));
    out.instruction.reset();
  }

  void run(std::string_view line) {
    raw = trim(line);
    auto toks = tokenize(raw);
    for (auto& t : toks) t = to_lower(t);
    std::size_t i = 0;
    while (i < toks.size() && is_list_marker(toks[i])) ++i;
    if (i == toks.size()) return fail(ViolationKind::Other, "empty instruction");

    EmsInstruction instr;
    std::optional<Side> side = side_from_string(toks[i]);
    if (side) ++i;
    if (i == toks.size()) return fail(ViolationKind::MissingLimb, "no joint given");

    // Joint, allowing a two-word spelling such as "index finger".
    const JointSpec* joint = model.find(toks[i]);
    if (joint == nullptr && i + 1 < toks.size()) {
      joint = model.find(toks[i] + "_" + toks[i + 1]);
      if (joint != nullptr) {
        violation(ViolationKind::Other, true, "joint spelled as two words");
        ++i;
      }
    }
    if (joint == nullptr) {
      if (dof_from_string(toks[i]))
        return fail(ViolationKind::MissingLimb, "no joint given");
      return fail(ViolationKind::UnknownToken, "unknown joint '" + toks[i] + "'");
    }
    instr.joint = joint->id;
    ++i;

    if (i == toks.size()) return fail(ViolationKind::Other, "no movement given");
    auto dof = dof_from_string(toks[i]);
    if (!dof) return fail(ViolationKind::UnknownToken, "unknown movement '" + toks[i] + "'");
    if (!joint->dofs.contains(*dof))
      return fail(ViolationKind::UnknownToken,
                  "joint '" + joint->id + "' has no movement '" + std::string(to_string(*dof)) + "'");
    instr.movement = *dof;
    ++i;

    if (i == toks.size()) return fail(ViolationKind::Other, "no target angle given");
    std::string angle_tok = toks[i++];
    bool unit = strip_unit_suffix(angle_tok);
    std::optional<double> angle = parse_number(angle_tok);
    if (!angle) {
      if (auto r = parse_range_token(angle_tok)) {
        angle = (r->first + r->second) / 2.0;
        violation(ViolationKind::AngleRange, true, "angle range " + angle_tok + " reduced to its midpoint");
      }
    } else if (i + 1 < toks.size() && (toks[i] == "-" || toks[i] == "to")) {
      std::string hi_tok = toks[i + 1];
      unit = strip_unit_suffix(hi_tok) || unit;
      if (auto hi = parse_number(hi_tok)) {
        violation(ViolationKind::AngleRange, true,
                  "angle range " + angle_tok + " to " + hi_tok + " reduced to its midpoint");
        angle = (*angle + *hi) / 2.0;
        i += 2;
      }
    }
    if (!angle) return fail(ViolationKind::Other, "target angle '" + angle_tok + "' is not a number");
    if (*angle < 0.0) return fail(ViolationKind::Other, "target angle must not be negative");
    instr.target_angle = *angle;

    if (i < toks.size() && is_unit_word(toks[i])) {
      unit = true;
      ++i;
    }
    if (unit) violation(ViolationKind::Other, true, "unit suffix on target angle");

    // Optional stimulation override: f= a= pw= d= (all four).
    if (i < toks.size() && toks[i].rfind("f=", 0) == 0) {
      StimParams p;
      bool ok = i + 4 <= toks.size();
      const char* keys[] = {"f=", "a=", "pw=", "d="};
      double* fields[] = {&p.frequency_hz, &p.amplitude_ma, &p.pulse_width_us, &p.duration_ms};
      for (int k = 0; ok && k < 4; ++k) {
        const auto& t = toks[i + k];
        const std::string_view key = keys[k];
        auto v = t.rfind(key, 0) == 0 ? parse_number(std::string_view(t).substr(key.size())) : std::nullopt;
        if (!v) ok = false;
        else *fields[k] = *v;
      }
      if (ok && p.frequency_hz > 0 && p.pulse_width_us > 0 && p.duration_ms > 0 && p.amplitude_ma >= 0) {
        instr.params = p;
        i += 4;
      } else {
        violation(ViolationKind::Other, true, "malformed stimulation parameters ignored");
        i = toks.size();
      }
    }
    if (i < toks.size()) violation(ViolationKind::Other, true, "trailing text ignored");

    if (joint->sided) {
      if (!side || *side == Side::None) {
        violation(ViolationKind::MissingLimb, true,
                  "side omitted; assumed dominant hand '" + std::string(to_string(dominant)) + "'");
        side = dominant;
      }
    } else if (side && *side != Side::None) {
      violation(ViolationKind::Other, true, "axial joint '" + joint->id + "' takes side none");
      side = Side::None;
    } else if (!side) {
      violation(ViolationKind::Other, true, "side token omitted for axial joint");
      side = Side::None;
    }
    instr.handedness = *side;
    out.instruction = std::move(instr);
  }
};

}  // namespace

ParsedLine parse_instruction_line(std::string_view line, const KinematicModel& model, Side dominant_hand) {
  if (dominant_hand == Side::None) dominant_hand = Side::Right;
  LineParser p{model, dominant_hand, {}, {}};
  try {
    p.run(line);
  } catch (const std::exception& e) {
    p.out.instruction.reset();
    p.out.report.violations.push_back(FormatViolation{ViolationKind::Other, p.raw, false, e.what()});
  }
  return std::move(p.out);
}

std::string serialize_instruction(const EmsInstruction& instr) {
  std::string out;
  out += to_string(instr.handedness);
  out += ' ';
  out += instr.joint;
  out += ' ';
  out += to_string(instr.movement);
  out += ' ';
  out += format_number(instr.target_angle);
  if (instr.params) {
    const auto& p = *instr.params;
    out += " f=" + format_number(p.frequency_hz) + " a=" + format_number(p.amplitude_ma) +
           " pw=" + format_number(p.pulse_width_us) + " d=" + format_number(p.duration_ms);
  }
  return out;
}

InstructionList parse_instruction_text(std::string_view text, const KinematicModel& model, Side dominant_hand) {
  InstructionList out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!trim(line).empty()) {
      auto parsed = parse_instruction_line(line, model, dominant_hand);
      if (parsed.instruction) out.instructions.push_back(std::move(*parsed.instruction));
      out.report.append(parsed.report);
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

InstructionList load_instruction_file(const std::filesystem::path& path, const KinematicModel& model,
                                      Side dominant_hand) {
  return parse_instruction_text(json_util::read_text_file(path), model, dominant_hand);
}

std::string serialize_instructions(std::span<const EmsInstruction> instrs) {
  std::string out;
  for (const auto& i : instrs) {
    out += serialize_instruction(i);
    out += '\n';
  }
  return out;
}

std::vector<EmsInstruction> flatten(std::span<const MovementStep> steps) {
  std::vector<EmsInstruction> out;
  for (const auto& s : steps) out.insert(out.end(), s.instructions.begin(), s.instructions.end());
  return out;
}

json to_json(const EmsInstruction& i) { return {{"text", serialize_instruction(i)}, {"source", to_string(i.source)}}; }

json to_json(const FormatReport& r) {
  json arr = json::array();
  for (const auto& v : r.violations) {
    arr.push_back({{"kind", to_string(v.kind)}, {"raw", v.raw}, {"recovered", v.recovered}, {"detail", v.detail}});
  }
  return arr;
}

json to_json(const MovementStep& s) {
  json instrs = json::array();
  for (const auto& i : s.instructions) instrs.push_back(to_json(i));
  return {{"ordinal", s.ordinal},
          {"description", s.description},
          {"checkpoint", s.checkpoint},
          {"unrealizable", s.unrealizable},
          {"instructions", instrs}};
}

json to_json(std::span<const MovementStep> steps) {
  json arr = json::array();
  for (const auto& s : steps) arr.push_back(to_json(s));
  return arr;
}

FormatReport format_report_from_json(const json& j, const KinematicModel&) {
  FormatReport r;
  for (const auto& v : j) {
    FormatViolation fv;
    const auto kind = v.at("kind").get<std::string>();
    for (auto k : {ViolationKind::AngleRange, ViolationKind::MissingLimb, ViolationKind::UnknownToken,
                   ViolationKind::Other}) {
      if (to_string(k) == kind) fv.kind = k;
    }
    fv.raw = v.at("raw").get<std::string>();
    fv.recovered = v.at("recovered").get<bool>();
    fv.detail = v.value("detail", "");
    r.violations.push_back(std::move(fv));
  }
  return r;
}

std::vector<MovementStep> steps_from_json(const json& j, const KinematicModel& model) {
  std::vector<MovementStep> out;
  for (const auto& s : j) {
    MovementStep step;
    step.ordinal = s.at("ordinal").get<int>();
    step.description = s.at("description").get<std::string>();
    step.checkpoint = s.value("checkpoint", "");
    step.unrealizable = s.value("unrealizable", false);
    for (const auto& i : s.at("instructions")) {
      auto parsed = parse_instruction_line(i.at("text").get<std::string>(), model);
      if (!parsed.instruction || !parsed.report.empty())
        throw Error(ErrorKind::Parse, "non-canonical instruction in plan: " + i.at("text").get<std::string>());
      auto src = i.value("source", "generated");
      if (src == "constrained-adjusted") parsed.instruction->source = InstructionSource::ConstrainedAdjusted;
      else if (src == "ground-truth") parsed.instruction->source = InstructionSource::GroundTruth;
      step.instructions.push_back(std::move(*parsed.instruction));
    }
    out.push_back(std::move(step));
  }
  return out;
}

}  // namespace gems
