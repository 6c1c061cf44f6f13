#include "core/types.hpp"

#include <array>
#include <charconv>
#include <cctype>

namespace gems {

namespace {

constexpr std::array<std::string_view, 10> kDofNames = {
    "flexion",   "extension",  "abduction",   "adduction", "pronation",
    "supination", "rotation-cw", "rotation-ccw", "eversion",  "inversion"};

}  // namespace

std::string_view to_string(Side s) {
  switch (s) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::None: return "none";
  }
  return "none";
}

std::string_view to_string(Dof d) { return kDofNames[static_cast<std::size_t>(d)]; }

std::string_view to_string(Axis a) {
  switch (a) {
    case Axis::FlexionExtension: return "flexion-extension";
    case Axis::AbductionAdduction: return "abduction-adduction";
    case Axis::PronationSupination: return "pronation-supination";
    case Axis::Rotation: return "rotation";
    case Axis::EversionInversion: return "eversion-inversion";
  }
  return "";
}

std::optional<Side> side_from_string(std::string_view s) {
  const auto l = to_lower(s);
  if (l == "left") return Side::Left;
  if (l == "right") return Side::Right;
  if (l == "none") return Side::None;
  return std::nullopt;
}

std::optional<Dof> dof_from_string(std::string_view s) {
  const auto l = to_lower(s);
  for (std::size_t i = 0; i < kDofNames.size(); ++i) {
    if (kDofNames[i] == l) return static_cast<Dof>(i);
  }
  return std::nullopt;
}

std::string_view to_string(StimulationMode m) {
  switch (m) {
    case StimulationMode::Actuate: return "actuate";
    case StimulationMode::Nudge: return "nudge";
    case StimulationMode::Tactile: return "tactile";
  }
  return "";
}

std::string_view to_string(CompletionMode m) { return m == CompletionMode::Partial ? "partial" : "full"; }

std::optional<StimulationMode> stimulation_mode_from_string(std::string_view s) {
  const auto l = to_lower(s);
  if (l == "actuate") return StimulationMode::Actuate;
  if (l == "nudge") return StimulationMode::Nudge;
  if (l == "tactile") return StimulationMode::Tactile;
  return std::nullopt;
}

std::optional<CompletionMode> completion_mode_from_string(std::string_view s) {
  const auto l = to_lower(s);
  if (l == "partial") return CompletionMode::Partial;
  if (l == "full") return CompletionMode::Full;
  return std::nullopt;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), end);
}

}  // namespace gems
