#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gems {

enum class Side : std::uint8_t { Left, Right, None };

// Closed movement vocabulary. Each DOF is one direction along an axis; the
// pair (flexion, extension) shares the flexion/extension axis, and so on.
enum class Dof : std::uint8_t {
  Flexion,
  Extension,
  Abduction,
  Adduction,
  Pronation,
  Supination,
  RotationCw,
  RotationCcw,
  Eversion,
  Inversion,
};

enum class Axis : std::uint8_t {
  FlexionExtension,
  AbductionAdduction,
  PronationSupination,
  Rotation,
  EversionInversion,
};

inline constexpr Dof kAllDofs[] = {Dof::Flexion,   Dof::Extension,  Dof::Abduction,   Dof::Adduction,
                                   Dof::Pronation, Dof::Supination, Dof::RotationCw,  Dof::RotationCcw,
                                   Dof::Eversion,  Dof::Inversion};

inline constexpr Axis kAllAxes[] = {Axis::FlexionExtension, Axis::AbductionAdduction, Axis::PronationSupination,
                                    Axis::Rotation, Axis::EversionInversion};

constexpr Axis axis_of(Dof d) {
  switch (d) {
    case Dof::Flexion:
    case Dof::Extension: return Axis::FlexionExtension;
    case Dof::Abduction:
    case Dof::Adduction: return Axis::AbductionAdduction;
    case Dof::Pronation:
    case Dof::Supination: return Axis::PronationSupination;
    case Dof::RotationCw:
    case Dof::RotationCcw: return Axis::Rotation;
    case Dof::Eversion:
    case Dof::Inversion: return Axis::EversionInversion;
  }
  return Axis::FlexionExtension;
}

// +1 when the DOF increases the axis angle, -1 otherwise.
constexpr int direction_of(Dof d) {
  switch (d) {
    case Dof::Flexion:
    case Dof::Abduction:
    case Dof::Pronation:
    case Dof::RotationCw:
    case Dof::Eversion: return +1;
    default: return -1;
  }
}

constexpr Dof positive_dof(Axis a) {
  switch (a) {
    case Axis::FlexionExtension: return Dof::Flexion;
    case Axis::AbductionAdduction: return Dof::Abduction;
    case Axis::PronationSupination: return Dof::Pronation;
    case Axis::Rotation: return Dof::RotationCw;
    case Axis::EversionInversion: return Dof::Eversion;
  }
  return Dof::Flexion;
}

constexpr Dof negative_dof(Axis a) {
  switch (a) {
    case Axis::FlexionExtension: return Dof::Extension;
    case Axis::AbductionAdduction: return Dof::Adduction;
    case Axis::PronationSupination: return Dof::Supination;
    case Axis::Rotation: return Dof::RotationCcw;
    case Axis::EversionInversion: return Dof::Inversion;
  }
  return Dof::Extension;
}

constexpr Dof opposite(Dof d) {
  return direction_of(d) > 0 ? negative_dof(axis_of(d)) : positive_dof(axis_of(d));
}

std::string_view to_string(Side s);
std::string_view to_string(Dof d);
std::string_view to_string(Axis a);
std::optional<Side> side_from_string(std::string_view s);
std::optional<Dof> dof_from_string(std::string_view s);

enum class StimulationMode : std::uint8_t { Actuate, Nudge, Tactile };
enum class CompletionMode : std::uint8_t { Partial, Full };

std::string_view to_string(StimulationMode m);
std::string_view to_string(CompletionMode m);
std::optional<StimulationMode> stimulation_mode_from_string(std::string_view s);
std::optional<CompletionMode> completion_mode_from_string(std::string_view s);

struct StimParams {
  double frequency_hz = 35.0;
  double amplitude_ma = 0.0;
  double pulse_width_us = 200.0;
  double duration_ms = 1000.0;

  bool operator==(const StimParams&) const = default;
};

// Error taxonomy shared by every module. The C API maps each kind onto a
// status code.
enum class ErrorKind : std::uint8_t {
  Io,
  Schema,
  Reference,
  Limit,
  Parse,
  UnknownChannel,
  UnknownJoint,
  Transport,
  EmptyResponse,
  Pipeline,
  InvalidArgument,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Lowercases ASCII only; identifiers in the vocabulary are ASCII.
std::string to_lower(std::string_view s);

// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

}  // namespace gems
