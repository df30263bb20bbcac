#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sigcap {

enum class Fleet : std::uint8_t { HV, CV, AV, CAV };
enum class Approach : std::uint8_t { EB, WB, NB, SB };
enum class Movement : std::uint8_t { Left, Through, Right };

inline constexpr std::array<Fleet, 4> kAllFleets{Fleet::HV, Fleet::CV, Fleet::AV, Fleet::CAV};
inline constexpr std::array<Approach, 4> kAllApproaches{Approach::EB, Approach::WB, Approach::NB,
                                                        Approach::SB};
inline constexpr std::array<Movement, 3> kAllMovements{Movement::Left, Movement::Through,
                                                       Movement::Right};

// Physical constants shared by every fleet.
inline constexpr double kEmergencyDecel = 6.0;     // b_emax, m/s^2
inline constexpr double kVehicleLength = 4.5;      // m
inline constexpr double kStopSpeed = 1.0;          // below this a vehicle counts as queued, m/s
inline constexpr double kSpeed50Mph = 22.352;      // m/s
inline constexpr double kCrawlFloor = 2.2352;      // 5 mph, m/s
inline constexpr double kComfortDecel = 3.5;       // HV/CV amber threshold, m/s^2
inline constexpr int kMinValidQueue = 7;             // vehicles
inline constexpr int kMinValidQueues = 30;

std::string_view to_string(Fleet f);
std::string_view to_string(Approach a);
std::string_view to_string(Movement m);
char movement_code(Movement m);

Fleet parse_fleet(std::string_view s);
Approach parse_approach(std::string_view s);
Movement parse_movement_code(char c);

constexpr std::size_t index_of(Fleet f) { return static_cast<std::size_t>(f); }
constexpr std::size_t index_of(Approach a) { return static_cast<std::size_t>(a); }
constexpr std::size_t index_of(Movement m) { return static_cast<std::size_t>(m); }

/// Raised when inputs (config files, profiles, plans, scenarios) violate their contract.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the simulation state breaks an engine invariant (negative gap, collision).
class StateCorruption : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for argument-domain violations in the analysis formulas.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace sigcap
