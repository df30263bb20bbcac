#include "sigcap/core.hpp"

#include <string>

namespace sigcap {

std::string_view to_string(Fleet f) {
  switch (f) {
    case Fleet::HV: return "HV";
    case Fleet::CV: return "CV";
    case Fleet::AV: return "AV";
    case Fleet::CAV: return "CAV";
  }
  return "?";
}

std::string_view to_string(Approach a) {
  switch (a) {
    case Approach::EB: return "EB";
    case Approach::WB: return "WB";
    case Approach::NB: return "NB";
    case Approach::SB: return "SB";
  }
  return "?";
}

std::string_view to_string(Movement m) {
  switch (m) {
    case Movement::Left: return "Left";
    case Movement::Through: return "Through";
    case Movement::Right: return "Right";
  }
  return "?";
}

char movement_code(Movement m) {
  switch (m) {
    case Movement::Left: return 'L';
    case Movement::Through: return 'T';
    case Movement::Right: return 'R';
  }
  return '?';
}

Fleet parse_fleet(std::string_view s) {
  for (Fleet f : kAllFleets)
    if (to_string(f) == s) return f;
  throw ConfigError("unknown fleet '" + std::string(s) + "'");
}

Approach parse_approach(std::string_view s) {
  for (Approach a : kAllApproaches)
    if (to_string(a) == s) return a;
  throw ConfigError("unknown approach '" + std::string(s) + "'");
}

Movement parse_movement_code(char c) {
  switch (c) {
    case 'L': return Movement::Left;
    case 'T': return Movement::Through;
    case 'R': return Movement::Right;
    default: break;
  }
  throw ConfigError(std::string("unknown movement code '") + c + "'");
}

}  // namespace sigcap
