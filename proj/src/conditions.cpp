#include "stride/conditions.hpp"

namespace stride {

std::string to_string(Footwear f) {
  switch (f) {
    case Footwear::BF: return "BF";
    case Footwear::ST: return "ST";
    case Footwear::P1: return "P1";
    case Footwear::P2: return "P2";
  }
  throw std::logic_error("bad footwear value");
}

std::string to_string(Speed s) {
  switch (s) {
    case Speed::W1: return "W1";
    case Speed::W2: return "W2";
    case Speed::W3: return "W3";
    case Speed::W4: return "W4";
  }
  throw std::logic_error("bad speed value");
}

Footwear footwear_from_string(const std::string& s) {
  for (Footwear f : kAllFootwear) {
    if (to_string(f) == s) return f;
  }
  throw std::invalid_argument("unknown footwear tag '" + s + "'");
}

Speed speed_from_string(const std::string& s) {
  for (Speed sp : kAllSpeeds) {
    if (to_string(sp) == s) return sp;
  }
  throw std::invalid_argument("unknown speed tag '" + s + "'");
}

std::string to_string(const ConditionTag& c) {
  return to_string(c.footwear) + ":" + to_string(c.speed);
}

ConditionTag condition_from_string(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("condition tag '" + s + "' is not FOOTWEAR:SPEED");
  return {footwear_from_string(s.substr(0, colon)),
          speed_from_string(s.substr(colon + 1))};
}

std::vector<ConditionTag> all_conditions() {
  std::vector<ConditionTag> out;
  out.reserve(16);
  for (Footwear f : kAllFootwear) {
    for (Speed s : kAllSpeeds) out.push_back({f, s});
  }
  return out;
}

}  // namespace stride
