#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stride {

enum class Footwear : std::uint8_t { BF, ST, P1, P2 };
enum class Speed : std::uint8_t { W1, W2, W3, W4 };

constexpr std::array<Footwear, 4> kAllFootwear = {Footwear::BF, Footwear::ST,
                                                  Footwear::P1, Footwear::P2};
constexpr std::array<Speed, 4> kAllSpeeds = {Speed::W1, Speed::W2, Speed::W3,
                                             Speed::W4};

/// One recording condition: footwear paired with walking speed.
struct ConditionTag {
  Footwear footwear = Footwear::BF;
  Speed speed = Speed::W1;

  auto operator<=>(const ConditionTag&) const = default;
};

std::string to_string(Footwear f);
std::string to_string(Speed s);
Footwear footwear_from_string(const std::string& s);
Speed speed_from_string(const std::string& s);

/// "BF:W1" style round trip.
std::string to_string(const ConditionTag& c);
ConditionTag condition_from_string(const std::string& s);

/// All 16 footwear x speed combinations in enum order.
std::vector<ConditionTag> all_conditions();

}  // namespace stride
