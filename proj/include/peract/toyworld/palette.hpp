#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "peract/errors.hpp"

namespace peract::toy {

using Rgb = std::array<std::uint8_t, 3>;

struct NamedColor {
  const char* name;
  Rgb rgb;
};

// Twenty named colours. RGB values are picked to stay separable after the
// grid's (c/255 - 0.5) * 2 normalization; the pairs that are closest
// (purple/violet, maroon/red) still differ by > 90 in some channel.
inline constexpr std::array<NamedColor, 20> kPalette{{
    {"red", {230, 25, 25}},      {"maroon", {128, 0, 0}},     {"lime", {60, 230, 50}},
    {"green", {0, 128, 0}},      {"blue", {30, 60, 230}},     {"navy", {0, 0, 128}},
    {"yellow", {240, 230, 40}},  {"cyan", {0, 230, 230}},     {"magenta", {230, 0, 230}},
    {"silver", {192, 192, 192}}, {"gray", {110, 110, 110}},   {"orange", {255, 140, 0}},
    {"olive", {128, 128, 0}},    {"purple", {110, 0, 140}},   {"teal", {0, 128, 128}},
    {"azure", {0, 127, 255}},    {"violet", {238, 130, 238}}, {"rose", {255, 0, 127}},
    {"black", {20, 20, 20}},     {"white", {250, 250, 250}},
}};

inline constexpr Rgb kTableRgb{150, 120, 90};
inline constexpr Rgb kSlotRgb{70, 60, 50};

[[nodiscard]] inline Rgb color_rgb(const std::string& name) {
  for (const auto& c : kPalette) {
    if (name == c.name) return c.rgb;
  }
  throw InvalidInput("unknown colour '" + name + "'");
}

[[nodiscard]] inline std::vector<std::string> all_color_names() {
  std::vector<std::string> out;
  for (const auto& c : kPalette) out.emplace_back(c.name);
  return out;
}

}  // namespace peract::toy
