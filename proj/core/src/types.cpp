#include "coverify/types.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace coverify {

namespace {

std::string lowered(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::tolower(c));
  });
  return out;
}

}  // namespace

std::string_view to_string(Language lang) noexcept {
  return lang == Language::C ? "c" : "cuda";
}

std::string_view to_string(Direction dir) noexcept {
  return dir == Direction::C_to_CUDA ? "C_to_CUDA" : "CUDA_to_C";
}

std::optional<Language> parse_language(std::string_view text) noexcept {
  auto t = lowered(text);
  if (t == "c") return Language::C;
  if (t == "cuda") return Language::CUDA;
  return std::nullopt;
}

std::optional<Direction> parse_direction(std::string_view text) noexcept {
  auto t = lowered(text);
  if (t == "c_to_cuda") return Direction::C_to_CUDA;
  if (t == "cuda_to_c") return Direction::CUDA_to_C;
  return std::nullopt;
}

std::string_view display_name(Language lang) noexcept {
  return lang == Language::C ? "C" : "CUDA";
}

Language source_language(Direction dir) noexcept {
  return dir == Direction::C_to_CUDA ? Language::C : Language::CUDA;
}

Language target_language(Direction dir) noexcept {
  return dir == Direction::C_to_CUDA ? Language::CUDA : Language::C;
}

Direction reverse(Direction dir) noexcept {
  return dir == Direction::C_to_CUDA ? Direction::CUDA_to_C
                                     : Direction::C_to_CUDA;
}

Direction direction_from(Language lang) noexcept {
  return lang == Language::C ? Direction::C_to_CUDA : Direction::CUDA_to_C;
}

}  // namespace coverify
