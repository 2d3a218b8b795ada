#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace noir {

std::string base64_encode(const std::uint8_t* data, std::size_t size);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace noir
