#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deepfeat/matrix.hpp"
#include "json.hpp"

namespace deepfeat::codec {

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

/// Doubles as little-endian IEEE-754 binary64, base-64 encoded.
std::string encode_f64(std::span<const double> values);
std::vector<double> decode_f64(std::string_view text);

/// {"rows", "cols", "encoding": "base64-f64le-rowmajor", "data"}
nlohmann::ordered_json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace deepfeat::codec
