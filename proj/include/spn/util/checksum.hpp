// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>

namespace spn {

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string file_sha256(const std::filesystem::path& path);

}  // namespace spn
