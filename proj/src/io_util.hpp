#pragma once

#include <string>

namespace camadapt::detail {

// Whole-file helpers; failures raise IoError naming the path.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace camadapt::detail
