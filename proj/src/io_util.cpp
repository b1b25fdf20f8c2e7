#include "io_util.hpp"

#include <fstream>
#include <sstream>

#include "camadapt/error.hpp"

namespace camadapt::detail {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path);
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace camadapt::detail
