#pragma once

#include <fstream>
#include <sstream>
#include <string>

#ifndef FSIM_REPO_ROOT
#define FSIM_REPO_ROOT "."
#endif

namespace fsim::testpath {

inline std::string repo(const std::string& rel) {
    return std::string(FSIM_REPO_ROOT) + "/" + rel;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace fsim::testpath
