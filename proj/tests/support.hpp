#pragma once

// Shared helpers for the test executables: fixture paths, a scratch
// directory that cleans up after itself, and the cached EFF wordlist.

#include "keyclink/demodulation.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testsup {

inline std::string data_path(const std::string& name) {
    return std::string(KEYCLINK_DATA_DIR) + "/" + name;
}

inline std::string fixture_path(const std::string& name) {
    return std::string(KEYCLINK_FIXTURES_DIR) + "/" + name;
}

inline const keyclink::Wordlist& eff_wordlist() {
    static const keyclink::Wordlist wl =
        keyclink::load_wordlist(data_path("eff_large_wordlist.txt"));
    return wl;
}

struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() /
               ("keyclink_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace testsup
