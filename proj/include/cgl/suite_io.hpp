#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgl/core.hpp"
#include "cgl/policy.hpp"
#include "cgl/synthgui.hpp"

namespace cgl {

// Line-oriented text formats; see docs/FORMATS.md. Reals are written with 17
// significant digits so they round-trip exactly.

inline constexpr int kSuiteFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

struct SuiteFile {
  SuiteConfig config;
  std::vector<TaskDataset> tasks;
};

std::string format_real(double v);

void write_suite(std::ostream& out, const SuiteConfig& config, std::span<const TaskDataset> tasks);
SuiteFile read_suite(std::istream& in);

void save_suite(const std::filesystem::path& path, const SuiteConfig& config,
                std::span<const TaskDataset> tasks);
SuiteFile load_suite(const std::filesystem::path& path);

void write_checkpoint(std::ostream& out, const PolicyModel& model);
PolicyModel read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const PolicyModel& model);
PolicyModel load_checkpoint(const std::filesystem::path& path);

// 64-bit FNV-1a, used for the printed suite digest.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex_digest(std::uint64_t h);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace cgl
