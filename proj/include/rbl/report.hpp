#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "rbl/ingest.hpp"
#include "rbl/sim.hpp"

namespace rbl {

inline constexpr std::string_view kVersion = "0.1.0";

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

std::string decisions_csv(const Analysis& a);
std::string summary_csv(const Analysis& a);
std::string summary_text(const Analysis& a);
std::string analysis_metadata_json(const Analysis& a, std::string_view input_name);
std::string study_metadata_json(std::span<const StudyResult> results);

// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace rbl
