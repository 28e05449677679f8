#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace phaseprobe::util {

// Shortest decimal form that parses back to exactly the same double.
// Locale-independent (std::to_chars).
std::string format_double(double value);

// Fixed-point with `decimals` digits after the point ("7.41").
std::string format_fixed(double value, int decimals);

// Up to `digits` significant digits, general format ("0.0055829").
std::string format_general(double value, int digits);

// ISO 8601 UTC with millisecond precision: 2025-04-01T12:00:00.000Z
std::string iso8601_utc(std::chrono::system_clock::time_point tp);
std::string iso8601_now();

std::uint64_t fnv1a(std::string_view data);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Whole-file helpers; throw phaseprobe::Error on I/O failure.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string xml_escape(std::string_view s);

}  // namespace phaseprobe::util
