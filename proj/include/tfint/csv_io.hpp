#pragma once

#include "tfint/series.hpp"

#include <filesystem>
#include <string>

namespace tfint {

/// Minimal RFC-4180 style reader: comma separated, optional double quotes.
Table read_csv(const std::filesystem::path& path);
Table parse_csv(const std::string& text);
void write_csv(const std::filesystem::path& path, const Table& table);
std::string to_csv(const Table& table);

/// Shortest round-trip form is not required; 17 significant digits always are.
std::string format_double(double v);

/// Writes `contents` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// Dataset directory layout: reads.csv, samples.csv, interventions.csv,
/// subjects.csv and an optional dataset.json carrying the scale tag.
/// Sample ids are "<subject>_<time index>".
InterventionSeriesSet read_dataset(const std::filesystem::path& dir);
void write_dataset(const InterventionSeriesSet& set, const std::filesystem::path& dir);

}  // namespace tfint
