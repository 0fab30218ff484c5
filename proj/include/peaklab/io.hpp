#pragma once
// CSV/JSON serialization.  CSV bodies are deterministic (17 significant
// digits, no timestamps); run metadata with timestamps goes to a separate
// sidecar written by the CLI.

#include "peaklab/stationary.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace peaklab {
namespace io {

std::string fmt17(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

// profile round trip: <base>.csv holds (n, a_n, alpha_n), <base>.json the
// reconstruction header (kernel, rho, A, window, mass, Theta, seed).  The
// loader rebuilds the profile through the constructor path and cross-checks
// the decimal CSV body against it.
void save_profile(const PeakProfile& p, const std::string& base, uint64_t seed);
PeakProfile load_profile(const std::string& base);

} // namespace io
} // namespace peaklab
